//! Constellation shaping for OFDM integrated sensing and communications.
//!
//! The crate covers the full chain from theory to practice: maximum-entropy
//! bounds on the mutual information under a kurtosis constraint
//! ([`bounds`]), exact achievable-rate estimation ([`air`]), gradient-based
//! constellation optimization ([`shaping`]), a monostatic OFDM sensing
//! simulator with CA-CFAR detection ([`sensing`]) and probabilistic amplitude
//! shaping with a lookup-table demapper ([`pas`]).

pub mod air;
pub mod bounds;
pub mod constellation;
pub mod error;
pub mod numerics;
pub mod pas;
pub mod sensing;
pub mod shaping;

pub use constellation::{Constellation, Moments};
pub use error::{Error, Result};
