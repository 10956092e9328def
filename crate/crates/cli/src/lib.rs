//! Experiment driver for `isac-core`.
//!
//! Every experiment is a plain function from a validated config to rows;
//! the binary only parses arguments and writes files. Rows are serialized
//! as CSV behind a one-line comment carrying the toolkit version and units.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{ConstellationSource, ExperimentConfig, SenseConfig, TradeoffConfig, AirCurveConfig};
pub use experiments::{
    bounds_table, run_air_curve, run_sense, run_tradeoff_sweep, AirRow, BoundsRow, SenseRow, TradeoffRow,
};
pub use output::{read_csv_table, resolve_out, write_csv, OUT_DIR_ENV, VERSION};
