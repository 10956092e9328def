//! Probabilistic amplitude shaping: constant-composition matching, frame
//! construction for the conventional and generalized schemes, and the
//! lookup-table demapper of generalized PAS.

mod ccdm;
mod fec;
mod frame;
mod lut;

pub use ccdm::{ccdm_decode, ccdm_encode, Composition};
pub use fec::{systematic_parity, SystematicCode};
pub use frame::{
    frame_from_bytes, frame_to_bytes, pas_decode, pas_encode, DecodedFrame, PasConfig, PasFamily, PasFrame,
};
pub use lut::{build_llr_luts, lut_demap, radial_factors, LlrLutSet, Lut, LutOptions, R_MAX};

use crate::constellation::Constellation;
use crate::numerics::gray_inverse;

/// Amplitude distribution of a PAS-structured constellation, indexed by
/// ascending magnitude. Conventional PAS returns the per-dimension marginal.
pub fn amplitude_distribution(c: &Constellation, family: PasFamily, amp_bits: usize, phase_bits: usize) -> Vec<f64> {
    let levels = 1usize << amp_bits;
    let mut p = vec![0.0; levels];
    for (&label, &q) in c.labels().iter().zip(c.probs()) {
        let a = match family {
            PasFamily::Cpas => {
                let half = amp_bits + 1;
                let i = gray_inverse(label >> half) as usize;
                if i >= levels {
                    i - levels
                } else {
                    levels - 1 - i
                }
            }
            PasFamily::Gpas => gray_inverse(label >> phase_bits) as usize,
        };
        p[a] += q;
    }
    p
}
