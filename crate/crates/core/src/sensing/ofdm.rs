//! Orthonormal OFDM modulation with a cyclic prefix.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One OFDM symbol: `n` subcarriers and a cyclic prefix of `cp_len` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmConfig {
    pub n: usize,
    pub cp_len: usize,
    #[serde(default)]
    pub seed: u64,
}

impl OfdmConfig {
    pub fn new(n: usize, cp_len: usize) -> Result<Self> {
        let cfg = Self { n, cp_len, seed: 0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || !self.n.is_power_of_two() {
            return Err(invalid("n", format!("subcarrier count must be a power of two, got {}", self.n)));
        }
        if self.cp_len > self.n {
            return Err(invalid("cp_len", "cyclic prefix longer than the symbol"));
        }
        Ok(())
    }
}

/// FFT plans for one subcarrier count. Cheap to clone.
#[derive(Clone)]
pub struct Ofdm {
    cfg: OfdmConfig,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Ofdm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ofdm").field("cfg", &self.cfg).finish()
    }
}

impl Ofdm {
    pub fn new(cfg: OfdmConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg,
            fwd: planner.plan_fft_forward(cfg.n),
            inv: planner.plan_fft_inverse(cfg.n),
            scale: 1.0 / (cfg.n as f64).sqrt(),
        })
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.cfg
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.cfg.n {
            return Err(Error::LengthMismatch {
                expected: self.cfg.n,
                got: len,
            });
        }
        Ok(())
    }

    /// Orthonormal inverse DFT in place.
    pub fn ifft(&self, buf: &mut [Complex64]) -> Result<()> {
        self.check(buf.len())?;
        self.inv.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
        Ok(())
    }

    /// Orthonormal forward DFT in place.
    pub fn fft(&self, buf: &mut [Complex64]) -> Result<()> {
        self.check(buf.len())?;
        self.fwd.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
        Ok(())
    }

    /// Frequency-domain symbols to `cp_len + n` time samples.
    pub fn modulate(&self, symbols: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut body = symbols.to_vec();
        self.ifft(&mut body)?;
        let n = self.cfg.n;
        let mut out = Vec::with_capacity(n + self.cfg.cp_len);
        out.extend_from_slice(&body[n - self.cfg.cp_len..]);
        out.extend_from_slice(&body);
        Ok(out)
    }

    /// Drops the prefix and returns to the frequency domain.
    pub fn demodulate(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        let total = self.cfg.n + self.cfg.cp_len;
        if samples.len() != total {
            return Err(Error::LengthMismatch {
                expected: total,
                got: samples.len(),
            });
        }
        let mut body = samples[self.cfg.cp_len..].to_vec();
        self.fft(&mut body)?;
        Ok(body)
    }
}
