//! Cell-averaging CFAR on a circular delay profile.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{invalid, Result};

/// Window geometry and design false-alarm rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarParams {
    pub pfa: f64,
    /// Total reference cells, half before and half after the cell under test.
    pub n_win: usize,
    /// Guard cells per side.
    pub n_guard: usize,
}

impl CfarParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(invalid("pfa", "must lie in (0, 1)"));
        }
        if self.n_win < 2 || self.n_win % 2 != 0 {
            return Err(invalid("n_win", "needs an even count of at least 2"));
        }
        if self.n_win + 2 * self.n_guard + 1 > n {
            return Err(invalid("n_win", format!("window of {} cells too large for {n}", self.n_win)));
        }
        Ok(())
    }

    /// Multiplier `alpha` applied to the mean of the reference cells.
    pub fn alpha(&self) -> f64 {
        let nw = self.n_win as f64;
        nw * (self.pfa.powf(-1.0 / nw) - 1.0)
    }

    /// Threshold for the cell `k` of `power`.
    pub fn threshold(&self, power: &[f64], k: usize) -> f64 {
        let n = power.len();
        let half = self.n_win / 2;
        let mut sum = 0.0;
        for o in self.n_guard + 1..=self.n_guard + half {
            sum += power[(k + o) % n] + power[(k + n - o) % n];
        }
        self.alpha() * sum / self.n_win as f64
    }
}

/// Detection flags for every cell of a power profile `|h[k]|^2`.
pub fn cfar_detect(power: &[f64], p: &CfarParams) -> Result<Vec<bool>> {
    p.validate(power.len())?;
    let n = power.len();
    let half = p.n_win / 2;
    // prefix sums over three copies make every circular window contiguous
    let mut pre = vec![0.0; 3 * n + 1];
    for i in 0..3 * n {
        pre[i + 1] = pre[i] + power[i % n];
    }
    let win = |lo: usize, hi: usize| pre[hi] - pre[lo];
    let scale = p.alpha() / p.n_win as f64;
    Ok((0..n)
        .map(|k| {
            let c = k + n;
            let lead = win(c - p.n_guard - half, c - p.n_guard);
            let trail = win(c + p.n_guard + 1, c + p.n_guard + half + 1);
            power[k] > scale * (lead + trail)
        })
        .collect())
}

/// Counts false alarms of the detector on `profiles` noise-only profiles of
/// length `n` with exponentially distributed cell powers.
pub fn noise_only_false_alarms(p: &CfarParams, n: usize, profiles: usize, seed: u64) -> Result<(u64, u64)> {
    p.validate(n)?;
    const CHUNK: usize = 64;
    let hits: u64 = (0..profiles.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut buf = vec![0.0; n];
            let mut hits = 0u64;
            for _ in 0..CHUNK.min(profiles - c * CHUNK) {
                buf.iter_mut().for_each(|v| *v = Exp1.sample(&mut rng));
                let d = cfar_detect(&buf, p).expect("validated");
                hits += d.iter().filter(|&&b| b).count() as u64;
            }
            hits
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok((hits, (profiles * n) as u64))
}
