//! Gumbel-softmax relaxation of symbol sampling.
//!
//! The stochastic objective replaces the expectation over transmit symbols
//! by relaxed one-hot weights `w = softmax((ln p + g) / tau)` and the noise
//! expectation by samples. Gradients flow through the relaxed weights
//! (pathwise) and through the points via the same node kernel as the
//! quadrature path.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::loss::{Metric, NodeKernel, Scratch};
use super::params::{softmax, softmax_backward};
use crate::error::{invalid, Result};

const CHUNK: usize = 256;
/// Relaxed weights below this are skipped in the per-sample sums.
const WEIGHT_FLOOR: f64 = 1e-12;

fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    -(-u.ln()).ln()
}

fn relaxed_row<R: Rng + ?Sized>(ln_p: &[f64], tau: f64, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = ln_p.iter().map(|lp| (lp + gumbel(rng)) / tau).collect();
    softmax(&z)
}

/// `n` rows of relaxed one-hot weights drawn with temperature `tau`.
pub fn gumbel_sample(probs: &[f64], tau: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(tau > 0.0) {
        return Err(invalid("tau", format!("temperature must be positive, got {tau}")));
    }
    if probs.iter().any(|&p| !(p >= 0.0)) {
        return Err(invalid("probs", "probabilities must be non-negative"));
    }
    let ln_p: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| relaxed_row(&ln_p, tau, &mut rng)).collect())
}

/// Stochastic estimate of the information term (nats) and its gradient with
/// respect to normalized points and priors.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gumbel_comm_term(
    x: &[Complex64],
    p: &[f64],
    bits: &[Vec<u8>],
    sigma2: f64,
    metric: Metric,
    tau: f64,
    batch: usize,
    seed: u64,
) -> (f64, (Vec<Complex64>, Vec<f64>)) {
    let k = NodeKernel::new(x, p, bits, sigma2, metric);
    let n = x.len();
    let sd = (sigma2 / 2.0).sqrt();
    let inv_b = 1.0 / batch as f64;
    let chunks = batch.div_ceil(CHUNK);
    let parts: Vec<(f64, Vec<Complex64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut gx = vec![Complex64::new(0.0, 0.0); n];
            let mut gp = vec![0.0; n];
            let mut s = Scratch::new(n);
            let mut value = 0.0;
            let mut dw = vec![0.0; n];
            for _ in 0..CHUNK.min(batch - c * CHUNK) {
                let g: Vec<f64> = (0..n).map(|_| gumbel(&mut rng)).collect();
                let z: Vec<f64> = k.ln_p.iter().zip(&g).map(|(lp, gj)| (lp + gj) / tau).collect();
                let w = softmax(&z);
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                let noise = Complex64::new(sd * re, sd * im);
                for j in 0..n {
                    dw[j] = 0.0;
                    if w[j] < WEIGHT_FLOOR {
                        continue;
                    }
                    let f = k.node(j, noise, w[j] * inv_b, Some((&mut gx[..], &mut gp[..])), &mut s);
                    value += w[j] * f * inv_b;
                    dw[j] = f * inv_b;
                }
                // pathwise gradient through the relaxed weights to ln p
                let dz = softmax_backward(&w, &dw);
                for j in 0..n {
                    gp[j] += dz[j] / (tau * p[j]);
                }
            }
            (value, gx, gp)
        })
        .collect();
    let mut value = 0.0;
    let mut gx = vec![Complex64::new(0.0, 0.0); n];
    let mut gp = vec![0.0; n];
    for (v, a, b) in parts {
        value += v;
        for j in 0..n {
            gx[j] += a[j];
            gp[j] += b[j];
        }
    }
    (value, (gx, gp))
}
