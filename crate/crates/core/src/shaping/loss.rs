//! Joint sensing and communications loss with its analytic gradient.
//!
//! The communications term is `(M - I) / M` with `I` the MI or BMD GMI in
//! bits, evaluated by Gauss-Hermite quadrature with the noise reparametrized
//! as `y = x_i + n_k`. Differentiating through the quadrature nodes gives an
//! exact gradient of the discretized objective. The sensing term is the hinge
//! penalty `d max(0, kappa - kappa_tilde)`.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::air::bit_table;
use crate::constellation::Constellation;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mi,
    Gmi,
}

impl std::str::FromStr for Metric {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mi" => Ok(Metric::Mi),
            "gmi" => Ok(Metric::Gmi),
            _ => Err(crate::error::invalid("metric", format!("unknown metric `{s}`"))),
        }
    }
}

/// Hinge penalty on kurtosis above the target.
pub fn sensing_loss(kappa: f64, kappa_tilde: f64, d: f64) -> f64 {
    if kappa <= kappa_tilde {
        0.0
    } else {
        d * (kappa - kappa_tilde)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub loss: f64,
    pub comm_loss: f64,
    pub sensing_loss: f64,
    pub metric_bits: f64,
    pub kurtosis: f64,
}

/// Gradient of the loss w.r.t. unnormalized points and probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGradient {
    pub points: Vec<Complex64>,
    pub probs: Vec<f64>,
}

/// Evaluates the information density at one observation and accumulates
/// its gradient with weight `w` into `gx` (points) and `gp` (priors inside
/// the demapper). Returns the density in nats.
pub(crate) struct NodeKernel<'a> {
    pub x: &'a [Complex64],
    pub p: &'a [f64],
    pub ln_p: Vec<f64>,
    pub bits: &'a [Vec<u8>],
    pub inv_s2: f64,
    pub metric: Metric,
}

pub(crate) struct Scratch {
    e: Vec<f64>,
    coef: Vec<f64>,
}

impl Scratch {
    pub fn new(n: usize) -> Self {
        Self {
            e: vec![0.0; n],
            coef: vec![0.0; n],
        }
    }
}

impl<'a> NodeKernel<'a> {
    pub fn new(x: &'a [Complex64], p: &'a [f64], bits: &'a [Vec<u8>], sigma2: f64, metric: Metric) -> Self {
        Self {
            x,
            p,
            ln_p: p.iter().map(|v| v.ln()).collect(),
            bits,
            inv_s2: 1.0 / sigma2,
            metric,
        }
    }

    pub fn node(
        &self,
        i: usize,
        n: Complex64,
        w: f64,
        grad: Option<(&mut [Complex64], &mut [f64])>,
        s: &mut Scratch,
    ) -> f64 {
        let y = self.x[i] + n;
        let mut mx = f64::NEG_INFINITY;
        for (j, (xj, lp)) in self.x.iter().zip(&self.ln_p).enumerate() {
            let v = -(y - xj).norm_sqr() * self.inv_s2 + lp;
            s.e[j] = v;
            mx = mx.max(v);
        }
        let mut total = 0.0;
        for v in s.e.iter_mut() {
            *v = (*v - mx).exp();
            total += *v;
        }
        let inv_total = 1.0 / total;
        let value;
        match self.metric {
            Metric::Mi => {
                value = -n.norm_sqr() * self.inv_s2 - (mx + total.ln());
                if grad.is_some() {
                    for (c, e) in s.coef.iter_mut().zip(&s.e) {
                        *c = -e * inv_total;
                    }
                }
            }
            Metric::Gmi => {
                let m_bits = self.bits.len() as f64;
                if grad.is_some() {
                    for (c, e) in s.coef.iter_mut().zip(&s.e) {
                        *c = -m_bits * e * inv_total;
                    }
                }
                let mut acc = 0.0;
                for col in self.bits {
                    let own = col[i];
                    let mut class = 0.0;
                    for (b, e) in col.iter().zip(&s.e) {
                        if *b == own {
                            class += e;
                        }
                    }
                    if class > 0.0 {
                        acc += (class * inv_total).ln();
                        if grad.is_some() {
                            let inv = 1.0 / class;
                            for ((c, b), e) in s.coef.iter_mut().zip(col).zip(&s.e) {
                                if *b == own {
                                    *c += e * inv;
                                }
                            }
                        }
                    } else {
                        // own class underflowed relative to the global maximum
                        let a: Vec<(usize, f64)> = col
                            .iter()
                            .enumerate()
                            .filter(|(_, b)| **b == own)
                            .map(|(j, _)| (j, -(y - self.x[j]).norm_sqr() * self.inv_s2 + self.ln_p[j]))
                            .collect();
                        let cm = a.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
                        let cs: f64 = a.iter().map(|v| (v.1 - cm).exp()).sum();
                        acc += cm + cs.ln() - (mx + total.ln());
                        if grad.is_some() {
                            for &(j, v) in &a {
                                s.coef[j] += (v - cm).exp() / cs;
                            }
                        }
                    }
                }
                value = acc;
            }
        }
        if let Some((gx, gp)) = grad {
            let mut gi = Complex64::new(0.0, 0.0);
            for j in 0..self.x.len() {
                let c = s.coef[j];
                if c == 0.0 {
                    continue;
                }
                let dj = (y - self.x[j]) * (2.0 * self.inv_s2);
                gx[j] += dj * (w * c);
                gi -= dj * c;
                gp[j] += w * c / self.p[j];
            }
            gx[i] += gi * w;
        }
        value
    }
}

/// Quadrature estimate of the information term in nats (MI, or the BMD sum
/// without `H(X)`), with optional gradient w.r.t. normalized points and priors.
pub(crate) fn comm_term(
    x: &[Complex64],
    p: &[f64],
    bits: &[Vec<u8>],
    sigma2: f64,
    metric: Metric,
    grid: &[(Complex64, f64)],
    want_grad: bool,
) -> (f64, Option<(Vec<Complex64>, Vec<f64>)>) {
    let k = NodeKernel::new(x, p, bits, sigma2, metric);
    let n = x.len();
    let parts: Vec<(f64, Vec<Complex64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut gx = if want_grad { vec![Complex64::new(0.0, 0.0); n] } else { Vec::new() };
            let mut gp = if want_grad { vec![0.0; n] } else { Vec::new() };
            let pi = p[i];
            if pi == 0.0 {
                return (0.0, gx, gp);
            }
            let mut s = Scratch::new(n);
            let mut acc = 0.0;
            for &(nz, w) in grid {
                let g = if want_grad { Some((&mut gx[..], &mut gp[..])) } else { None };
                acc += w * k.node(i, nz, pi * w, g, &mut s);
            }
            if want_grad {
                gp[i] += acc;
            }
            (pi * acc, gx, gp)
        })
        .collect();
    let mut value = 0.0;
    let mut gx = vec![Complex64::new(0.0, 0.0); n];
    let mut gp = vec![0.0; n];
    for (v, px, pp) in parts {
        value += v;
        if want_grad {
            for j in 0..n {
                gx[j] += px[j];
                gp[j] += pp[j];
            }
        }
    }
    (value, want_grad.then_some((gx, gp)))
}

/// Everything needed to evaluate the loss of one parameter state.
pub(crate) struct LossSpec<'a> {
    pub bits: &'a [Vec<u8>],
    pub sigma2: f64,
    pub metric: Metric,
    pub kappa_tilde: f64,
    pub d: f64,
}

/// Assembles the total loss from an information term already evaluated on
/// the normalized constellation, and chains its gradient back through the
/// power normalization to the raw points. `info_grad` is the gradient of the
/// information term in nats w.r.t. normalized points and priors.
pub(crate) fn assemble(
    raw_x: &[Complex64],
    p: &[f64],
    info_nats: f64,
    info_grad: Option<(Vec<Complex64>, Vec<f64>)>,
    spec: &LossSpec<'_>,
) -> (LossBreakdown, Option<RawGradient>) {
    let m = spec.bits.len() as f64;
    let e2: f64 = raw_x.iter().zip(p).map(|(x, q)| q * x.norm_sqr()).sum();
    let e4: f64 = raw_x.iter().zip(p).map(|(x, q)| q * x.norm_sqr().powi(2)).sum();
    let kappa = e4 / (e2 * e2);
    let h_nats = match spec.metric {
        Metric::Mi => 0.0,
        Metric::Gmi => -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>(),
    };
    let raw_bits = (h_nats + info_nats) / LN_2;
    let metric_bits = match spec.metric {
        Metric::Mi => raw_bits,
        Metric::Gmi => raw_bits.max(0.0),
    };
    let comm_loss = (m - metric_bits) / m;
    let sens = sensing_loss(kappa, spec.kappa_tilde, spec.d);
    let breakdown = LossBreakdown {
        loss: comm_loss + sens,
        comm_loss,
        sensing_loss: sens,
        metric_bits,
        kurtosis: kappa,
    };
    let (gx, mut gp) = match info_grad {
        None => return (breakdown, None),
        Some(g) => g,
    };
    // d comm_loss / d info_nats
    let scale = -1.0 / (m * LN_2);
    let mut gx: Vec<Complex64> = gx.into_iter().map(|g| g * scale).collect();
    for (j, g) in gp.iter_mut().enumerate() {
        let mut v = *g;
        if spec.metric == Metric::Gmi && p[j] > 0.0 {
            v += -p[j].ln() - 1.0;
        }
        *g = v * scale;
    }
    // power normalization x = x_raw / sqrt(E)
    let s = e2.sqrt().recip();
    let dot: f64 = gx.iter().zip(raw_x).map(|(g, x)| (g * x.conj()).re).sum();
    let mut g_raw: Vec<Complex64> = gx
        .iter_mut()
        .zip(raw_x)
        .zip(p)
        .map(|((g, x), q)| *g * s - x * (s * q * dot / e2))
        .collect();
    for (j, x) in raw_x.iter().enumerate() {
        gp[j] += -0.5 * s * x.norm_sqr() * dot / e2;
    }
    if kappa > spec.kappa_tilde {
        let d = spec.d;
        for (j, x) in raw_x.iter().enumerate() {
            let a = x.norm_sqr();
            g_raw[j] += x * (d * (4.0 * p[j] * a / (e2 * e2) - 4.0 * e4 * p[j] / (e2 * e2 * e2)));
            gp[j] += d * (a * a / (e2 * e2) - 2.0 * e4 * a / (e2 * e2 * e2));
        }
    }
    (breakdown, Some(RawGradient { points: g_raw, probs: gp }))
}

/// Loss and optional gradient at raw points/probabilities by quadrature.
pub(crate) fn loss_and_grad(
    raw_x: &[Complex64],
    p: &[f64],
    spec: &LossSpec<'_>,
    grid: &[(Complex64, f64)],
    want_grad: bool,
) -> (LossBreakdown, Option<RawGradient>) {
    let e2: f64 = raw_x.iter().zip(p).map(|(x, q)| q * x.norm_sqr()).sum();
    let s = e2.sqrt().recip();
    let x: Vec<Complex64> = raw_x.iter().map(|v| v * s).collect();
    let (info, g) = comm_term(&x, p, spec.bits, spec.sigma2, spec.metric, grid, want_grad);
    assemble(raw_x, p, info, g, spec)
}

/// Loss breakdown of a fixed constellation.
pub fn evaluate_loss(
    c: &Constellation,
    metric: Metric,
    sigma_c2: f64,
    kappa_tilde: f64,
    d: f64,
    order: usize,
) -> LossBreakdown {
    let bits = bit_table(c);
    let grid = crate::numerics::GaussHermite::new(order).complex_noise_grid(sigma_c2);
    let spec = LossSpec {
        bits: &bits,
        sigma2: sigma_c2,
        metric,
        kappa_tilde,
        d,
    };
    loss_and_grad(c.points(), c.probs(), &spec, &grid, false).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::{gmi_estimate, mi_estimate, AwgnChannel, Method};
    use crate::constellation::make_qam;

    #[test]
    fn hinge_examples() {
        assert_eq!(sensing_loss(1.1, 1.2, 10.0), 0.0);
        assert!((sensing_loss(1.4, 1.2, 10.0) - 2.0).abs() < 1e-12);
        assert!(sensing_loss(1.2 + 1e-12, 1.2, 10.0) < 1e-10);
        assert!(sensing_loss(1.5, 1.2, 20.0) > sensing_loss(1.5, 1.2, 10.0));
    }

    #[test]
    fn matches_air_module() {
        let c = make_qam(6).unwrap();
        let ch = AwgnChannel::from_snr_db(10.0).unwrap();
        let gmi = gmi_estimate(&c, &ch, Method::Quadrature { order: Some(32) }).unwrap().bits;
        let l = evaluate_loss(&c, Metric::Gmi, ch.sigma_c2, 2.0, 1.0, 32);
        assert!((l.loss - (6.0 - gmi) / 6.0).abs() < 1e-12);
        let mi = mi_estimate(&c, &ch, Method::Quadrature { order: Some(32) }).unwrap().bits;
        let l = evaluate_loss(&c, Metric::Mi, ch.sigma_c2, 2.0, 1.0, 32);
        assert!((l.metric_bits - mi).abs() < 1e-12);
    }

    #[test]
    fn perfect_metric_and_feasible_kurtosis_is_zero_loss() {
        let c = crate::constellation::make_psk(2).unwrap();
        let l = evaluate_loss(&c, Metric::Mi, 1e-6, 1.0, 10.0, 8);
        assert!(l.loss.abs() < 1e-9);
    }
}
