//! Trainable parameters and their projection onto valid constellations.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constellation::{
    default_gpas_radii, gpas_grid_unchecked, make_qam, Constellation, ConstellationMeta,
};
use crate::error::{invalid, Result};

/// Default step for point coordinates and ring radii.
pub const POINT_LR: f64 = 1e-2;
/// Default step for probability logits.
pub const LOGIT_LR: f64 = 5e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Geometric,
    Probabilistic,
    Joint,
    Cpas,
    Gpas,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Geometric,
        Family::Probabilistic,
        Family::Joint,
        Family::Cpas,
        Family::Gpas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Geometric => "geometric",
            Family::Probabilistic => "probabilistic",
            Family::Joint => "joint",
            Family::Cpas => "cpas",
            Family::Gpas => "gpas",
        }
    }

    pub fn trains_points(self) -> bool {
        matches!(self, Family::Geometric | Family::Joint)
    }

    /// Default Adam step size of the dominant parameter group.
    pub fn default_lr(self) -> f64 {
        match self {
            Family::Probabilistic | Family::Cpas | Family::Gpas => LOGIT_LR,
            Family::Geometric | Family::Joint => POINT_LR,
        }
    }
}

impl std::str::FromStr for Family {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s.to_ascii_lowercase())
            .ok_or_else(|| invalid("family", format!("unknown family `{s}`")))
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Unconstrained parameters of one shaping family.
///
/// Which vectors are live depends on the family: `x_raw` for geometric and
/// joint, `p_raw` for probabilistic and joint, `pa_raw` for the PAS families,
/// `radii` for GPAS (trained only when `train_radii`).
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingParams {
    pub family: Family,
    pub bits: usize,
    pub x_raw: Vec<Complex64>,
    pub p_raw: Vec<f64>,
    pub pa_raw: Vec<f64>,
    pub radii: Vec<f64>,
    pub train_radii: bool,
    pub amp_bits: usize,
    pub phase_bits: usize,
    /// Reference grid: labels for every family, fixed points for the
    /// probabilistic and PAS families.
    base: Constellation,
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Backward pass of softmax: `dL/dz` from `dL/dp` at `p = softmax(z)`.
pub(crate) fn softmax_backward(p: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    p.iter().zip(g).map(|(pl, gl)| pl * (gl - dot)).collect()
}

impl ShapingParams {
    /// QAM-initialized parameters, perturbed by `noise` (seeded).
    pub fn init(family: Family, bits: usize, seed: u64, noise: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = move || -> f64 { StandardNormal.sample(&mut rng) };
        let (amp_bits, phase_bits) = match family {
            Family::Gpas => {
                if bits < 3 {
                    return Err(invalid("bits", "GPAS needs at least 3 bits"));
                }
                (2, bits - 2)
            }
            _ => (0, 0),
        };
        let radii = if family == Family::Gpas {
            default_gpas_radii(amp_bits)
        } else {
            Vec::new()
        };
        let base = match family {
            Family::Gpas => gpas_grid_unchecked(amp_bits, phase_bits, &radii)?.normalize()?,
            _ => make_qam(bits)?,
        };
        let n = base.len();
        let x_raw = if family.trains_points() {
            base.points()
                .iter()
                .map(|p| p + Complex64::new(noise * gauss(), noise * gauss()))
                .collect()
        } else {
            Vec::new()
        };
        let logit_noise = 5.0 * noise;
        let p_raw = if matches!(family, Family::Probabilistic | Family::Joint) {
            (0..n).map(|_| logit_noise * gauss()).collect()
        } else {
            Vec::new()
        };
        let pa_len = match family {
            Family::Cpas => 1usize << (bits / 2 - 1),
            Family::Gpas => 1usize << amp_bits,
            _ => 0,
        };
        let pa_raw = (0..pa_len).map(|_| logit_noise * gauss()).collect();
        Ok(Self {
            family,
            bits,
            x_raw,
            p_raw,
            pa_raw,
            radii,
            train_radii: false,
            amp_bits,
            phase_bits,
            base,
        })
    }

    pub fn base(&self) -> &Constellation {
        &self.base
    }

    /// Number of entries in the flat trainable vector.
    pub fn dim(&self) -> usize {
        2 * self.x_raw.len()
            + self.p_raw.len()
            + self.pa_raw.len()
            + if self.train_radii { self.radii.len() } else { 0 }
    }

    /// Per-coordinate step sizes: `point_lr` for points and radii,
    /// `logit_lr` for logits.
    pub fn step_sizes(&self, point_lr: f64, logit_lr: f64) -> Vec<f64> {
        let mut v = vec![point_lr; 2 * self.x_raw.len()];
        v.extend(std::iter::repeat_n(logit_lr, self.p_raw.len() + self.pa_raw.len()));
        if self.train_radii {
            v.extend(std::iter::repeat_n(point_lr, self.radii.len()));
        }
        v
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        for x in &self.x_raw {
            v.push(x.re);
            v.push(x.im);
        }
        v.extend_from_slice(&self.p_raw);
        v.extend_from_slice(&self.pa_raw);
        if self.train_radii {
            v.extend_from_slice(&self.radii);
        }
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.dim());
        let mut k = 0;
        for x in self.x_raw.iter_mut() {
            *x = Complex64::new(v[k], v[k + 1]);
            k += 2;
        }
        for p in self.p_raw.iter_mut().chain(self.pa_raw.iter_mut()) {
            *p = v[k];
            k += 1;
        }
        if self.train_radii {
            for r in self.radii.iter_mut() {
                *r = v[k];
                k += 1;
            }
        }
    }

    /// Unnormalized points and symbol probabilities.
    pub(crate) fn raw_points_probs(&self) -> (Vec<Complex64>, Vec<f64>) {
        let n = self.base.len();
        let points = match self.family {
            Family::Geometric | Family::Joint => self.x_raw.clone(),
            Family::Probabilistic | Family::Cpas => self.base.points().to_vec(),
            Family::Gpas => gpas_grid_unchecked(self.amp_bits, self.phase_bits, &self.radii)
                .map(|c| c.points().to_vec())
                .unwrap_or_else(|_| self.base.points().to_vec()),
        };
        let probs = match self.family {
            Family::Geometric => vec![1.0 / n as f64; n],
            Family::Probabilistic | Family::Joint => softmax(&self.p_raw),
            Family::Cpas => {
                let q = softmax(&self.cpas_logits());
                q.iter().flat_map(|a| q.iter().map(move |b| a * b)).collect()
            }
            Family::Gpas => {
                let q = softmax(&self.pa_raw);
                let phases = 1usize << self.phase_bits;
                q.iter()
                    .flat_map(|a| std::iter::repeat_n(a / phases as f64, phases))
                    .collect()
            }
        };
        (points, probs)
    }

    /// One-dimensional logits `[pa, flip(pa)]` over ascending ASK levels.
    fn cpas_logits(&self) -> Vec<f64> {
        let mut z = self.pa_raw.clone();
        z.extend(self.pa_raw.iter().rev());
        z
    }

    /// Projects onto a unit-power constellation.
    pub fn project(&self) -> Result<Constellation> {
        let (points, probs) = self.raw_points_probs();
        let power: f64 = points.iter().zip(&probs).map(|(x, p)| p * x.norm_sqr()).sum();
        if !(power > 0.0) || !power.is_finite() {
            return Err(crate::Error::InvalidConstellation(format!(
                "projection produced power {power}"
            )));
        }
        let s = power.sqrt().recip();
        let probs = renormalized(probs);
        let c = Constellation::new(
            points.iter().map(|x| x * s).collect(),
            probs,
            self.base.labels().to_vec(),
        )?;
        Ok(c.with_meta(ConstellationMeta {
            family: Some(self.family.name().into()),
            ..Default::default()
        }))
    }

    /// Maps gradients w.r.t. raw points and probabilities onto the flat
    /// parameter vector.
    pub(crate) fn backward(&self, g_points: &[Complex64], g_probs: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        if self.family.trains_points() {
            for g in g_points {
                out.push(g.re);
                out.push(g.im);
            }
        }
        match self.family {
            Family::Geometric => {}
            Family::Probabilistic | Family::Joint => {
                let p = softmax(&self.p_raw);
                out.extend(softmax_backward(&p, g_probs));
            }
            Family::Cpas => {
                let z = self.cpas_logits();
                let q = softmax(&z);
                let l = q.len();
                let gq: Vec<f64> = (0..l)
                    .map(|a| {
                        (0..l)
                            .map(|b| (g_probs[a * l + b] + g_probs[b * l + a]) * q[b])
                            .sum()
                    })
                    .collect();
                let gz = softmax_backward(&q, &gq);
                let half = self.pa_raw.len();
                out.extend((0..half).map(|a| gz[a] + gz[l - 1 - a]));
            }
            Family::Gpas => {
                let q = softmax(&self.pa_raw);
                let phases = 1usize << self.phase_bits;
                let gq: Vec<f64> = (0..q.len())
                    .map(|a| g_probs[a * phases..(a + 1) * phases].iter().sum::<f64>() / phases as f64)
                    .collect();
                out.extend(softmax_backward(&q, &gq));
                if self.train_radii {
                    for a in 0..self.radii.len() {
                        let mut g = 0.0;
                        for m in 0..phases {
                            let dir = Complex64::from_polar(
                                1.0,
                                crate::constellation::gpas_phase(m, phases),
                            );
                            g += (g_points[a * phases + m] * dir.conj()).re;
                        }
                        out.push(g);
                    }
                }
            }
        }
        out
    }
}

/// Guards the simplex check against accumulated rounding in long products.
fn renormalized(mut p: Vec<f64>) -> Vec<f64> {
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}
