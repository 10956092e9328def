//! Finite complex constellations with symbol probabilities and bit labels.
//!
//! Labels are integers read MSB-first: bit position `m` in `1..=M` is bit
//! `M - m` of the label. Every module that produces or consumes per-bit
//! quantities (LLR vectors, bit roles of the PAS demapper) follows this order.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::gray;

const PROB_TOL: f64 = 1e-9;

/// Weighted moments of a constellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: Complex64,
    pub power: f64,
    /// `E|x|^4 / (E|x|^2)^2`, equal to the fourth moment at unit power.
    pub kurtosis: f64,
}

/// Free-form descriptive metadata carried through the JSON interchange.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstellationMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    probs: Vec<f64>,
    labels: Vec<u32>,
    bits: usize,
    pub meta: ConstellationMeta,
}

impl Constellation {
    /// Validates sizes, the probability simplex and the labeling.
    pub fn new(points: Vec<Complex64>, probs: Vec<f64>, labels: Vec<u32>) -> Result<Self> {
        let n = points.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidConstellation(format!(
                "size {n} is not a power of two >= 2"
            )));
        }
        if probs.len() != n || labels.len() != n {
            return Err(Error::InvalidConstellation(format!(
                "{} points but {} probabilities and {} labels",
                n,
                probs.len(),
                labels.len()
            )));
        }
        if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::InvalidConstellation("non-finite point".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidConstellation(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidConstellation(format!(
                "probabilities sum to {total}"
            )));
        }
        let mut seen = vec![false; n];
        for &l in &labels {
            let idx = l as usize;
            if idx >= n || seen[idx] {
                return Err(Error::InvalidConstellation(format!(
                    "labels must enumerate 0..{n} exactly once (offending label {l})"
                )));
            }
            seen[idx] = true;
        }
        Ok(Self {
            points,
            probs,
            labels,
            bits: n.trailing_zeros() as usize,
            meta: ConstellationMeta::default(),
        })
    }

    /// Equiprobable constellation with labels `0..n` in point order.
    pub fn uniform(points: Vec<Complex64>, labels: Vec<u32>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n], labels)
    }

    pub fn with_meta(mut self, meta: ConstellationMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of points `M~`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bits per symbol `M = log2(M~)`.
    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Value (0 or 1) of bit position `m` (1-based, MSB first) in point `i`'s label.
    pub fn label_bit(&self, i: usize, m: usize) -> u8 {
        ((self.labels[i] >> (self.bits - m)) & 1) as u8
    }

    /// Index of the point carrying `label`.
    pub fn index_of_label(&self, label: u32) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn entropy_bits(&self) -> f64 {
        crate::numerics::entropy_bits(&self.probs)
    }

    pub fn moments(&self) -> Moments {
        moments(self)
    }

    pub fn kurtosis(&self) -> f64 {
        moments(self).kurtosis
    }

    /// Scales points to unit average power; probabilities and labels are kept.
    pub fn normalize(&self) -> Result<Self> {
        normalize(self)
    }

    /// Same points/labels with new probabilities.
    pub fn with_probs(&self, probs: Vec<f64>) -> Result<Self> {
        Ok(Self::new(self.points.clone(), probs, self.labels.clone())?.with_meta(self.meta.clone()))
    }

    /// Same probabilities/labels with new points.
    pub fn with_points(&self, points: Vec<Complex64>) -> Result<Self> {
        Ok(Self::new(points, self.probs.clone(), self.labels.clone())?.with_meta(self.meta.clone()))
    }

    /// Applies a global phase rotation.
    pub fn rotated(&self, phase: f64) -> Self {
        let r = Complex64::from_polar(1.0, phase);
        let mut c = self.clone();
        c.points.iter_mut().for_each(|p| *p *= r);
        c
    }

    /// Draws a point index according to the symbol probabilities.
    pub fn sample_index<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding leaves a sliver above the last cumulative value
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Exact weighted moments. Kurtosis is reported scale-free.
pub fn moments(c: &Constellation) -> Moments {
    let mut mean = Complex64::new(0.0, 0.0);
    let mut p2 = 0.0;
    let mut p4 = 0.0;
    for (x, &p) in c.points.iter().zip(&c.probs) {
        let a = x.norm_sqr();
        mean += x * p;
        p2 += p * a;
        p4 += p * a * a;
    }
    Moments {
        mean,
        power: p2,
        kurtosis: if p2 > 0.0 { p4 / (p2 * p2) } else { f64::NAN },
    }
}

pub fn normalize(c: &Constellation) -> Result<Constellation> {
    let power = moments(c).power;
    if !(power > 0.0) {
        return Err(Error::InvalidConstellation(
            "cannot normalize a zero-power constellation".into(),
        ));
    }
    let s = 1.0 / power.sqrt();
    let mut out = c.clone();
    out.points.iter_mut().for_each(|p| *p *= s);
    Ok(out)
}

/// Square Gray-labeled QAM with `bits` bits per symbol (2, 4, 6 or 8).
///
/// The label of point `(i, q)` is `gray(i) << bits/2 | gray(q)`, i.e. the
/// first half of the bit positions addresses the in-phase level.
pub fn make_qam(bits: usize) -> Result<Constellation> {
    if !matches!(bits, 2 | 4 | 6 | 8) {
        return Err(invalid("bits", format!("QAM needs an even bit count in 2..=8, got {bits}")));
    }
    let half = bits / 2;
    let side = 1usize << half;
    let level = |k: usize| (2 * k) as f64 - (side - 1) as f64;
    let mut points = Vec::with_capacity(side * side);
    let mut labels = Vec::with_capacity(side * side);
    for i in 0..side {
        for q in 0..side {
            points.push(Complex64::new(level(i), level(q)));
            labels.push((gray(i as u32) << half) | gray(q as u32));
        }
    }
    let c = Constellation::uniform(points, labels)?.normalize()?;
    Ok(c.with_meta(ConstellationMeta {
        family: Some(format!("qam{}", side * side)),
        ..Default::default()
    }))
}

/// Gray-labeled PSK with `bits` bits per symbol. BPSK sits on the real axis;
/// higher orders are offset by half a phase step.
pub fn make_psk(bits: usize) -> Result<Constellation> {
    if !(1..=10).contains(&bits) {
        return Err(invalid("bits", format!("PSK needs 1..=10 bits, got {bits}")));
    }
    let n = 1usize << bits;
    let offset = if bits == 1 { 0.0 } else { PI / n as f64 };
    let points = (0..n)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64 + offset))
        .collect();
    let labels = (0..n as u32).map(gray).collect();
    Ok(Constellation::uniform(points, labels)?.with_meta(ConstellationMeta {
        family: Some(format!("psk{n}")),
        ..Default::default()
    }))
}

/// Phase of the generalized-PAS phasor with phase index `m` out of `n`.
///
/// The phase set is `{exp(j pi (2m+1)/n)}` traversed clockwise from the
/// positive imaginary axis, so that with a reflected Gray labeling the first
/// phase bit is the sign of the real part and the second the sign of the
/// imaginary part.
pub fn gpas_phase(m: usize, n: usize) -> f64 {
    PI / 2.0 - PI * (2 * m + 1) as f64 / n as f64
}

/// APSK grid with `2^amp_bits` rings and `2^phase_bits` phases.
///
/// Point order is ring-major: index `a * 2^phase_bits + m`. Label is
/// `gray(a) << phase_bits | gray(m)` (amplitude bits first). Ring
/// probabilities are uniform; the result is normalized to unit power.
pub fn make_gpas_grid(amp_bits: usize, phase_bits: usize, radii: &[f64]) -> Result<Constellation> {
    let rings = 1usize << amp_bits;
    if radii.len() != rings {
        return Err(Error::LengthMismatch {
            expected: rings,
            got: radii.len(),
        });
    }
    if radii.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(invalid("radii", "radii must be positive"));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("radii", "radii must be strictly increasing"));
    }
    if amp_bits + phase_bits < 1 {
        return Err(invalid("phase_bits", "need at least one bit"));
    }
    let c = gpas_grid_unchecked(amp_bits, phase_bits, radii)?.normalize()?;
    Ok(c.with_meta(ConstellationMeta {
        family: Some(format!("gpas-a{amp_bits}-p{phase_bits}")),
        ..Default::default()
    }))
}

/// Grid builder without radius validation; used by the shaping projection
/// where radii are free parameters (ties are allowed there).
pub(crate) fn gpas_grid_unchecked(
    amp_bits: usize,
    phase_bits: usize,
    radii: &[f64],
) -> Result<Constellation> {
    let phases = 1usize << phase_bits;
    let mut points = Vec::with_capacity(radii.len() * phases);
    let mut labels = Vec::with_capacity(radii.len() * phases);
    for (a, &r) in radii.iter().enumerate() {
        for m in 0..phases {
            points.push(Complex64::from_polar(r, gpas_phase(m, phases)));
            labels.push((gray(a as u32) << phase_bits) | gray(m as u32));
        }
    }
    let _ = amp_bits;
    Constellation::uniform(points, labels)
}

/// Radii `{1, 2, ..., 2^amp_bits}` of the equally spaced amplitude set.
pub fn default_gpas_radii(amp_bits: usize) -> Vec<f64> {
    (1..=(1usize << amp_bits)).map(|a| a as f64).collect()
}

// JSON interchange -----------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstellationFile {
    points: Vec<[f64; 2]>,
    probs: Vec<f64>,
    labels: Vec<u32>,
    #[serde(default)]
    meta: ConstellationMeta,
}

impl Serialize for Constellation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConstellationFile {
            points: self.points.iter().map(|p| [p.re, p.im]).collect(),
            probs: self.probs.clone(),
            labels: self.labels.clone(),
            meta: self.meta.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Constellation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = ConstellationFile::deserialize(d)?;
        let points = f.points.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        Constellation::new(points, f.probs, f.labels)
            .map(|c| c.with_meta(f.meta))
            .map_err(serde::de::Error::custom)
    }
}

impl Constellation {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
