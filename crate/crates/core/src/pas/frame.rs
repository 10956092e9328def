//! Conventional (amplitude-sign) and generalized (amplitude-phase) PAS
//! frames and their byte layout.
//!
//! Per shaped dimension a frame of `U` symbols carries the matcher payload
//! (`U` amplitudes of `amp_bits` label bits each) and `bypass` uniform
//! information bits. The systematic code protects amplitude labels and
//! bypass bits; its `U * phase_bits - bypass` parity bits fill the remaining
//! sign/phase positions. Conventional PAS shapes two independent ASK
//! dimensions with one sign bit each, generalized PAS a single APSK stream
//! with `phase_bits` phase bits per symbol.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ccdm::{ccdm_decode, ccdm_encode, Composition};
use super::fec::{systematic_parity, SystematicCode};
use crate::constellation::{gpas_grid_unchecked, gpas_phase, make_qam, Constellation, ConstellationMeta};
use crate::error::{Error, Result};
use crate::numerics::{gray, gray_inverse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PasFamily {
    Cpas,
    Gpas,
}

impl PasFamily {
    fn code(self) -> u8 {
        match self {
            Self::Cpas => 0,
            Self::Gpas => 1,
        }
    }
}

/// Static description of a PAS frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PasConfig {
    pub family: PasFamily,
    /// Symbols per frame.
    pub u: usize,
    /// Amplitude label bits (`M/2 - 1` per dimension for conventional PAS).
    pub amp_bits: usize,
    /// Sign or phase bits per symbol (1 for conventional PAS).
    pub phase_bits: usize,
    pub composition: Composition,
    /// Uniform information bits that bypass the matcher, per dimension.
    pub bypass: usize,
    /// Ring radii of generalized PAS, before normalization. Defaults to
    /// `1, 2, ..., 2^amp_bits`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub parity_seed: u64,
}

impl PasConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Frame(m));
        if self.amp_bits == 0 || self.amp_bits > 8 {
            return bad(format!("amp_bits {} outside 1..=8", self.amp_bits));
        }
        if self.family == PasFamily::Cpas && self.phase_bits != 1 {
            return bad("conventional PAS carries exactly one sign bit".into());
        }
        if self.family == PasFamily::Gpas && !(1..=10).contains(&self.phase_bits) {
            return bad(format!("phase_bits {} outside 1..=10", self.phase_bits));
        }
        if self.composition.levels() != 1 << self.amp_bits {
            return bad(format!(
                "composition has {} levels, amplitude alphabet {}",
                self.composition.levels(),
                1usize << self.amp_bits
            ));
        }
        if self.composition.block_len() != self.u {
            return bad(format!("composition covers {} symbols, frame {}", self.composition.block_len(), self.u));
        }
        if self.u == 0 || self.u > u16::MAX as usize {
            return bad(format!("block length {} outside 1..=65535", self.u));
        }
        if self.bypass > self.u * self.phase_bits {
            return bad(format!("{} bypass bits exceed {} sign/phase positions", self.bypass, self.u * self.phase_bits));
        }
        if let Some(r) = &self.radii {
            if r.len() != 1 << self.amp_bits || r.iter().any(|&v| !(v > 0.0)) {
                return bad("radii must be positive, one per amplitude level".into());
            }
        }
        Ok(())
    }

    /// Independent shaped dimensions per complex symbol.
    pub fn dims(&self) -> usize {
        match self.family {
            PasFamily::Cpas => 2,
            PasFamily::Gpas => 1,
        }
    }

    pub fn dm_bits(&self) -> usize {
        self.composition.payload_bits()
    }

    /// Information bits per frame.
    pub fn info_len(&self) -> usize {
        self.dims() * (self.dm_bits() + self.bypass)
    }

    /// Parity bits per dimension.
    pub fn parity_len(&self) -> usize {
        self.u * self.phase_bits - self.bypass
    }

    /// Rate of the systematic code, `(amp_bits + gamma) / (amp_bits + phase_bits)`.
    pub fn fec_rate(&self) -> f64 {
        (self.u * self.amp_bits + self.bypass) as f64 / (self.u * (self.amp_bits + self.phase_bits)) as f64
    }

    /// Information bits per complex symbol.
    pub fn info_rate(&self) -> f64 {
        self.info_len() as f64 / self.u as f64
    }

    fn code(&self) -> SystematicCode {
        SystematicCode::new(self.u * self.amp_bits + self.bypass, self.parity_len(), self.parity_seed)
    }

    fn radii(&self) -> Vec<f64> {
        self.radii
            .clone()
            .unwrap_or_else(|| (1..=1usize << self.amp_bits).map(|a| a as f64).collect())
    }

    /// Magnitude of each amplitude level, scaled to unit average symbol
    /// power under the composition.
    pub fn amplitude_values(&self) -> Vec<f64> {
        let p = self.composition.probs();
        let raw: Vec<f64> = match self.family {
            PasFamily::Cpas => (0..1usize << self.amp_bits).map(|a| (2 * a + 1) as f64).collect(),
            PasFamily::Gpas => self.radii(),
        };
        let power: f64 = raw.iter().zip(&p).map(|(r, q)| q * r * r).sum::<f64>() * self.dims() as f64;
        raw.iter().map(|r| r / power.sqrt()).collect()
    }

    /// Gray label of amplitude index `a` (ascending magnitude).
    pub fn amp_label(&self, a: usize) -> u32 {
        match self.family {
            // lower bits of the reflected ASK label, shared by both signs
            PasFamily::Cpas => gray(((1usize << self.amp_bits) + a) as u32) & ((1u32 << self.amp_bits) - 1),
            PasFamily::Gpas => gray(a as u32),
        }
    }

    /// Constellation whose point probabilities match the frame's long-run
    /// symbol statistics.
    pub fn constellation(&self) -> Result<Constellation> {
        self.validate()?;
        let pa = self.composition.probs();
        let c = match self.family {
            PasFamily::Cpas => {
                let qam = make_qam(2 * (self.amp_bits + 1))?;
                let half = 1usize << self.amp_bits;
                let side = 2 * half;
                let mag = |i: usize| if i >= half { i - half } else { half - 1 - i };
                let probs: Vec<f64> = (0..side * side)
                    .map(|k| pa[mag(k / side)] * pa[mag(k % side)] / 4.0)
                    .collect();
                let delta = self.amplitude_values()[0];
                let lv = |i: usize| (2.0 * i as f64 - (side - 1) as f64) * delta;
                let points: Vec<Complex64> = (0..side * side)
                    .map(|k| Complex64::new(lv(k / side), lv(k % side)))
                    .collect();
                Constellation::new(points, probs, qam.labels().to_vec())?
            }
            PasFamily::Gpas => {
                let phases = 1usize << self.phase_bits;
                let grid = gpas_grid_unchecked(self.amp_bits, self.phase_bits, &self.amplitude_values())?;
                let probs = (0..grid.len()).map(|k| pa[k / phases] / phases as f64).collect();
                grid.with_probs(probs)?
            }
        };
        Ok(c.with_meta(ConstellationMeta {
            family: Some(format!("{:?}", self.family).to_lowercase()),
            ..Default::default()
        }))
    }
}

/// An encoded frame with every intermediate stream kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct PasFrame {
    pub config: PasConfig,
    pub info: Vec<u8>,
    /// Amplitude indices per dimension.
    pub amplitudes: Vec<Vec<usize>>,
    /// Sign or phase bits per dimension: bypass bits followed by parity.
    pub sign_bits: Vec<Vec<u8>>,
    pub parity: Vec<Vec<u8>>,
    pub symbols: Vec<Complex64>,
}

fn label_bits(v: u32, n: usize, out: &mut Vec<u8>) {
    for k in (0..n).rev() {
        out.push((v >> k & 1) as u8);
    }
}

fn bits_value(bits: &[u8]) -> u32 {
    bits.iter().fold(0, |acc, &b| acc << 1 | u32::from(b))
}

/// Builds one frame from `info_len()` information bits laid out as
/// `[payload_0, bypass_0, payload_1, bypass_1]` (one pair per dimension).
pub fn pas_encode(cfg: &PasConfig, info: &[u8]) -> Result<PasFrame> {
    cfg.validate()?;
    if info.len() != cfg.info_len() {
        return Err(Error::Frame(format!(
            "bit budget: frame takes {} information bits, got {}",
            cfg.info_len(),
            info.len()
        )));
    }
    let code = cfg.code();
    let per_dim = cfg.dm_bits() + cfg.bypass;
    let mut amplitudes = Vec::new();
    let mut sign_bits = Vec::new();
    let mut parity = Vec::new();
    for d in 0..cfg.dims() {
        let chunk = &info[d * per_dim..(d + 1) * per_dim];
        let (payload, bypass) = chunk.split_at(cfg.dm_bits());
        let amps = ccdm_encode(payload, &cfg.composition)?;
        let mut fec_in = Vec::with_capacity(code.info_len());
        for &a in &amps {
            label_bits(cfg.amp_label(a), cfg.amp_bits, &mut fec_in);
        }
        fec_in.extend_from_slice(bypass);
        let par = systematic_parity(&fec_in, &code)?;
        let mut signs = bypass.to_vec();
        signs.extend_from_slice(&par);
        amplitudes.push(amps);
        sign_bits.push(signs);
        parity.push(par);
    }
    let symbols = emit(cfg, &amplitudes, &sign_bits);
    Ok(PasFrame {
        config: cfg.clone(),
        info: info.to_vec(),
        amplitudes,
        sign_bits,
        parity,
        symbols,
    })
}

fn emit(cfg: &PasConfig, amplitudes: &[Vec<usize>], sign_bits: &[Vec<u8>]) -> Vec<Complex64> {
    let mag = cfg.amplitude_values();
    let pb = cfg.phase_bits;
    (0..cfg.u)
        .map(|u| match cfg.family {
            PasFamily::Cpas => {
                let v = |d: usize| {
                    let s = if sign_bits[d][u] == 1 { 1.0 } else { -1.0 };
                    s * mag[amplitudes[d][u]]
                };
                Complex64::new(v(0), v(1))
            }
            PasFamily::Gpas => {
                let b = bits_value(&sign_bits[0][u * pb..(u + 1) * pb]);
                let m = gray_inverse(b) as usize;
                Complex64::from_polar(mag[amplitudes[0][u]], gpas_phase(m, 1 << pb))
            }
        })
        .collect()
}

/// Result of decoding received symbols by hard decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedFrame {
    pub info: Vec<u8>,
    /// Whether the re-encoded parity matches the received sign/phase bits.
    pub parity_ok: bool,
}

fn nearest(values: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (k, r) in values.iter().enumerate() {
        if (r - v).abs() < (values[best] - v).abs() {
            best = k;
        }
    }
    best
}

/// Recovers the information bits of a frame from (noiseless or
/// hard-decided) symbols.
pub fn pas_decode(cfg: &PasConfig, symbols: &[Complex64]) -> Result<DecodedFrame> {
    cfg.validate()?;
    if symbols.len() != cfg.u {
        return Err(Error::LengthMismatch {
            expected: cfg.u,
            got: symbols.len(),
        });
    }
    let mag = cfg.amplitude_values();
    let pb = cfg.phase_bits;
    let mut amplitudes = vec![Vec::with_capacity(cfg.u); cfg.dims()];
    let mut sign_bits = vec![Vec::with_capacity(cfg.u * pb); cfg.dims()];
    for y in symbols {
        match cfg.family {
            PasFamily::Cpas => {
                for (d, v) in [y.re, y.im].into_iter().enumerate() {
                    amplitudes[d].push(nearest(&mag, v.abs()));
                    sign_bits[d].push(u8::from(v >= 0.0));
                }
            }
            PasFamily::Gpas => {
                amplitudes[0].push(nearest(&mag, y.norm()));
                let n = 1usize << pb;
                let step = (PI / 2.0 - y.arg()) * n as f64 / PI;
                let m = ((step - 1.0) / 2.0).round().rem_euclid(n as f64) as usize % n;
                label_bits(gray(m as u32), pb, &mut sign_bits[0]);
            }
        }
    }
    let code = cfg.code();
    let mut info = Vec::with_capacity(cfg.info_len());
    let mut parity_ok = true;
    for d in 0..cfg.dims() {
        info.extend(ccdm_decode(&amplitudes[d], &cfg.composition)?);
        let bypass = &sign_bits[d][..cfg.bypass];
        info.extend_from_slice(bypass);
        let mut fec_in = Vec::with_capacity(code.info_len());
        for &a in &amplitudes[d] {
            label_bits(cfg.amp_label(a), cfg.amp_bits, &mut fec_in);
        }
        fec_in.extend_from_slice(bypass);
        parity_ok &= systematic_parity(&fec_in, &code)? == sign_bits[d][cfg.bypass..];
    }
    Ok(DecodedFrame { info, parity_ok })
}

/// Serializes the frame header and its information bits.
///
/// Layout: family (1 byte), `U` (2), `amp_bits` (1), `phase_bits` (1), one
/// 2-byte count per amplitude level, the bypass count (2), then the
/// information bits packed MSB-first and zero-padded to a whole byte.
/// Multi-byte fields are big-endian.
pub fn frame_to_bytes(frame: &PasFrame) -> Vec<u8> {
    let cfg = &frame.config;
    let mut out = vec![cfg.family.code()];
    out.extend_from_slice(&(cfg.u as u16).to_be_bytes());
    out.push(cfg.amp_bits as u8);
    out.push(cfg.phase_bits as u8);
    for &c in cfg.composition.counts() {
        out.extend_from_slice(&(c as u16).to_be_bytes());
    }
    out.extend_from_slice(&(cfg.bypass as u16).to_be_bytes());
    for chunk in frame.info.chunks(8) {
        let mut byte = 0u8;
        for (k, &b) in chunk.iter().enumerate() {
            byte |= (b & 1) << (7 - k);
        }
        out.push(byte);
    }
    out
}

/// Parses [`frame_to_bytes`] output and re-encodes the frame. Radii and the
/// parity seed are not carried and take their defaults.
pub fn frame_from_bytes(bytes: &[u8]) -> Result<PasFrame> {
    let short = || Error::Frame("truncated frame".into());
    let u16_at = |k: usize| -> Result<usize> {
        bytes
            .get(k..k + 2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as usize)
            .ok_or_else(short)
    };
    let family = match bytes.first().ok_or_else(short)? {
        0 => PasFamily::Cpas,
        1 => PasFamily::Gpas,
        f => return Err(Error::Frame(format!("unknown family code {f}"))),
    };
    let u = u16_at(1)?;
    let amp_bits = *bytes.get(3).ok_or_else(short)? as usize;
    let phase_bits = *bytes.get(4).ok_or_else(short)? as usize;
    if amp_bits == 0 || amp_bits > 8 {
        return Err(Error::Frame(format!("amp_bits {amp_bits} outside 1..=8")));
    }
    let levels = 1usize << amp_bits;
    let counts = (0..levels).map(|k| u16_at(5 + 2 * k)).collect::<Result<Vec<_>>>()?;
    let mut pos = 5 + 2 * levels;
    let bypass = u16_at(pos)?;
    pos += 2;
    let cfg = PasConfig {
        family,
        u,
        amp_bits,
        phase_bits,
        composition: Composition::new(counts)?,
        bypass,
        radii: None,
        parity_seed: 0,
    };
    cfg.validate()?;
    let n = cfg.info_len();
    let body = &bytes[pos..];
    if body.len() != n.div_ceil(8) {
        return Err(Error::Frame(format!(
            "payload of {} bytes, header implies {}",
            body.len(),
            n.div_ceil(8)
        )));
    }
    let info: Vec<u8> = (0..n).map(|k| body[k / 8] >> (7 - k % 8) & 1).collect();
    pas_encode(&cfg, &info)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gpas_cfg(u: usize, bypass: usize) -> PasConfig {
        PasConfig {
            family: PasFamily::Gpas,
            u,
            amp_bits: 2,
            phase_bits: 4,
            composition: Composition::from_probs(&[0.4, 0.3, 0.2, 0.1], u).unwrap(),
            bypass,
            radii: None,
            parity_seed: 7,
        }
    }

    fn cpas_cfg(u: usize, bypass: usize) -> PasConfig {
        PasConfig {
            family: PasFamily::Cpas,
            u,
            amp_bits: 2,
            phase_bits: 1,
            composition: Composition::from_probs(&[0.45, 0.3, 0.17, 0.08], u).unwrap(),
            bypass,
            radii: None,
            parity_seed: 3,
        }
    }

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn round_trip_both_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for cfg in [gpas_cfg(32, 20), cpas_cfg(32, 8), gpas_cfg(10, 0), cpas_cfg(16, 16)] {
            for _ in 0..20 {
                let info = random_bits(&mut rng, cfg.info_len());
                let f = pas_encode(&cfg, &info).unwrap();
                let d = pas_decode(&cfg, &f.symbols).unwrap();
                assert_eq!(d.info, info);
                assert!(d.parity_ok);
            }
        }
    }

    #[test]
    fn factorization_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = gpas_cfg(24, 10);
        let f = pas_encode(&cfg, &random_bits(&mut rng, cfg.info_len())).unwrap();
        let mag = cfg.amplitude_values();
        for (u, x) in f.symbols.iter().enumerate() {
            let s = x / mag[f.amplitudes[0][u]];
            assert!((s.norm() - 1.0).abs() < 1e-12);
            // phase sits on the uniform grid pi (2m + 1) / 16 about the imaginary axis
            let k = (s.arg() * 16.0 / PI - 1.0) / 2.0;
            assert!((k - k.round()).abs() < 1e-9);
        }
        let cfg = cpas_cfg(24, 4);
        let f = pas_encode(&cfg, &random_bits(&mut rng, cfg.info_len())).unwrap();
        let mag = cfg.amplitude_values();
        for (u, x) in f.symbols.iter().enumerate() {
            assert_eq!(x.re.abs(), mag[f.amplitudes[0][u]]);
            assert_eq!(x.im.abs(), mag[f.amplitudes[1][u]]);
        }
    }

    #[test]
    fn two_phase_bits_give_qpsk_phasors() {
        let cfg = PasConfig {
            phase_bits: 2,
            bypass: 4,
            ..gpas_cfg(16, 0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = pas_encode(&cfg, &random_bits(&mut rng, cfg.info_len())).unwrap();
        for x in &f.symbols {
            let a = x.arg().rem_euclid(2.0 * PI);
            let k = (a / (PI / 4.0) - 1.0) / 2.0;
            assert!((k - k.round()).abs() < 1e-9, "{a}");
        }
    }

    #[test]
    fn amplitudes_follow_composition_exactly() {
        let cfg = gpas_cfg(40, 0);
        let f = pas_encode(&cfg, &vec![1; cfg.info_len()]).unwrap();
        let mut counts = vec![0; 4];
        f.amplitudes[0].iter().for_each(|&a| counts[a] += 1);
        assert_eq!(counts, cfg.composition.counts());
    }

    #[test]
    fn unit_power_and_matching_constellation() {
        for cfg in [gpas_cfg(64, 0), cpas_cfg(64, 0)] {
            let c = cfg.constellation().unwrap();
            assert!((c.moments().power - 1.0).abs() < 1e-12);
            // every emitted symbol is a point of the constellation
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let f = pas_encode(&cfg, &random_bits(&mut rng, cfg.info_len())).unwrap();
            for x in &f.symbols {
                assert!(c.points().iter().any(|p| (p - x).norm() < 1e-12));
            }
        }
    }

    #[test]
    fn cpas_labels_match_qam_gray() {
        let cfg = cpas_cfg(8, 0);
        let c = cfg.constellation().unwrap();
        let qam = make_qam(6).unwrap();
        assert_eq!(c.labels(), qam.labels());
        // the amplitude label of level a reproduces the lower label bits
        for (k, &l) in c.labels().iter().enumerate() {
            let i = (k / 8) as u32;
            let a = if i >= 4 { i - 4 } else { 3 - i };
            assert_eq!((l >> 3) & 3, cfg.amp_label(a as usize));
            assert_eq!(l >> 5, u32::from(c.points()[k].re > 0.0));
        }
    }

    #[test]
    fn budget_errors() {
        let cfg = gpas_cfg(16, 0);
        assert!(pas_encode(&cfg, &[0; 3]).is_err());
        let over = PasConfig { bypass: 65, ..cfg.clone() };
        assert!(over.validate().is_err());
        let wrong_levels = PasConfig {
            composition: Composition::new(vec![8, 8]).unwrap(),
            ..cfg
        };
        assert!(wrong_levels.validate().is_err());
    }

    #[test]
    fn rates() {
        let cfg = cpas_cfg(100, 20);
        // (M_1D - 1 + gamma) / M_1D with M_1D = 3, gamma = 0.2
        assert!((cfg.fec_rate() - 2.2 / 3.0).abs() < 1e-12);
        let g = gpas_cfg(100, 100);
        assert!((g.fec_rate() - 3.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn wire_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = PasConfig { parity_seed: 0, ..cpas_cfg(20, 5) };
        let f = pas_encode(&cfg, &random_bits(&mut rng, cfg.info_len())).unwrap();
        let bytes = frame_to_bytes(&f);
        assert_eq!(bytes[0], 0);
        assert_eq!(&bytes[1..3], &[0, 20]);
        assert_eq!(bytes.len(), 5 + 8 + 2 + cfg.info_len().div_ceil(8));
        let back = frame_from_bytes(&bytes).unwrap();
        assert_eq!(back, f);
        assert!(frame_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(frame_from_bytes(&[9]).is_err());
    }
}
