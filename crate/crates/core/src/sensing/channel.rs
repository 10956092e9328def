//! Multi-target sensing channel and the AWGN communication link.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ofdm::Ofdm;
use crate::error::{invalid, Error, Result};

const C_LIGHT: f64 = 299_792_458.0;

/// Fluctuation model of a point-target reflection coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmplitudeModel {
    /// Deterministic complex coefficient.
    Fixed { re: f64, im: f64 },
    /// Fixed modulus `sqrt(power)` with a uniform random phase.
    Swerling0 { power: f64 },
    /// Circularly symmetric Gaussian coefficient with the given mean power.
    Swerling1 { mean_power: f64 },
}

impl AmplitudeModel {
    /// Mean power `E|a|^2`.
    pub fn power(&self) -> f64 {
        match *self {
            Self::Fixed { re, im } => re * re + im * im,
            Self::Swerling0 { power } => power,
            Self::Swerling1 { mean_power } => mean_power,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match *self {
            Self::Fixed { re, im } => Complex64::new(re, im),
            Self::Swerling0 { power } => {
                Complex64::from_polar(power.sqrt(), rng.random_range(0.0..std::f64::consts::TAU))
            }
            Self::Swerling1 { mean_power } => {
                let s = (mean_power / 2.0).sqrt();
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(s * re, s * im)
            }
        }
    }
}

/// Static point target on an integer delay (in samples).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub delay: usize,
    pub amplitude: AmplitudeModel,
    #[serde(default)]
    pub is_toi: bool,
}

/// Targets, receiver noise and CA-CFAR settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingScenario {
    pub targets: Vec<Target>,
    pub sigma_s2: f64,
    #[serde(default = "default_pfa")]
    pub pfa: f64,
    /// Total number of reference cells, split evenly before and after the cell.
    #[serde(default = "default_n_win")]
    pub n_win: usize,
    /// Guard cells on each side.
    #[serde(default = "default_n_guard")]
    pub n_guard: usize,
}

fn default_pfa() -> f64 {
    1e-3
}
fn default_n_win() -> usize {
    100
}
fn default_n_guard() -> usize {
    2
}

impl SensingScenario {
    pub fn new(targets: Vec<Target>, sigma_s2: f64) -> Self {
        Self {
            targets,
            sigma_s2,
            pfa: default_pfa(),
            n_win: default_n_win(),
            n_guard: default_n_guard(),
        }
    }

    /// Checks targets, noise and the CFAR window against the symbol layout.
    pub fn validate(&self, n: usize, cp_len: usize) -> Result<()> {
        self.cfar().validate(n)?;
        self.validate_targets(cp_len)
    }

    pub(crate) fn validate_targets(&self, cp_len: usize) -> Result<()> {
        if !(self.sigma_s2 >= 0.0) {
            return Err(invalid("sigma_s2", "noise power must be non-negative"));
        }
        for t in &self.targets {
            if t.delay >= cp_len.max(1) {
                return Err(invalid(
                    "delay",
                    format!("target delay {} outside the cyclic prefix ({cp_len})", t.delay),
                ));
            }
            if !(t.amplitude.power() > 0.0) {
                return Err(invalid("amplitude", "target power must be positive"));
            }
        }
        Ok(())
    }

    /// The unique target of interest.
    pub fn toi(&self) -> Result<&Target> {
        let mut it = self.targets.iter().filter(|t| t.is_toi);
        match (it.next(), it.next()) {
            (Some(t), None) => Ok(t),
            (None, _) => Err(invalid("targets", "no target of interest flagged")),
            _ => Err(invalid("targets", "more than one target of interest flagged")),
        }
    }
}

pub(crate) fn complex_gauss<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Received frequency-domain echo of one OFDM symbol.
///
/// The transmit symbol is modulated, delayed and scaled per target in the
/// time domain, corrupted by white noise of power `sigma_s2` per sample and
/// demodulated. Thanks to the prefix this equals
/// `y_n = x_n sum_j a_j exp(-j 2 pi n tau_j / N) + w_n`.
pub fn sensing_receive<R: Rng + ?Sized>(
    ofdm: &Ofdm,
    tx: &[Complex64],
    scenario: &SensingScenario,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let cfg = *ofdm.config();
    scenario.validate_targets(cfg.cp_len)?;
    let s = ofdm.modulate(tx)?;
    let mut r = vec![Complex64::new(0.0, 0.0); s.len()];
    for t in &scenario.targets {
        let a = t.amplitude.draw(rng);
        for k in t.delay..s.len() {
            r[k] += a * s[k - t.delay];
        }
    }
    for v in r.iter_mut() {
        *v += complex_gauss(rng, scenario.sigma_s2);
    }
    ofdm.demodulate(&r)
}

/// Received frequency-domain symbols of the AWGN communication link.
pub fn comms_receive<R: Rng + ?Sized>(
    ofdm: &Ofdm,
    tx: &[Complex64],
    sigma_c2: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(sigma_c2 >= 0.0) {
        return Err(invalid("sigma_c2", "noise power must be non-negative"));
    }
    let mut r = ofdm.modulate(tx)?;
    for v in r.iter_mut() {
        *v += complex_gauss(rng, sigma_c2);
    }
    ofdm.demodulate(&r)
}

/// Matched filter `h_n = y_n conj(x_n)`.
pub fn matched_filter(y: &[Complex64], x: &[Complex64]) -> Result<Vec<Complex64>> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(y.iter().zip(x).map(|(a, b)| a * b.conj()).collect())
}

/// Delay-domain channel estimate by the orthonormal inverse DFT.
pub fn delay_estimate(ofdm: &Ofdm, h: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = h.to_vec();
    ofdm.ifft(&mut out)?;
    Ok(out)
}

/// Explicit monostatic radar-equation inputs, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarLink {
    pub tx_power_w: f64,
    pub gain_tx: f64,
    pub gain_rx: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
}

impl RadarLink {
    /// Echo power relative to the noise power, i.e. `|a|^2` for `sigma_s2 = 1`.
    pub fn relative_power(&self, rcs_m2: f64, range_m: f64) -> f64 {
        let lambda = C_LIGHT / self.carrier_hz;
        let pr = self.tx_power_w * self.gain_tx * self.gain_rx * lambda * lambda * rcs_m2
            / ((4.0 * std::f64::consts::PI).powi(3) * range_m.powi(4));
        pr / self.noise_power_w
    }

    /// Round-trip delay rounded to whole samples.
    pub fn delay_samples(&self, range_m: f64) -> usize {
        (2.0 * range_m / C_LIGHT * self.bandwidth_hz).round() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::OfdmConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed(delay: usize, re: f64, toi: bool) -> Target {
        Target {
            delay,
            amplitude: AmplitudeModel::Fixed { re, im: 0.0 },
            is_toi: toi,
        }
    }

    fn qpsk(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (0..n)
            .map(|_| Complex64::new(if rng.random() { s } else { -s }, if rng.random() { s } else { -s }))
            .collect()
    }

    #[test]
    fn unit_target_at_zero_delay_is_transparent() {
        let o = Ofdm::new(OfdmConfig::new(64, 16).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = qpsk(&mut rng, 64);
        let sc = SensingScenario::new(vec![fixed(0, 1.0, true)], 0.0);
        let y = sensing_receive(&o, &x, &sc, &mut rng).unwrap();
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn matches_frequency_domain_model() {
        let n = 32;
        let o = Ofdm::new(OfdmConfig::new(n, 8).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = qpsk(&mut rng, n);
        let sc = SensingScenario {
            n_win: 4,
            ..SensingScenario::new(vec![fixed(3, 0.7, true), fixed(6, -1.5, false)], 0.0)
        };
        let y = sensing_receive(&o, &x, &sc, &mut rng).unwrap();
        for k in 0..n {
            let w = |tau: f64| Complex64::from_polar(1.0, -std::f64::consts::TAU * k as f64 * tau / n as f64);
            let h = 0.7 * w(3.0) - 1.5 * w(6.0);
            assert!((y[k] - x[k] * h).norm() < 1e-12);
        }
    }

    #[test]
    fn delay_profile_peaks_at_target_delays() {
        let n = 64;
        let o = Ofdm::new(OfdmConfig::new(n, 16).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = qpsk(&mut rng, n);
        let sc = SensingScenario {
            n_win: 4,
            ..SensingScenario::new(vec![fixed(2, 1.0, true), fixed(9, 0.5, false)], 0.0)
        };
        let y = sensing_receive(&o, &x, &sc, &mut rng).unwrap();
        let h = delay_estimate(&o, &matched_filter(&y, &x).unwrap()).unwrap();
        let rt = (n as f64).sqrt();
        for (k, v) in h.iter().enumerate() {
            let want = match k {
                2 => rt,
                9 => 0.5 * rt,
                _ => 0.0,
            };
            assert!((v - Complex64::new(want, 0.0)).norm() < 1e-10, "cell {k}");
        }
    }

    #[test]
    fn flat_estimate_gives_single_peak() {
        let o = Ofdm::new(OfdmConfig::new(16, 4).unwrap()).unwrap();
        let a = Complex64::new(0.3, -0.2);
        let h = delay_estimate(&o, &[a; 16]).unwrap();
        assert!((h[0] - 4.0 * a).norm() < 1e-12);
        assert!(h[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn noise_only_has_expected_variance() {
        let n = 256;
        let o = Ofdm::new(OfdmConfig::new(n, 8).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = qpsk(&mut rng, n);
        let sc = SensingScenario::new(vec![], 2.5);
        let mut acc = Vec::new();
        for _ in 0..200 {
            acc.extend(sensing_receive(&o, &x, &sc, &mut rng).unwrap().iter().map(|v| v.norm_sqr()));
        }
        let m = acc.len() as f64;
        let mean = acc.iter().sum::<f64>() / m;
        // |w|^2 is exponential: std = mean
        assert!((mean - 2.5).abs() < 3.0 * 2.5 / m.sqrt());
    }

    #[test]
    fn comms_noise_per_subcarrier() {
        let n = 128;
        let o = Ofdm::new(OfdmConfig::new(n, 8).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = qpsk(&mut rng, n);
        let s2 = 0.1;
        let mut acc = 0.0;
        let trials = 400;
        for _ in 0..trials {
            let y = comms_receive(&o, &x, s2, &mut rng).unwrap();
            acc += y.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        }
        let m = (trials * n) as f64;
        assert!((acc / m - s2).abs() < 3.0 * s2 / m.sqrt());
    }

    #[test]
    fn scenario_validation() {
        let sc = SensingScenario::new(vec![fixed(20, 1.0, true)], 1.0);
        assert!(sc.validate(1024, 16).is_err());
        assert!(sc.validate(64, 32).is_err());
        assert!(sc.validate(1024, 32).is_ok());
        let two = SensingScenario::new(vec![fixed(1, 1.0, true), fixed(2, 1.0, true)], 1.0);
        assert!(two.toi().is_err());
        assert!(SensingScenario::new(vec![], 1.0).toi().is_err());
    }

    #[test]
    fn radar_equation_scales_with_range() {
        let link = RadarLink {
            tx_power_w: 1.0,
            gain_tx: 100.0,
            gain_rx: 100.0,
            carrier_hz: 28e9,
            bandwidth_hz: 400e6,
            noise_power_w: 1e-12,
        };
        let p1 = link.relative_power(1.0, 50.0);
        let p2 = link.relative_power(1.0, 100.0);
        assert!((p1 / p2 - 16.0).abs() < 1e-9);
        assert_eq!(link.delay_samples(150.0), 400);
    }
}
