//! Monostatic OFDM sensing: echo simulation, matched-filter channel
//! estimation, delay-domain CA-CFAR detection and the analytic link between
//! constellation kurtosis and detection probability.
//!
//! With random data on the subcarriers the matched-filter estimate carries
//! self-interference of power `sum_j |a_j|^2 (kappa - 1)`, which spreads over
//! the whole delay profile. A target of interest therefore sees the SINR
//! `N |a|^2 / (sum_j |a_j|^2 (kappa - 1) + sigma^2)`.

mod cfar;
mod channel;
mod ofdm;

pub use cfar::{cfar_detect, noise_only_false_alarms, CfarParams};
pub use channel::{
    comms_receive, delay_estimate, matched_filter, sensing_receive, AmplitudeModel, RadarLink, SensingScenario,
    Target,
};
pub use ofdm::{Ofdm, OfdmConfig};

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{invalid, Result};

const TRIAL_CHUNK: usize = 128;

impl SensingScenario {
    pub fn cfar(&self) -> CfarParams {
        CfarParams {
            pfa: self.pfa,
            n_win: self.n_win,
            n_guard: self.n_guard,
        }
    }

    /// Variance of the matched-filter estimate error for kurtosis `kappa`.
    pub fn estimate_variance(&self, kappa: f64) -> f64 {
        let p: f64 = self.targets.iter().map(|t| t.amplitude.power()).sum();
        p * (kappa - 1.0) + self.sigma_s2
    }
}

/// Average SINR of the target of interest after delay-domain processing.
pub fn analytic_sinr(scenario: &SensingScenario, kappa: f64, n: usize) -> Result<f64> {
    let toi = scenario.toi()?;
    Ok(n as f64 * toi.amplitude.power() / scenario.estimate_variance(kappa))
}

/// Detection probability `pfa^(1 / (1 + gamma))` of an ideal cell-averaging
/// detector with an unlimited reference window.
pub fn analytic_pd(gamma: f64, pfa: f64) -> f64 {
    pfa.powf(1.0 / (1.0 + gamma))
}

/// Detection probability of CA-CFAR with `n_win` exponential reference cells
/// for a Rayleigh-fluctuating cell of mean SINR `gamma`.
pub fn analytic_pd_ca_cfar(gamma: f64, pfa: f64, n_win: usize) -> f64 {
    let nw = n_win as f64;
    let alpha = nw * (pfa.powf(-1.0 / nw) - 1.0);
    (1.0 + alpha / (nw * (1.0 + gamma))).powf(-nw)
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let den = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Monte Carlo detection rate of the target of interest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdEstimate {
    pub pd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub detections: u64,
    pub trials: u64,
}

impl PdEstimate {
    pub fn contains(&self, v: f64) -> bool {
        self.ci_lo <= v && v <= self.ci_hi
    }

    pub fn overlaps(&self, other: &PdEstimate) -> bool {
        self.ci_lo <= other.ci_hi && other.ci_lo <= self.ci_hi
    }
}

/// Simulates `trials` independent OFDM symbols with fresh random data and
/// target fluctuations and runs CA-CFAR on the delay cell of the target of
/// interest. The 95% Wilson interval is reported.
pub fn simulate_pd(
    c: &Constellation,
    scenario: &SensingScenario,
    cfg: &OfdmConfig,
    trials: usize,
) -> Result<PdEstimate> {
    let ofdm = Ofdm::new(*cfg)?;
    scenario.validate(cfg.n, cfg.cp_len)?;
    let cell = scenario.toi()?.delay;
    let pick = WeightedIndex::new(c.probs()).map_err(|e| invalid("probs", e.to_string()))?;
    let cfar = scenario.cfar();
    let points = c.points();
    let parts: Vec<Result<u64>> = (0..trials.div_ceil(TRIAL_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(chunk as u64);
            let mut hits = 0;
            for _ in 0..TRIAL_CHUNK.min(trials - chunk * TRIAL_CHUNK) {
                let x: Vec<Complex64> = (0..cfg.n).map(|_| points[pick.sample(&mut rng)]).collect();
                let y = sensing_receive(&ofdm, &x, scenario, &mut rng)?;
                let h = delay_estimate(&ofdm, &matched_filter(&y, &x)?)?;
                let power: Vec<f64> = h.iter().map(|v| v.norm_sqr()).collect();
                hits += u64::from(power[cell] > cfar.threshold(&power, cell));
            }
            Ok(hits)
        })
        .collect();
    let mut detections = 0;
    for p in parts {
        detections += p?;
    }
    let (ci_lo, ci_hi) = wilson_interval(detections, trials as u64, 1.959_963_984_540_054);
    Ok(PdEstimate {
        pd: detections as f64 / trials.max(1) as f64,
        ci_lo,
        ci_hi,
        detections,
        trials: trials as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{make_psk, make_qam};

    fn two_target(int_power: f64) -> SensingScenario {
        SensingScenario::new(
            vec![
                Target {
                    delay: 10,
                    amplitude: AmplitudeModel::Swerling1 { mean_power: 1.0 },
                    is_toi: true,
                },
                Target {
                    delay: 200,
                    amplitude: AmplitudeModel::Swerling0 { power: int_power },
                    is_toi: false,
                },
            ],
            1.0,
        )
    }

    #[test]
    fn sinr_examples() {
        let sc = two_target(100.0);
        assert!((analytic_sinr(&sc, 1.32, 1024).unwrap() - 1024.0 / (101.0 * 0.32 + 1.0)).abs() < 1e-12);
        assert!((analytic_sinr(&sc, 1.0, 1024).unwrap() - 1024.0).abs() < 1e-12);
        let mut last = f64::INFINITY;
        for k in 0..10 {
            let g = analytic_sinr(&sc, 1.0 + 0.1 * k as f64, 1024).unwrap();
            assert!(g < last);
            last = g;
        }
    }

    #[test]
    fn pd_examples() {
        assert!((analytic_pd(0.0, 1e-3) - 1e-3).abs() < 1e-15);
        assert!((analytic_pd(9.0, 1e-3) - 10f64.powf(-0.3)).abs() < 1e-12);
        assert!(analytic_pd(1e9, 1e-3) > 0.999_999);
        // the finite window converges to the limit law
        let g = 20.0;
        assert!((analytic_pd_ca_cfar(g, 1e-3, 1_000_000) - analytic_pd(g, 1e-3)).abs() < 1e-5);
        assert!(analytic_pd_ca_cfar(g, 1e-3, 100) < analytic_pd(g, 1e-3));
        assert!((analytic_pd_ca_cfar(0.0, 1e-3, 100) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((hi - lo - 0.19).abs() < 0.01);
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
    }

    #[test]
    fn unit_modulus_beats_qam() {
        let sc = two_target(100.0);
        let cfg = OfdmConfig {
            n: 256,
            cp_len: 256,
            seed: 3,
        };
        let sc = SensingScenario { n_win: 32, ..sc };
        let psk = simulate_pd(&make_psk(4).unwrap(), &sc, &cfg, 1500).unwrap();
        let qam = simulate_pd(&make_qam(6).unwrap(), &sc, &cfg, 1500).unwrap();
        assert!(psk.pd > qam.pd, "{psk:?} {qam:?}");
        assert!(psk.ci_hi > qam.ci_hi);
    }

    #[test]
    fn simulation_is_reproducible() {
        let sc = SensingScenario {
            n_win: 16,
            ..two_target(10.0)
        };
        let cfg = OfdmConfig { n: 256, cp_len: 256, seed: 1 };
        let a = simulate_pd(&make_qam(4).unwrap(), &sc, &cfg, 300).unwrap();
        let b = simulate_pd(&make_qam(4).unwrap(), &sc, &cfg, 300).unwrap();
        assert_eq!(a, b);
    }
}
