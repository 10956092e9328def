use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::gumbel::gumbel_comm_term;
use super::loss::{assemble, loss_and_grad, LossSpec, Metric};
use super::params::ShapingParams;
use super::trace::{OptTrace, TraceRow};
use crate::air::{bit_table, AwgnChannel};
use crate::constellation::Constellation;
use crate::error::{invalid, Error, Result};
use crate::numerics::GaussHermite;

/// Penalty factor `d = min(max, initial * factor^(epoch / every))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltySchedule {
    pub initial: f64,
    pub factor: f64,
    pub every: usize,
    pub max: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            initial: 1.0,
            factor: 2.0,
            every: 50,
            max: 64.0,
        }
    }
}

impl PenaltySchedule {
    pub fn at(&self, epoch: usize) -> f64 {
        let k = (epoch / self.every.max(1)) as i32;
        (self.initial * self.factor.powi(k)).min(self.max)
    }
}

/// Temperature and batch size of the stochastic path, interpolated
/// geometrically from start to end over the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GumbelSchedule {
    pub tau_start: f64,
    pub tau_end: f64,
    pub batch_start: usize,
    pub batch_end: usize,
}

impl Default for GumbelSchedule {
    fn default() -> Self {
        Self {
            tau_start: 1.0,
            tau_end: 0.1,
            batch_start: 500,
            batch_end: 10_000,
        }
    }
}

impl GumbelSchedule {
    fn at(&self, frac: f64) -> (f64, usize) {
        let geo = |a: f64, b: f64| a * (b / a).powf(frac);
        (
            geo(self.tau_start, self.tau_end),
            geo(self.batch_start as f64, self.batch_end as f64).round() as usize,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimator {
    /// Deterministic Gauss-Hermite loss with its exact gradient.
    Quadrature,
    /// Sampled loss with Gumbel-softmax relaxed symbols.
    Gumbel(GumbelSchedule),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptConfig {
    pub kappa_tilde: f64,
    pub snr_db: f64,
    pub metric: Metric,
    pub epochs: usize,
    /// Initial Adam step for every parameter; when absent, points and radii
    /// use 1e-2 and logits 5e-2.
    pub lr: Option<f64>,
    pub penalty: PenaltySchedule,
    /// Gauss-Hermite order per axis used inside the optimization loop.
    pub quad_order: usize,
    pub seed: u64,
    /// Standard deviation of the seeded perturbation of the QAM start.
    pub init_noise: f64,
    pub estimator: Estimator,
    /// Train GPAS ring radii in addition to the amplitude logits.
    pub train_radii: bool,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            kappa_tilde: 2.0,
            snr_db: 10.0,
            metric: Metric::Gmi,
            epochs: 400,
            lr: None,
            penalty: PenaltySchedule::default(),
            quad_order: 16,
            seed: 0,
            init_noise: 0.01,
            estimator: Estimator::Quadrature,
            train_radii: false,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty.initial > 0.0) || !(self.penalty.max > 0.0) {
            return Err(invalid("penalty", "penalty factors must be positive"));
        }
        if !self.kappa_tilde.is_finite() || self.kappa_tilde < 1.0 {
            return Err(invalid("kappa_tilde", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs", "must be positive"));
        }
        if self.quad_order == 0 {
            return Err(invalid("quad_order", "must be positive"));
        }
        if let Some(lr) = self.lr {
            if !(lr > 0.0) {
                return Err(invalid("lr", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn sigma_c2(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }
}

/// Score used to pick the returned state: the loss at the final penalty.
fn selection_score(comm_loss: f64, kappa: f64, cfg: &OptConfig) -> f64 {
    comm_loss + super::loss::sensing_loss(kappa, cfg.kappa_tilde, cfg.penalty.max)
}

/// Runs Adam on the total loss and returns the best state seen.
pub fn optimize(init: ShapingParams, cfg: &OptConfig) -> Result<(Constellation, OptTrace)> {
    cfg.validate()?;
    AwgnChannel::from_snr_db(cfg.snr_db)?;
    let mut params = init;
    params.train_radii = cfg.train_radii && params.family == super::Family::Gpas;
    let bits = bit_table(params.base());
    let sigma2 = cfg.sigma_c2();
    let grid = GaussHermite::new(cfg.quad_order).complex_noise_grid(sigma2);
    let steps = match cfg.lr {
        Some(lr) => params.step_sizes(lr, lr),
        None => params.step_sizes(super::params::POINT_LR, super::params::LOGIT_LR),
    };
    let mut theta = params.flatten();
    let mut adam = Adam::new(theta.len());
    let mut trace = OptTrace::default();
    let mut best: Option<(f64, Vec<f64>, usize)> = None;

    for epoch in 0..=cfg.epochs {
        let last = epoch == cfg.epochs;
        let d = cfg.penalty.at(epoch.min(cfg.epochs - 1));
        // cosine decay factor applied to every per-coordinate step
        let lr = 0.5 * (1.0 + (PI * epoch as f64 / cfg.epochs as f64).cos());
        params.set_flat(&theta);
        let (raw_x, p) = params.raw_points_probs();
        let spec = LossSpec {
            bits: &bits,
            sigma2,
            metric: cfg.metric,
            kappa_tilde: cfg.kappa_tilde,
            d,
        };
        let (report, grad) = match cfg.estimator {
            Estimator::Quadrature => loss_and_grad(&raw_x, &p, &spec, &grid, !last),
            Estimator::Gumbel(sched) => {
                let report = loss_and_grad(&raw_x, &p, &spec, &grid, false).0;
                if last {
                    (report, None)
                } else {
                    let (tau, batch) = sched.at(epoch as f64 / cfg.epochs as f64);
                    let e2: f64 = raw_x.iter().zip(&p).map(|(x, q)| q * x.norm_sqr()).sum();
                    let s = e2.sqrt().recip();
                    let x: Vec<_> = raw_x.iter().map(|v| v * s).collect();
                    let seed = cfg.seed.wrapping_mul(0x9E37_79B9).wrapping_add(epoch as u64);
                    let (info, g) =
                        gumbel_comm_term(&x, &p, &bits, sigma2, cfg.metric, tau, batch.max(1), seed);
                    (report, assemble(&raw_x, &p, info, Some(g), &spec).1)
                }
            }
        };
        if !report.loss.is_finite() || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                trace: Box::new(trace),
            });
        }
        let score = selection_score(report.comm_loss, report.kurtosis, cfg);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, theta.clone(), epoch));
        }
        trace.rows.push(TraceRow {
            epoch,
            loss: report.loss,
            metric_bits: report.metric_bits,
            kurtosis: report.kurtosis,
            penalty_d: d,
            lr_factor: lr,
            violated: report.kurtosis > cfg.kappa_tilde,
            best_score: best.as_ref().map(|b| b.0).unwrap_or(score),
        });
        if let Some(g) = grad {
            let flat = params.backward(&g.points, &g.probs);
            if flat.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    trace: Box::new(trace),
                });
            }
            adam.step(&mut theta, &flat, lr, &steps);
        }
    }
    let (_, best_theta, best_epoch) = best.expect("at least one epoch ran");
    params.set_flat(&best_theta);
    trace.best_epoch = Some(best_epoch);
    let mut c = params.project()?;
    c.meta.kappa_tilde = Some(cfg.kappa_tilde);
    c.meta.snr_db = Some(cfg.snr_db);
    Ok((c, trace))
}
