//! Geometric, probabilistic, joint and PAS-constrained constellation shaping.
//!
//! Every family is a parametrization mapped onto a valid constellation by
//! [`ShapingParams::project`]; [`optimize`] minimizes the joint loss
//! `(M - I) / M + d max(0, kappa - kappa_tilde)` with Adam.

mod adam;
mod gumbel;
mod loss;
mod optimize;
mod params;
mod trace;

pub use gumbel::gumbel_sample;
pub use loss::{evaluate_loss, sensing_loss, LossBreakdown, Metric, RawGradient};
pub use optimize::{optimize, Estimator, GumbelSchedule, OptConfig, PenaltySchedule};
pub use params::{Family, ShapingParams};
pub use trace::{OptTrace, TraceRow};

use crate::constellation::Constellation;

/// Order used when reporting the loss of a finished constellation.
pub const REPORT_ORDER: usize = 32;

/// Total loss of a constellation at the final penalty factor of `cfg`.
pub fn total_loss(c: &Constellation, cfg: &OptConfig) -> f64 {
    evaluate_loss(c, cfg.metric, cfg.sigma_c2(), cfg.kappa_tilde, cfg.penalty.max, REPORT_ORDER).loss
}

/// Loss and flat parameter gradient at `params`, evaluated with a
/// Gauss-Hermite rule of the given order. Exposed for gradient checking.
pub fn loss_and_gradient(
    params: &ShapingParams,
    metric: Metric,
    sigma_c2: f64,
    kappa_tilde: f64,
    d: f64,
    order: usize,
) -> (f64, Vec<f64>) {
    let bits = crate::air::bit_table(params.base());
    let grid = crate::numerics::GaussHermite::new(order).complex_noise_grid(sigma_c2);
    let (raw_x, p) = params.raw_points_probs();
    let spec = loss::LossSpec {
        bits: &bits,
        sigma2: sigma_c2,
        metric,
        kappa_tilde,
        d,
    };
    let (report, g) = loss::loss_and_grad(&raw_x, &p, &spec, &grid, true);
    let g = g.expect("gradient requested");
    (report.loss, params.backward(&g.points, &g.probs))
}

/// Loss only, for finite differencing against [`loss_and_gradient`].
pub fn loss_at(params: &ShapingParams, metric: Metric, sigma_c2: f64, kappa_tilde: f64, d: f64, order: usize) -> f64 {
    let bits = crate::air::bit_table(params.base());
    let grid = crate::numerics::GaussHermite::new(order).complex_noise_grid(sigma_c2);
    let (raw_x, p) = params.raw_points_probs();
    let spec = loss::LossSpec {
        bits: &bits,
        sigma2: sigma_c2,
        metric,
        kappa_tilde,
        d,
    };
    loss::loss_and_grad(&raw_x, &p, &spec, &grid, false).0.loss
}
