//! Bounds on the maximum mutual information under a kurtosis constraint.
//!
//! The entropy-maximizing density under constraints on the zeroth, second and
//! fourth moments is `f(z) = exp(g0 + g2 |z|^2 + g4 |z|^4)`. In `u = |z|^2`
//! this is a normal density truncated to `u >= 0`, which is how the solver
//! parametrizes it: with `t` the standardized truncation point, the ratio
//! `C2 / C1^2` is a monotone function of `t` alone, so the system reduces to a
//! single well-conditioned scalar root. The classical one-dimensional equation
//! in `g2` is exposed too ([`gamma2_equation`]) but is not used for solving:
//! it is singular at the Gaussian end and loses digits as `C2 / C1^2 -> 2`.

use std::f64::consts::{E, LN_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{erfcx, integrate_composite, ln_erfcx};

/// Smallest transmit kurtosis handed to the lower-bound solver.
pub const KAPPA_FLOOR: f64 = 1.0 + 1e-6;

/// Ratios `C2 / C1^2` within this distance of 2 are treated as Gaussian.
const GAUSSIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSide {
    /// Transmit-side entropy maximization.
    Lower,
    /// Receive-side entropy maximization.
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraints {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl MomentConstraints {
    pub fn new(c1: f64, c2: f64) -> Self {
        Self { c0: 1.0, c1, c2 }
    }

    /// Scale-free ratio `C2 / C1^2`, in `(1, 2]` for feasible sets.
    pub fn ratio(&self) -> f64 {
        self.c2 / (self.c1 * self.c1)
    }

    fn infeasible(&self, reason: impl Into<String>) -> Error {
        Error::Infeasible {
            c0: self.c0,
            c1: self.c1,
            c2: self.c2,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxEntParams {
    pub gamma0: f64,
    pub gamma2: f64,
    pub gamma4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    /// Bits per symbol.
    pub lower: f64,
    /// Bits per symbol.
    pub upper: f64,
    pub lower_params: MaxEntParams,
    pub upper_params: MaxEntParams,
    /// Kurtosis actually used when the requested one was outside `[1 + 1e-6, 2]`.
    pub kappa_clamped: Option<f64>,
}

/// Moment constraints of the transmit (lower) or receive (upper) problem.
pub fn constraints_for(
    side: BoundSide,
    es: f64,
    sigma_c2: f64,
    kappa_tilde: f64,
) -> Result<MomentConstraints> {
    if !(es > 0.0) || !es.is_finite() {
        return Err(crate::error::invalid("es", format!("must be positive, got {es}")));
    }
    if !(sigma_c2 > 0.0) || !sigma_c2.is_finite() {
        return Err(crate::error::invalid(
            "sigma_c2",
            format!("must be positive, got {sigma_c2}"),
        ));
    }
    Ok(match side {
        BoundSide::Lower => MomentConstraints::new(es, kappa_tilde),
        BoundSide::Upper => MomentConstraints::new(
            es + sigma_c2,
            kappa_tilde + 4.0 * es * sigma_c2 + 2.0 * sigma_c2 * sigma_c2,
        ),
    })
}

/// Inverse Mills ratio `phi(t) / (1 - Phi(t))`.
fn inverse_mills(t: f64) -> f64 {
    (2.0 / PI).sqrt() / erfcx(t / SQRT_2)
}

/// Returns `(lambda - t, rho - 1)` where `rho = C2 / C1^2` of the truncated
/// normal with standardized truncation point `t`.
fn shape(t: f64) -> (f64, f64) {
    if t < 5.0 {
        let lam = inverse_mills(t);
        let d = lam - t;
        (d, (1.0 - lam * d) / (d * d))
    } else {
        // Continued fraction for the Mills ratio avoids cancellation in lambda - t.
        let mut tail = 0.0;
        for k in (3..=300).rev() {
            tail = k as f64 / (t + tail);
        }
        let q2 = 2.0 / (t + tail);
        let q = 1.0 / (t + q2);
        (q, q2 * (t + q2) - 1.0)
    }
}

/// Solves the moment system for `(g0, g2, g4)`.
pub fn solve_max_entropy(c: &MomentConstraints) -> Result<MaxEntParams> {
    if (c.c0 - 1.0).abs() > 1e-12 {
        return Err(c.infeasible("C0 must equal 1"));
    }
    if !(c.c1 > 0.0) || !c.c2.is_finite() {
        return Err(c.infeasible("C1 must be positive"));
    }
    let excess = c.c2 / (c.c1 * c.c1) - 1.0;
    if !(excess > 0.0) {
        return Err(c.infeasible("C2 <= C1^2: the density degenerates to a ring"));
    }
    if (excess - 1.0).abs() <= GAUSSIAN_TOL {
        return Ok(MaxEntParams {
            gamma0: (1.0 / (PI * c.c1)).ln(),
            gamma2: -1.0 / c.c1,
            gamma4: 0.0,
        });
    }
    if excess > 1.0 {
        return Err(c.infeasible("C2 > 2 C1^2 is heavier-tailed than the ansatz admits"));
    }
    // rho - 1 rises monotonically from 0 (t -> -inf) to 1 (t -> +inf).
    let (mut lo, mut hi) = (-1e9_f64, 1e9_f64);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if shape(mid).1 < excess {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let (d, _) = shape(t);
    let sigma = c.c1 / d;
    let gamma0 = -(PI * sigma * (PI / 2.0).sqrt()).ln() - ln_erfcx(t / SQRT_2);
    Ok(MaxEntParams {
        gamma0,
        gamma2: -t / sigma,
        gamma4: -0.5 / (sigma * sigma),
    })
}

/// The `g2` component of [`solve_max_entropy`].
pub fn solve_gamma2(c: &MomentConstraints) -> Result<f64> {
    solve_max_entropy(c).map(|p| p.gamma2)
}

/// Closed forms for `g0` and `g4` given `g2`.
pub fn gamma0_gamma4(gamma2: f64, c: &MomentConstraints) -> Result<(f64, f64)> {
    let arg = c.c1 * (gamma2 * c.c1 + 1.0) / c.c2 - gamma2;
    if !(arg > 0.0) {
        return Err(c.infeasible(format!("non-positive logarithm argument {arg}")));
    }
    Ok(((arg / PI).ln(), -(gamma2 * c.c1 + 1.0) / (2.0 * c.c2)))
}

/// Right-hand side of the scalar equation in `g2` whose root gives `C0`.
///
/// Defined for `g2 C1 + 1 > 0`; returns NaN otherwise.
pub fn gamma2_equation(gamma2: f64, c: &MomentConstraints) -> f64 {
    let s = gamma2 * c.c1 + 1.0;
    if !(s > 0.0) {
        return f64::NAN;
    }
    let a = -gamma2 * (c.c2 / (2.0 * s)).sqrt();
    (c.c1 * s / c.c2 - gamma2) * (PI * c.c2 / (2.0 * s)).sqrt() * erfcx(a)
}

/// Differential entropy in bits of the max-entropy density.
pub fn max_entropy_bits(p: &MaxEntParams, c: &MomentConstraints) -> f64 {
    (-p.gamma0 - c.c1 * p.gamma2 - c.c2 * p.gamma4) / LN_2
}

/// Lower and upper bound on the maximum MI for unit-variance-scaled inputs.
///
/// `kappa_tilde` outside `[1 + 1e-6, 2]` is clamped and the clamp reported.
pub fn mi_bounds(es: f64, sigma_c2: f64, kappa_tilde: f64) -> Result<BoundPair> {
    if !kappa_tilde.is_finite() {
        return Err(crate::error::invalid("kappa_tilde", "must be finite"));
    }
    let k = kappa_tilde.clamp(KAPPA_FLOOR, 2.0);
    let kappa_clamped = (k != kappa_tilde).then_some(k);
    // kurtosis is a normalized moment: the fourth moment constraint is k Es^2
    let c2x = k * es * es;
    let lower_c = constraints_for(BoundSide::Lower, es, sigma_c2, c2x)?;
    let upper_c = constraints_for(BoundSide::Upper, es, sigma_c2, c2x)?;
    let lower_params = solve_max_entropy(&lower_c)?;
    let upper_params = solve_max_entropy(&upper_c)?;
    let hw = (PI * E * sigma_c2).log2();
    let hx = max_entropy_bits(&lower_params, &lower_c);
    let hy = max_entropy_bits(&upper_params, &upper_c);
    let lower = (hx - hw).exp2().ln_1p() / LN_2;
    let upper = (hy - hw).max(0.0);
    Ok(BoundPair {
        lower,
        upper,
        lower_params,
        upper_params,
        kappa_clamped,
    })
}

/// Closed-form moment `E|z|^(2q)` of the density (the three Gradshteyn
/// integrals), evaluated with the scaled complementary error function.
pub fn closed_form_moment(p: &MaxEntParams, q: u32) -> Result<f64> {
    if q > 2 {
        return Err(crate::error::invalid("q", "only q = 0, 1, 2 have closed forms"));
    }
    if p.gamma4 > 0.0 || (p.gamma4 == 0.0 && p.gamma2 >= 0.0) {
        return Err(crate::error::invalid("gamma4", "the integral diverges"));
    }
    let a_pref = PI * p.gamma0.exp();
    if p.gamma4 == 0.0 {
        let l = -p.gamma2;
        let fact = [1.0, 1.0, 2.0][q as usize];
        return Ok(a_pref * fact / l.powi(q as i32 + 1));
    }
    let g4 = -p.gamma4;
    let g2 = p.gamma2;
    let arg = -g2 / (2.0 * g4.sqrt());
    // pi e^g0 * erfc(arg) e^{arg^2}, kept in the log domain
    let b = (PI.ln() + p.gamma0 + ln_erfcx(arg)).exp();
    let sp = (PI / g4).sqrt();
    Ok(match q {
        0 => 0.5 * sp * b,
        1 => a_pref / (2.0 * g4) + g2 * PI.sqrt() / (4.0 * g4.powf(1.5)) * b,
        _ => g2 * a_pref / (4.0 * g4 * g4) + (1.0 / (4.0 * g4) + g2 * g2 / (8.0 * g4 * g4)) * sp * b,
    })
}

/// Interval in `u = |z|^2` carrying all but a negligible part of the mass.
fn support(p: &MaxEntParams) -> (f64, f64) {
    if p.gamma4 == 0.0 {
        return (0.0, 80.0 / -p.gamma2);
    }
    let sigma = (-0.5 / p.gamma4).sqrt();
    let mu = p.gamma2 * sigma * sigma;
    ((mu - 40.0 * sigma).max(0.0), (mu + 40.0 * sigma).max(40.0 * sigma))
}

/// Exponent `g0 + g2 u + g4 u^2`, rearranged around its peak to avoid
/// cancellation between large terms.
fn log_density(p: &MaxEntParams, u: f64) -> f64 {
    if p.gamma4 == 0.0 {
        return p.gamma0 + p.gamma2 * u;
    }
    let g4 = -p.gamma4;
    let v = p.gamma2 / (2.0 * g4);
    p.gamma0 + p.gamma2 * p.gamma2 / (4.0 * g4) - g4 * (u - v) * (u - v)
}

/// Moment `E|z|^(2q)` by direct numerical quadrature in `u = |z|^2`.
pub fn moment_oracle(p: &MaxEntParams, q: u32) -> Result<f64> {
    if p.gamma4 > 0.0 || (p.gamma4 == 0.0 && p.gamma2 >= 0.0) {
        return Err(crate::error::invalid("gamma4", "the integral diverges"));
    }
    let (a, b) = support(p);
    Ok(integrate_composite(
        |u| PI * u.powi(q as i32) * log_density(p, u).exp(),
        a,
        b,
        1e-14,
    ))
}

/// Differential entropy `-int f log2 f` by numerical quadrature.
pub fn entropy_oracle_bits(p: &MaxEntParams) -> Result<f64> {
    if p.gamma4 > 0.0 || (p.gamma4 == 0.0 && p.gamma2 >= 0.0) {
        return Err(crate::error::invalid("gamma4", "the integral diverges"));
    }
    let (a, b) = support(p);
    let nats = integrate_composite(
        |u| {
            let g = log_density(p, u);
            -PI * g * g.exp()
        },
        a,
        b,
        1e-14,
    );
    Ok(nats / LN_2)
}
