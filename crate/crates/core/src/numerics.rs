//! Special functions and quadrature rules shared across modules.

use std::f64::consts::PI;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
///
/// Finite for all `x >= -26.6`; overflows to `+inf` below that, where the
/// unscaled product itself is not representable.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        let e = (x * x).exp();
        if !e.is_finite() {
            return f64::INFINITY;
        }
        return 2.0 * e - erfcx(-x);
    }
    if x < 8.0 {
        (x * x).exp() * libm::erfc(x)
    } else {
        erfcx_continued_fraction(x)
    }
}

/// Laplace continued fraction, accurate to machine precision for x >= 8.
fn erfcx_continued_fraction(x: f64) -> f64 {
    // erfcx(x) = 1/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut tail = 0.0;
    for k in (1..=60).rev() {
        tail = (k as f64 * 0.5) / (x + tail);
    }
    1.0 / (SQRT_PI * (x + tail))
}

/// `ln(erfcx(x))`, finite for every finite `x`.
pub fn ln_erfcx(x: f64) -> f64 {
    if x < -5.0 {
        // erfcx(x) = 2 e^{x^2} - erfcx(-x); the second term is below 1e-11 relative.
        let rel = erfcx(-x) * (-x * x).exp() * 0.5;
        x * x + std::f64::consts::LN_2 + (-rel).ln_1p()
    } else {
        erfcx(x).ln()
    }
}

/// Standard normal density.
pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// `ln(1 - Phi(t))` for the standard normal CDF `Phi`.
pub fn ln_normal_sf(t: f64) -> f64 {
    let z = t / std::f64::consts::SQRT_2;
    if t < 0.0 {
        (0.5 * libm::erfc(z)).ln()
    } else {
        (0.5f64).ln() + ln_erfcx(z) - 0.5 * t * t
    }
}

/// Numerically stable `ln(sum(exp(v)))`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|&a| (a - m).exp()).sum::<f64>().ln()
}

/// Entropy in bits of a probability vector (zero entries contribute nothing).
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&q| q > 0.0)
        .map(|&q| q * q.log2())
        .sum::<f64>()
}

/// Binary reflected Gray code.
pub fn gray(n: u32) -> u32 {
    n ^ (n >> 1)
}

/// Inverse of [`gray`].
pub fn gray_inverse(mut g: u32) -> u32 {
    let mut n = g;
    while g > 0 {
        g >>= 1;
        n ^= g;
    }
    n
}

/// Gauss-Hermite rule for `int exp(-x^2) f(x) dx`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes and weights of order `n` via Newton iteration on the normalized
    /// Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite order must be positive");
        const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[m - 1] = 0.0;
        }
        Self {
            nodes: x,
            weights: w,
        }
    }

    /// Tensor-product rule for a circularly symmetric complex Gaussian with
    /// total variance `sigma2`: returns `(noise sample, probability weight)`
    /// pairs whose weights sum to one.
    pub fn complex_noise_grid(&self, sigma2: f64) -> Vec<(num_complex::Complex64, f64)> {
        let s = sigma2.sqrt();
        let mut out = Vec::with_capacity(self.nodes.len() * self.nodes.len());
        for (xr, wr) in self.nodes.iter().zip(&self.weights) {
            for (xi, wi) in self.nodes.iter().zip(&self.weights) {
                out.push((num_complex::Complex64::new(s * xr, s * xi), wr * wi / PI));
            }
        }
        out
    }
}

/// Gauss-Legendre rule mapped to `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 1);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let xm = 0.5 * (b + a);
        let xl = 0.5 * (b - a);
        let nf = n as f64;
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            x[i] = xm - xl * z;
            x[n - 1 - i] = xm + xl * z;
            w[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
            w[n - 1 - i] = w[i];
        }
        Self {
            nodes: x,
            weights: w,
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Composite Gauss-Legendre integration over `[a, b]`, doubling the panel
/// count until two successive estimates agree to `rel_tol`.
pub fn integrate_composite(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let rule = GaussLegendre::new(20, -1.0, 1.0);
    let eval = |panels: usize| -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + h * k as f64;
                let mid = lo + 0.5 * h;
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| 0.5 * h * w * f(mid + 0.5 * h * x))
                    .sum::<f64>()
            })
            .sum()
    };
    let mut panels = 8;
    let mut prev = eval(panels);
    while panels < 1 << 16 {
        panels *= 2;
        let cur = eval(panels);
        if (cur - prev).abs() <= rel_tol * cur.abs().max(f64::MIN_POSITIVE) {
            return cur;
        }
        prev = cur;
    }
    prev
}
