//! Short optimization runs: constraint handling and trace bookkeeping.

use isac_core::air::{gmi_estimate, AwgnChannel, Method};
use isac_core::shaping::{loss_and_gradient, loss_at, optimize, Family, Metric, OptConfig, ShapingParams};

fn short(kappa_tilde: f64, metric: Metric) -> OptConfig {
    OptConfig {
        kappa_tilde,
        metric,
        epochs: 60,
        quad_order: 8,
        seed: 2,
        ..OptConfig::default()
    }
}

#[test]
fn every_family_respects_the_kurtosis_target() {
    for family in Family::ALL {
        let cfg = short(1.3, Metric::Gmi);
        let init = ShapingParams::init(family, 6, cfg.seed, cfg.init_noise).unwrap();
        let (c, trace) = optimize(init, &cfg).unwrap();
        assert_eq!(trace.len(), cfg.epochs + 1);
        assert!(trace.is_monotone(), "{family}");
        assert!(c.kurtosis() <= cfg.kappa_tilde + 0.01, "{family}: kappa {}", c.kurtosis());
        assert!((c.moments().power - 1.0).abs() < 1e-9);
        assert_eq!(c.meta.family.as_deref(), Some(family.name()));
    }
}

#[test]
fn loose_target_improves_on_the_start() {
    let cfg = short(2.0, Metric::Gmi);
    let ch = AwgnChannel::from_snr_db(cfg.snr_db).unwrap();
    let q = Method::Quadrature { order: Some(24) };
    let init = ShapingParams::init(Family::Joint, 6, cfg.seed, cfg.init_noise).unwrap();
    let start = gmi_estimate(&init.project().unwrap(), &ch, q).unwrap().bits;
    let (c, _) = optimize(init, &cfg).unwrap();
    let end = gmi_estimate(&c, &ch, q).unwrap().bits;
    assert!(end > start, "start {start} end {end}");
}

#[test]
fn gradient_matches_finite_differences_for_every_family() {
    let sigma2 = 0.2;
    for family in Family::ALL {
        for metric in [Metric::Mi, Metric::Gmi] {
            let p = ShapingParams::init(family, 4, 9, 0.05).unwrap();
            let (_, g) = loss_and_gradient(&p, metric, sigma2, 1.1, 4.0, 6);
            let theta = p.flatten();
            for i in (0..theta.len()).step_by(3) {
                let h = 1e-6;
                let mut q = p.clone();
                let mut t = theta.clone();
                t[i] += h;
                q.set_flat(&t);
                let up = loss_at(&q, metric, sigma2, 1.1, 4.0, 6);
                t[i] -= 2.0 * h;
                q.set_flat(&t);
                let down = loss_at(&q, metric, sigma2, 1.1, 4.0, 6);
                let fd = (up - down) / (2.0 * h);
                assert!(
                    (fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()),
                    "{family} {metric:?} coordinate {i}: fd {fd} analytic {}",
                    g[i]
                );
            }
        }
    }
}
