//! Sweeps and simulations behind the subcommands.

use std::path::Path;

use anyhow::{Context, Result};
use isac_core::air::{gmi_estimate, mi_estimate, AwgnChannel, Method};
use isac_core::bounds::mi_bounds;
use isac_core::sensing::{
    analytic_pd, analytic_pd_ca_cfar, analytic_sinr, simulate_pd, AmplitudeModel, OfdmConfig, SensingScenario,
};
use isac_core::shaping::{optimize, Family, ShapingParams};
use isac_core::Constellation;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AirCurveConfig, SenseConfig, TradeoffConfig};

pub const BOUNDS_UNITS: &str = "snr_db [dB], kappa_tilde [-], bounds and capacity [bit/symbol]";
pub const TRADEOFF_UNITS: &str = "snr_db [dB], kappa [-], mi/gmi/entropy/bounds [bit/symbol]";
pub const AIR_UNITS: &str = "snr_db [dB], kappa [-], entropy/mi/gmi [bit/symbol]";
pub const SENSE_UNITS: &str = "range_or_delay [m or samples], pd/ci [probability], kappa [-]";

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRow {
    pub snr_db: f64,
    pub kappa_tilde: f64,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub awgn_capacity: f64,
}

/// Lower and upper MI bounds on a (SNR, kurtosis) grid.
pub fn bounds_table(snr_db: &[f64], kappa: &[f64]) -> Result<Vec<BoundsRow>> {
    let mut rows = Vec::with_capacity(snr_db.len() * kappa.len());
    for &s in snr_db {
        let sigma2 = 10f64.powf(-s / 10.0);
        for &k in kappa {
            let b = mi_bounds(1.0, sigma2, k)?;
            rows.push(BoundsRow {
                snr_db: s,
                kappa_tilde: k,
                lower: b.lower,
                upper: b.upper,
                gap: b.upper - b.lower,
                awgn_capacity: (1.0 + 1.0 / sigma2).log2(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct TradeoffRow {
    pub family: Family,
    pub kappa_tilde: f64,
    pub seed: u64,
    pub snr_db: f64,
    pub kappa: f64,
    pub entropy: f64,
    pub mi: f64,
    pub gmi: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub constellation_path: String,
    #[serde(skip)]
    pub constellation: Constellation,
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

/// Optimizes one constellation per (family, target, seed) and reports its
/// rates next to the bounds at the target. Points run on a bounded pool;
/// rows come back in config order. With `const_dir` each constellation is
/// also written as JSON.
pub fn run_tradeoff_sweep(cfg: &TradeoffConfig, const_dir: Option<&Path>) -> Result<Vec<TradeoffRow>> {
    cfg.validate()?;
    if let Some(d) = const_dir {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let ch = AwgnChannel::from_snr_db(cfg.snr_db)?;
    let mut points = Vec::new();
    for &family in &cfg.families {
        for &kt in &cfg.kappa_grid {
            for &seed in &cfg.seeds {
                points.push((family, kt, seed));
            }
        }
    }
    let q = Method::Quadrature {
        order: Some(cfg.report_order),
    };
    pool(cfg.threads)?.install(|| {
        points
            .par_iter()
            .map(|&(family, kt, seed)| {
                let opt = cfg.opt_config(kt, seed);
                let init = ShapingParams::init(family, cfg.bits, seed, opt.init_noise)?;
                let (c, _) = optimize(init, &opt)?;
                let b = mi_bounds(1.0, ch.sigma_c2, kt)?;
                let path = match const_dir {
                    Some(d) => {
                        let p = d.join(format!("{family}_k{kt:.3}_s{seed}.json"));
                        std::fs::write(&p, c.to_json()?).with_context(|| format!("writing {}", p.display()))?;
                        p.display().to_string()
                    }
                    None => String::new(),
                };
                Ok(TradeoffRow {
                    family,
                    kappa_tilde: kt,
                    seed,
                    snr_db: cfg.snr_db,
                    kappa: c.kurtosis(),
                    entropy: c.entropy_bits(),
                    mi: mi_estimate(&c, &ch, q)?.bits,
                    gmi: gmi_estimate(&c, &ch, q)?.bits,
                    lower_bound: b.lower,
                    upper_bound: b.upper,
                    constellation_path: path,
                    constellation: c,
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AirRow {
    pub name: String,
    pub snr_db: f64,
    pub kappa: f64,
    pub entropy: f64,
    pub mi: f64,
    pub gmi: f64,
}

/// MI and GMI of one constellation over an SNR grid.
pub fn air_curve_for(name: &str, c: &Constellation, snr_db: &[f64], order: usize) -> Result<Vec<AirRow>> {
    let q = Method::Quadrature { order: Some(order) };
    snr_db
        .iter()
        .map(|&s| {
            let ch = AwgnChannel::from_snr_db(s)?;
            Ok(AirRow {
                name: name.to_string(),
                snr_db: s,
                kappa: c.kurtosis(),
                entropy: c.entropy_bits(),
                mi: mi_estimate(c, &ch, q)?.bits,
                gmi: gmi_estimate(c, &ch, q)?.bits,
            })
        })
        .collect()
}

/// Builds every configured constellation and evaluates its AIR curve.
pub fn run_air_curve(cfg: &AirCurveConfig) -> Result<Vec<AirRow>> {
    let curves: Vec<Result<Vec<AirRow>>> = cfg
        .constellations
        .par_iter()
        .map(|e| {
            let c = e.source.build().with_context(|| format!("building `{}`", e.name))?;
            air_curve_for(&e.name, &c, &cfg.snr_db, cfg.quad_order)
        })
        .collect();
    let mut rows = Vec::new();
    for c in curves {
        rows.extend(c?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct SenseRow {
    pub range_or_delay: f64,
    pub pd_analytic: f64,
    pub pd_sim: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub kappa: f64,
    /// Exact law of the finite CA-CFAR window, for reference.
    pub pd_finite_window: f64,
}

/// Monte Carlo detection probability of the target of interest next to the
/// analytic law. With a range sweep the target of interest is moved and
/// rescaled per range; otherwise one row is produced at its configured delay.
pub fn run_sense(c: &Constellation, cfg: &SenseConfig, seed: u64) -> Result<Vec<SenseRow>> {
    let kappa = c.kurtosis();
    let mut cases: Vec<(f64, SensingScenario)> = Vec::new();
    match &cfg.ranges {
        None => {
            let d = cfg.scenario.toi()?.delay;
            cases.push((d as f64, cfg.scenario.clone()));
        }
        Some(sweep) => {
            for &r in &sweep.ranges_m {
                let mut sc = cfg.scenario.clone();
                let power = sweep.link.relative_power(sweep.rcs_m2, r) * sc.sigma_s2;
                let toi = sc
                    .targets
                    .iter_mut()
                    .find(|t| t.is_toi)
                    .context("scenario has no target of interest")?;
                toi.delay = sweep.link.delay_samples(r);
                toi.amplitude = AmplitudeModel::Swerling1 { mean_power: power };
                cases.push((r, sc));
            }
        }
    }
    cases
        .iter()
        .enumerate()
        .map(|(i, (x, sc))| {
            let mut ofdm = OfdmConfig::new(cfg.n, cfg.cp_len)?;
            ofdm.seed = seed.wrapping_add(i as u64);
            let gamma = analytic_sinr(sc, kappa, cfg.n)?;
            let est = simulate_pd(c, sc, &ofdm, cfg.trials)?;
            Ok(SenseRow {
                range_or_delay: *x,
                pd_analytic: analytic_pd(gamma, sc.pfa),
                pd_sim: est.pd,
                ci_lo: est.ci_lo,
                ci_hi: est.ci_hi,
                kappa,
                pd_finite_window: analytic_pd_ca_cfar(gamma, sc.pfa, sc.n_win),
            })
        })
        .collect()
}
