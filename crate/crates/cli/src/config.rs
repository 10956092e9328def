//! Experiment configuration files (TOML or JSON).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use isac_core::constellation::{default_gpas_radii, make_gpas_grid, make_psk, make_qam, normalize};
use isac_core::pas::PasConfig;
use isac_core::sensing::{RadarLink, SensingScenario};
use isac_core::shaping::{optimize, Family, Metric, OptConfig, ShapingParams};
use isac_core::Constellation;
use serde::{Deserialize, Serialize};

/// Top-level config. Each section parametrizes one subcommand; absent
/// sections fall back to their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tradeoff: Option<TradeoffConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub air_curve: Option<AirCurveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<SenseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pas: Option<PasConfig>,
}

impl ExperimentConfig {
    /// Reads a config, choosing the format by extension (`.json` or TOML).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = if is_json(path) {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = if is_json(path) {
            serde_json::to_string_pretty(self)?
        } else {
            toml::to_string(self)?
        };
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Kurtosis/rate trade-off sweep over shaping families and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TradeoffConfig {
    pub families: Vec<Family>,
    pub kappa_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub snr_db: f64,
    pub metric: Metric,
    pub bits: usize,
    pub epochs: usize,
    /// Gauss-Hermite order inside the optimizer.
    pub quad_order: usize,
    /// Gauss-Hermite order of the reported MI/GMI.
    pub report_order: usize,
    /// Worker threads; zero picks the rayon default.
    pub threads: usize,
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        Self {
            families: Family::ALL.to_vec(),
            kappa_grid: vec![1.0, 1.2, 1.38, 1.6, 2.0],
            seeds: vec![0],
            snr_db: 10.0,
            metric: Metric::Gmi,
            bits: 6,
            epochs: 400,
            quad_order: 16,
            report_order: 32,
            threads: 0,
        }
    }
}

impl TradeoffConfig {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.kappa_grid.is_empty() || self.seeds.is_empty() {
            bail!("tradeoff sweep needs at least one family, kappa target and seed");
        }
        if let Some(k) = self.kappa_grid.iter().find(|k| !(**k >= 1.0)) {
            bail!("kappa target {k} below 1");
        }
        Ok(())
    }

    /// Optimizer settings of one sweep point.
    pub fn opt_config(&self, kappa_tilde: f64, seed: u64) -> OptConfig {
        OptConfig {
            kappa_tilde,
            snr_db: self.snr_db,
            metric: self.metric,
            epochs: self.epochs,
            quad_order: self.quad_order,
            seed,
            ..OptConfig::default()
        }
    }
}

/// Where an AIR-curve constellation comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstellationSource {
    Qam { bits: usize },
    Psk { bits: usize },
    Gpas {
        amp_bits: usize,
        phase_bits: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radii: Option<Vec<f64>>,
    },
    File { path: PathBuf },
    Optimized {
        family: Family,
        #[serde(default = "default_bits")]
        bits: usize,
        #[serde(default)]
        opt: OptConfig,
    },
}

fn default_bits() -> usize {
    6
}

impl ConstellationSource {
    pub fn build(&self) -> Result<Constellation> {
        let c = match self {
            ConstellationSource::Qam { bits } => make_qam(*bits)?,
            ConstellationSource::Psk { bits } => make_psk(*bits)?,
            ConstellationSource::Gpas {
                amp_bits,
                phase_bits,
                radii,
            } => {
                let r = radii.clone().unwrap_or_else(|| default_gpas_radii(*amp_bits));
                make_gpas_grid(*amp_bits, *phase_bits, &r)?
            }
            ConstellationSource::File { path } => {
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Constellation::from_json(&text)?
            }
            ConstellationSource::Optimized { family, bits, opt } => {
                let init = ShapingParams::init(*family, *bits, opt.seed, opt.init_noise)?;
                optimize(init, opt)?.0
            }
        };
        Ok(normalize(&c)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveEntry {
    pub name: String,
    pub source: ConstellationSource,
}

/// Rate versus SNR for a list of constellations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AirCurveConfig {
    pub constellations: Vec<CurveEntry>,
    pub snr_db: Vec<f64>,
    pub quad_order: usize,
}

impl Default for AirCurveConfig {
    fn default() -> Self {
        Self {
            constellations: vec![CurveEntry {
                name: "qam64".into(),
                source: ConstellationSource::Qam { bits: 6 },
            }],
            snr_db: (0..=10).map(|k| 2.0 * k as f64).collect(),
            quad_order: 32,
        }
    }
}

/// Range sweep: the target of interest is placed at each range with the
/// power given by the radar equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSweep {
    pub link: RadarLink,
    pub rcs_m2: f64,
    pub ranges_m: Vec<f64>,
}

/// Detection-probability simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SenseConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_cp")]
    pub cp_len: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub scenario: SensingScenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<RangeSweep>,
}

fn default_n() -> usize {
    1024
}

fn default_cp() -> usize {
    256
}

fn default_trials() -> usize {
    20_000
}

#[cfg(test)]
mod tests {
    use super::*;
    use isac_core::sensing::{AmplitudeModel, Target};

    fn full() -> ExperimentConfig {
        ExperimentConfig {
            seed: 7,
            out_dir: Some("results".into()),
            optimize: Some(OptConfig {
                lr: Some(0.02),
                ..OptConfig::default()
            }),
            tradeoff: Some(TradeoffConfig::default()),
            air_curve: Some(AirCurveConfig {
                constellations: vec![
                    CurveEntry {
                        name: "g".into(),
                        source: ConstellationSource::Gpas {
                            amp_bits: 2,
                            phase_bits: 4,
                            radii: Some(vec![0.3, 0.7, 1.1, 1.5]),
                        },
                    },
                    CurveEntry {
                        name: "p".into(),
                        source: ConstellationSource::Optimized {
                            family: Family::Probabilistic,
                            bits: 6,
                            opt: OptConfig::default(),
                        },
                    },
                ],
                ..AirCurveConfig::default()
            }),
            sense: Some(SenseConfig {
                n: 256,
                cp_len: 64,
                trials: 100,
                scenario: SensingScenario::new(
                    vec![Target {
                        delay: 3,
                        amplitude: AmplitudeModel::Swerling1 { mean_power: 1.0 },
                        is_toi: true,
                    }],
                    1.0,
                ),
                ranges: None,
            }),
            pas: None,
        }
    }

    #[test]
    fn round_trips_through_both_formats() {
        let dir = std::env::temp_dir().join(format!("isac-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for name in ["c.toml", "c.json"] {
            let p = dir.join(name);
            full().save(&p).unwrap();
            assert_eq!(ExperimentConfig::load(&p).unwrap(), full(), "{name}");
        }
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("seed = 1\nsede = 2\n").is_err());
        assert!(toml::from_str::<ExperimentConfig>("[tradeoff]\nkapa_grid = [1.0]\n").is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"optimize": {"epoch": 3}}"#).is_err());
    }

    #[test]
    fn sections_default() {
        let c: ExperimentConfig = toml::from_str("[tradeoff]\nkappa_grid = [1.0, 2.0]\n").unwrap();
        let t = c.tradeoff.unwrap();
        assert_eq!(t.families.len(), 5);
        assert_eq!(t.kappa_grid, vec![1.0, 2.0]);
        assert!(t.validate().is_ok());
    }
}
