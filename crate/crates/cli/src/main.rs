//! `isac`: command-line front end of the shaping toolkit.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use isac_core::air::{gmi_estimate, gmi_with_demapper, mi_estimate, AwgnChannel, Method};
use isac_core::constellation::{default_gpas_radii, make_gpas_grid, make_psk, make_qam};
use isac_core::pas::{
    build_llr_luts, frame_from_bytes, Composition, frame_to_bytes, lut_demap, pas_decode, pas_encode, LlrLutSet, LutOptions,
    PasConfig,
};
use isac_core::shaping::{optimize, Family, Metric, OptConfig, ShapingParams};
use isac_core::Constellation;
use isac_cli::experiments::{AIR_UNITS, BOUNDS_UNITS, SENSE_UNITS, TRADEOFF_UNITS};
use isac_cli::{
    bounds_table, read_csv_table, resolve_out, run_air_curve, run_sense, run_tradeoff_sweep, write_csv,
    ExperimentConfig, OUT_DIR_ENV,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "isac", version, about = "Constellation shaping experiments for OFDM ISAC")]
struct Cli {
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Default directory for outputs without an explicit path.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lower and upper MI bounds over SNR and kurtosis.
    Bounds(BoundsArgs),
    /// Writes a standard constellation as JSON.
    Gen(GenArgs),
    /// Optimizes a constellation for a kurtosis target.
    Optimize(OptimizeArgs),
    /// MI and GMI of a constellation.
    Air(AirArgs),
    /// Detection probability by simulation and analysis.
    Sense(SenseArgs),
    /// Probabilistic amplitude shaping tools.
    #[command(subcommand)]
    Pas(PasCmd),
    /// Multi-point experiments.
    #[command(subcommand)]
    Sweep(SweepCmd),
    /// Reshapes a long CSV into one column per group for plotting.
    PlotData(PlotArgs),
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [10.0])]
    snr_db: Vec<f64>,
    /// Kurtosis targets; defaults to 1.0..=2.0 in steps of 0.05.
    #[arg(long, value_delimiter = ',')]
    kappa: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Qam,
    Psk,
    Gpas,
    Pas,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: GenKind,
    /// Bits per symbol (QAM, PSK).
    #[arg(long, default_value_t = 6)]
    bits: usize,
    #[arg(long, default_value_t = 2)]
    amp_bits: usize,
    #[arg(long, default_value_t = 4)]
    phase_bits: usize,
    /// Ring radii (GPAS); defaults to equally spaced rings.
    #[arg(long, value_delimiter = ',')]
    radii: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    family: Option<Family>,
    #[arg(long, default_value_t = 6)]
    bits: usize,
    #[arg(long)]
    kappa_tilde: Option<f64>,
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Constellation JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct AirArgs {
    #[arg(long)]
    constellation: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [10.0])]
    snr_db: Vec<f64>,
    /// Monte Carlo samples; quadrature when absent.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SenseArgs {
    #[arg(long)]
    constellation: PathBuf,
    /// Scenario JSON; the `sense` section of the config when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PasCmd {
    /// Encodes a byte stream into PAS frames.
    Encode {
        #[arg(long)]
        pas: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// Concatenated wire frames.
        #[arg(long)]
        output: PathBuf,
        /// Optional CSV of transmit symbols.
        #[arg(long)]
        symbols: Option<PathBuf>,
    },
    /// Hard-decision decoding of symbols, or parsing of wire frames.
    Decode {
        #[arg(long)]
        pas: Option<PathBuf>,
        #[arg(long, conflicts_with = "frames", required_unless_present = "frames")]
        symbols: Option<PathBuf>,
        #[arg(long)]
        frames: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Number of payload bits to keep (drops the final zero padding).
        #[arg(long)]
        bits: Option<usize>,
    },
    /// Builds the LLR lookup tables of a GPAS constellation.
    BuildLuts {
        #[arg(long)]
        constellation: PathBuf,
        #[arg(long, default_value_t = 2)]
        amp_bits: usize,
        #[arg(long, default_value_t = 4)]
        phase_bits: usize,
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// GMI of the exact and the lookup-table demapper over SNR.
    EvalGmi {
        #[arg(long)]
        constellation: PathBuf,
        #[arg(long, default_value_t = 2)]
        amp_bits: usize,
        #[arg(long, default_value_t = 4)]
        phase_bits: usize,
        #[arg(long, value_delimiter = ',')]
        snr_db: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SweepCmd {
    /// Kurtosis versus rate over families and targets.
    Tradeoff {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for the optimized constellations.
        #[arg(long)]
        constellations: Option<PathBuf>,
    },
    /// Rate versus SNR per constellation.
    AirCurve {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    /// Column whose values become separate series.
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Ctx {
    cfg: ExperimentConfig,
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn out(&self, explicit: Option<&Path>, name: &str) -> PathBuf {
        let dir = self.cfg.out_dir.as_deref().or(self.out_dir.as_deref());
        resolve_out(explicit, dir, name)
    }
}

fn read_constellation(p: &Path) -> Result<Constellation> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(Constellation::from_json(&text)?)
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d)?;
    }
    std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
}

fn pas_config(ctx: &Ctx, path: Option<&Path>) -> Result<PasConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(serde_json::from_str(&text)?)
        }
        None => ctx.cfg.pas.clone().context("no PAS config: pass --pas or a `pas` config section"),
    }
}

fn unpack_bits(bytes: &[u8]) -> Vec<u8> {
    bytes.iter().flat_map(|b| (0..8).rev().map(move |k| b >> k & 1)).collect()
}

fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (k, &b)| acc | (b & 1) << (7 - k)))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SymbolRow {
    frame: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct AirOut {
    snr_db: f64,
    kappa: f64,
    entropy: f64,
    mi: f64,
    gmi: f64,
    mi_std_err: Option<f64>,
    gmi_std_err: Option<f64>,
}

#[derive(Serialize)]
struct LutGmiRow {
    snr_db: f64,
    gmi_exact: f64,
    gmi_lut: f64,
    loss: f64,
    tables: usize,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let ctx = Ctx {
        cfg,
        out_dir: cli.out_dir,
    };
    match cli.cmd {
        Cmd::Bounds(a) => {
            let kappa = if a.kappa.is_empty() {
                (0..=20).map(|k| 1.0 + 0.05 * k as f64).collect()
            } else {
                a.kappa
            };
            let rows = bounds_table(&a.snr_db, &kappa)?;
            let p = ctx.out(a.out.as_deref(), "bounds.csv");
            write_csv(&p, BOUNDS_UNITS, &rows)?;
            eprintln!("wrote {} rows to {}", rows.len(), p.display());
        }
        Cmd::Gen(a) => {
            let c = match a.kind {
                GenKind::Qam => make_qam(a.bits)?,
                GenKind::Psk => make_psk(a.bits)?,
                GenKind::Gpas => {
                    let r = if a.radii.is_empty() {
                        default_gpas_radii(a.amp_bits)
                    } else {
                        a.radii
                    };
                    make_gpas_grid(a.amp_bits, a.phase_bits, &r)?
                }
                GenKind::Pas => pas_config(&ctx, None)?.constellation()?,
            };
            let p = ctx.out(a.out.as_deref(), "constellation.json");
            write_text(&p, &c.to_json()?)?;
            eprintln!("kappa {:.4}, entropy {:.4} bit -> {}", c.kurtosis(), c.entropy_bits(), p.display());
        }
        Cmd::Optimize(a) => {
            let base = ctx.cfg.optimize.unwrap_or_default();
            let opt = OptConfig {
                kappa_tilde: a.kappa_tilde.unwrap_or(base.kappa_tilde),
                snr_db: a.snr_db.unwrap_or(base.snr_db),
                metric: a.metric.unwrap_or(base.metric),
                epochs: a.epochs.unwrap_or(base.epochs),
                seed: a.seed.unwrap_or(base.seed),
                ..base
            };
            let family = a.family.unwrap_or(Family::Joint);
            let init = ShapingParams::init(family, a.bits, opt.seed, opt.init_noise)?;
            let (c, trace) = optimize(init, &opt)?;
            let p = ctx.out(a.out.as_deref(), &format!("{family}_k{:.3}.json", opt.kappa_tilde));
            write_text(&p, &c.to_json()?)?;
            if let Some(t) = a.trace {
                write_csv(&t, "loss [bit/symbol], metric_bits [bit/symbol], kurtosis [-]", &trace.rows)?;
            }
            let ch = AwgnChannel::from_snr_db(opt.snr_db)?;
            let q = Method::Quadrature { order: Some(32) };
            eprintln!(
                "{family}: kappa {:.4}, MI {:.4}, GMI {:.4} -> {}",
                c.kurtosis(),
                mi_estimate(&c, &ch, q)?.bits,
                gmi_estimate(&c, &ch, q)?.bits,
                p.display()
            );
        }
        Cmd::Air(a) => {
            let c = read_constellation(&a.constellation)?;
            let mut rows = Vec::new();
            for &s in &a.snr_db {
                let ch = AwgnChannel::from_snr_db(s)?;
                let m = match a.samples {
                    Some(n) => Method::MonteCarlo {
                        samples: n,
                        seed: ctx.cfg.seed,
                    },
                    None => Method::default(),
                };
                let mi = mi_estimate(&c, &ch, m)?;
                let gmi = gmi_estimate(&c, &ch, m)?;
                rows.push(AirOut {
                    snr_db: s,
                    kappa: c.kurtosis(),
                    entropy: c.entropy_bits(),
                    mi: mi.bits,
                    gmi: gmi.bits,
                    mi_std_err: mi.std_err,
                    gmi_std_err: gmi.std_err,
                });
            }
            let p = ctx.out(a.out.as_deref(), "air.csv");
            write_csv(&p, AIR_UNITS, &rows)?;
            for r in &rows {
                eprintln!("{:6.2} dB: MI {:.4}, GMI {:.4}", r.snr_db, r.mi, r.gmi);
            }
        }
        Cmd::Sense(a) => {
            let c = read_constellation(&a.constellation)?;
            let mut sense = match &a.scenario {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => ctx.cfg.sense.clone().context("no scenario: pass --scenario or a `sense` section")?,
            };
            if let Some(t) = a.trials {
                sense.trials = t;
            }
            let rows = run_sense(&c, &sense, ctx.cfg.seed)?;
            let p = ctx.out(a.out.as_deref(), "sense.csv");
            write_csv(&p, SENSE_UNITS, &rows)?;
            for r in &rows {
                eprintln!(
                    "{}: pd {:.4} [{:.4}, {:.4}], analytic {:.4}",
                    r.range_or_delay, r.pd_sim, r.ci_lo, r.ci_hi, r.pd_analytic
                );
            }
        }
        Cmd::Pas(cmd) => run_pas(&ctx, cmd)?,
        Cmd::Sweep(SweepCmd::Tradeoff { out, constellations }) => {
            let t = ctx.cfg.tradeoff.clone().unwrap_or_default();
            let rows = run_tradeoff_sweep(&t, constellations.as_deref())?;
            let p = ctx.out(out.as_deref(), "tradeoff.csv");
            write_csv(&p, TRADEOFF_UNITS, &rows)?;
            eprintln!("wrote {} rows to {}", rows.len(), p.display());
        }
        Cmd::Sweep(SweepCmd::AirCurve { out }) => {
            let a = ctx.cfg.air_curve.clone().unwrap_or_default();
            let rows = run_air_curve(&a)?;
            let p = ctx.out(out.as_deref(), "air_curve.csv");
            write_csv(&p, AIR_UNITS, &rows)?;
            eprintln!("wrote {} rows to {}", rows.len(), p.display());
        }
        Cmd::PlotData(a) => {
            let p = ctx.out(a.out.as_deref(), "plot.csv");
            plot_data(&a, &p)?;
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn run_pas(ctx: &Ctx, cmd: PasCmd) -> Result<()> {
    match cmd {
        PasCmd::Encode {
            pas,
            input,
            output,
            symbols,
        } => {
            let cfg = pas_config(ctx, pas.as_deref())?;
            let bits = unpack_bits(&std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?);
            let k = cfg.info_len();
            let mut wire = Vec::new();
            let mut sym = Vec::new();
            for (i, chunk) in bits.chunks(k).enumerate() {
                let mut info = chunk.to_vec();
                info.resize(k, 0);
                let f = pas_encode(&cfg, &info)?;
                wire.extend(frame_to_bytes(&f));
                sym.extend(f.symbols.iter().map(|s| SymbolRow {
                    frame: i,
                    re: s.re,
                    im: s.im,
                }));
            }
            std::fs::write(&output, &wire).with_context(|| format!("writing {}", output.display()))?;
            if let Some(s) = symbols {
                write_csv(&s, "re/im [sqrt(W), unit average power]", &sym)?;
            }
            eprintln!(
                "{} bits in {} frames of {} bits ({:.4} bit/symbol)",
                bits.len(),
                bits.len().div_ceil(k),
                k,
                cfg.info_rate()
            );
        }
        PasCmd::Decode {
            pas,
            symbols,
            frames,
            output,
            bits,
        } => {
            let mut out_bits = Vec::new();
            if let Some(s) = symbols {
                let cfg = pas_config(ctx, pas.as_deref())?;
                let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&s)?;
                let rows: Vec<SymbolRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
                let mut bad = 0;
                for chunk in rows.chunks(cfg.u) {
                    let y: Vec<Complex64> = chunk.iter().map(|r| Complex64::new(r.re, r.im)).collect();
                    let d = pas_decode(&cfg, &y)?;
                    bad += usize::from(!d.parity_ok);
                    out_bits.extend(d.info);
                }
                if bad > 0 {
                    eprintln!("{bad} frames failed the parity check");
                }
            } else if let Some(f) = frames {
                let bytes = std::fs::read(&f).with_context(|| format!("reading {}", f.display()))?;
                let mut pos = 0;
                while pos < bytes.len() {
                    let len = wire_len(&bytes[pos..])?;
                    let frame = frame_from_bytes(&bytes[pos..pos + len])?;
                    let d = pas_decode(&frame.config, &frame.symbols)?;
                    out_bits.extend(d.info);
                    pos += len;
                }
            }
            if let Some(n) = bits {
                if n > out_bits.len() {
                    bail!("asked for {n} bits, decoded {}", out_bits.len());
                }
                out_bits.truncate(n);
            }
            std::fs::write(&output, pack_bits(&out_bits)).with_context(|| format!("writing {}", output.display()))?;
            eprintln!("decoded {} bits", out_bits.len());
        }
        PasCmd::BuildLuts {
            constellation,
            amp_bits,
            phase_bits,
            snr_db,
            resolution,
            out,
        } => {
            let c = read_constellation(&constellation)?;
            let ch = AwgnChannel::from_snr_db(snr_db)?;
            let mut opts = LutOptions::default();
            if let Some(r) = resolution {
                opts.resolution = r;
            }
            let set = build_llr_luts(&c, &ch, amp_bits, phase_bits, &opts)?;
            let p = ctx.out(out.as_deref(), "luts.json");
            write_text(&p, &serde_json::to_string(&set)?)?;
            eprintln!("{} tables, {} values -> {}", set.table_count(), set.stored_values(), p.display());
        }
        PasCmd::EvalGmi {
            constellation,
            amp_bits,
            phase_bits,
            snr_db,
            out,
        } => {
            let c = read_constellation(&constellation)?;
            let snrs = if snr_db.is_empty() {
                (0..=10).map(|k| 2.0 * k as f64).collect()
            } else {
                snr_db
            };
            let mut rows = Vec::new();
            for s in snrs {
                let ch = AwgnChannel::from_snr_db(s)?;
                let set: LlrLutSet = build_llr_luts(&c, &ch, amp_bits, phase_bits, &LutOptions::default())?;
                let exact = gmi_estimate(&c, &ch, Method::Quadrature { order: Some(32) })?.bits;
                let lut = gmi_with_demapper(&c, &ch, 32, |y| lut_demap(y, &set))?;
                rows.push(LutGmiRow {
                    snr_db: s,
                    gmi_exact: exact,
                    gmi_lut: lut,
                    loss: exact - lut,
                    tables: set.table_count(),
                });
            }
            let p = ctx.out(out.as_deref(), "lut_gmi.csv");
            write_csv(&p, "snr_db [dB], gmi/loss [bit/symbol]", &rows)?;
            let worst = rows.iter().map(|r| r.loss).fold(f64::NEG_INFINITY, f64::max);
            eprintln!("worst LUT loss {worst:.4} bit/symbol -> {}", p.display());
        }
    }
    Ok(())
}

/// Byte length of the wire frame at the start of `b`, read from its header.
fn wire_len(b: &[u8]) -> Result<usize> {
    let u16_at = |k: usize| -> Result<usize> {
        let v = b.get(k..k + 2).context("truncated frame header")?;
        Ok(u16::from_be_bytes([v[0], v[1]]) as usize)
    };
    let amp_bits = *b.get(3).context("truncated frame header")? as usize;
    if amp_bits == 0 || amp_bits > 8 {
        bail!("amp_bits {amp_bits} outside 1..=8");
    }
    let levels = 1usize << amp_bits;
    let counts = (0..levels).map(|k| u16_at(5 + 2 * k)).collect::<Result<Vec<_>>>()?;
    let header = 5 + 2 * levels + 2;
    let bypass = u16_at(header - 2)?;
    // conventional PAS frames carry two real dimensions
    let dims = if b[0] == 0 { 2 } else { 1 };
    let info = dims * (Composition::new(counts)?.payload_bits() + bypass);
    Ok(header + info.div_ceil(8))
}

fn plot_data(a: &PlotArgs, out: &Path) -> Result<()> {
    let (header, rows) = read_csv_table(&a.input)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("no column `{name}` in {}", a.input.display()))
    };
    let (xi, yi) = (col(&a.x)?, col(&a.y)?);
    let gi = a.group.as_deref().map(col).transpose()?;
    let mut groups: Vec<String> = Vec::new();
    let mut xs: Vec<String> = Vec::new();
    for r in &rows {
        let g = gi.map(|i| r[i].clone()).unwrap_or_else(|| a.y.clone());
        if !groups.contains(&g) {
            groups.push(g);
        }
        if !xs.contains(&r[xi]) {
            xs.push(r[xi].clone());
        }
    }
    let mut table = vec![vec![String::new(); groups.len()]; xs.len()];
    for r in &rows {
        let g = gi.map(|i| r[i].clone()).unwrap_or_else(|| a.y.clone());
        let gx = groups.iter().position(|v| *v == g).expect("group collected");
        let xx = xs.iter().position(|v| *v == r[xi]).expect("x collected");
        table[xx][gx] = r[yi].clone();
    }
    let mut text = format!("# isac-shaping {} | units: as in {}\n", isac_cli::VERSION, a.input.display()).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut text);
        w.write_record(std::iter::once(a.x.as_str()).chain(groups.iter().map(String::as_str)))?;
        for (x, vals) in xs.iter().zip(&table) {
            w.write_record(std::iter::once(x.as_str()).chain(vals.iter().map(String::as_str)))?;
        }
        w.flush()?;
    }
    write_text(out, &String::from_utf8(text)?)
}
