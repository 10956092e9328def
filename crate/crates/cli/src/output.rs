//! CSV output and output-path resolution.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ISAC_OUT_DIR";

/// Picks the output path: an explicit path wins, then the config's
/// `out_dir`, then `$ISAC_OUT_DIR`, then the working directory.
pub fn resolve_out(explicit: Option<&Path>, config_dir: Option<&Path>, default_name: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    let dir = config_dir
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    dir.join(default_name)
}

/// Serializes rows as CSV behind a `# isac-shaping <version> | units: ...`
/// comment line.
pub fn csv_string<T: Serialize>(units: &str, rows: &[T]) -> Result<String> {
    let mut out = format!("# isac-shaping {VERSION} | units: {units}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(out)?)
}

pub fn write_csv<T: Serialize>(path: &Path, units: &str, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, csv_string(units, rows)?).with_context(|| format!("writing {}", path.display()))
}

/// Header and string records of a CSV written by [`write_csv`].
pub fn read_csv_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}
