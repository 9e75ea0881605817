use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Command line and version stamped into every CSV.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub command: String,
}

impl Provenance {
    pub fn new(args: &[String]) -> Self {
        let mut parts = vec!["spdkit".to_string()];
        parts.extend(args.iter().skip(1).cloned());
        Provenance {
            command: parts.join(" "),
        }
    }

    pub fn comment(&self, seed: Option<u64>) -> String {
        let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# spdkit {} | seed {seed} | {}",
            env!("CARGO_PKG_VERSION"),
            self.command
        )
    }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Writes a provenance comment line followed by a header row and `rows`.
pub(crate) fn write_csv<T: Serialize>(path: &Path, prov: &Provenance, seed: Option<u64>, rows: &[T]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{}", prov.comment(seed))?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Like [`write_csv`] for rows whose width is only known at run time.
pub(crate) fn write_csv_records(
    path: &Path,
    prov: &Provenance,
    seed: Option<u64>,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{}", prov.comment(seed))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("plain JSON"));
}
