use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use serde_json::json;
use spdkit::classify::{evaluate, Metric, NearestNeighbor, PredictionReport};

use super::{load_dataset, load_model};
use crate::output::{create, print_json};
use crate::Provenance;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Test set
    #[arg(long)]
    pub data: PathBuf,
    /// 1-NN baseline metric: le, airm or jbld
    #[arg(long)]
    pub baseline: Option<Metric>,
    /// Training set searched by the baseline
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Output prefix: writes `<prefix>.json` and `<prefix>.csv`, and
    /// `<prefix>.nn-<metric>.{json,csv}` for the baseline
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args, prov: &Provenance) -> Result<()> {
    if args.model.is_none() && args.baseline.is_none() {
        bail!("nothing to evaluate: pass --model and/or --baseline");
    }
    let test = load_dataset(&args.data)?;
    let mut summary = serde_json::Map::new();
    if let Some(path) = &args.model {
        let model = load_model(path)?;
        let report = evaluate(&model, &test)?;
        write_report(&report, &args.out, prov)?;
        summary.insert("accuracy".into(), json!(report.accuracy));
    }
    if let Some(metric) = args.baseline {
        let Some(train_path) = &args.train else {
            bail!("--baseline needs --train");
        };
        let train = load_dataset(train_path)?;
        let nn = NearestNeighbor::new(&train, metric)?;
        let report = evaluate(&nn, &test)?;
        write_report(&report, &baseline_prefix(&args.out, metric), prov)?;
        summary.insert(format!("nn_{metric}_accuracy"), json!(report.accuracy));
    }
    print_json(&serde_json::Value::Object(summary));
    Ok(())
}

pub fn baseline_prefix(prefix: &Path, metric: Metric) -> PathBuf {
    with_suffix(prefix, &format!(".nn-{metric}"))
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<prefix>.json` and `<prefix>.csv`.
pub fn write_report(report: &PredictionReport, prefix: &Path, prov: &Provenance) -> Result<()> {
    let mut json_out = create(&with_suffix(prefix, ".json"))?;
    writeln!(json_out, "{}", report.to_json())?;
    json_out.flush()?;
    let mut csv_out = create(&with_suffix(prefix, ".csv"))?;
    writeln!(csv_out, "{}", prov.comment(None))?;
    report.write_csv(&mut csv_out)?;
    csv_out.flush()?;
    Ok(())
}
