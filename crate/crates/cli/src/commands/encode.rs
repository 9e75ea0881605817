use std::path::PathBuf;

use anyhow::Result;
use spdkit::iddl::SpectralCache;

use super::{load_dataset, load_model};
use crate::output::write_csv_records;
use crate::Provenance;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// CSV with one row per sample: index, label, v1..vn
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args, prov: &Provenance) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = load_dataset(&args.data)?;
    let v = SpectralCache::new(&data, &model.dictionary)?.encodings(&model.params)?;
    let mut header = vec!["index".to_string(), "label".to_string()];
    header.extend((1..=model.n_atoms()).map(|k| format!("v{k}")));
    let rows: Vec<Vec<String>> = data
        .labels()
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let mut row = vec![i.to_string(), label.to_string()];
            row.extend(v.column(i).iter().map(|x| format!("{x:e}")));
            row
        })
        .collect();
    write_csv_records(&args.out, prov, None, &header, &rows)
}
