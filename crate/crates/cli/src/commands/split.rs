use std::path::PathBuf;

use anyhow::Result;
use serde_json::json;
use spdkit::dataio::{split, write_dataset};

use super::load_dataset;
use crate::output::print_json;
use crate::Provenance;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub data: PathBuf,
    /// Share of each class sent to the training part
    #[arg(long, default_value_t = 0.8)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
}

pub fn run(args: &Args, _prov: &Provenance) -> Result<()> {
    let data = load_dataset(&args.data)?;
    let (train, test) = split(&data, args.fraction, args.seed)?;
    write_dataset(&args.train, &train)?;
    write_dataset(&args.test, &test)?;
    print_json(&json!({"train": train.len(), "test": test.len()}));
    Ok(())
}
