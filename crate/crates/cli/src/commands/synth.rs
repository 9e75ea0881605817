use std::path::PathBuf;

use anyhow::Result;
use serde_json::json;
use spdkit::dataio::{generate_synthetic, write_dataset, SyntheticSpec};

use crate::output::print_json;
use crate::Provenance;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, default_value_t = 3)]
    pub classes: u32,
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Wishart degrees of freedom; larger values give tighter classes
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args, _prov: &Provenance) -> Result<()> {
    let spec = SyntheticSpec {
        classes: args.classes,
        dim: args.dim,
        per_class: args.per_class,
        spread: args.spread.unwrap_or(SyntheticSpec::benchmark(args.seed).spread),
        seed: args.seed,
    };
    let data = generate_synthetic(&spec)?;
    write_dataset(&args.out, &data)?;
    print_json(&json!({
        "samples": data.len(),
        "dim": data.dim(),
        "classes": data.label_count(),
        "spread": spec.spread,
        "out": args.out,
    }));
    Ok(())
}
