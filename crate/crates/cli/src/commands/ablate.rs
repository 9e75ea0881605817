use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::json;
use spdkit::classify::evaluate;
use spdkit::dataio::{generate_synthetic, split, LabeledSpdDataset, SyntheticSpec};
use spdkit::iddl::{fit, FitConfig, ParamInit};
use spdkit::Variant;

use super::train::{square_grid, DEFAULT_GRID_AXIS};
use super::load_dataset;
use crate::output::{print_json, write_csv};
use crate::Provenance;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Dataset to split; omit with --synthetic
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use the synthetic benchmark, regenerated for each seed
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, default_value_t = 0.8)]
    pub fraction: f64,
    /// Atom counts, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "15")]
    pub atoms: Vec<usize>,
    /// Seeds, comma-separated; each seed sets the split and the initialization
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// Ridge weight; defaults to 1e-3·N/L
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 30)]
    pub outer_iters: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Arm {
    /// Dictionary learned, divergence parameters frozen at the grid start.
    #[serde(rename = "fix_params")]
    FixParams,
    /// k-means dictionary frozen, shared parameters learned.
    #[serde(rename = "fix_dictionary")]
    FixDictionary,
    /// Everything learned, per-atom parameters.
    #[serde(rename = "joint")]
    Joint,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::FixParams, Arm::FixDictionary, Arm::Joint];

    /// All arms start from the same k-means dictionary and grid-searched
    /// parameters.
    pub fn config(self, atoms: usize, seed: u64, gamma: Option<f64>, outer_iters: usize) -> FitConfig {
        let variant = match self {
            Arm::FixDictionary => Variant::Scalar,
            _ => Variant::VectorFree,
        };
        let mut cfg = FitConfig::new(atoms, variant);
        cfg.seed = seed;
        cfg.gamma = gamma;
        cfg.outer_iters = outer_iters;
        cfg.init = ParamInit::Grid(square_grid(&DEFAULT_GRID_AXIS));
        cfg.update_params = self != Arm::FixParams;
        cfg.update_dictionary = self != Arm::FixDictionary;
        cfg
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub atoms: usize,
    pub method: Arm,
    pub seeds: usize,
    pub mean_test_acc: f64,
    pub mean_train_acc: f64,
    /// Test accuracy per seed, `;`-separated in seed order
    pub per_seed_test_acc: String,
}

/// Train/test accuracy of one arm on one split.
pub fn run_arm(
    arm: Arm,
    train: &LabeledSpdDataset,
    test: &LabeledSpdDataset,
    atoms: usize,
    seed: u64,
    gamma: Option<f64>,
    outer_iters: usize,
) -> Result<(f64, f64)> {
    let model = fit(train, &arm.config(atoms, seed, gamma, outer_iters))?;
    Ok((evaluate(&model, train)?.accuracy, evaluate(&model, test)?.accuracy))
}

pub fn run(args: &Args, prov: &Provenance) -> Result<()> {
    let base = match (&args.data, args.synthetic) {
        (Some(path), false) => Some(load_dataset(path)?),
        (None, true) => None,
        _ => bail!("pass exactly one of --data and --synthetic"),
    };
    if args.seeds.is_empty() || args.atoms.is_empty() {
        bail!("need at least one seed and one atom count");
    }
    let mut splits = Vec::with_capacity(args.seeds.len());
    for &seed in &args.seeds {
        let data = match &base {
            Some(d) => d.clone(),
            None => generate_synthetic(&SyntheticSpec::benchmark(seed))?,
        };
        splits.push(split(&data, args.fraction, seed)?);
    }

    let mut rows = Vec::new();
    for &atoms in &args.atoms {
        for arm in Arm::ALL {
            let mut train_acc = Vec::new();
            let mut test_acc = Vec::new();
            for (&seed, (train, test)) in args.seeds.iter().zip(&splits) {
                let (tr, te) = run_arm(arm, train, test, atoms, seed, args.gamma, args.outer_iters)?;
                train_acc.push(tr);
                test_acc.push(te);
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            rows.push(AblationRow {
                atoms,
                method: arm,
                seeds: test_acc.len(),
                mean_test_acc: mean(&test_acc),
                mean_train_acc: mean(&train_acc),
                per_seed_test_acc: test_acc.iter().map(|a| format!("{a:.6}")).collect::<Vec<_>>().join(";"),
            });
        }
    }
    write_csv(&args.out, prov, args.seeds.first().copied(), &rows)?;
    print_json(&json!(rows
        .iter()
        .map(|r| json!({"atoms": r.atoms, "method": r.method, "mean_test_acc": r.mean_test_acc}))
        .collect::<Vec<_>>()));
    Ok(())
}
