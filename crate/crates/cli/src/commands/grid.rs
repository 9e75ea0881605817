use std::path::PathBuf;

use anyhow::Result;
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;
use spdkit::classify::argmax_label;
use spdkit::dataio::LabeledSpdDataset;
use spdkit::divergence::PARAM_FLOOR;
use spdkit::iddl::{default_gamma, fit, init_dictionary, solve_ridge, FitConfig, SpectralCache};
use spdkit::{AbldParams, Variant};

use super::train::DEFAULT_GRID_AXIS;
use super::load_dataset;
use crate::output::{print_json, write_csv};
use crate::Provenance;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub atoms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ridge weight; defaults to 1e-3·N/L
    #[arg(long)]
    pub gamma: Option<f64>,
    /// α values, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// β values, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also fit a shared-parameter model and locate its (α, β) on the grid
    #[arg(long)]
    pub fit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub alpha: f64,
    pub beta: f64,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    /// `ok`, `at_floor` when a value sits on the parameter floor, or
    /// `below_floor` for cells that cannot be evaluated.
    pub flag: &'static str,
}

/// Accuracy of a ridge classifier on a fixed k-means dictionary for every
/// `(α, β)` in `alphas × betas`, shared by all atoms.
pub fn grid_sweep(
    train: &LabeledSpdDataset,
    test: &LabeledSpdDataset,
    atoms: usize,
    seed: u64,
    gamma: f64,
    alphas: &[f64],
    betas: &[f64],
) -> Result<Vec<GridRow>> {
    let dict = init_dictionary(train, atoms, seed)?;
    let train_cache = SpectralCache::new(train, &dict)?;
    let test_cache = SpectralCache::new(test, &dict)?;
    let h = one_hot(train);
    let mut rows = Vec::with_capacity(alphas.len() * betas.len());
    for &alpha in alphas {
        for &beta in betas {
            if !(alpha >= PARAM_FLOOR && beta >= PARAM_FLOOR) {
                rows.push(GridRow {
                    alpha,
                    beta,
                    train_acc: None,
                    test_acc: None,
                    flag: "below_floor",
                });
                continue;
            }
            let params = AbldParams::uniform(Variant::Scalar, atoms, alpha, beta)?;
            let v = train_cache.encodings(&params)?;
            let w = solve_ridge(&v, &h, gamma)?;
            let test_v = test_cache.encodings(&params)?;
            rows.push(GridRow {
                alpha,
                beta,
                train_acc: Some(accuracy(&w, &v, train.labels())),
                test_acc: Some(accuracy(&w, &test_v, test.labels())),
                flag: if alpha == PARAM_FLOOR || beta == PARAM_FLOOR { "at_floor" } else { "ok" },
            });
        }
    }
    Ok(rows)
}

fn one_hot(data: &LabeledSpdDataset) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(data.label_count() as usize, data.len());
    for (i, &label) in data.labels().iter().enumerate() {
        h[(label as usize - 1, i)] = 1.0;
    }
    h
}

fn accuracy(w: &DMatrix<f64>, v: &DMatrix<f64>, labels: &[u32]) -> f64 {
    let scores = w * v;
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(i, &label)| {
            let col: Vec<f64> = scores.column(i).iter().copied().collect();
            argmax_label(&col) + 1 == label as usize
        })
        .count();
    hits as f64 / labels.len() as f64
}

/// The evaluated cell closest to `(alpha, beta)` in log coordinates.
pub fn nearest_cell(rows: &[GridRow], alpha: f64, beta: f64) -> Option<&GridRow> {
    let dist = |r: &GridRow| (r.alpha.ln() - alpha.ln()).powi(2) + (r.beta.ln() - beta.ln()).powi(2);
    rows.iter()
        .filter(|r| r.test_acc.is_some())
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
}

pub fn run(args: &Args, prov: &Provenance) -> Result<()> {
    let train = load_dataset(&args.train)?;
    let test = load_dataset(&args.test)?;
    let gamma = args
        .gamma
        .unwrap_or_else(|| default_gamma(train.len(), train.label_count()));
    let alphas = args.alphas.clone().unwrap_or_else(|| DEFAULT_GRID_AXIS.to_vec());
    let betas = args.betas.clone().unwrap_or_else(|| DEFAULT_GRID_AXIS.to_vec());
    let rows = grid_sweep(&train, &test, args.atoms, args.seed, gamma, &alphas, &betas)?;
    write_csv(&args.out, prov, Some(args.seed), &rows)?;

    let best = rows
        .iter()
        .filter_map(|r| r.test_acc)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut summary = json!({"cells": rows.len(), "best_test_acc": best});
    if args.fit {
        let mut cfg = FitConfig::new(args.atoms, Variant::Scalar);
        cfg.gamma = Some(gamma);
        cfg.seed = args.seed;
        let model = fit(&train, &cfg)?;
        let (alpha, beta) = (model.params.alpha()[0], model.params.beta()[0]);
        let cell = nearest_cell(&rows, alpha, beta);
        summary["learned_alpha"] = json!(alpha);
        summary["learned_beta"] = json!(beta);
        summary["nearest_cell"] = json!(cell.map(|c| [c.alpha, c.beta]));
        summary["nearest_cell_test_acc"] = json!(cell.and_then(|c| c.test_acc));
    }
    print_json(&summary);
    Ok(())
}
