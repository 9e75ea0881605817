use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;
use serde_json::json;
use spdkit::classify::evaluate;
use spdkit::iddl::{fit, write_model, FitConfig, IddlModel, OuterRecord, ParamInit};
use spdkit::Variant;

use super::load_dataset;
use crate::output::{print_json, write_csv};
use crate::Provenance;

/// Axis values of the default parameter grid.
pub const DEFAULT_GRID_AXIS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub atoms: usize,
    /// S (shared), V (per-atom, α = β), N (per-atom), A (AIRM) or B (Burg)
    #[arg(long, default_value = "N")]
    pub variant: Variant,
    /// Ridge weight; defaults to 1e-3·N/L
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Convergence CSV; defaults to the model path with `.convergence.csv`
    #[arg(long)]
    pub convergence: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub outer_iters: usize,
    /// Conjugate-gradient iterations per atom update
    #[arg(long, default_value_t = 5)]
    pub inner_iters: usize,
    /// Line-search steps on the divergence parameters per outer iteration
    #[arg(long, default_value_t = 5)]
    pub param_steps: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub rel_tol: f64,
    /// Start the divergence parameters from the best cell of a grid
    #[arg(long)]
    pub grid_init: bool,
    /// Grid axis values, used for both α and β
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Keep the k-means dictionary fixed
    #[arg(long)]
    pub fix_dictionary: bool,
    /// Keep the divergence parameters at their initial values
    #[arg(long)]
    pub fix_params: bool,
}

impl Args {
    pub fn config(&self) -> FitConfig {
        let mut cfg = FitConfig::new(self.atoms, self.variant);
        cfg.gamma = self.gamma;
        cfg.seed = self.seed;
        cfg.outer_iters = self.outer_iters;
        cfg.rcg = cfg.rcg.with_max_iters(self.inner_iters);
        cfg.param_steps = self.param_steps;
        cfg.rel_tol = self.rel_tol;
        cfg.update_dictionary = !self.fix_dictionary;
        cfg.update_params = !self.fix_params;
        if self.grid_init || self.grid.is_some() {
            let axis = self.grid.clone().unwrap_or_else(|| DEFAULT_GRID_AXIS.to_vec());
            cfg.init = ParamInit::Grid(square_grid(&axis));
        }
        cfg
    }
}

/// Every `(α, β)` pair from `axis × axis`.
pub fn square_grid(axis: &[f64]) -> Vec<(f64, f64)> {
    axis.iter()
        .flat_map(|&a| axis.iter().map(move |&b| (a, b)))
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ConvergenceRow {
    pub outer_iter: usize,
    pub objective: f64,
    pub start: f64,
    pub dictionary_delta: Option<f64>,
    pub params_delta: Option<f64>,
    pub w_delta: f64,
    pub dictionary_status: &'static str,
    pub params_status: &'static str,
}

/// One row per outer iteration; deltas are decreases (non-negative) and are
/// left empty for skipped blocks.
pub fn convergence_rows(history: &[OuterRecord]) -> Vec<ConvergenceRow> {
    let status = |skipped: bool| if skipped { "skipped" } else { "updated" };
    history
        .iter()
        .enumerate()
        .map(|(t, r)| ConvergenceRow {
            outer_iter: t + 1,
            objective: r.after_w,
            start: r.start,
            dictionary_delta: (!r.dictionary_skipped).then_some(r.start - r.after_dictionary),
            params_delta: (!r.params_skipped).then_some(r.after_dictionary - r.after_params),
            w_delta: r.after_params - r.after_w,
            dictionary_status: status(r.dictionary_skipped),
            params_status: status(r.params_skipped),
        })
        .collect()
}

pub fn convergence_path(model: &Path) -> PathBuf {
    model.with_extension("convergence.csv")
}

pub fn run(args: &Args, prov: &Provenance) -> Result<()> {
    let data = load_dataset(&args.data)?;
    let model: IddlModel = fit(&data, &args.config())?;
    write_model(&args.out, &model)?;
    let csv_path = args.convergence.clone().unwrap_or_else(|| convergence_path(&args.out));
    write_csv(&csv_path, prov, Some(args.seed), &convergence_rows(&model.history))?;
    let train_acc = evaluate(&model, &data)?.accuracy;
    print_json(&json!({
        "final_objective": model.final_objective(),
        "outer_iters": model.history.len(),
        "train_acc": train_acc,
        "model": args.out,
        "convergence": csv_path,
    }));
    Ok(())
}
