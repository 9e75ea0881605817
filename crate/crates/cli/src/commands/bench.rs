use std::path::PathBuf;
use std::time::Instant;

use anyhow::{ensure, Result};
use clap::ValueEnum;
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;
use spdkit::dataio::{generate_synthetic, LabeledSpdDataset, SyntheticSpec};
use spdkit::iddl::{grad_atom, objective, Dictionary, IddlModel};
use spdkit::{AbldParams, Variant};

use crate::output::{print_json, write_csv};
use crate::Provenance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    /// Matrix dimension d
    D,
    /// Number of samples N
    Samples,
    /// Number of atoms n
    Atoms,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value = "d")]
    pub sweep: Sweep,
    /// Values of the swept quantity, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<usize>>,
    /// Matrix dimension when not swept
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    /// Sample count when not swept
    #[arg(long, default_value_t = 40)]
    pub samples: usize,
    /// Atom count when not swept
    #[arg(long, default_value_t = 4)]
    pub atoms: usize,
    /// Timed repetitions per point (the median is reported)
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Worker threads used while timing
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl Sweep {
    pub fn default_values(self) -> Vec<usize> {
        match self {
            Sweep::D => vec![8, 16, 32, 64],
            Sweep::Samples => vec![100, 200, 400, 800, 1600],
            Sweep::Atoms => vec![5, 10, 20, 40],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub sweep: Sweep,
    pub value: usize,
    pub grad_median_ms: f64,
    pub objective_median_ms: f64,
    pub reps: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct BenchSetup {
    pub dim: usize,
    pub samples: usize,
    pub atoms: usize,
    pub reps: usize,
    pub seed: u64,
}

/// Times `grad_atom` (atom 0, full batch) and `objective` at each value of
/// the swept quantity, on the calling thread pool.
pub fn bench_sweep(sweep: Sweep, values: &[usize], setup: BenchSetup) -> Result<Vec<BenchRow>> {
    ensure!(setup.reps >= 1, "reps must be at least 1");
    values
        .iter()
        .map(|&value| {
            let mut s = setup;
            match sweep {
                Sweep::D => s.dim = value,
                Sweep::Samples => s.samples = value,
                Sweep::Atoms => s.atoms = value,
            }
            let (data, model) = problem(s)?;
            let grad = median_ms(s.reps, || grad_atom(&data, &model, 0).map(|_| ()))?;
            let obj = median_ms(s.reps, || objective(&data, &model).map(|_| ()))?;
            Ok(BenchRow {
                sweep,
                value,
                grad_median_ms: grad,
                objective_median_ms: obj,
                reps: s.reps,
            })
        })
        .collect()
}

fn problem(s: BenchSetup) -> Result<(LabeledSpdDataset, IddlModel)> {
    ensure!(s.samples >= 2 && s.atoms >= 1 && s.dim >= 1, "bench needs samples >= 2, atoms >= 1, dim >= 1");
    let spec = |count: usize, seed: u64| SyntheticSpec {
        classes: 2,
        dim: s.dim,
        per_class: count.div_ceil(2),
        spread: s.dim as f64 + 10.0,
        seed,
    };
    let all = generate_synthetic(&spec(s.samples, s.seed))?;
    let data = all.subset(&(0..s.samples).collect::<Vec<_>>())?;
    let atoms = generate_synthetic(&spec(s.atoms, s.seed.wrapping_add(1)))?;
    let dictionary = Dictionary::new(atoms.samples()[..s.atoms].to_vec())?;
    let alpha: Vec<f64> = (0..s.atoms).map(|k| 0.5 + 0.1 * (k % 5) as f64).collect();
    let beta: Vec<f64> = (0..s.atoms).map(|k| 1.5 - 0.1 * (k % 3) as f64).collect();
    let params = AbldParams::new(Variant::VectorFree, alpha, beta)?;
    let w = DMatrix::from_fn(2, s.atoms, |i, j| ((i + 2 * j) % 5) as f64 * 0.1 - 0.2);
    Ok((data, IddlModel::new(dictionary, params, w, 1e-3, 2)?))
}

fn median_ms<F: FnMut() -> spdkit::Result<()>>(reps: usize, mut f: F) -> Result<f64> {
    f()?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    let m = times.len() / 2;
    Ok(if times.len() % 2 == 1 { times[m] } else { 0.5 * (times[m - 1] + times[m]) })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Slopes of gradient and objective time against the swept value.
pub fn slopes(rows: &[BenchRow]) -> (f64, f64) {
    let x: Vec<f64> = rows.iter().map(|r| r.value as f64).collect();
    let g: Vec<f64> = rows.iter().map(|r| r.grad_median_ms).collect();
    let o: Vec<f64> = rows.iter().map(|r| r.objective_median_ms).collect();
    (loglog_slope(&x, &g), loglog_slope(&x, &o))
}

pub fn run(args: &Args, prov: &Provenance) -> Result<()> {
    ensure!(args.threads >= 1, "threads must be at least 1");
    let values = args.values.clone().unwrap_or_else(|| args.sweep.default_values());
    let setup = BenchSetup {
        dim: args.dim,
        samples: args.samples,
        atoms: args.atoms,
        reps: args.reps,
        seed: args.seed,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build()?;
    let rows = pool.install(|| bench_sweep(args.sweep, &values, setup))?;
    write_csv(&args.out, prov, Some(args.seed), &rows)?;
    let mut summary = json!({"points": rows.len()});
    if rows.len() >= 2 {
        let (g, o) = slopes(&rows);
        summary["grad_slope"] = json!(g);
        summary["objective_slope"] = json!(o);
    }
    print_json(&summary);
    Ok(())
}
