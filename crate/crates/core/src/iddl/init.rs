use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gradient::solve_ridge;
use super::model::Dictionary;
use super::prepared::{Prepared, SpectralCache};
use crate::classify::argmax_label;
use crate::dataio::LabeledSpdDataset;
use crate::divergence::{AbldParams, Variant};
use crate::error::{Error, Result};
use crate::spd::{spd_exp, spd_log};

/// Lloyd iterations of the log-Euclidean k-means initializer.
pub const KMEANS_MAX_ITERS: usize = 100;
/// Relative centroid shift below which k-means stops.
pub const KMEANS_TOL: f64 = 1e-6;

/// Log-Euclidean k-means: k-means++ seeding and Lloyd iterations on the
/// matrix logarithms of the samples, centroids mapped back by the matrix
/// exponential. An emptied cluster is re-seeded at the sample farthest from
/// its assigned centroid.
pub fn init_dictionary(data: &LabeledSpdDataset, n_atoms: usize, seed: u64) -> Result<Dictionary> {
    let n = data.len();
    if n_atoms == 0 || n_atoms > n {
        return Err(Error::InvalidInput(format!("n_atoms = {n_atoms} must be in 1..={n}")));
    }
    let d = data.dim();
    let points = data
        .samples()
        .par_iter()
        .map(|x| spd_log(x).map(|l| DVector::from_column_slice(l.as_slice())))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(&points, n_atoms, &mut rng);

    for _ in 0..KMEANS_MAX_ITERS {
        let assigned: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(&centers, p)).collect();
        let mut sums = vec![DVector::zeros(d * d); n_atoms];
        let mut counts = vec![0usize; n_atoms];
        for (p, &(c, _)) in points.iter().zip(&assigned) {
            sums[c] += p;
            counts[c] += 1;
        }
        let mut taken = vec![false; n];
        let mut next = Vec::with_capacity(n_atoms);
        for c in 0..n_atoms {
            if counts[c] > 0 {
                next.push(&sums[c] / counts[c] as f64);
            } else {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| assigned[a].1.total_cmp(&assigned[b].1).then(b.cmp(&a)))
                    .expect("n_atoms <= N leaves a free sample");
                taken[far] = true;
                next.push(points[far].clone());
            }
        }
        let shift: f64 = centers.iter().zip(&next).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
        let size: f64 = centers.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt();
        centers = next;
        if shift <= KMEANS_TOL * size.max(f64::MIN_POSITIVE) {
            break;
        }
    }

    let atoms = centers
        .iter()
        .map(|c| spd_exp(&DMatrix::from_column_slice(d, d, c.as_slice())))
        .collect::<Result<Vec<_>>>()?;
    Dictionary::new(atoms)
}

fn seed_centers(points: &[DVector<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = points.iter().map(|p| (p - &points[first]).norm_squared()).collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(rng),
            // every remaining point coincides with a chosen center
            Err(_) => (0..n).find(|i| !chosen.contains(i)).expect("k <= N"),
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min((p - &points[next]).norm_squared());
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Index of the closest center (smallest index on ties) and the squared distance.
fn nearest(centers: &[DVector<f64>], p: &DVector<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let dist = (p - center).norm_squared();
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

/// Initial divergence parameters: α = β = 1 without a grid, otherwise the
/// grid pair whose classifier-only fit on `dict` has the best training
/// accuracy (first pair on ties). Frozen variants return their fixed pair.
/// The tied variant only considers pairs with α = β.
pub fn init_params(
    data: &LabeledSpdDataset,
    dict: &Dictionary,
    variant: Variant,
    grid: Option<&[(f64, f64)]>,
    gamma: f64,
) -> Result<AbldParams> {
    let Some(grid) = grid else {
        return Ok(AbldParams::burg_start(variant, dict.len()));
    };
    if grid.is_empty() {
        return Err(Error::InvalidInput("parameter grid is empty".into()));
    }
    if !variant.learns_params() {
        return Ok(AbldParams::burg_start(variant, dict.len()));
    }
    let prep = Prepared::new(data)?;
    let cache = SpectralCache::from_prepared(&prep, dict)?;
    init_params_cached(&cache, &prep, variant, grid, gamma)
}

pub(crate) fn init_params_cached(
    cache: &SpectralCache,
    prep: &Prepared,
    variant: Variant,
    grid: &[(f64, f64)],
    gamma: f64,
) -> Result<AbldParams> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("parameter grid is empty".into()));
    }
    let n = cache_atoms(cache, prep)?;
    if !variant.learns_params() {
        return Ok(AbldParams::burg_start(variant, n));
    }
    let h = prep.one_hot();
    let mut best: Option<(f64, AbldParams)> = None;
    for &(alpha, beta) in grid {
        if variant == Variant::VectorTied && alpha != beta {
            continue;
        }
        let params = AbldParams::uniform(variant, n, alpha, beta)?;
        let v = cache.encodings(&params)?;
        let w = solve_ridge(&v, &h, gamma)?;
        let acc = training_accuracy(&(w * v), &prep.targets);
        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            best = Some((acc, params));
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::InvalidInput("no grid pair is valid for the tied variant (needs alpha = beta)".into()))
}

fn cache_atoms(cache: &SpectralCache, prep: &Prepared) -> Result<usize> {
    if cache.len() != prep.len() {
        return Err(Error::DimensionMismatch {
            expected: prep.len(),
            found: cache.len(),
        });
    }
    Ok(cache.n_atoms())
}

/// Fraction of columns of `scores` (`L × N`) whose argmax is the target.
pub(crate) fn training_accuracy(scores: &DMatrix<f64>, targets: &[usize]) -> f64 {
    let hits = targets
        .iter()
        .enumerate()
        .filter(|&(i, &t)| argmax_label(scores.column(i).as_slice()) == t)
        .count();
    hits as f64 / targets.len() as f64
}
