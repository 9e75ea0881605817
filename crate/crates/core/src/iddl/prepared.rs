//! Per-sample precomputation and the spectra shared by encodings and gradients.
//!
//! Everything here is driven by the eigenvalues `δ` of `X^{-1/2} B X^{-1/2}`.
//! The generalized eigenvalues of `(X, B)` are `λ = 1/δ`, so one symmetric
//! eigendecomposition per (sample, atom) pair serves the divergence, the atom
//! gradient and the parameter gradient.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::model::Dictionary;
use crate::dataio::LabeledSpdDataset;
use crate::divergence::{abld_term_dalpha, abld_term_dbeta, AbldParams, Variant};
use crate::error::{Error, Result};
use crate::spd::{spd_invsqrt, sym_eig, SpdMatrix, SymEig};

pub(crate) struct Prepared {
    pub inv_sqrt: Vec<DMatrix<f64>>,
    /// Zero-based class of each sample.
    pub targets: Vec<usize>,
    pub label_count: usize,
}

impl Prepared {
    pub fn new(data: &LabeledSpdDataset) -> Result<Self> {
        let inv_sqrt = data
            .samples()
            .par_iter()
            .enumerate()
            .map(|(i, x)| inv_sqrt(x).map_err(|e| e.at("sample", i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Prepared {
            inv_sqrt,
            targets: data.labels().iter().map(|&y| y as usize - 1).collect(),
            label_count: data.label_count() as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_sqrt.len()
    }

    /// `L × N` one-hot targets.
    pub fn one_hot(&self) -> DMatrix<f64> {
        one_hot(&self.targets, self.label_count)
    }
}

pub(crate) fn one_hot(targets: &[usize], label_count: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(label_count, targets.len());
    for (i, &t) in targets.iter().enumerate() {
        h[(t, i)] = 1.0;
    }
    h
}

pub(crate) fn inv_sqrt(x: &SpdMatrix) -> Result<DMatrix<f64>> {
    Ok(spd_invsqrt(x)?.into_inner())
}

/// Eigendecomposition of `X^{-1/2} B X^{-1/2}` given `X^{-1/2}`.
pub(crate) fn congruence_eig(inv_sqrt: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SymEig> {
    let c = inv_sqrt * b * inv_sqrt;
    let eig = sym_eig(&c)?;
    if !(eig.min_eigenvalue() > 0.0) {
        return Err(Error::NumericalBreakdown {
            context: format!("congruence spectrum has eigenvalue {:e}", eig.min_eigenvalue()),
        });
    }
    Ok(eig)
}

/// `D(X ‖ Bₖ)` from the spectrum `δ` of `X^{-1/2} Bₖ X^{-1/2}`.
pub(crate) fn value_from_deltas(params: &AbldParams, k: usize, deltas: &[f64]) -> Result<f64> {
    let lambdas: Vec<f64> = deltas.iter().map(|d| 1.0 / d).collect();
    params.divergence_from_eigvals(k, &lambdas)
}

/// Derivative of the per-eigenvalue divergence with respect to `δ`:
/// `(δ^θ − 1) / (δ(α + βδ^θ))` with `θ = α + β`, or `log δ / δ` at the AIRM origin.
pub(crate) fn delta_weight(variant: Variant, alpha: f64, beta: f64, delta: f64) -> f64 {
    if variant == Variant::Airm {
        return delta.ln() / delta;
    }
    let t = (alpha + beta) * delta.ln();
    if t <= 0.0 {
        t.exp_m1() / (delta * (alpha + beta * t.exp()))
    } else {
        -(-t).exp_m1() / (delta * (alpha * (-t).exp() + beta))
    }
}

/// `∇_B D(X ‖ B) = X^{-1/2} U diag(w(δ)) Uᵀ X^{-1/2}`, scaled by `weight`.
pub(crate) fn pair_gradient(
    inv_sqrt: &DMatrix<f64>,
    eig: &SymEig,
    params: &AbldParams,
    k: usize,
    weight: f64,
) -> DMatrix<f64> {
    let (variant, a, b) = (params.variant(), params.alpha()[k], params.beta()[k]);
    let m = inv_sqrt * &eig.eigenvectors;
    let mut scaled = m.clone();
    for (j, &delta) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(weight * delta_weight(variant, a, b, delta));
    }
    let g = scaled * m.transpose();
    (&g + g.transpose()) * 0.5
}

/// `n × N` encoding matrix; column `i` is the encoding of sample `i`.
pub(crate) fn encode_matrix(prep: &Prepared, dict: &Dictionary, params: &AbldParams) -> Result<DMatrix<f64>> {
    let n = dict.len();
    let cols = prep
        .inv_sqrt
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            (0..n)
                .map(|k| {
                    let eig = congruence_eig(s, dict.atom(k).as_matrix())?;
                    value_from_deltas(params, k, eig.eigenvalues.as_slice()).map_err(|e| e.at("atom", k))
                })
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| e.at("sample", i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(n, prep.len(), |k, i| cols[i][k]))
}

/// Spectra `δ` of every (sample, atom) pair for a fixed dictionary.
///
/// Re-encoding under new divergence parameters costs `O(N·n·d)` once the
/// cache is built, which makes parameter line searches and grid sweeps cheap.
pub struct SpectralCache {
    n_atoms: usize,
    dim: usize,
    /// `deltas[(i·n + k)·d + j]`
    deltas: Vec<f64>,
}

impl SpectralCache {
    pub fn new(data: &LabeledSpdDataset, dict: &Dictionary) -> Result<Self> {
        Self::from_prepared(&Prepared::new(data)?, dict)
    }

    pub(crate) fn from_prepared(prep: &Prepared, dict: &Dictionary) -> Result<Self> {
        let n = dict.len();
        let d = dict.dim();
        let rows = prep
            .inv_sqrt
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let mut out = Vec::with_capacity(n * d);
                for k in 0..n {
                    let eig = congruence_eig(s, dict.atom(k).as_matrix()).map_err(|e| e.at("atom", k).at("sample", i))?;
                    out.extend(eig.eigenvalues.iter());
                }
                Ok(out)
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(SpectralCache {
            n_atoms: n,
            dim: d,
            deltas: rows.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.deltas.len() / (self.n_atoms * self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    fn pair(&self, i: usize, k: usize) -> &[f64] {
        let start = (i * self.n_atoms + k) * self.dim;
        &self.deltas[start..start + self.dim]
    }

    /// `n × N` encodings under `params`.
    pub fn encodings(&self, params: &AbldParams) -> Result<DMatrix<f64>> {
        if params.len() != self.n_atoms {
            return Err(Error::DimensionMismatch {
                expected: self.n_atoms,
                found: params.len(),
            });
        }
        let n = self.n_atoms;
        let cols = (0..self.len())
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|k| value_from_deltas(params, k, self.pair(i, k)).map_err(|e| e.at("atom", k)))
                    .collect::<Result<Vec<f64>>>()
                    .map_err(|e| e.at("sample", i))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(n, self.len(), |k, i| cols[i][k]))
    }

    /// Per-atom `(∂/∂αₖ, ∂/∂βₖ)` of `Σᵢ ζᵢₖ D(Xᵢ ‖ Bₖ)` for an `n × N` weight matrix `ζ`.
    pub(crate) fn param_gradient(&self, params: &AbldParams, zeta: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n_atoms;
        let per_sample = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut da = vec![0.0; n];
                let mut db = vec![0.0; n];
                for k in 0..n {
                    let z = zeta[(k, i)];
                    if z == 0.0 {
                        continue;
                    }
                    let (a, b) = (params.alpha()[k], params.beta()[k]);
                    let (mut sa, mut sb) = (0.0, 0.0);
                    for &delta in self.pair(i, k) {
                        let lambda = 1.0 / delta;
                        sa += abld_term_dalpha(lambda, a, b);
                        sb += abld_term_dbeta(lambda, a, b);
                    }
                    da[k] = z * sa;
                    db[k] = z * sb;
                }
                (da, db)
            })
            .collect::<Vec<_>>();
        let mut da = vec![0.0; n];
        let mut db = vec![0.0; n];
        for (a, b) in &per_sample {
            for k in 0..n {
                da[k] += a[k];
                db[k] += b[k];
            }
        }
        if !da.iter().chain(&db).all(|v| v.is_finite()) {
            return Err(Error::NumericalBreakdown {
                context: "divergence parameter gradient".into(),
            });
        }
        Ok((da, db))
    }
}
