use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::model::{Dictionary, Encoding, IddlModel};
use super::prepared::{congruence_eig, encode_matrix, inv_sqrt, one_hot, pair_gradient, value_from_deltas, Prepared, SpectralCache};
use crate::dataio::LabeledSpdDataset;
use crate::divergence::{AbldParams, Variant};
use crate::error::{Error, Result};
use crate::spd::{spd_inverse, spd_power, spd_sqrt, SpdMatrix};

/// Divergences of `x` to every atom.
pub fn encode(x: &SpdMatrix, dict: &Dictionary, params: &AbldParams) -> Result<Encoding> {
    check_model_shape(dict, params, x.dim())?;
    let s = inv_sqrt(x)?;
    let values = (0..dict.len())
        .map(|k| {
            let eig = congruence_eig(&s, dict.atom(k).as_matrix())?;
            value_from_deltas(params, k, eig.eigenvalues.as_slice()).map_err(|e| e.at("atom", k))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Encoding {
        values: DVector::from_vec(values),
    })
}

fn check_model_shape(dict: &Dictionary, params: &AbldParams, d: usize) -> Result<()> {
    if dict.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: dict.dim(),
            found: d,
        });
    }
    if params.len() != dict.len() {
        return Err(Error::DimensionMismatch {
            expected: dict.len(),
            found: params.len(),
        });
    }
    Ok(())
}

fn check_data(data: &LabeledSpdDataset, model: &IddlModel) -> Result<()> {
    model.validate()?;
    check_model_shape(&model.dictionary, &model.params, data.dim())?;
    if data.label_count() != model.label_count {
        return Err(Error::InvalidDataset(format!(
            "dataset has {} classes, model has {}",
            data.label_count(),
            model.label_count
        )));
    }
    Ok(())
}

/// `½‖W V − H‖²_F + γ‖W‖²_F` for encodings `V` (`n × N`) and targets `H` (`L × N`).
pub(crate) fn objective_value(v: &DMatrix<f64>, h: &DMatrix<f64>, w: &DMatrix<f64>, gamma: f64) -> f64 {
    let r = w * v - h;
    0.5 * r.norm_squared() + gamma * w.norm_squared()
}

/// `n × N` matrix whose column `i` is `ζᵢ = Wᵀ(W vᵢ − hᵢ)`.
pub(crate) fn zeta_matrix(v: &DMatrix<f64>, h: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    w.transpose() * (w * v - h)
}

/// The training objective `Σᵢ ½‖hᵢ − W vᵢ‖² + γ‖W‖²_F`.
pub fn objective(data: &LabeledSpdDataset, model: &IddlModel) -> Result<f64> {
    check_data(data, model)?;
    let prep = Prepared::new(data)?;
    let v = encode_matrix(&prep, &model.dictionary, &model.params)?;
    Ok(objective_value(&v, &prep.one_hot(), &model.w, model.gamma))
}

/// Sensitivity of the loss to the encoding, `ζ = −(h − W v)ᵀ W`.
pub fn zeta(model: &IddlModel, v: &Encoding, h: &DVector<f64>) -> Result<DVector<f64>> {
    let (l, n) = model.w.shape();
    if v.values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.values.len(),
        });
    }
    if h.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            found: h.len(),
        });
    }
    Ok(model.w.transpose() * (&model.w * &v.values - h))
}

struct Batch {
    prep: Prepared,
    zeta: DMatrix<f64>,
}

fn batch(data: &LabeledSpdDataset, model: &IddlModel) -> Result<Batch> {
    check_data(data, model)?;
    let prep = Prepared::new(data)?;
    let v = encode_matrix(&prep, &model.dictionary, &model.params)?;
    let zeta = zeta_matrix(&v, &prep.one_hot(), &model.w);
    Ok(Batch { prep, zeta })
}

fn check_atom(model: &IddlModel, k: usize) -> Result<()> {
    if k >= model.n_atoms() {
        return Err(Error::InvalidInput(format!("atom {k} out of range (n = {})", model.n_atoms())));
    }
    Ok(())
}

/// Full-batch Euclidean gradient of the objective with respect to atom `k`,
/// from one eigendecomposition of `Xᵢ^{-1/2} Bₖ Xᵢ^{-1/2}` per sample.
pub(crate) fn atom_gradient(prep: &Prepared, b: &DMatrix<f64>, params: &AbldParams, k: usize, zeta_k: &[f64]) -> Result<DMatrix<f64>> {
    let d = b.nrows();
    let terms = prep
        .inv_sqrt
        .par_iter()
        .zip(zeta_k.par_iter())
        .enumerate()
        .map(|(i, (s, &z))| {
            if z == 0.0 {
                return Ok(None);
            }
            let eig = congruence_eig(s, b).map_err(|e| e.at("sample", i))?;
            Ok(Some(pair_gradient(s, &eig, params, k, z)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sum_terms(terms, d))
}

pub(crate) fn sum_terms(terms: Vec<Option<DMatrix<f64>>>, d: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(d, d);
    for t in terms.into_iter().flatten() {
        g += t;
    }
    g
}

/// Euclidean gradient of the objective with respect to atom `k`.
pub fn grad_atom(data: &LabeledSpdDataset, model: &IddlModel, k: usize) -> Result<DMatrix<f64>> {
    check_atom(model, k)?;
    if model.params.variant() == Variant::Airm {
        return Err(Error::InvalidInput("AIRM variant: use grad_atom_airm".into()));
    }
    let bt = batch(data, model)?;
    let zk: Vec<f64> = bt.zeta.row(k).iter().copied().collect();
    atom_gradient(&bt.prep, model.dictionary.atom(k).as_matrix(), &model.params, k, &zk)
}

/// Euclidean gradient of the objective with respect to atom `k` for the AIRM
/// variant: `Σᵢ ζᵢₖ Xᵢ^{-1/2} Log(Pᵢₖ) Pᵢₖ⁻¹ Xᵢ^{-1/2}` with
/// `Pᵢₖ = Xᵢ^{-1/2} Bₖ Xᵢ^{-1/2}`.
pub fn grad_atom_airm(data: &LabeledSpdDataset, model: &IddlModel, k: usize) -> Result<DMatrix<f64>> {
    check_atom(model, k)?;
    if model.params.variant() != Variant::Airm {
        return Err(Error::InvalidInput("grad_atom_airm needs the AIRM variant".into()));
    }
    let bt = batch(data, model)?;
    let zk: Vec<f64> = bt.zeta.row(k).iter().copied().collect();
    atom_gradient(&bt.prep, model.dictionary.atom(k).as_matrix(), &model.params, k, &zk)
}

/// [`grad_atom`] evaluated through the log-det form
/// `D = (1/αβ)·log det[I + r(X⁻¹B)^θ] − (1/α)·log det B + const`, `r = β/α`,
/// `θ = α + β`, with explicit matrix powers and inverses:
///
/// ```text
/// ∇ = (rθ/αβ)·B⁻¹ X^{1/2} C^θ (I + r C^θ)⁻¹ X^{-1/2} − (1/α)·B⁻¹,   C = X^{-1/2} B X^{-1/2}
/// ```
///
/// Slower than [`grad_atom`]; kept as an independent cross-check.
pub fn grad_atom_direct(data: &LabeledSpdDataset, model: &IddlModel, k: usize) -> Result<DMatrix<f64>> {
    check_atom(model, k)?;
    if model.params.variant() == Variant::Airm {
        return Err(Error::InvalidInput("AIRM variant has no log-det form".into()));
    }
    let bt = batch(data, model)?;
    let b = model.dictionary.atom(k);
    let (alpha, beta) = (model.params.alpha()[k], model.params.beta()[k]);
    let (r, theta) = (beta / alpha, alpha + beta);
    let b_inv = spd_inverse(b)?.into_inner();
    let d = b.dim();
    let eye = DMatrix::<f64>::identity(d, d);
    let mut g = DMatrix::zeros(d, d);
    for (i, x) in data.samples().iter().enumerate() {
        let z = bt.zeta[(k, i)];
        if z == 0.0 {
            continue;
        }
        let x_half = spd_sqrt(x)?.into_inner();
        let x_mhalf = &bt.prep.inv_sqrt[i];
        let c = SpdMatrix::new(crate::spd::sym(&(x_mhalf * b.as_matrix() * x_mhalf))).map_err(|e| e.at("sample", i))?;
        let c_theta = spd_power(&c, theta)?.into_inner();
        let inner = (&eye + &c_theta * r)
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::SingularSystem(format!("I + rC^θ for sample {i}")))?;
        let logdet_part = &b_inv * &x_half * &c_theta * inner * x_mhalf * (r * theta / (alpha * beta));
        let term = logdet_part - &b_inv / alpha;
        g += crate::spd::sym(&term) * z;
    }
    Ok(g)
}

/// Per-atom partial derivatives of the objective in `αₖ` and `βₖ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradient {
    pub d_alpha: Vec<f64>,
    pub d_beta: Vec<f64>,
}

impl ParamGradient {
    /// Gradient in the variant's free coordinates (see [`AbldParams::free_params`]).
    pub fn packed(&self, params: &AbldParams) -> Vec<f64> {
        params.reduce_gradient(&self.d_alpha, &self.d_beta)
    }
}

/// Gradient of the objective in the divergence parameters.
pub fn grad_alpha_beta(data: &LabeledSpdDataset, model: &IddlModel) -> Result<ParamGradient> {
    if model.params.variant() == Variant::Airm {
        return Err(Error::InvalidInput("AIRM variant has no divergence parameters".into()));
    }
    let bt = batch(data, model)?;
    let cache = SpectralCache::from_prepared(&bt.prep, &model.dictionary)?;
    let (d_alpha, d_beta) = cache.param_gradient(&model.params, &bt.zeta)?;
    Ok(ParamGradient { d_alpha, d_beta })
}

/// Ridge solution `W = H Vᵀ (V Vᵀ + 2γI)⁻¹`, the minimizer of
/// `½‖W V − H‖²_F + γ‖W‖²_F`, for `V` (`n × N`) and `H` (`L × N`).
pub fn solve_ridge(v: &DMatrix<f64>, h: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    if v.ncols() != h.ncols() {
        return Err(Error::DimensionMismatch {
            expected: v.ncols(),
            found: h.ncols(),
        });
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    let n = v.nrows();
    let mut gram = v * v.transpose();
    for j in 0..n {
        gram[(j, j)] += 2.0 * gamma;
    }
    let scale = gram.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let singular = || {
        Error::SingularSystem(format!(
            "encoding Gram matrix is singular with gamma = {gamma}; use gamma > 0"
        ))
    };
    let chol = gram.cholesky().ok_or_else(singular)?;
    let pivots = chol.l_dirty().diagonal();
    if pivots.iter().any(|&p| !(p * p > 1e-14 * scale)) {
        return Err(singular());
    }
    let wt = chol.solve(&(v * h.transpose()));
    if !wt.iter().all(|x| x.is_finite()) {
        return Err(singular());
    }
    Ok(wt.transpose())
}

/// Ridge classifier for the model's current dictionary and parameters.
pub fn solve_w(data: &LabeledSpdDataset, model: &IddlModel) -> Result<DMatrix<f64>> {
    check_data(data, model)?;
    let prep = Prepared::new(data)?;
    let v = encode_matrix(&prep, &model.dictionary, &model.params)?;
    solve_ridge(&v, &one_hot(&prep.targets, prep.label_count), model.gamma)
}
