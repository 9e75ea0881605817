//! The αβ-log-det divergence family on SPD matrices.
//!
//! `D(X‖Y; α, β) = (1/αβ) log det[(α(XY⁻¹)^β + β(XY⁻¹)^{−α}) / (α+β)]`
//!
//! depends only on the generalized eigenvalues `λ` of `XY⁻¹`, so every
//! evaluation goes through [`gen_eigvals`] and a per-eigenvalue scalar
//! function ([`abld_term`]). The origin `α = β = 0` is a separate branch
//! ([`abld_airm`]): the limit of the family there, which is half the squared
//! affine-invariant Riemannian distance ([`airm_distance_sq`]).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{check_same_dim, gen_eigvals, logdet, SpdMatrix};

/// Smallest α or β accepted for learned parameters.
pub const PARAM_FLOOR: f64 = 1e-3;
/// Largest α or β reached by parameter updates.
pub const PARAM_CEILING: f64 = 10.0;

/// Per-eigenvalue contribution `(1/αβ) log((αλ^β + βλ^{−α}) / (α+β))` for `α, β > 0`.
///
/// Evaluated in log-space: with `ℓ = log λ` the ratio is
/// `(α e^{βℓ} + β e^{−αℓ}) / (α+β)`, which is `1 + O(ℓ²)` near `λ = 1` and
/// overflows naively for large `|ℓ|`.
pub fn abld_term(lambda: f64, alpha: f64, beta: f64) -> f64 {
    let ell = lambda.ln();
    let a = beta * ell;
    let b = -alpha * ell;
    let val = if a.abs() < 0.5 && b.abs() < 0.5 {
        ((alpha * a.exp_m1() + beta * b.exp_m1()) / (alpha + beta)).ln_1p()
    } else {
        let m = a.max(b);
        m + (alpha * (a - m).exp() + beta * (b - m).exp()).ln() - (alpha + beta).ln()
    };
    val / (alpha * beta)
}

/// `∂/∂α` of [`abld_term`]:
/// `(1/α²β)·[α(λ^β − βλ^{−α} log λ)/A − α/(α+β) − log(A/(α+β))]`
/// with `A = αλ^β + βλ^{−α}`.
pub fn abld_term_dalpha(lambda: f64, alpha: f64, beta: f64) -> f64 {
    let ell = lambda.ln();
    let a = beta * ell;
    let b = -alpha * ell;
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    let first = alpha * (ea - beta * ell * eb) / (alpha * ea + beta * eb);
    let log_ratio = alpha * beta * abld_term(lambda, alpha, beta);
    (first - alpha / (alpha + beta) - log_ratio) / (alpha * alpha * beta)
}

/// `∂/∂β` of [`abld_term`], from the swap symmetry
/// `φ(λ; α, β) = φ(1/λ; β, α)`.
pub fn abld_term_dbeta(lambda: f64, alpha: f64, beta: f64) -> f64 {
    abld_term_dalpha(1.0 / lambda, beta, alpha)
}

fn check_pair(alpha: f64, beta: f64) -> Result<()> {
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidInput("alpha and beta must be finite".into()));
    }
    if alpha == 0.0 || beta == 0.0 || alpha + beta == 0.0 {
        return Err(Error::InvalidInput(format!(
            "(alpha, beta) = ({alpha}, {beta}) requires alpha != 0, beta != 0, alpha + beta != 0; \
             use abld_airm for the origin"
        )));
    }
    Ok(())
}

/// Divergence from generalized eigenvalues of `XY⁻¹`.
pub fn abld_from_eigvals(lambdas: &[f64], alpha: f64, beta: f64) -> Result<f64> {
    check_pair(alpha, beta)?;
    if alpha > 0.0 && beta > 0.0 {
        return Ok(lambdas.iter().map(|&l| abld_term(l, alpha, beta)).sum());
    }
    // Mixed or negative orthant: direct evaluation with a positivity guard.
    let mut total = 0.0;
    for (i, &l) in lambdas.iter().enumerate() {
        let ratio = (alpha * l.powf(beta) + beta * l.powf(-alpha)) / (alpha + beta);
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(Error::DegenerateDivergence(format!(
                "log-det argument {ratio:e} is not positive at eigenvalue {i} (lambda = {l})"
            )));
        }
        total += ratio.ln() / (alpha * beta);
    }
    Ok(total)
}

pub fn abld(x: &SpdMatrix, y: &SpdMatrix, alpha: f64, beta: f64) -> Result<f64> {
    check_pair(alpha, beta)?;
    let lambdas = gen_eigvals(x, y)?;
    abld_from_eigvals(lambdas.as_slice(), alpha, beta)
}

/// The divergence at the origin, `lim_{α,β→0} D = ½ Σ (log λᵢ)²`.
///
/// Every path into the origin gives
/// `log((αλ^β + βλ^{−α})/(α+β)) = αβ(log λ)²/2 + O(3)`, hence the ½.
pub fn abld_airm(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    let lambdas = gen_eigvals(x, y)?;
    Ok(airm_from_eigvals(lambdas.as_slice()))
}

pub fn airm_from_eigvals(lambdas: &[f64]) -> f64 {
    0.5 * lambdas.iter().map(|l| l.ln().powi(2)).sum::<f64>()
}

/// Squared affine-invariant Riemannian distance `‖Log(X^{−1/2} Y X^{−1/2})‖²_F = Σ (log λᵢ)²`.
pub fn airm_distance_sq(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    Ok(2.0 * abld_airm(x, y)?)
}

/// Jensen-Bregman log-det divergence `logdet((X+Y)/2) − ½ logdet(XY)`.
pub fn jbld(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    check_same_dim(x, y)?;
    let mid = (x.as_matrix() + y.as_matrix()) * 0.5;
    Ok(logdet(&mid)? - 0.5 * (logdet(x.as_matrix())? + logdet(y.as_matrix())?))
}

/// Symmetrized KL (Jeffreys) divergence `½ tr(XY⁻¹ + YX⁻¹) − d`.
pub fn jeffreys_kl(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    check_same_dim(x, y)?;
    let d = x.dim() as f64;
    Ok(0.5 * (trace_solve(y, x)? + trace_solve(x, y)?) - d)
}

/// Burg matrix divergence `tr(XY⁻¹) − logdet(XY⁻¹) − d`.
pub fn burg(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    check_same_dim(x, y)?;
    let d = x.dim() as f64;
    Ok(trace_solve(y, x)? - logdet(x.as_matrix())? + logdet(y.as_matrix())? - d)
}

/// `tr(A⁻¹ B)` (equal to `tr(B A⁻¹)`).
fn trace_solve(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    let chol = a
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
        })?;
    Ok(chol.solve(b.as_matrix()).trace())
}

/// Per-eigenvalue slack of the positivity condition for mixed-sign `(α, β)`.
///
/// `lambdas` are eigenvalues of `X⁻¹Y`. For `α > 0 > β` the slack is
/// `λᵢ − |α/β|^{1/(α+β)}`; for `α < 0 < β` it is `|β/α|^{1/(α+β)} − λᵢ`.
/// A nonpositive entry means the divergence cannot be nonnegative for this pair.
pub fn mixed_sign_slack(lambdas: &[f64], alpha: f64, beta: f64) -> Result<DVector<f64>> {
    check_pair(alpha, beta)?;
    if alpha.signum() == beta.signum() {
        return Err(Error::InvalidInput(
            "slack is only defined for (alpha, beta) of opposite signs".into(),
        ));
    }
    let theta = alpha + beta;
    let slack = if alpha > 0.0 {
        let bound = (alpha / beta).abs().powf(1.0 / theta);
        lambdas.iter().map(|&l| l - bound).collect::<Vec<_>>()
    } else {
        let bound = (beta / alpha).abs().powf(1.0 / theta);
        lambdas.iter().map(|&l| bound - l).collect::<Vec<_>>()
    };
    Ok(DVector::from_vec(slack))
}

/// [`mixed_sign_slack`] on the eigenvalues of `X⁻¹Y`.
pub fn mixed_sign_margin(x: &SpdMatrix, y: &SpdMatrix, alpha: f64, beta: f64) -> Result<DVector<f64>> {
    check_pair(alpha, beta)?;
    // spectrum of X⁻¹Y equals that of YX⁻¹
    let lambdas = gen_eigvals(y, x)?;
    mixed_sign_slack(lambdas.as_slice(), alpha, beta)
}

/// How the per-atom parameters are tied together.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// One (α, β) pair shared by every atom.
    Scalar,
    /// Per-atom parameters with α = β.
    VectorTied,
    /// Independent per-atom α and β.
    VectorFree,
    /// Frozen at the origin: squared AIRM.
    Airm,
    /// Frozen at α = β = 1.
    Burg,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Scalar,
        Variant::VectorTied,
        Variant::VectorFree,
        Variant::Airm,
        Variant::Burg,
    ];

    pub fn tag(self) -> char {
        match self {
            Variant::Scalar => 'S',
            Variant::VectorTied => 'V',
            Variant::VectorFree => 'N',
            Variant::Airm => 'A',
            Variant::Burg => 'B',
        }
    }

    pub fn from_tag(tag: char) -> Option<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag() == tag.to_ascii_uppercase())
    }

    pub fn learns_params(self) -> bool {
        !matches!(self, Variant::Airm | Variant::Burg)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.tag())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Variant::from_tag(c),
            _ => None,
        }
        .ok_or_else(|| Error::InvalidInput(format!("unknown variant {s:?} (expected S, V, N, A or B)")))
    }
}

/// Per-atom divergence parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AbldParams {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    variant: Variant,
}

impl AbldParams {
    pub fn new(variant: Variant, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let p = AbldParams {
            alpha,
            beta,
            variant,
        };
        p.validate()?;
        Ok(p)
    }

    /// The same `(α, β)` on every atom. Frozen variants ignore the pair.
    pub fn uniform(variant: Variant, n: usize, alpha: f64, beta: f64) -> Result<Self> {
        let (alpha, beta) = match variant {
            Variant::Airm => (0.0, 0.0),
            Variant::Burg => (1.0, 1.0),
            _ => (alpha, beta),
        };
        Self::new(variant, vec![alpha; n], vec![beta; n])
    }

    /// α = β = 1 on every atom (AIRM keeps its origin).
    pub fn burg_start(variant: Variant, n: usize) -> Self {
        Self::uniform(variant, n, 1.0, 1.0).expect("Burg start is valid for every variant")
    }

    fn validate(&self) -> Result<()> {
        let n = self.alpha.len();
        if n == 0 || self.beta.len() != n {
            return Err(Error::InvalidInput(format!(
                "need matching nonempty alpha/beta vectors, got {} and {}",
                self.alpha.len(),
                self.beta.len()
            )));
        }
        let pairs = self.alpha.iter().zip(&self.beta);
        match self.variant {
            Variant::Airm => {
                if pairs.clone().any(|(&a, &b)| a != 0.0 || b != 0.0) {
                    return Err(Error::InvalidInput("AIRM variant pins alpha = beta = 0".into()));
                }
            }
            Variant::Burg => {
                if pairs.clone().any(|(&a, &b)| a != 1.0 || b != 1.0) {
                    return Err(Error::InvalidInput("Burg variant pins alpha = beta = 1".into()));
                }
            }
            _ => {
                for (k, (&a, &b)) in pairs.clone().enumerate() {
                    if !(a >= PARAM_FLOOR && b >= PARAM_FLOOR) || !a.is_finite() || !b.is_finite() {
                        return Err(Error::InvalidInput(format!(
                            "atom {k}: (alpha, beta) = ({a}, {b}) must be finite and >= {PARAM_FLOOR}"
                        )));
                    }
                }
            }
        }
        match self.variant {
            Variant::Scalar => {
                let (a0, b0) = (self.alpha[0], self.beta[0]);
                if pairs.clone().any(|(&a, &b)| a != a0 || b != b0) {
                    return Err(Error::InvalidInput(
                        "scalar variant shares one (alpha, beta) across atoms".into(),
                    ));
                }
            }
            Variant::VectorTied if pairs.clone().any(|(a, b)| a != b) => {
                return Err(Error::InvalidInput("tied variant requires alpha = beta".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Divergence for atom `k` from eigenvalues of `X B_k⁻¹`.
    pub fn divergence_from_eigvals(&self, k: usize, lambdas: &[f64]) -> Result<f64> {
        match self.variant {
            Variant::Airm => Ok(airm_from_eigvals(lambdas)),
            _ => abld_from_eigvals(lambdas, self.alpha[k], self.beta[k]),
        }
    }

    /// The free coordinates updated by learning, in packed order:
    /// Scalar `[α, β]`, VectorTied `[c₁..cₙ]`, VectorFree `[α₁..αₙ, β₁..βₙ]`,
    /// frozen variants nothing.
    pub fn free_params(&self) -> Vec<f64> {
        match self.variant {
            Variant::Scalar => vec![self.alpha[0], self.beta[0]],
            Variant::VectorTied => self.alpha.clone(),
            Variant::VectorFree => self.alpha.iter().chain(&self.beta).copied().collect(),
            Variant::Airm | Variant::Burg => Vec::new(),
        }
    }

    /// Inverse of [`free_params`](Self::free_params).
    pub fn with_free_params(&self, free: &[f64]) -> Result<Self> {
        let n = self.len();
        let expected = self.free_params().len();
        if free.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: free.len(),
            });
        }
        let (alpha, beta) = match self.variant {
            Variant::Scalar => (vec![free[0]; n], vec![free[1]; n]),
            Variant::VectorTied => (free.to_vec(), free.to_vec()),
            Variant::VectorFree => (free[..n].to_vec(), free[n..].to_vec()),
            Variant::Airm | Variant::Burg => return Ok(self.clone()),
        };
        Self::new(self.variant, alpha, beta)
    }

    /// Chain rule from per-atom `(∂/∂αₖ, ∂/∂βₖ)` to the packed free coordinates.
    pub fn reduce_gradient(&self, d_alpha: &[f64], d_beta: &[f64]) -> Vec<f64> {
        match self.variant {
            Variant::Scalar => vec![d_alpha.iter().sum(), d_beta.iter().sum()],
            Variant::VectorTied => d_alpha.iter().zip(d_beta).map(|(a, b)| a + b).collect(),
            Variant::VectorFree => d_alpha.iter().chain(d_beta).copied().collect(),
            Variant::Airm | Variant::Burg => Vec::new(),
        }
    }
}
