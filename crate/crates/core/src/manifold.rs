//! Riemannian conjugate gradient on the SPD manifold.
//!
//! The manifold carries the affine-invariant metric `⟨ξ, η⟩_B = tr(B⁻¹ξB⁻¹η)`.
//! Riemannian gradient, exponential-map retraction and parallel transport are
//! the standard closed forms for that metric.

use nalgebra::DMatrix;

use crate::divergence::{PARAM_CEILING, PARAM_FLOOR};
use crate::error::{Error, Result};
use crate::spd::{spd_inverse, spd_sqrt, sym, sym_eig, SpdMatrix, PD_TOL};

/// A symmetric matrix in the tangent space at `base`.
#[derive(Clone, Debug)]
pub struct TangentVector {
    pub base: SpdMatrix,
    pub value: DMatrix<f64>,
}

impl TangentVector {
    pub fn new(base: SpdMatrix, value: DMatrix<f64>) -> Result<Self> {
        if value.nrows() != base.dim() || value.ncols() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: value.nrows(),
            });
        }
        Ok(TangentVector {
            base,
            value: sym(&value),
        })
    }

    pub fn zero(base: SpdMatrix) -> Self {
        let d = base.dim();
        TangentVector {
            base,
            value: DMatrix::zeros(d, d),
        }
    }
}

/// Affine-invariant inner product `tr(B⁻¹ξB⁻¹η)` at `base`, given `B⁻¹`.
fn inner_with_inverse(base_inv: &DMatrix<f64>, xi: &DMatrix<f64>, eta: &DMatrix<f64>) -> f64 {
    let a = base_inv * xi;
    let b = base_inv * eta;
    // tr(AB) = Σ_ij A_ij B_ji
    a.component_mul(&b.transpose()).sum()
}

pub fn inner(base: &SpdMatrix, xi: &DMatrix<f64>, eta: &DMatrix<f64>) -> Result<f64> {
    let inv = spd_inverse(base)?;
    Ok(inner_with_inverse(inv.as_matrix(), xi, eta))
}

/// `B sym(∇) B`
pub fn riemannian_grad(base: &SpdMatrix, egrad: &DMatrix<f64>) -> Result<TangentVector> {
    let b = base.as_matrix();
    if egrad.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            found: egrad.nrows(),
        });
    }
    let value = sym(&(b * sym(egrad) * b));
    Ok(TangentVector {
        base: base.clone(),
        value,
    })
}

/// Exponential map `B^{1/2} Exp(t·B^{−1/2} ξ B^{−1/2}) B^{1/2}`.
pub fn retract(base: &SpdMatrix, xi: &TangentVector, step: f64) -> Result<SpdMatrix> {
    let root = RootedBase::new(base)?;
    root.retract(&xi.value, step)
}

/// Caches `B^{±1/2}` and `B⁻¹` for repeated work at one base point.
struct RootedBase {
    sqrt: DMatrix<f64>,
    invsqrt: DMatrix<f64>,
    inv: DMatrix<f64>,
    min_eigenvalue: f64,
}

impl RootedBase {
    fn new(base: &SpdMatrix) -> Result<Self> {
        let eig = base.eig();
        let min_eigenvalue = eig.min_eigenvalue();
        if min_eigenvalue <= PD_TOL {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        Ok(RootedBase {
            sqrt: eig.map(f64::sqrt),
            invsqrt: eig.map(|l| 1.0 / l.sqrt()),
            inv: eig.map(|l| 1.0 / l),
            min_eigenvalue,
        })
    }

    fn retract(&self, xi: &DMatrix<f64>, step: f64) -> Result<SpdMatrix> {
        let inner = sym(&(&self.invsqrt * xi * &self.invsqrt)) * step;
        let eig = sym_eig(&inner)?;
        let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        // λ_min(B^{1/2} E B^{1/2}) ≥ λ_min(E)·λ_min(B)
        if hi > 700.0 || lo.exp() * self.min_eigenvalue <= PD_TOL {
            return Err(Error::StepOverflow);
        }
        let e = eig.map(f64::exp);
        let out = sym(&(&self.sqrt * e * &self.sqrt));
        if !out.iter().all(|x| x.is_finite()) {
            return Err(Error::StepOverflow);
        }
        Ok(SpdMatrix::from_trusted(out))
    }

    /// `Z P Zᵀ` with `Z = B^{1/2} (B^{−1/2} Y B^{−1/2})^{1/2} B^{−1/2}`.
    fn transport_to(&self, to: &SpdMatrix, value: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let m = SpdMatrix::from_trusted(&self.invsqrt * to.as_matrix() * &self.invsqrt);
        let z = &self.sqrt * spd_sqrt(&m)?.as_matrix() * &self.invsqrt;
        Ok(sym(&(&z * value * z.transpose())))
    }
}

/// Transport `P` from `T_X` to `T_Y` as `Z P Zᵀ` with `Z = (Y X⁻¹)^{1/2}`.
///
/// `Z` is formed as `X^{1/2} (X^{−1/2} Y X^{−1/2})^{1/2} X^{−1/2}`, the
/// principal root of the (nonsymmetric) product `Y X⁻¹`.
pub fn parallel_transport(p: &TangentVector, x: &SpdMatrix, y: &SpdMatrix) -> Result<TangentVector> {
    if x.dim() != y.dim() || p.value.nrows() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim().max(p.value.nrows()),
        });
    }
    if x == y {
        return Ok(TangentVector {
            base: y.clone(),
            value: p.value.clone(),
        });
    }
    let root = RootedBase::new(x)?;
    Ok(TangentVector {
        base: y.clone(),
        value: root.transport_to(y, &p.value)?,
    })
}

/// Armijo backtracking parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LineSearch {
    pub c1: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    pub initial_step: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 30,
            initial_step: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RcgConfig {
    pub max_iters: usize,
    /// Relative objective change over [`REL_WINDOW`] iterations.
    pub rel_obj_tol: f64,
    pub grad_norm_tol: f64,
    pub line_search: LineSearch,
}

/// Iterations spanned by the relative-change stopping test.
pub const REL_WINDOW: usize = 5;

impl Default for RcgConfig {
    fn default() -> Self {
        RcgConfig {
            max_iters: 300,
            rel_obj_tol: 1e-6,
            grad_norm_tol: 1e-6,
            line_search: LineSearch::default(),
        }
    }
}

impl RcgConfig {
    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        let ok = self.max_iters >= 1
            && self.rel_obj_tol > 0.0
            && self.grad_norm_tol > 0.0
            && ls.c1 > 0.0
            && ls.c1 < 1.0
            && ls.shrink > 0.0
            && ls.shrink < 1.0
            && ls.initial_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid optimizer configuration {self:?}")))
        }
    }
}

/// A smooth cost on the SPD manifold with its Euclidean gradient.
pub trait SpdProblem {
    fn cost(&self, b: &SpdMatrix) -> Result<f64>;
    fn egrad(&self, b: &SpdMatrix) -> Result<DMatrix<f64>>;
}

impl<F, G> SpdProblem for (F, G)
where
    F: Fn(&SpdMatrix) -> Result<f64>,
    G: Fn(&SpdMatrix) -> Result<DMatrix<f64>>,
{
    fn cost(&self, b: &SpdMatrix) -> Result<f64> {
        (self.0)(b)
    }

    fn egrad(&self, b: &SpdMatrix) -> Result<DMatrix<f64>> {
        (self.1)(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    GradientNorm,
    RelativeChange,
    MaxIterations,
    LineSearchFailed,
}

/// One accepted RCG step.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: f64,
    /// `⟨grad, direction⟩` at the old point (negative for descent).
    pub slope: f64,
    pub cost_before: f64,
    pub cost_after: f64,
    /// Fletcher-Reeves coefficient used to build this step's direction.
    pub eta: f64,
    pub restarted: bool,
}

#[derive(Clone, Debug)]
pub struct RcgResult {
    pub point: SpdMatrix,
    /// Cost at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub stop: StopReason,
}

impl RcgResult {
    pub fn cost(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

/// Riemannian conjugate gradient with Fletcher-Reeves directions and Armijo
/// backtracking along the retraction.
pub fn rcg_minimize<P: SpdProblem + ?Sized>(problem: &P, b0: &SpdMatrix, cfg: &RcgConfig) -> Result<RcgResult> {
    cfg.validate()?;
    let ls = &cfg.line_search;

    let mut point = b0.clone();
    let mut cost = problem.cost(&point)?;
    if !cost.is_finite() {
        return Err(Error::InvalidStart);
    }
    let mut root = RootedBase::new(&point)?;
    let mut grad = riemannian_direction(problem, &point)?;
    let mut gnorm2 = inner_with_inverse(&root.inv, &grad, &grad);

    let mut trace = vec![cost];
    let mut steps = Vec::new();
    if gnorm2.sqrt() < cfg.grad_norm_tol {
        return Ok(RcgResult {
            point,
            trace,
            steps,
            stop: StopReason::GradientNorm,
        });
    }

    let mut direction = -&grad;
    let mut eta = 0.0;
    let mut stop = StopReason::MaxIterations;

    for _ in 0..cfg.max_iters {
        let mut slope = inner_with_inverse(&root.inv, &grad, &direction);
        let mut restarted = false;
        if !(slope < 0.0) {
            direction = -&grad;
            slope = -gnorm2;
            restarted = true;
        }

        let mut accepted = armijo(problem, &root, &direction, cost, slope, ls)?;
        if accepted.is_none() && !restarted {
            direction = -&grad;
            slope = -gnorm2;
            restarted = true;
            accepted = armijo(problem, &root, &direction, cost, slope, ls)?;
        }
        let Some((step, next, next_cost)) = accepted else {
            stop = StopReason::LineSearchFailed;
            break;
        };

        steps.push(StepRecord {
            step,
            slope,
            cost_before: cost,
            cost_after: next_cost,
            eta: if restarted { 0.0 } else { eta },
            restarted,
        });

        let next_root = RootedBase::new(&next)?;
        let next_grad = riemannian_direction(problem, &next)?;
        let next_gnorm2 = inner_with_inverse(&next_root.inv, &next_grad, &next_grad);
        // previous search direction, moved to the new base point
        let moved = root.transport_to(&next, &direction)?;

        eta = next_gnorm2 / gnorm2;
        direction = -&next_grad + moved * eta;

        point = next;
        root = next_root;
        grad = next_grad;
        gnorm2 = next_gnorm2;
        cost = next_cost;
        trace.push(cost);

        if gnorm2.sqrt() < cfg.grad_norm_tol {
            stop = StopReason::GradientNorm;
            break;
        }
        if trace.len() > REL_WINDOW {
            let old = trace[trace.len() - 1 - REL_WINDOW];
            let change = (old - cost).abs() / old.abs().max(f64::MIN_POSITIVE);
            if change < cfg.rel_obj_tol {
                stop = StopReason::RelativeChange;
                break;
            }
        }
    }

    Ok(RcgResult {
        point,
        trace,
        steps,
        stop,
    })
}

fn riemannian_direction<P: SpdProblem + ?Sized>(problem: &P, point: &SpdMatrix) -> Result<DMatrix<f64>> {
    let egrad = problem.egrad(point)?;
    if !egrad.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidGradient);
    }
    Ok(riemannian_grad(point, &egrad)?.value)
}

/// Backtracking from `initial_step`; returns `(step, point, cost)` of the first
/// step meeting `f(new) ≤ f + c1·step·slope`.
fn armijo<P: SpdProblem + ?Sized>(
    problem: &P,
    root: &RootedBase,
    direction: &DMatrix<f64>,
    cost: f64,
    slope: f64,
    ls: &LineSearch,
) -> Result<Option<(f64, SpdMatrix, f64)>> {
    let mut step = ls.initial_step;
    for _ in 0..=ls.max_backtracks {
        match root.retract(direction, step) {
            Ok(candidate) => {
                let c = problem.cost(&candidate)?;
                if c.is_finite() && c <= cost + ls.c1 * step * slope {
                    return Ok(Some((step, candidate, c)));
                }
            }
            Err(Error::StepOverflow) => {}
            Err(e) => return Err(e),
        }
        step *= ls.shrink;
    }
    Ok(None)
}

/// Outcome of one [`positive_scalar_step`].
#[derive(Clone, Debug)]
pub struct ScalarStep {
    pub theta: Vec<f64>,
    pub cost: f64,
    pub step: f64,
    pub accepted: bool,
}

/// One Armijo descent step for strictly positive parameters, taken in
/// `u = log θ` coordinates (`∂f/∂u = θ ⊙ ∂f/∂θ`) and clamped to
/// `[PARAM_FLOOR, PARAM_CEILING]`.
///
/// `cost_at_theta` is `f(θ)`; `cost` evaluates `f` at trial points. When no
/// trial point satisfies the Armijo condition the input is returned unchanged.
pub fn positive_scalar_step<F>(
    theta: &[f64],
    egrad: &[f64],
    cost_at_theta: f64,
    cost: F,
    cfg: &RcgConfig,
) -> Result<ScalarStep>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if theta.len() != egrad.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            found: egrad.len(),
        });
    }
    if !egrad.iter().all(|g| g.is_finite()) {
        return Err(Error::InvalidGradient);
    }
    if theta.iter().any(|&t| !(t >= PARAM_FLOOR) || !t.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "parameters must be finite and >= {PARAM_FLOOR}"
        )));
    }
    let unchanged = ScalarStep {
        theta: theta.to_vec(),
        cost: cost_at_theta,
        step: 0.0,
        accepted: false,
    };

    let log_grad: Vec<f64> = theta.iter().zip(egrad).map(|(t, g)| t * g).collect();
    if log_grad.iter().all(|&g| g == 0.0) {
        return Ok(unchanged);
    }
    let ls = &cfg.line_search;
    let mut step = ls.initial_step;
    for _ in 0..=ls.max_backtracks {
        let trial: Vec<f64> = theta
            .iter()
            .zip(&log_grad)
            .map(|(t, g)| (t.ln() - step * g).exp().clamp(PARAM_FLOOR, PARAM_CEILING))
            .collect();
        // Armijo on the displacement actually taken after clamping
        let predicted: f64 = theta
            .iter()
            .zip(&trial)
            .zip(&log_grad)
            .map(|((t, n), g)| g * (n.ln() - t.ln()))
            .sum();
        if predicted < 0.0 {
            let c = cost(&trial)?;
            if c.is_finite() && c <= cost_at_theta + ls.c1 * predicted {
                return Ok(ScalarStep {
                    theta: trial,
                    cost: c,
                    step,
                    accepted: true,
                });
            }
        }
        step *= ls.shrink;
    }
    Ok(unchanged)
}
