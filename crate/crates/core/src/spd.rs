//! Dense symmetric linear algebra on SPD matrices.
//!
//! Every spectral function (powers, log, exp, square roots) is evaluated the
//! same way: one symmetric eigendecomposition followed by a map over the
//! eigenvalues, and the result is re-symmetrized. Eigenvectors carry a fixed
//! sign convention so that everything built on top is bit-reproducible.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Eigenvalues at or below this are treated as not positive definite.
pub const PD_TOL: f64 = 1e-10;

/// Relative symmetry tolerance accepted by [`SpdMatrix::new`].
pub const SYM_TOL: f64 = 1e-12;

/// A real symmetric positive definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates symmetry and positive definiteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        check_finite(&m)?;
        let scale = max_abs(&m);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > SYM_TOL * scale {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let m = sym(&m);
        let eig = sym_eig(&m)?;
        let min = eig.min_eigenvalue();
        if min <= PD_TOL {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(SpdMatrix(m))
    }

    /// Wraps a matrix already known to be SPD, symmetrizing it.
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        SpdMatrix(sym(&m))
    }

    pub fn identity(d: usize) -> Self {
        SpdMatrix(DMatrix::identity(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn eig(&self) -> SymEig {
        // Entries are finite by construction.
        sym_eig(&self.0).expect("SPD matrix has finite entries")
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

impl AsRef<DMatrix<f64>> for SpdMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Spectral decomposition `A = Q diag(eigenvalues) Qᵀ` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymEig {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Q diag(f(λ)) Qᵀ`, symmetrized.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        self.with_spectrum(&mapped)
    }

    /// `Q diag(values) Qᵀ`, symmetrized.
    pub fn with_spectrum(&self, values: &[f64]) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, &v) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        sym(&(scaled * q.transpose()))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.with_spectrum(self.eigenvalues.as_slice())
    }
}

/// Symmetric eigendecomposition with ascending eigenvalues.
///
/// Each eigenvector is signed so that its largest-magnitude entry (first one
/// on ties) is positive.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymEig> {
    check_square(a)?;
    check_finite(a)?;
    let d = a.nrows();
    let eig = sym(a).symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut eigenvalues = DVector::zeros(d);
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for r in 1..d {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        eigenvectors.column_mut(dst).copy_from(&(col * sign));
    }
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Schur factorization of a symmetric matrix.
///
/// For symmetric input the real Schur form is the spectral decomposition, so
/// this shares the eigensolver with [`sym_eig`].
pub fn schur_sym(a: &DMatrix<f64>) -> Result<SymEig> {
    sym_eig(a)
}

fn spd_eig(a: &SpdMatrix) -> Result<SymEig> {
    let eig = a.eig();
    let min = eig.min_eigenvalue();
    if min <= PD_TOL {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(eig)
}

pub fn spd_power(a: &SpdMatrix, p: f64) -> Result<SpdMatrix> {
    let eig = spd_eig(a)?;
    if p == 0.0 {
        return Ok(SpdMatrix::identity(a.dim()));
    }
    if p == 1.0 {
        return Ok(a.clone());
    }
    spectral_spd(&eig, |l| l.powf(p))
}

/// Matrix logarithm; the result is symmetric, not SPD.
pub fn spd_log(a: &SpdMatrix) -> Result<DMatrix<f64>> {
    Ok(spd_eig(a)?.map(f64::ln))
}

/// Matrix exponential of a symmetric matrix.
pub fn spd_exp(s: &DMatrix<f64>) -> Result<SpdMatrix> {
    spectral_spd(&sym_eig(s)?, f64::exp)
}

pub fn spd_sqrt(a: &SpdMatrix) -> Result<SpdMatrix> {
    spectral_spd(&spd_eig(a)?, f64::sqrt)
}

pub fn spd_invsqrt(a: &SpdMatrix) -> Result<SpdMatrix> {
    spectral_spd(&spd_eig(a)?, |l| 1.0 / l.sqrt())
}

pub fn spd_inverse(a: &SpdMatrix) -> Result<SpdMatrix> {
    spectral_spd(&spd_eig(a)?, |l| 1.0 / l)
}

/// Applies `f` to the spectrum and checks the mapped eigenvalues stay SPD.
pub(crate) fn spectral_spd<F: Fn(f64) -> f64>(eig: &SymEig, f: F) -> Result<SpdMatrix> {
    let values: Vec<f64> = eig.eigenvalues.iter().map(|&l| f(l)).collect();
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericalBreakdown {
            context: "matrix function overflow".into(),
        });
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= PD_TOL {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(SpdMatrix::from_trusted(eig.with_spectrum(&values)))
}

/// Eigenvalues of `X Y⁻¹`, ascending.
///
/// Computed on the congruent symmetric matrix `L⁻¹ X L⁻ᵀ` with `Y = L Lᵀ`.
pub fn gen_eigvals(x: &SpdMatrix, y: &SpdMatrix) -> Result<DVector<f64>> {
    check_same_dim(x, y)?;
    let chol = y
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            min_eigenvalue: y.eig().min_eigenvalue(),
        })?;
    let l = chol.l();
    let linv_x = l
        .solve_lower_triangular(x.as_matrix())
        .ok_or_else(|| Error::SingularSystem("Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_x.transpose())
        .ok_or_else(|| Error::SingularSystem("Cholesky factor".into()))?;
    Ok(sym_eig(&c)?.eigenvalues)
}

/// `A + εI`, with `ε = 1e-8·tr(A)/d` when not given.
pub fn regularize(a: &DMatrix<f64>, eps: Option<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let eps = eps.unwrap_or_else(|| 1e-8 * a.trace() / d as f64);
    a + DMatrix::identity(d, d) * eps
}

/// Log-determinant of an SPD matrix via Cholesky.
pub fn logdet(a: &DMatrix<f64>) -> Result<f64> {
    let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: f64::NAN,
    })?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

/// `(M + Mᵀ) / 2`
pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn check_same_dim(x: &SpdMatrix, y: &SpdMatrix) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    Ok(())
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
}

/// Random symmetric matrix with standard normal upper triangle.
pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
    sym(&g)
}

/// Random well-conditioned SPD matrix `exp(S)` with `S` a scaled random symmetric matrix.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, d: usize) -> SpdMatrix {
    let s = random_symmetric(rng, d, 0.5);
    spd_exp(&s).expect("bounded exponent")
}
