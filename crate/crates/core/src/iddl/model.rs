use nalgebra::{DMatrix, DVector};

use crate::divergence::AbldParams;
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

/// An ordered list of SPD atoms of one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    atoms: Vec<SpdMatrix>,
}

impl Dictionary {
    pub fn new(atoms: Vec<SpdMatrix>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::InvalidInput("dictionary needs at least one atom".into()))?;
        let d = first.dim();
        for (k, b) in atoms.iter().enumerate() {
            if b.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: b.dim(),
                }
                .at("atom", k));
            }
        }
        Ok(Dictionary { atoms })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn atoms(&self) -> &[SpdMatrix] {
        &self.atoms
    }

    pub fn atom(&self, k: usize) -> &SpdMatrix {
        &self.atoms[k]
    }

    pub(crate) fn set_atom(&mut self, k: usize, b: SpdMatrix) {
        self.atoms[k] = b;
    }
}

/// Per-atom divergences of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoding {
    pub values: DVector<f64>,
}

/// Objective values recorded during one outer iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterRecord {
    pub start: f64,
    pub after_dictionary: f64,
    pub after_params: f64,
    pub after_w: f64,
    pub dictionary_skipped: bool,
    pub params_skipped: bool,
}

/// A fitted dictionary, divergence parameters and ridge classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct IddlModel {
    pub dictionary: Dictionary,
    pub params: AbldParams,
    /// `L × n` classifier weights.
    pub w: DMatrix<f64>,
    pub gamma: f64,
    pub label_count: u32,
    pub history: Vec<OuterRecord>,
}

impl IddlModel {
    pub fn new(
        dictionary: Dictionary,
        params: AbldParams,
        w: DMatrix<f64>,
        gamma: f64,
        label_count: u32,
    ) -> Result<Self> {
        let m = IddlModel {
            dictionary,
            params,
            w,
            gamma,
            label_count,
            history: Vec::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_atoms(&self) -> usize {
        self.dictionary.len()
    }

    pub fn dim(&self) -> usize {
        self.dictionary.dim()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.dictionary.len();
        if self.params.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.params.len(),
            });
        }
        if self.w.nrows() != self.label_count as usize || self.w.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "classifier is {}x{}, expected {}x{n}",
                self.w.nrows(),
                self.w.ncols(),
                self.label_count
            )));
        }
        if self.label_count == 0 {
            return Err(Error::InvalidInput("label count must be at least 1".into()));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidInput(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if !self.w.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("classifier has non-finite weights".into()));
        }
        Ok(())
    }

    /// Final objective of the fit, if any iterations were recorded.
    pub fn final_objective(&self) -> Option<f64> {
        self.history.last().map(|r| r.after_w)
    }
}

/// `1e-3·N/L`
pub fn default_gamma(n_samples: usize, label_count: u32) -> f64 {
    1e-3 * n_samples as f64 / label_count as f64
}
