use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::gradient::{objective_value, solve_ridge, sum_terms, zeta_matrix};
use super::init::{init_dictionary, init_params_cached};
use super::model::{default_gamma, IddlModel, OuterRecord};
use super::prepared::{congruence_eig, encode_matrix, pair_gradient, value_from_deltas, Prepared, SpectralCache};
use crate::dataio::LabeledSpdDataset;
use crate::divergence::{AbldParams, Variant};
use crate::error::{Error, Result};
use crate::manifold::{positive_scalar_step, rcg_minimize, RcgConfig, SpdProblem};
use crate::spd::{SpdMatrix, SymEig};

/// How the divergence parameters are initialized.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamInit {
    /// α = β = 1 on every atom.
    Burg,
    /// The `(α, β)` pair with the best training accuracy of a classifier-only
    /// fit on the initial dictionary.
    Grid(Vec<(f64, f64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub n_atoms: usize,
    pub variant: Variant,
    /// Ridge weight; `None` means [`default_gamma`].
    pub gamma: Option<f64>,
    pub init: ParamInit,
    /// Optimizer for each atom update inside one outer iteration.
    pub rcg: RcgConfig,
    /// Line-search steps on the divergence parameters per outer iteration.
    pub param_steps: usize,
    pub outer_iters: usize,
    /// Stop once an outer iteration improves the objective by less than this
    /// relative amount.
    pub rel_tol: f64,
    pub seed: u64,
    pub update_dictionary: bool,
    pub update_params: bool,
}

impl FitConfig {
    pub fn new(n_atoms: usize, variant: Variant) -> Self {
        FitConfig {
            n_atoms,
            variant,
            gamma: None,
            init: ParamInit::Burg,
            rcg: RcgConfig::default().with_max_iters(5),
            param_steps: 5,
            outer_iters: 30,
            rel_tol: 1e-5,
            seed: 0,
            update_dictionary: true,
            update_params: true,
        }
    }
}

/// Learns a dictionary, divergence parameters and ridge classifier by
/// block-coordinate descent.
///
/// Each outer iteration updates every atom in turn with a few Riemannian CG
/// steps, then the divergence parameters (variants S, V and N), then solves
/// for `W` in closed form. An update is kept only if it does not increase the
/// objective, so the recorded history is non-increasing.
pub fn fit(data: &LabeledSpdDataset, cfg: &FitConfig) -> Result<IddlModel> {
    data.require_all_classes()?;
    if cfg.n_atoms == 0 || cfg.n_atoms > data.len() {
        return Err(Error::InvalidInput(format!(
            "n_atoms = {} must be in 1..={}",
            cfg.n_atoms,
            data.len()
        )));
    }
    cfg.rcg.validate()?;
    if !(cfg.rel_tol >= 0.0) {
        return Err(Error::InvalidInput(format!("rel_tol must be >= 0, got {}", cfg.rel_tol)));
    }
    let gamma = cfg.gamma.unwrap_or_else(|| default_gamma(data.len(), data.label_count()));
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("gamma must be finite and >= 0, got {gamma}")));
    }

    let prep = Prepared::new(data)?;
    let h = prep.one_hot();
    let abort = |block: &'static str, atom: Option<usize>, history: &[OuterRecord]| {
        let history = history.to_vec();
        move |e: Error| Error::FitAborted {
            block,
            atom,
            history,
            source: Box::new(e),
        }
    };

    let mut dict = init_dictionary(data, cfg.n_atoms, cfg.seed).map_err(abort("initialization", None, &[]))?;
    let mut params = match &cfg.init {
        ParamInit::Burg => AbldParams::burg_start(cfg.variant, cfg.n_atoms),
        ParamInit::Grid(grid) => {
            let cache = SpectralCache::from_prepared(&prep, &dict).map_err(abort("initialization", None, &[]))?;
            init_params_cached(&cache, &prep, cfg.variant, grid, gamma).map_err(abort("initialization", None, &[]))?
        }
    };
    let mut v = encode_matrix(&prep, &dict, &params).map_err(abort("initialization", None, &[]))?;
    let mut w = solve_ridge(&v, &h, gamma).map_err(abort("classifier", None, &[]))?;
    let mut obj = objective_value(&v, &h, &w, gamma);

    let learn_params = cfg.update_params && cfg.variant.learns_params();
    let mut history = Vec::with_capacity(cfg.outer_iters);
    for _ in 0..cfg.outer_iters {
        let start = obj;

        if cfg.update_dictionary {
            for k in 0..dict.len() {
                let problem = AtomProblem::new(&prep, &params, k, &v, &w, &h, gamma);
                let result = rcg_minimize(&problem, dict.atom(k), &cfg.rcg).map_err(abort("dictionary", Some(k), &history))?;
                let column = problem
                    .column_at(&result.point)
                    .map_err(abort("dictionary", Some(k), &history))?;
                let mut trial = v.clone();
                trial.row_mut(k).copy_from(&DVector::from_vec(column).transpose());
                let trial_obj = objective_value(&trial, &h, &w, gamma);
                if trial_obj <= obj {
                    dict.set_atom(k, result.point);
                    v = trial;
                    obj = trial_obj;
                }
            }
        }
        let after_dictionary = obj;

        if learn_params {
            let cache = SpectralCache::from_prepared(&prep, &dict).map_err(abort("parameters", None, &history))?;
            for _ in 0..cfg.param_steps {
                let zeta = zeta_matrix(&v, &h, &w);
                let (da, db) = cache.param_gradient(&params, &zeta).map_err(abort("parameters", None, &history))?;
                let grad = params.reduce_gradient(&da, &db);
                let cost = |free: &[f64]| -> Result<f64> {
                    let p = params.with_free_params(free)?;
                    Ok(objective_value(&cache.encodings(&p)?, &h, &w, gamma))
                };
                let step = positive_scalar_step(&params.free_params(), &grad, obj, cost, &cfg.rcg)
                    .map_err(abort("parameters", None, &history))?;
                if !step.accepted {
                    break;
                }
                let next = params
                    .with_free_params(&step.theta)
                    .map_err(abort("parameters", None, &history))?;
                let next_v = cache.encodings(&next).map_err(abort("parameters", None, &history))?;
                let next_obj = objective_value(&next_v, &h, &w, gamma);
                if next_obj > obj {
                    break;
                }
                params = next;
                v = next_v;
                obj = next_obj;
            }
        }
        let after_params = obj;

        let next_w = solve_ridge(&v, &h, gamma).map_err(abort("classifier", None, &history))?;
        let next_obj = objective_value(&v, &h, &next_w, gamma);
        if next_obj <= obj {
            w = next_w;
            obj = next_obj;
        }

        history.push(OuterRecord {
            start,
            after_dictionary,
            after_params,
            after_w: obj,
            dictionary_skipped: !cfg.update_dictionary,
            params_skipped: !learn_params,
        });
        if (start - obj) <= cfg.rel_tol * start.abs() {
            break;
        }
    }

    Ok(IddlModel {
        dictionary: dict,
        params,
        w,
        gamma,
        label_count: data.label_count(),
        history,
    })
}

/// The objective as a function of atom `k` alone, with the other atoms, the
/// parameters and `W` held fixed.
struct AtomProblem<'a> {
    prep: &'a Prepared,
    params: &'a AbldParams,
    k: usize,
    /// Column `k` of `W`.
    w_k: DVector<f64>,
    /// `W V − H` with atom `k`'s contribution removed, `L × N`.
    rest: DMatrix<f64>,
    penalty: f64,
    last: RefCell<Option<AtomEval>>,
}

struct AtomEval {
    atom: DMatrix<f64>,
    column: Vec<f64>,
    eigs: Vec<SymEig>,
    cost: f64,
}

impl<'a> AtomProblem<'a> {
    fn new(
        prep: &'a Prepared,
        params: &'a AbldParams,
        k: usize,
        v: &DMatrix<f64>,
        w: &DMatrix<f64>,
        h: &DMatrix<f64>,
        gamma: f64,
    ) -> Self {
        let w_k = w.column(k).into_owned();
        let rest = w * v - h - &w_k * v.row(k);
        AtomProblem {
            prep,
            params,
            k,
            w_k,
            rest,
            penalty: gamma * w.norm_squared(),
            last: RefCell::new(None),
        }
    }

    fn evaluate(&self, b: &SpdMatrix) -> Result<()> {
        if let Some(e) = self.last.borrow().as_ref() {
            if &e.atom == b.as_matrix() {
                return Ok(());
            }
        }
        let (params, k) = (self.params, self.k);
        let pairs = self
            .prep
            .inv_sqrt
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let eig = congruence_eig(s, b.as_matrix()).map_err(|e| e.at("sample", i))?;
                let value = value_from_deltas(params, k, eig.eigenvalues.as_slice()).map_err(|e| e.at("sample", i))?;
                Ok((value, eig))
            })
            .collect::<Result<Vec<_>>>()?;
        let (column, eigs): (Vec<f64>, Vec<SymEig>) = pairs.into_iter().unzip();
        let mut cost = self.penalty;
        for (i, &vi) in column.iter().enumerate() {
            let r = self.rest.column(i) + &self.w_k * vi;
            cost += 0.5 * r.norm_squared();
        }
        *self.last.borrow_mut() = Some(AtomEval {
            atom: b.as_matrix().clone(),
            column,
            eigs,
            cost,
        });
        Ok(())
    }

    fn column_at(&self, b: &SpdMatrix) -> Result<Vec<f64>> {
        self.evaluate(b)?;
        Ok(self.last.borrow().as_ref().expect("just evaluated").column.clone())
    }
}

impl SpdProblem for AtomProblem<'_> {
    fn cost(&self, b: &SpdMatrix) -> Result<f64> {
        self.evaluate(b)?;
        Ok(self.last.borrow().as_ref().expect("just evaluated").cost)
    }

    fn egrad(&self, b: &SpdMatrix) -> Result<DMatrix<f64>> {
        self.evaluate(b)?;
        let guard = self.last.borrow();
        let e = guard.as_ref().expect("just evaluated");
        let (params, k) = (self.params, self.k);
        let zeta: Vec<f64> = e
            .column
            .iter()
            .enumerate()
            .map(|(i, &vi)| self.w_k.dot(&(self.rest.column(i) + &self.w_k * vi)))
            .collect();
        let terms = self
            .prep
            .inv_sqrt
            .par_iter()
            .zip(e.eigs.par_iter())
            .zip(zeta.par_iter())
            .map(|((s, eig), &z)| (z != 0.0).then(|| pair_gradient(s, eig, params, k, z)))
            .collect::<Vec<_>>();
        Ok(sum_terms(terms, b.dim()))
    }
}
