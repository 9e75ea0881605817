//! Finite-difference checks of every gradient used by the fit.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spdkit::dataio::LabeledSpdDataset;
use spdkit::divergence::{abld_term, abld_term_dalpha};
use spdkit::iddl::{grad_alpha_beta, grad_atom, grad_atom_airm, grad_atom_direct, objective, Dictionary, IddlModel};
use spdkit::spd::random_spd;
use spdkit::{AbldParams, SpdMatrix, Variant};

fn instance(rng: &mut ChaCha8Rng, d: usize, n: usize, variant: Variant) -> (LabeledSpdDataset, IddlModel) {
    let samples: Vec<_> = (0..6).map(|_| random_spd(rng, d)).collect();
    let labels = vec![1, 2, 1, 2, 2, 1];
    let data = LabeledSpdDataset::new(samples, labels, 2).unwrap();
    let atoms: Vec<_> = (0..n).map(|_| random_spd(rng, d)).collect();
    let params = match variant {
        Variant::VectorFree => {
            let a = (0..n).map(|_| rng.random_range(0.2..2.5)).collect();
            let b = (0..n).map(|_| rng.random_range(0.2..2.5)).collect();
            AbldParams::new(variant, a, b).unwrap()
        }
        _ => AbldParams::burg_start(variant, n),
    };
    let w = DMatrix::from_fn(2, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let model = IddlModel::new(Dictionary::new(atoms).unwrap(), params, w, 0.1, 2).unwrap();
    (data, model)
}

fn with_atom(model: &IddlModel, k: usize, b: DMatrix<f64>) -> IddlModel {
    let mut atoms = model.dictionary.atoms().to_vec();
    atoms[k] = SpdMatrix::new(b).unwrap();
    let mut m = model.clone();
    m.dictionary = Dictionary::new(atoms).unwrap();
    m
}

/// Gradient rebuilt entry by entry from central differences along symmetric
/// basis directions.
fn fd_atom_gradient(data: &LabeledSpdDataset, model: &IddlModel, k: usize, h: f64) -> DMatrix<f64> {
    let b = model.dictionary.atom(k).as_matrix().clone();
    let d = b.nrows();
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut e = DMatrix::zeros(d, d);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            let f = |t: f64| objective(data, &with_atom(model, k, &b + &e * t)).unwrap();
            let dd = (f(h) - f(-h)) / (2.0 * h);
            if i == j {
                g[(i, i)] = dd;
            } else {
                g[(i, j)] = dd / 2.0;
                g[(j, i)] = dd / 2.0;
            }
        }
    }
    g
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn atom_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for (d, n) in [(3, 1), (4, 2), (5, 4)] {
        let (data, model) = instance(&mut rng, d, n, Variant::VectorFree);
        for k in 0..n {
            let g = grad_atom(&data, &model, k).unwrap();
            let fd = fd_atom_gradient(&data, &model, k, 1e-5);
            assert!(rel(&g, &fd) <= 1e-5, "d={d} n={n} k={k}: {}", rel(&g, &fd));
            assert!((&g - g.transpose()).norm() <= 1e-12 * g.norm());
        }
    }
}

#[test]
fn unit_parameters_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (data, model) = instance(&mut rng, 3, 1, Variant::Burg);
    let g = grad_atom(&data, &model, 0).unwrap();
    let fd = fd_atom_gradient(&data, &model, 0, 1e-5);
    assert!(rel(&g, &fd) <= 1e-5);
}

#[test]
fn direct_and_spectral_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for (d, n) in [(3, 2), (5, 3), (4, 4)] {
        let (data, model) = instance(&mut rng, d, n, Variant::VectorFree);
        for k in 0..n {
            let g = grad_atom(&data, &model, k).unwrap();
            let direct = grad_atom_direct(&data, &model, k).unwrap();
            assert!(rel(&g, &direct) <= 1e-9, "{}", rel(&g, &direct));
        }
    }
}

#[test]
fn airm_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for (d, n) in [(4, 2), (3, 1)] {
        let (data, model) = instance(&mut rng, d, n, Variant::Airm);
        for k in 0..n {
            let g = grad_atom_airm(&data, &model, k).unwrap();
            let fd = fd_atom_gradient(&data, &model, k, 1e-5);
            assert!(rel(&g, &fd) <= 1e-5, "{}", rel(&g, &fd));
            assert!((&g - g.transpose()).norm() <= 1e-12 * g.norm());
        }
    }
    assert!(grad_atom(&instance(&mut rng, 3, 1, Variant::Airm).0, &instance(&mut rng, 3, 1, Variant::Airm).1, 0).is_err());
}

#[test]
fn airm_gradient_vanishes_at_the_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let x = random_spd(&mut rng, 3);
    let data = LabeledSpdDataset::new(vec![x.clone()], vec![1], 1).unwrap();
    let model = IddlModel::new(
        Dictionary::new(vec![x]).unwrap(),
        AbldParams::burg_start(Variant::Airm, 1),
        DMatrix::from_element(1, 1, 0.7),
        0.0,
        1,
    )
    .unwrap();
    assert!(grad_atom_airm(&data, &model, 0).unwrap().norm() < 1e-12);
}

#[test]
fn zero_weights_give_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (data, mut model) = instance(&mut rng, 3, 2, Variant::VectorFree);
    model.w = DMatrix::zeros(2, 2);
    assert_eq!(grad_atom(&data, &model, 1).unwrap().norm(), 0.0);
    let pg = grad_alpha_beta(&data, &model).unwrap();
    assert!(pg.d_alpha.iter().chain(&pg.d_beta).all(|&v| v == 0.0));
}

#[test]
fn scalar_term_derivative() {
    let h = 1e-6;
    let fd = (abld_term(2.0, 0.7 + h, 1.3) - abld_term(2.0, 0.7 - h, 1.3)) / (2.0 * h);
    assert!((abld_term_dalpha(2.0, 0.7, 1.3) - fd).abs() <= 1e-6 * fd.abs());
}

fn with_params(model: &IddlModel, alpha: Vec<f64>, beta: Vec<f64>) -> IddlModel {
    let mut m = model.clone();
    m.params = AbldParams::new(Variant::VectorFree, alpha, beta).unwrap();
    m
}

#[test]
fn parameter_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for (d, n) in [(3, 1), (4, 2), (5, 4)] {
        let (data, model) = instance(&mut rng, d, n, Variant::VectorFree);
        let pg = grad_alpha_beta(&data, &model).unwrap();
        let h = 1e-6;
        for k in 0..n {
            let (a, b) = (model.params.alpha().to_vec(), model.params.beta().to_vec());
            let shifted = |da: f64, db: f64| {
                let (mut a, mut b) = (a.clone(), b.clone());
                a[k] += da;
                b[k] += db;
                objective(&data, &with_params(&model, a, b)).unwrap()
            };
            let fd_a = (shifted(h, 0.0) - shifted(-h, 0.0)) / (2.0 * h);
            let fd_b = (shifted(0.0, h) - shifted(0.0, -h)) / (2.0 * h);
            assert!((pg.d_alpha[k] - fd_a).abs() <= 1e-5 * fd_a.abs().max(1e-3), "{} vs {fd_a}", pg.d_alpha[k]);
            assert!((pg.d_beta[k] - fd_b).abs() <= 1e-5 * fd_b.abs().max(1e-3), "{} vs {fd_b}", pg.d_beta[k]);
        }
    }
}

#[test]
fn packed_gradients_follow_the_tying() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let (data, model) = instance(&mut rng, 3, 3, Variant::VectorFree);
    let mut scalar = model.clone();
    scalar.params = AbldParams::uniform(Variant::Scalar, 3, 0.6, 1.4).unwrap();
    let pg = grad_alpha_beta(&data, &scalar).unwrap();
    let packed = pg.packed(&scalar.params);
    let h = 1e-6;
    let f = |a: f64, b: f64| {
        let mut m = scalar.clone();
        m.params = AbldParams::uniform(Variant::Scalar, 3, a, b).unwrap();
        objective(&data, &m).unwrap()
    };
    let fd_a = (f(0.6 + h, 1.4) - f(0.6 - h, 1.4)) / (2.0 * h);
    let fd_b = (f(0.6, 1.4 + h) - f(0.6, 1.4 - h)) / (2.0 * h);
    assert!((packed[0] - fd_a).abs() <= 1e-5 * fd_a.abs().max(1e-3));
    assert!((packed[1] - fd_b).abs() <= 1e-5 * fd_b.abs().max(1e-3));

    let mut tied = model.clone();
    tied.params = AbldParams::new(Variant::VectorTied, vec![0.5, 1.0, 2.0], vec![0.5, 1.0, 2.0]).unwrap();
    let packed = grad_alpha_beta(&data, &tied).unwrap().packed(&tied.params);
    let g = |c: f64| {
        let mut m = tied.clone();
        m.params = AbldParams::new(Variant::VectorTied, vec![0.5, c, 2.0], vec![0.5, c, 2.0]).unwrap();
        objective(&data, &m).unwrap()
    };
    let fd = (g(1.0 + h) - g(1.0 - h)) / (2.0 * h);
    assert!((packed[1] - fd).abs() <= 1e-5 * fd.abs().max(1e-3));
}
