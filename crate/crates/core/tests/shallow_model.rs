mod common;

use common::{affine_layer, fd_gradient, gaussian, logistic, matrix_sigmoid, max_abs, rng};
use rand::Rng;
use symlab::group_rep::{GroupName, GroupSetting};
use symlab::shallow_model::{
    fa_eval, fa_per_sample_grad, model_eval, per_sample_grad, unit_eval, LossScale, ParticleEnsemble, Sigma, UnitSpec,
};

fn act_of(s: Sigma) -> fn(f64) -> f64 {
    match s {
        Sigma::Logistic => logistic,
        Sigma::Tanh => f64::tanh,
    }
}

fn oracle_unit(unit: &UnitSpec, z: &[f64], x: &[f64]) -> Vec<f64> {
    match *unit {
        UnitSpec::MatrixSigmoid { c, sigma, .. } => matrix_sigmoid(z, x, c, act_of(sigma)),
        UnitSpec::AffineLayer { b, c, sigma, .. } => affine_layer(z, x, b, c, act_of(sigma)),
    }
}

fn oracle_model(unit: &UnitSpec, params: &[f64], x: &[f64]) -> Vec<f64> {
    let dim = unit.param_dim();
    let n = params.len() / dim;
    let mut out = vec![0.0; unit.output_dim()];
    for i in 0..n {
        for (o, v) in out.iter_mut().zip(oracle_unit(unit, &params[i * dim..(i + 1) * dim], x)) {
            *o += v / n as f64;
        }
    }
    out
}

fn random_unit(r: &mut impl Rng) -> UnitSpec {
    let sigma = if r.random_bool(0.5) { Sigma::Logistic } else { Sigma::Tanh };
    let d = r.random_range(1..4);
    let c = r.random_range(1..4);
    if r.random_bool(0.5) {
        UnitSpec::matrix_sigmoid(d, c, sigma)
    } else {
        UnitSpec::affine_layer(d, r.random_range(1..4), c, sigma)
    }
}

#[test]
fn evaluation_matches_oracle() {
    let mut r = rng(10);
    for _ in 0..100 {
        let unit = random_unit(&mut r);
        let n = r.random_range(1..6);
        let params = gaussian(&mut r, n * unit.param_dim(), 1.0);
        let x = gaussian(&mut r, unit.input_dim(), 2.0);
        let ens = ParticleEnsemble::new(unit, n, params.clone()).unwrap();
        assert!(max_abs(&model_eval(&ens, &x).unwrap(), &oracle_model(&unit, &params, &x)) < 1e-14);
        let z = &params[..unit.param_dim()];
        assert!(max_abs(&unit_eval(&unit, z, &x).unwrap(), &oracle_unit(&unit, z, &x)) < 1e-14);
    }
}

#[test]
fn identity_matrix_unit() {
    let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
    let y = unit_eval(&unit, &[1.0, 0.0, 0.0, 1.0], &[0.0, 3.0]).unwrap();
    assert!((y[0] - 0.5).abs() < 1e-15);
    assert!((y[1] - logistic(3.0)).abs() < 1e-15);
}

#[test]
fn gradients_match_finite_differences() {
    let mut r = rng(11);
    let units = [
        UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic),
        UnitSpec::matrix_sigmoid(2, 2, Sigma::Tanh),
        UnitSpec::affine_layer(2, 3, 2, Sigma::Logistic),
        UnitSpec::affine_layer(3, 2, 2, Sigma::Tanh),
    ];
    let mut worst = 0.0f64;
    for case in 0..50 {
        let unit = units[case % 4];
        let tau = if case % 8 < 4 { 0.0 } else { 1e-4 };
        let scale = if case % 3 == 0 { LossScale::Half } else { LossScale::One };
        let n = r.random_range(1..5);
        let params = gaussian(&mut r, n * unit.param_dim(), 0.8);
        let x = gaussian(&mut r, unit.input_dim(), 1.5);
        let y = gaussian(&mut r, unit.output_dim(), 1.0);
        let ens = ParticleEnsemble::new(unit, n, params.clone()).unwrap();
        let grad = per_sample_grad(&ens, &x, &y, tau, scale).unwrap();
        // Rows carry no 1/N: they differentiate N·ℓ(Φ(x), y) + τ Σ ‖θ_i‖².
        let f = |p: &[f64]| {
            let yh = oracle_model(&unit, p, &x);
            let l: f64 = yh.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * scale.factor();
            n as f64 * l + tau * p.iter().map(|v| v * v).sum::<f64>()
        };
        let fd = fd_gradient(f, &params, 1e-5);
        for (a, b) in grad.iter().zip(&fd) {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

#[test]
fn fa_gradient_matches_finite_differences() {
    let mut r = rng(12);
    let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Tanh);
    let bundle = GroupSetting::default().bundle(&unit).unwrap();
    for _ in 0..10 {
        let n = 3;
        let params = gaussian(&mut r, n * 4, 0.8);
        let x = gaussian(&mut r, 2, 1.5);
        let y = gaussian(&mut r, 2, 1.0);
        let ens = ParticleEnsemble::new(unit, n, params.clone()).unwrap();
        let grad = fa_per_sample_grad(&ens, &bundle, &x, &y, 1e-4, LossScale::One).unwrap();
        let f = |p: &[f64]| {
            let e = ParticleEnsemble::new(unit, n, p.to_vec()).unwrap();
            let yh = fa_eval(&e, &bundle, &x).unwrap();
            n as f64 * yh.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                + 1e-4 * p.iter().map(|v| v * v).sum::<f64>()
        };
        let fd = fd_gradient(f, &params, 1e-5);
        for (a, b) in grad.iter().zip(&fd) {
            assert!((a - b).abs() / a.abs().max(b.abs()).max(1e-4) < 1e-5);
        }
    }
}

#[test]
fn joint_equivariance_of_units() {
    let mut r = rng(13);
    let settings = [
        (GroupSetting::new(GroupName::C2Swap, 2), UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic)),
        (GroupSetting::new(GroupName::C2Swap, 2), UnitSpec::affine_layer(2, 4, 2, Sigma::Tanh)),
        (GroupSetting::new(GroupName::SnDeepsets, 3), UnitSpec::affine_layer(3, 6, 3, Sigma::Logistic)),
        (GroupSetting::new(GroupName::CnCirculant, 4), UnitSpec::matrix_sigmoid(4, 4, Sigma::Tanh)),
    ];
    for (setting, unit) in settings {
        let bundle = setting.bundle(&unit).unwrap();
        for _ in 0..100 {
            let z = gaussian(&mut r, unit.param_dim(), 1.0);
            let x = gaussian(&mut r, unit.input_dim(), 1.0);
            let g = r.random_range(0..bundle.order());
            let lhs = oracle_unit(&unit, &bundle.act_param(g, &z), &bundle.act_input(g, &x));
            let rhs = bundle.act_output(g, &oracle_unit(&unit, &z, &x));
            assert!(max_abs(&lhs, &rhs) < 1e-12);
        }
    }
}

#[test]
fn feature_averaging_equals_symmetrized_ensemble() {
    let mut r = rng(14);
    let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
    let bundle = GroupSetting::default().bundle(&unit).unwrap();
    let ens = ParticleEnsemble::new(unit, 7, gaussian(&mut r, 28, 0.7)).unwrap();
    let sym = ens.symmetrized(&bundle).unwrap();
    assert_eq!(sym.n(), 14);
    for _ in 0..100 {
        let x = gaussian(&mut r, 2, 3.0);
        assert!(max_abs(&fa_eval(&ens, &bundle, &x).unwrap(), &model_eval(&sym, &x).unwrap()) < 1e-12);
    }
}

#[test]
fn wi_ensembles_are_equivariant() {
    let mut r = rng(15);
    let unit = UnitSpec::affine_layer(3, 3, 3, Sigma::Tanh);
    let bundle = GroupSetting::new(GroupName::SnDeepsets, 3).bundle(&unit).unwrap();
    let sym = ParticleEnsemble::new(unit, 2, gaussian(&mut r, 2 * unit.param_dim(), 0.7))
        .unwrap()
        .symmetrized(&bundle)
        .unwrap();
    for _ in 0..20 {
        let x = gaussian(&mut r, 3, 1.0);
        let g = r.random_range(0..6);
        let lhs = model_eval(&sym, &bundle.act_input(g, &x)).unwrap();
        let rhs = bundle.act_output(g, &model_eval(&sym, &x).unwrap());
        assert!(max_abs(&lhs, &rhs) < 1e-12);
    }
}

#[test]
fn ensemble_rejects_bad_input() {
    let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
    assert!(ParticleEnsemble::new(unit, 0, vec![]).is_err());
    assert!(ParticleEnsemble::new(unit, 1, vec![0.0; 3]).is_err());
    assert!(ParticleEnsemble::new(unit, 1, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    let ens = ParticleEnsemble::zeros(unit, 2).unwrap();
    assert!(model_eval(&ens, &[1.0]).is_err());
}
