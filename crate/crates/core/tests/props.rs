//! Property-based invariants.

mod common;

use proptest::prelude::*;
use symlab::group_rep::{GroupName, GroupSetting};
use symlab::measures::{project, rmd2, symmetrize, w2_squared, EmpiricalMeasure};
use symlab::shallow_model::{fa_eval, model_eval, ParticleEnsemble, Sigma, UnitSpec};
use symlab::training::TrainConfig;

fn cloud(dim: usize, max_atoms: usize) -> impl Strategy<Value = EmpiricalMeasure> {
    (1..=max_atoms).prop_flat_map(move |n| {
        (prop::collection::vec(-3.0f64..3.0, n * dim), prop::collection::vec(0.05f64..1.0, n))
            .prop_map(move |(p, w)| {
                let total: f64 = w.iter().sum();
                EmpiricalMeasure::new(dim, p, w.iter().map(|v| v / total).collect()).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rmd2_lies_in_unit_interval(a in cloud(2, 6), b in cloud(2, 6)) {
        let r = rmd2(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn w2_is_symmetric(a in cloud(3, 5), b in cloud(3, 5)) {
        let ab = w2_squared(&a, &b).unwrap();
        let ba = w2_squared(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-10 * (1.0 + ab));
    }

    #[test]
    fn w2_triangle_inequality(a in cloud(2, 4), b in cloud(2, 4), c in cloud(2, 4)) {
        let ab = w2_squared(&a, &b).unwrap().sqrt();
        let bc = w2_squared(&b, &c).unwrap().sqrt();
        let ac = w2_squared(&a, &c).unwrap().sqrt();
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn projection_is_idempotent(mu in cloud(4, 6)) {
        let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
        let bundle = GroupSetting::default().bundle(&unit).unwrap();
        let p = project(&mu, &bundle).unwrap();
        prop_assert!(w2_squared(&project(&p, &bundle).unwrap(), &p).unwrap() < 1e-20);
        prop_assert!(w2_squared(&symmetrize(&p, bundle.m_action()).unwrap(), &p).unwrap() < 1e-20);
    }

    #[test]
    fn circulant_fa_matches_symmetrized(params in prop::collection::vec(-1.5f64..1.5, 3 * 16), x in prop::collection::vec(-2.0f64..2.0, 4)) {
        let unit = UnitSpec::matrix_sigmoid(4, 4, Sigma::Tanh);
        let bundle = GroupSetting::new(GroupName::CnCirculant, 4).bundle(&unit).unwrap();
        let ens = ParticleEnsemble::new(unit, 3, params).unwrap();
        let a = fa_eval(&ens, &bundle, &x).unwrap();
        let b = model_eval(&ens.symmetrized(&bundle).unwrap(), &x).unwrap();
        prop_assert!(common::max_abs(&a, &b) < 1e-12);
    }

    #[test]
    fn snapshot_epochs_are_increasing(n in 1usize..3000, t in 0.01f64..30.0, gr in 1usize..12) {
        let cfg = TrainConfig { n_particles: n, horizon_t: t, granularity: gr, ..Default::default() };
        let e = cfg.snapshot_epochs();
        prop_assert_eq!(e[0], 0);
        prop_assert_eq!(*e.last().unwrap(), cfg.epochs());
        prop_assert!(e.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(cfg.epochs(), (n as f64 * t).ceil() as usize);
    }
}
