use super::*;
use crate::matcore::{pauli, RMat};
use crate::model::{model_zoo, WeightSpec};
use crate::sdpbounds::{holevo_type_bound, nagaoka_hayashi_bound};
use proptest::prelude::*;

fn cb() -> StatisticalModel {
    model_zoo("classical_binary", &[1.0, 0.6], 0).unwrap()
}

fn sigma_z_povm() -> Povm {
    let up = CMat::from_diagonal(&DVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]));
    let down = CMat::identity(2, 2) - &up;
    Povm::new(vec![Hermitian::hermitian_part(&up), Hermitian::hermitian_part(&down)]).unwrap()
}

fn random_weighted(seed: u64, n: usize, d: usize) -> StatisticalModel {
    let base = model_zoo("random_model", &[n as f64, d as f64, seed as f64], 4).unwrap();
    let mut rng = random::seeded(seed ^ 0xa11);
    base.with_weight(WeightSpec::Constant(random::spd_real(&mut rng, n, 0.2)))
        .unwrap()
}

#[test]
fn povm_validation() {
    assert!(Povm::new(vec![]).is_err());
    let half = Hermitian::identity(2).scale(0.5);
    assert!(matches!(Povm::new(vec![half.clone()]), Err(Error::InvalidPovm(_))));
    let neg = Hermitian::hermitian_part(&(pauli::z() * c64(0.5, 0.0)));
    let comp = Hermitian::hermitian_part(&(CMat::identity(2, 2) - neg.as_mat()));
    assert!(matches!(Povm::new(vec![neg, comp]), Err(Error::InvalidPovm(_))));
    let p = Povm::repaired(&[half.clone(), half.scale(0.5)]).unwrap();
    assert!((p.elements()[0].as_mat()[(0, 0)].re - 2.0 / 3.0).abs() < 1e-12);
    for seed in 0..5 {
        for k in [1, 2, 3, 5] {
            let r = random_povm(3, k, seed).unwrap();
            assert_eq!(r.len(), k);
        }
    }
}

#[test]
fn posterior_mean_examples() {
    let m = cb();
    let dec = posterior_mean_estimator(&m, &sigma_z_povm()).unwrap();
    assert!((dec.estimates[0][0] - 0.6).abs() < 1e-12);
    assert!((dec.estimates[1][0] + 0.6).abs() < 1e-12);
    assert!((dec.risk - 0.64).abs() < 1e-12);

    let pm = model_zoo("point_mass", &[2.0, 3.0, 4.0], 0).unwrap();
    let povm = random_povm(3, 4, 1).unwrap();
    let dec = posterior_mean_estimator(&pm, &povm).unwrap();
    let theta = &pm.points()[0].theta;
    assert!(dec.estimates.iter().all(|e| (e - theta).amax() < 1e-12));
    assert!(dec.risk.abs() < 1e-12);

    // no information: prior mean and Tr(W Cov)
    let model = random_weighted(3, 2, 2);
    let dec = posterior_mean_estimator(&model, &Povm::identity(2)).unwrap();
    let mom = build_moments(&model).unwrap();
    let w = model.constant_weight().unwrap();
    assert!((&dec.estimates[0] - &mom.theta_bar).amax() < 1e-12);
    assert!((dec.risk - (w * mom.covariance()).trace()).abs() < 1e-12);
}

#[test]
fn posterior_mean_rejects_varying_weight() {
    let m = cb();
    let ws = vec![RMat::identity(1, 1), RMat::identity(1, 1) * 2.0];
    let m = m.with_weight(WeightSpec::PerPoint(ws)).unwrap();
    assert!(matches!(
        posterior_mean_estimator(&m, &sigma_z_povm()),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn zero_probability_outcome_gets_prior_mean() {
    let m = cb();
    let up = sigma_z_povm().elements()[0].clone();
    let zero = Hermitian::zeros(2);
    let povm = Povm::new(vec![
        up,
        Hermitian::hermitian_part(&(CMat::identity(2, 2) - sigma_z_povm().elements()[0].as_mat())),
        zero,
    ])
    .unwrap();
    let dec = posterior_mean_estimator(&m, &povm).unwrap();
    assert!(dec.estimates[2][0].abs() < 1e-15);
}

#[test]
fn risk_matches_definition() {
    let model = random_weighted(11, 2, 3);
    let povm = random_povm(3, 4, 7).unwrap();
    let est: Vec<DVector<f64>> = (0..4).map(|x| DVector::from_vec(vec![0.1 * x as f64, -0.2])).collect();
    let w = model.constant_weight().unwrap();
    let mut expect = 0.0;
    for pt in model.points() {
        for (e, el) in est.iter().zip(povm.elements()) {
            let diff = e - &pt.theta;
            let p = (pt.state.as_mat() * el.as_mat()).trace().re;
            expect += pt.weight * p * (diff.transpose() * w * &diff)[(0, 0)];
        }
    }
    assert!((decision_risk(&model, &povm, &est).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn povm_step_examples() {
    let m = cb();
    let est = vec![DVector::from_element(1, 0.6), DVector::from_element(1, -0.6)];
    let povm = optimal_povm_step(&m, &est).unwrap();
    assert!((decision_risk(&m, &povm, &est).unwrap() - 0.64).abs() < 1e-7);
    assert!((povm.elements()[0].as_mat()[(0, 0)].re - 1.0).abs() < 1e-4);

    // equal estimates: the objective ignores Π
    let model = random_weighted(2, 2, 2);
    let c = DVector::from_vec(vec![0.3, -0.1]);
    let povm = optimal_povm_step(&model, &[c.clone(), c.clone(), c.clone()]).unwrap();
    let w = model.constant_weight().unwrap();
    let expect: f64 = model
        .points()
        .iter()
        .map(|pt| {
            let e = &c - &pt.theta;
            pt.weight * (e.transpose() * w * &e)[(0, 0)]
        })
        .sum();
    assert!((decision_risk(&model, &povm, &[c.clone(), c.clone(), c]).unwrap() - expect).abs() < 1e-10);

    let pm = model_zoo("point_mass", &[1.0, 2.0, 9.0], 0).unwrap();
    let t = pm.points()[0].theta.clone();
    let povm = optimal_povm_step(&pm, &[t.clone(), t.clone()]).unwrap();
    assert!(decision_risk(&pm, &povm, &[t.clone(), t]).unwrap().abs() < 1e-12);
}

#[test]
fn seesaw_examples() {
    let run = seesaw(&cb(), 2, 50, 0).unwrap();
    assert!((run.decision.risk - 0.64).abs() < 1e-6, "{}", run.decision.risk);
    assert!(run.history.len() <= 51);

    let pair = model_zoo("correlated_pair", &[1.0, 0.6], 0).unwrap();
    let run = seesaw(&pair, 2, 100, 0).unwrap();
    assert!((run.decision.risk - 1.28).abs() < 1e-5, "{}", run.decision.risk);

    let pm = model_zoo("point_mass", &[2.0, 2.0, 5.0], 0).unwrap();
    let run = seesaw(&pm, 4, 10, 3).unwrap();
    assert!(run.history[0].abs() < 1e-12);
    assert!(run.history.len() <= 2);
}

#[test]
fn seesaw_is_deterministic() {
    let model = random_weighted(4, 2, 2);
    let a = seesaw(&model, 4, 20, 9).unwrap();
    let b = seesaw(&model, 4, 20, 9).unwrap();
    assert_eq!(a.history, b.history);
    let best = seesaw_restarts(&model, 4, 20, &[9, 10]).unwrap();
    assert!(best.decision.risk <= a.decision.risk);
}

#[test]
fn personick_examples() {
    let m = cb();
    let pm = personick_optimal_measurement(&build_moments(&m).unwrap()).unwrap();
    let mut est = pm.estimates.clone();
    est.sort_by(f64::total_cmp);
    assert!((est[0] + 0.6).abs() < 1e-9 && (est[1] - 0.6).abs() < 1e-9);
    assert!((pm.decision(&m).unwrap().risk - 0.64).abs() < 1e-9);

    let point = model_zoo("point_mass", &[1.0, 3.0, 1.0], 0).unwrap();
    let pm = personick_optimal_measurement(&build_moments(&point).unwrap()).unwrap();
    assert_eq!(pm.projectors.len(), 1);
    assert!((pm.estimates[0] - point.points()[0].theta[0]).abs() < 1e-9);
    assert!(pm.decision(&point).unwrap().risk.abs() < 1e-9);

    let two = model_zoo("correlated_pair", &[1.0, 0.6], 0).unwrap();
    assert!(matches!(
        personick_optimal_measurement(&build_moments(&two).unwrap()),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn personick_attains_sld_bound() {
    for seed in 0..8 {
        let model = random_weighted(seed, 1, 2 + (seed as usize % 3));
        let mom = build_moments(&model).unwrap();
        let (sld, _) = sld_bound(&mom, model.constant_weight().unwrap()).unwrap();
        let risk = personick_optimal_measurement(&mom)
            .unwrap()
            .decision(&model)
            .unwrap()
            .risk;
        assert!((risk - sld).abs() <= 1e-9, "seed {seed}: {risk} vs {sld}");
    }
}

#[test]
fn audit_examples() {
    let a = ordering_audit(&cb()).unwrap();
    assert!(a.holds(), "{a:?}");
    for v in [a.sld, a.rld, a.holevo, a.nagaoka_hayashi, a.seesaw] {
        assert!((v.unwrap() - 0.64).abs() < 1e-5, "{a:?}");
    }

    let xy = model_zoo("qubit_xy", &[0.5], 4).unwrap();
    let a = ordering_audit(&xy).unwrap();
    assert!(a.holds(), "{a:?}");
    assert!(a.nagaoka_hayashi.unwrap() - a.sld.unwrap() > 0.0);

    let pm = model_zoo("point_mass", &[2.0, 2.0, 1.0], 0).unwrap();
    let a = ordering_audit(&pm).unwrap();
    assert!(a.holds(), "{a:?}");
    for v in [a.sld, a.rld, a.holevo, a.nagaoka_hayashi, a.seesaw] {
        assert!(v.unwrap().abs() < 1e-6, "{a:?}");
    }
}

#[test]
fn seesaw_certifies_bounds_on_random_models() {
    for seed in 0..6 {
        let n = 1 + seed as usize % 2;
        let model = random_weighted(seed, n, 2);
        let em = build_extended_moments(&model).unwrap();
        let nh = nagaoka_hayashi_bound(&em).unwrap().value;
        let h = holevo_type_bound(&em).unwrap().value;
        let run = seesaw(&model, n + 2, 100, seed).unwrap();
        assert!(
            run.decision.risk >= nh - 1e-6,
            "seed {seed}: seesaw {} < NH {nh}",
            run.decision.risk
        );
        assert!(nh >= h - 1e-6);
        for pair in run.history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn posterior_mean_is_optimal_at_fixed_povm(seed in 0u64..500, n in 1usize..3, k in 2usize..5) {
        let model = random_weighted(seed, n, 2);
        let povm = random_povm(2, k, seed + 1).unwrap();
        let dec = posterior_mean_estimator(&model, &povm).unwrap();
        for x in 0..k {
            for j in 0..n {
                for delta in [-0.01, 0.01] {
                    let mut est = dec.estimates.clone();
                    est[x][j] += delta;
                    prop_assert!(decision_risk(&model, &povm, &est).unwrap() >= dec.risk - 1e-14);
                }
            }
        }
    }

    #[test]
    fn seesaw_risk_never_increases(seed in 0u64..500) {
        let model = random_weighted(seed, 2, 2);
        let run = seesaw(&model, 3, 15, seed).unwrap();
        for pair in run.history.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12);
        }
        prop_assert_eq!(run.decision.risk, *run.history.last().unwrap());
    }
}
