use proptest::prelude::*;
use railalloc_core::allocators::{dual_oracle, ip_barrier, pd, pnou, sqp_allocate};
use railalloc_core::certify::{certify_model, random_instance};
use railalloc_core::{BarrierOptions, CapacityModel, NoClock, RadioParams, Scenario, SolverConfig};

fn assert_simplex(alpha: &[f64]) {
    let sum: f64 = alpha.iter().sum();
    assert!((sum - 1.0).abs() <= 1e-9, "sum {sum}");
    assert!(alpha.iter().all(|a| (0.0..=1.0).contains(a)), "{alpha:?}");
}

#[test]
fn three_device_instances_agree_across_oracles() {
    let mut worst_rel = 0.0f64;
    for seed in 0..60 {
        let inst = random_instance(3, 1000 + seed).unwrap();
        let model = inst.model().unwrap();
        let c = certify_model(&model, &SolverConfig::default(), 1e-3, &NoClock).unwrap();
        assert!(c.passes(1e-6), "seed {seed}: {c:?}");
        worst_rel = worst_rel.max(c.sqp_dual_rel);
    }
    assert!(worst_rel <= 1e-6);
}

#[test]
fn four_device_grid_agrees() {
    for seed in 0..3 {
        let inst = random_instance(4, 77 + seed).unwrap();
        let model = inst.model().unwrap();
        let c = certify_model(&model, &SolverConfig::default(), 1e-2, &NoClock).unwrap();
        assert!(c.passes(1e-6), "seed {seed}: {c:?}");
    }
}

#[test]
fn kkt_residuals_of_the_dual_oracle() {
    use railalloc_core::sqp::{KktPoint, NlpProblem};
    for seed in 0..10 {
        let inst = random_instance(3, 500 + seed).unwrap();
        let model = inst.model().unwrap();
        let reduced = model.reduced();
        let dual = dual_oracle(&model, 1e-12, 1e-13, &NoClock).unwrap();
        let x: Vec<f64> = reduced.active.iter().map(|&s| dual.alpha[s]).collect();
        let uniform = vec![1.0 / x.len() as f64; x.len()];
        let problem = NlpProblem::scaled_at(&reduced, &uniform).unwrap();
        let point = KktPoint::from_marginal_value(&problem, x, dual.multiplier.unwrap()).unwrap();
        assert!(
            point.residuals.max() <= 1e-8,
            "{seed} {:?}",
            point.residuals
        );
    }
}

#[test]
fn table_one_sqp_matches_dual_and_barrier() {
    for seed in 0..4 {
        let sc = Scenario::generate(500.0, 9, 200, 50.0, 50.0, seed).unwrap();
        for beta in [1e-12, 1e-7, 1e-3] {
            let model =
                CapacityModel::new(&sc, 1.2e9, &RadioParams::table_one().with_beta(beta)).unwrap();
            let (sqp, rep) = sqp_allocate(&model, &SolverConfig::default(), &NoClock).unwrap();
            assert!(rep.certified);
            let dual = dual_oracle(&model, 1e-12, 1e-13, &NoClock).unwrap();
            let ip = ip_barrier(&model, &BarrierOptions::default(), &NoClock).unwrap();
            assert!((sqp.objective - dual.objective).abs() <= 1e-6 * dual.objective);
            assert!((sqp.objective - ip.objective).abs() <= 1e3);
            for a in [&sqp.alpha, &dual.alpha, &ip.alpha] {
                assert_simplex(a);
            }
        }
    }
}

#[test]
fn power_scaling_recertifies() {
    let sc = Scenario::generate(500.0, 9, 200, 50.0, 50.0, 3).unwrap();
    let base = CapacityModel::new(&sc, 1.2e9, &RadioParams::table_one().with_beta(1e-12)).unwrap();
    for factor in [1e-3, 1e-1, 1.0, 1e2, 1e3, 1e4] {
        let model = base.scaled_power(factor);
        let (_, rep) = sqp_allocate(&model, &SolverConfig::default(), &NoClock).unwrap();
        assert!(rep.certified, "factor {factor}: {:?}", rep.kkt.residuals);
    }
}

#[test]
fn greedy_rules_ignore_beta_and_bandwidth() {
    let sc = Scenario::generate(500.0, 9, 200, 50.0, 50.0, 11).unwrap();
    let a = pnou(&sc).unwrap();
    let b = pd(&sc).unwrap();
    assert_simplex(&a);
    assert_simplex(&b);
    let mut last = (f64::INFINITY, f64::INFINITY);
    for beta in [1e-12, 1e-9, 1e-6, 1e-3] {
        let m = CapacityModel::new(&sc, 1.2e9, &RadioParams::table_one().with_beta(beta)).unwrap();
        let cur = (m.capacity(&a).unwrap(), m.capacity(&b).unwrap());
        assert!(cur.0 <= last.0 && cur.1 <= last.1);
        last = cur;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn allocators_return_simplex_points(seed in 0u64..1_000_000, relays in 1usize..6) {
        let sc = Scenario::generate(400.0, relays, 40, 40.0, 40.0, seed).unwrap();
        let model = CapacityModel::new(&sc, 1e9, &RadioParams::table_one()).unwrap();
        assert_simplex(&pnou(&sc).unwrap());
        assert_simplex(&pd(&sc).unwrap());
        let (sqp, _) = sqp_allocate(&model, &SolverConfig::default(), &NoClock).unwrap();
        assert_simplex(&sqp.alpha);
        assert_simplex(&dual_oracle(&model, 1e-12, 1e-13, &NoClock).unwrap().alpha);
        for (s, a) in sqp.alpha.iter().enumerate() {
            if !model.has_users(s) {
                prop_assert_eq!(*a, 0.0);
            }
        }
    }
}
