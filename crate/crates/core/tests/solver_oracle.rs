//! DP solver vs. the independent path-enumeration oracle, plus determinism
//! and energy-monotonicity checks.

mod common;

use common::{
    enumerate_best, interp_error_bound, random_bound_instance, random_unbound_instance,
};
use pacer_core::solver::{extract_plan, solve_backward, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn dp_matches_oracle_when_energy_never_binds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..20 {
        let inst = random_unbound_instance(&mut rng);
        let tables = solve_backward(&inst.course, &inst.model, &inst.prm, &inst.cfg).unwrap();
        let k0 = inst.cfg.nearest_v_node(inst.cfg.v0);
        let dp = tables.cost_at(0, k0, inst.cfg.n_w - 1);
        let oracle = enumerate_best(&inst).expect("instance must be feasible");
        assert!(
            (dp - oracle).abs() <= 1e-9,
            "instance {i}: dp {dp} vs oracle {oracle}"
        );
    }
}

#[test]
fn dp_within_cell_error_when_energy_binds() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..12 {
        let inst = random_bound_instance(&mut rng);
        let tables = solve_backward(&inst.course, &inst.model, &inst.prm, &inst.cfg).unwrap();
        let k0 = inst.cfg.nearest_v_node(inst.cfg.v0);
        let dp = tables.cost_at(0, k0, inst.cfg.n_w - 1);
        let oracle = enumerate_best(&inst).expect("instance must be feasible");
        let bound = interp_error_bound(&tables);
        assert!(
            dp.is_finite(),
            "instance {i}: dp infeasible while oracle found {oracle}"
        );
        assert!(
            (dp - oracle).abs() <= bound + 1e-9,
            "instance {i}: dp {dp} vs oracle {oracle} exceeds bound {bound}"
        );
    }
}

#[test]
fn doubling_awc_never_slower() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..6 {
        let inst = random_bound_instance(&mut rng);
        let tables = solve_backward(&inst.course, &inst.model, &inst.prm, &inst.cfg).unwrap();
        let k0 = inst.cfg.nearest_v_node(inst.cfg.v0);
        let t1 = tables.cost_at(0, k0, inst.cfg.n_w - 1);

        let mut big = inst.model;
        big.awc *= 2.0;
        let big = pacer_core::rider::RiderModel::new(
            big.cp, big.awc, big.rec_a, big.rec_b, big.mp_a1, big.mp_a2, big.vmax,
        )
        .unwrap();
        let cfg2 = SolverConfig {
            w0: big.awc,
            ..inst.cfg
        };
        let tables2 = solve_backward(&inst.course, &big, &inst.prm, &cfg2).unwrap();
        let t2 = tables2.cost_at(0, k0, cfg2.n_w - 1);
        assert!(
            t2 <= t1 + 1e-9,
            "instance {i}: doubling awc went from {t1} to {t2}"
        );
    }
}

#[test]
fn tables_bitwise_identical_across_worker_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let inst = random_bound_instance(&mut rng);

    let solve_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| solve_backward(&inst.course, &inst.model, &inst.prm, &inst.cfg).unwrap())
    };
    let one = solve_with(1);
    let many = solve_with(4);
    assert_eq!(one.cost_slice().len(), many.cost_slice().len());
    for (a, b) in one.cost_slice().iter().zip(many.cost_slice()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(one.policy_slice(), many.policy_slice());
}

#[test]
fn extracted_plan_time_close_to_cost_to_go() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..6 {
        let inst = random_bound_instance(&mut rng);
        let tables = solve_backward(&inst.course, &inst.model, &inst.prm, &inst.cfg).unwrap();
        let k0 = inst.cfg.nearest_v_node(inst.cfg.v0);
        let ctg = tables.cost_at(0, k0, inst.cfg.n_w - 1);
        let plan = extract_plan(&tables, &inst.course, &inst.model, &inst.prm).unwrap();
        let bound = interp_error_bound(&tables);
        assert!(
            (plan.total_time - ctg).abs() <= bound + 1e-9,
            "plan {} vs cost-to-go {ctg} (bound {bound})",
            plan.total_time
        );
    }
}

#[test]
fn unbound_plan_time_equals_cost_to_go_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let inst = random_unbound_instance(&mut rng);
        let tables = solve_backward(&inst.course, &inst.model, &inst.prm, &inst.cfg).unwrap();
        let k0 = inst.cfg.nearest_v_node(inst.cfg.v0);
        let ctg = tables.cost_at(0, k0, inst.cfg.n_w - 1);
        let plan = extract_plan(&tables, &inst.course, &inst.model, &inst.prm).unwrap();
        assert!((plan.total_time - ctg).abs() <= 1e-9);
    }
}
