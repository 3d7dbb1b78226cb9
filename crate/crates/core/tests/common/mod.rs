//! Shared helpers for the integration suites: an independent brute-force
//! oracle over velocity-node paths and randomized problem instances.
//!
//! The oracle enumerates every velocity-node path with exact continuous
//! energy propagation (no energy-grid interpolation), so it is independent of
//! the DP's interpolation scheme.

// Each test binary uses a different subset of these helpers.
#![allow(dead_code)]

use pacer_core::course::{load_profile, CourseProfile};
use pacer_core::physics::PhysicsParams;
use pacer_core::rider::RiderModel;
use pacer_core::solver::{transition, SolverConfig};
use pacer_core::tables::ValueTables;
use rand::Rng;

pub struct Instance {
    pub course: CourseProfile,
    pub model: RiderModel,
    pub prm: PhysicsParams,
    pub cfg: SolverConfig,
}

/// A course built from per-interval grades, length `grades.len() * dx`.
pub fn course_from_grades(dx: f64, grades: &[f64]) -> CourseProfile {
    let mut points = Vec::with_capacity(grades.len() + 1);
    let mut x = 0.0;
    let mut e = 0.0;
    points.push((x, e));
    for g in grades {
        x += dx;
        e += dx * g;
        points.push((x, e));
    }
    load_profile(&points, dx).expect("grade list forms a valid course")
}

/// Minimum total time over all velocity-node paths from the configured start
/// state, with energy carried exactly. `None` when no feasible path exists.
pub fn enumerate_best(inst: &Instance) -> Option<f64> {
    let cfg = &inst.cfg;
    let k0 = cfg.nearest_v_node(cfg.v0);
    let w0 = cfg.w0.clamp(0.0, inst.model.awc);

    fn walk(inst: &Instance, stage: usize, k: usize, w: f64) -> f64 {
        let cfg = &inst.cfg;
        if stage == inst.course.n_intervals() {
            return 0.0;
        }
        let theta = inst.course.theta(stage);
        let v_i = cfg.v_node(k);
        let mut best = f64::INFINITY;
        for k_next in 0..cfg.n_v {
            let tr = transition(
                v_i,
                w,
                cfg.v_node(k_next),
                theta,
                &inst.model,
                &inst.prm,
                cfg.dx,
            );
            if !tr.feasible {
                continue;
            }
            let rest = walk(inst, stage + 1, k_next, tr.w_next);
            if rest.is_finite() {
                let total = tr.dt + rest;
                if total < best {
                    best = total;
                }
            }
        }
        best
    }

    let best = walk(inst, 0, k0, w0);
    best.is_finite().then_some(best)
}

/// Accumulated one-energy-cell interpolation error bound for the DP solution:
/// per stage, the largest cost gap across one energy cell (finite neighbors
/// only), summed over stages. Backward induction adds at most one cell's
/// oscillation per stage.
pub fn interp_error_bound(tables: &ValueTables) -> f64 {
    let cfg = tables.config();
    let mut bound = 0.0;
    for stage in 1..=tables.n_stages() {
        let mut gap: f64 = 0.0;
        for k in 0..cfg.n_v {
            for j in 0..cfg.n_w - 1 {
                let a = tables.cost_at(stage, k, j);
                let b = tables.cost_at(stage, k, j + 1);
                if a.is_finite() && b.is_finite() {
                    gap = gap.max((a - b).abs());
                }
            }
        }
        bound += gap;
    }
    bound
}

/// Random small instance where the energy tank is effectively unlimited and
/// the max-power curve never caps a transition: cost is then independent of
/// energy and the DP must match the oracle exactly.
pub fn random_unbound_instance(rng: &mut impl Rng) -> Instance {
    let n_stages = rng.gen_range(2..=6);
    let n_v = rng.gen_range(2..=6);
    let dx = 100.0;
    let grades: Vec<f64> = (0..n_stages).map(|_| rng.gen_range(-0.05..0.07)).collect();
    let course = course_from_grades(dx, &grades);
    let cp = rng.gen_range(200.0..280.0);
    let awc = 1e6;
    let model = RiderModel::new(
        cp,
        awc,
        rng.gen_range(0.3..0.7),
        rng.gen_range(20.0..80.0),
        0.0,
        0.01,
        16.0,
    )
    .unwrap();
    let prm = PhysicsParams::new(
        rng.gen_range(70.0..90.0),
        9.81,
        rng.gen_range(0.003..0.006),
        0.32,
        1.225,
        true,
    )
    .unwrap();
    let v_min = rng.gen_range(0.5..1.5);
    let v_max = rng.gen_range(8.0..16.0);
    let cfg = SolverConfig {
        dx,
        n_v,
        n_w: 30,
        v_min,
        v_max,
        tie_epsilon: 1e-12,
        v0: v_min,
        w0: awc,
    };
    Instance {
        course,
        model,
        prm,
        cfg,
    }
}

/// Random small instance with a tight tank, where energy bounds genuinely
/// constrain the optimum.
pub fn random_bound_instance(rng: &mut impl Rng) -> Instance {
    let n_stages = rng.gen_range(2..=6);
    let n_v = rng.gen_range(3..=6);
    let dx = 100.0;
    let grades: Vec<f64> = (0..n_stages).map(|_| rng.gen_range(-0.04..0.07)).collect();
    let course = course_from_grades(dx, &grades);
    let cp = rng.gen_range(200.0..280.0);
    let awc = rng.gen_range(3000.0..12000.0);
    let model = RiderModel::new(
        cp,
        awc,
        rng.gen_range(0.3..0.7),
        rng.gen_range(20.0..80.0),
        0.0,
        rng.gen_range(0.02..0.06),
        16.0,
    )
    .unwrap();
    let prm = PhysicsParams::new(
        rng.gen_range(70.0..90.0),
        9.81,
        rng.gen_range(0.003..0.006),
        0.32,
        1.225,
        true,
    )
    .unwrap();
    let v_min = rng.gen_range(0.5..1.2);
    let v_max = rng.gen_range(7.0..14.0);
    let cfg = SolverConfig {
        dx,
        n_v,
        n_w: 60,
        v_min,
        v_max,
        tie_epsilon: 1e-12,
        v0: v_min,
        w0: awc,
    };
    Instance {
        course,
        model,
        prm,
        cfg,
    }
}

/// Sub 9's published constants with plausible fitted parameters.
pub fn sub9_model() -> RiderModel {
    RiderModel::new(234.0, 9758.0, 0.5, 60.0, -2e-6, 0.045, 16.0).unwrap()
}

pub fn road_physics() -> PhysicsParams {
    PhysicsParams::new(80.0, 9.81, 0.004, 0.32, 1.225, false).unwrap()
}
