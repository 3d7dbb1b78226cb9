//! Minimum-time pacing by backward dynamic programming.
//!
//! State is (velocity, remaining energy) at fixed distance stages. The next
//! velocity node is the sole decision variable: rider power follows from the
//! discrete dynamics, the energy update follows from the switching
//! fatigue/recovery model, and cost-to-go is linearly interpolated in energy.
//! That keeps the power-balance equality exact on a finite grid.
//!
//! The backward pass may evaluate all nodes of a stage in parallel; stages
//! are strict sequential barriers and tie-breaking is fixed toward the lowest
//! velocity node index, so tables are bitwise identical for any worker count.

use rayon::prelude::*;

use crate::course::CourseProfile;
use crate::physics::{self, PhysicsParams};
use crate::rider::RiderModel;
use crate::tables::{self, ValueTables, NO_POLICY};
use crate::{Error, Result};

/// Discretization and start-state parameters for the DP solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Distance interval (m).
    pub dx: f64,
    /// Velocity nodes on `[v_min, v_max]`.
    pub n_v: usize,
    /// Energy nodes on `[0, awc]`.
    pub n_w: usize,
    /// Velocity floor (m/s). The 1/v time integrand is singular at rest, so
    /// standing starts are approximated by starting here.
    pub v_min: f64,
    /// Velocity ceiling (m/s).
    pub v_max: f64,
    /// Costs within this many seconds tie and resolve toward the lower
    /// velocity node index.
    pub tie_epsilon: f64,
    /// Initial velocity (m/s); snapped to the nearest node for lookups.
    pub v0: f64,
    /// Initial remaining energy (J).
    pub w0: f64,
}

impl SolverConfig {
    /// Experiment-scale defaults (100 m intervals, 32x100 grid) with `v_max`
    /// the rider model.
    pub fn for_model(model: &RiderModel) -> Self {
        SolverConfig {
            dx: 100.0,
            n_v: 32,
            n_w: 100,
            v_min: 0.5,
            v_max: model.vmax,
            tie_epsilon: 1e-12,
            v0: 0.5,
            w0: model.awc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_v < 2 || self.n_w < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2x2 nodes, got {}x{}",
                self.n_v, self.n_w
            )));
        }
        if !(self.v_min.is_finite() && self.v_max.is_finite() && self.v_min > 0.0 && self.v_min < self.v_max) {
            return Err(Error::InvalidInput(format!(
                "need 0 < v_min < v_max, got {} and {}",
                self.v_min, self.v_max
            )));
        }
        if !(self.dx.is_finite() && self.dx > 0.0) {
            return Err(Error::InvalidInput(format!(
                "interval length must be positive, got {}",
                self.dx
            )));
        }
        Ok(())
    }

    /// Velocity of node `k` on the uniform grid.
    pub fn v_node(&self, k: usize) -> f64 {
        self.v_min + (self.v_max - self.v_min) * k as f64 / (self.n_v - 1) as f64
    }

    /// Nearest velocity node to `v`.
    pub fn nearest_v_node(&self, v: f64) -> usize {
        let step = (self.v_max - self.v_min) / (self.n_v - 1) as f64;
        let k = ((v - self.v_min) / step).round();
        (k.max(0.0) as usize).min(self.n_v - 1)
    }
}

/// One evaluated state transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Remaining energy after the interval (J); meaningful when `feasible`.
    pub w_next: f64,
    /// Rider power over the interval (W); zero when braking on descents.
    pub p: f64,
    /// Interval traversal time (s).
    pub dt: f64,
    pub feasible: bool,
}

/// Evaluates one interval: from velocity `v_i` with energy `w_i` to `v_next`
/// on slope `theta`. Infeasibility is a returned flag, never an error.
///
/// Branches on required power vs CP: supra-CP drains the tank and must stay
/// under `max_power(w_i)` while leaving the tank non-negative; exactly CP is
/// energy-neutral; sub-CP recovers along the adjusted-power line (clamped at
/// a full tank); negative required power means the rider brakes and recovers
/// at zero pedal power.
pub fn transition(
    v_i: f64,
    w_i: f64,
    v_next: f64,
    theta: f64,
    model: &RiderModel,
    prm: &PhysicsParams,
    dx: f64,
) -> Transition {
    let dt = 2.0 * dx / (v_i + v_next);
    let p_req = physics::required_power_raw(v_i, v_next, theta, prm, dx);
    let cp = model.cp;
    if p_req > cp {
        let w_next = w_i - (p_req - cp) * dt;
        let p_cap = model.max_power_unchecked(w_i.clamp(0.0, model.awc));
        Transition {
            w_next,
            p: p_req,
            dt,
            feasible: p_req <= p_cap && w_next >= 0.0,
        }
    } else if p_req == cp {
        Transition {
            w_next: w_i,
            p: p_req,
            dt,
            feasible: true,
        }
    } else {
        let p = p_req.max(0.0);
        let w_next = (w_i + (cp - (model.rec_a * p + model.rec_b)) * dt).min(model.awc);
        Transition {
            w_next,
            p,
            dt,
            feasible: w_next >= 0.0,
        }
    }
}

/// Solves the backward pass over the whole course.
///
/// The terminal stage costs zero everywhere; each earlier stage minimizes
/// `dt + cost_to_go(next)` over next-velocity nodes, with the continuous
/// energy landing interpolated into the grid.
pub fn solve_backward(
    course: &CourseProfile,
    model: &RiderModel,
    prm: &PhysicsParams,
    cfg: &SolverConfig,
) -> Result<ValueTables> {
    cfg.validate()?;
    let n_stages = course.n_intervals();
    if n_stages == 0 {
        return Err(Error::InvalidInput("course has zero intervals".into()));
    }
    if (course.dx() - cfg.dx).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "course dx {} and solver dx {} disagree",
            course.dx(),
            cfg.dx
        )));
    }

    let n_v = cfg.n_v;
    let n_w = cfg.n_w;
    let nodes = n_v * n_w;
    let awc = model.awc;
    let dw = awc / (n_w - 1) as f64;

    let mut cost = vec![f64::INFINITY; (n_stages + 1) * nodes];
    let mut policy = vec![NO_POLICY; n_stages * nodes];
    cost[n_stages * nodes..].fill(0.0);

    let v_nodes: Vec<f64> = (0..n_v).map(|k| cfg.v_node(k)).collect();

    for stage in (0..n_stages).rev() {
        let theta = course.theta(stage);
        let (head, tail) = cost.split_at_mut((stage + 1) * nodes);
        let cur = &mut head[stage * nodes..];
        let next = &tail[..nodes];

        let interp = |vk: usize, w: f64| -> f64 {
            let u = (w / dw).clamp(0.0, (n_w - 1) as f64);
            let j0 = (u.floor() as usize).min(n_w - 2);
            let frac = u - j0 as f64;
            let c0 = next[vk * n_w + j0];
            let c1 = next[vk * n_w + j0 + 1];
            if frac == 0.0 {
                c0
            } else if frac == 1.0 {
                c1
            } else if c0.is_infinite() || c1.is_infinite() {
                f64::INFINITY
            } else {
                c0 + frac * (c1 - c0)
            }
        };

        let stage_policy = &mut policy[stage * nodes..(stage + 1) * nodes];
        cur.par_iter_mut()
            .zip(stage_policy.par_iter_mut())
            .enumerate()
            .for_each(|(node, (cost_out, policy_out))| {
                let vk = node / n_w;
                let wj = node % n_w;
                let v_i = v_nodes[vk];
                let w_i = dw * wj as f64;
                let mut best = f64::INFINITY;
                let mut best_k = NO_POLICY;
                for (k_next, &v_next) in v_nodes.iter().enumerate() {
                    let tr = transition(v_i, w_i, v_next, theta, model, prm, cfg.dx);
                    if !tr.feasible {
                        continue;
                    }
                    let tail_cost = interp(k_next, tr.w_next);
                    if tail_cost.is_infinite() {
                        continue;
                    }
                    let total = tr.dt + tail_cost;
                    if total < best - cfg.tie_epsilon {
                        best = total;
                        best_k = k_next as u32;
                    }
                }
                *cost_out = best;
                *policy_out = best_k;
            });
    }

    let fingerprint = tables::fingerprint(cfg, model, prm, course);
    Ok(ValueTables::new(
        n_stages,
        *cfg,
        awc,
        fingerprint,
        cost,
        policy,
    ))
}

/// One pacing-plan interval: state at the interval's start plus the elapsed
/// time once it completes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanRow {
    /// Interval start distance (m).
    pub x: f64,
    /// Velocity entering the interval (m/s).
    pub v: f64,
    /// Target power held over the interval (W).
    pub p: f64,
    /// Remaining energy entering the interval (J).
    pub w: f64,
    /// Elapsed time at the interval's end (s).
    pub t_elapsed: f64,
}

/// An extracted minimum-time plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PacingPlan {
    pub rows: Vec<PlanRow>,
    pub total_time: f64,
    /// Velocity and energy at the finish line.
    pub final_velocity: f64,
    pub final_energy: f64,
}

/// Walks the tables forward from the configured start state, carrying energy
/// continuously through [`transition`].
///
/// Each stage re-scores every next-velocity node from the continuous state —
/// the same Bellman lookup the on-line controller performs — so replanning
/// from any state on the extracted trajectory reproduces the plan.
pub fn extract_plan(
    tables: &ValueTables,
    course: &CourseProfile,
    model: &RiderModel,
    prm: &PhysicsParams,
) -> Result<PacingPlan> {
    let cfg = tables.config();
    let n_stages = tables.n_stages();
    if n_stages != course.n_intervals() {
        return Err(Error::InvalidInput(format!(
            "tables cover {n_stages} stages but course has {}",
            course.n_intervals()
        )));
    }
    let mut vk = cfg.nearest_v_node(cfg.v0);
    let mut w = cfg.w0.clamp(0.0, tables.awc());
    if tables.interp_cost(0, vk, w).is_infinite() {
        return Err(Error::Infeasible(
            "start state has infinite cost-to-go at stage 0".into(),
        ));
    }

    let mut rows = Vec::with_capacity(n_stages);
    let mut t = 0.0;
    for stage in 0..n_stages {
        let theta = course.theta(stage);
        let v_i = cfg.v_node(vk);
        let mut best_score = f64::INFINITY;
        let mut best: Option<(usize, Transition)> = None;
        for k_next in 0..cfg.n_v {
            let tr = transition(v_i, w, cfg.v_node(k_next), theta, model, prm, cfg.dx);
            if !tr.feasible {
                continue;
            }
            let tail = tables.interp_cost(stage + 1, k_next, tr.w_next);
            if tail.is_infinite() {
                continue;
            }
            let score = tr.dt + tail;
            if score < best_score - cfg.tie_epsilon {
                best_score = score;
                best = Some((k_next, tr));
            }
        }
        let (k_next, tr) = best.ok_or_else(|| {
            Error::Infeasible(format!("no feasible transition at stage {stage}"))
        })?;
        t += tr.dt;
        rows.push(PlanRow {
            x: stage as f64 * cfg.dx,
            v: v_i,
            p: tr.p,
            w,
            t_elapsed: t,
        });
        w = tr.w_next;
        vk = k_next;
    }

    Ok(PacingPlan {
        rows,
        total_time: t,
        final_velocity: cfg.v_node(vk),
        final_energy: w,
    })
}

/// Checks every plan row against the three constraint families: power within
/// `[0, max_power(w)]`, energy within `[0, awc]`, velocity within
/// `[v_min, v_max]`. Returns human-readable violations; empty means clean.
pub fn check_plan_admissible(
    plan: &PacingPlan,
    model: &RiderModel,
    cfg: &SolverConfig,
) -> Vec<String> {
    let mut violations = Vec::new();
    let mut prev_t = 0.0;
    for (i, row) in plan.rows.iter().enumerate() {
        if !(row.p.is_finite() && row.p >= 0.0) {
            violations.push(format!("row {i}: negative power {}", row.p));
        }
        let cap = model.max_power_unchecked(row.w.clamp(0.0, model.awc));
        if row.p > cap + 1e-9 {
            violations.push(format!(
                "row {i}: power {} exceeds max_power({}) = {cap}",
                row.p, row.w
            ));
        }
        if row.w < -1e-9 || row.w > model.awc + 1e-9 {
            violations.push(format!("row {i}: energy {} outside [0, awc]", row.w));
        }
        if row.v < cfg.v_min - 1e-9 || row.v > cfg.v_max + 1e-9 {
            violations.push(format!("row {i}: velocity {} outside grid", row.v));
        }
        if row.t_elapsed <= prev_t {
            violations.push(format!("row {i}: elapsed time not strictly increasing"));
        }
        prev_t = row.t_elapsed;
    }
    if let Some(last) = plan.rows.last() {
        if (last.t_elapsed - plan.total_time).abs() > 1e-9 {
            violations.push("total_time differs from last row".into());
        }
    }
    violations
}

// ---------------------------------------------------------------------------
// Plan CSV
// ---------------------------------------------------------------------------

/// Writes a plan as
/// `distance_m,target_power_w,velocity_mps,remaining_energy_j,elapsed_time_s`.
pub fn write_plan_csv(path: &std::path::Path, plan: &PacingPlan) -> Result<()> {
    let mut out =
        String::from("distance_m,target_power_w,velocity_mps,remaining_energy_j,elapsed_time_s\n");
    for row in &plan.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.x, row.p, row.v, row.w, row.t_elapsed
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a plan CSV back; totals are reconstructed from the last row.
pub fn read_plan_csv(path: &std::path::Path) -> Result<PacingPlan> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let get = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::parse(path, format!("record {}: missing field", i + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::parse(path, format!("record {}: {e}", i + 1)))
        };
        rows.push(PlanRow {
            x: get(0)?,
            p: get(1)?,
            v: get(2)?,
            w: get(3)?,
            t_elapsed: get(4)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::parse(path, "plan has no rows"));
    }
    let total_time = rows.last().unwrap().t_elapsed;
    let final_energy = rows.last().unwrap().w;
    let final_velocity = rows.last().unwrap().v;
    Ok(PacingPlan {
        rows,
        total_time,
        final_velocity,
        final_energy,
    })
}
