//! Longitudinal bicycle dynamics.
//!
//! Driving power balances inertia, gravity along the slope, rolling
//! resistance, and aerodynamic drag. `lab_mode` drops the drag term to match
//! stationary-trainer experiments. Drivetrain losses are ignored (powertrain
//! efficiency is taken as 100%) and air density is constant, so there is no
//! altitude model.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest integration sub-step used by [`accelerate`], in seconds.
pub const MAX_SUBSTEP_S: f64 = 0.05;

/// Vehicle and environment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    /// Total mass of bicycle plus rider (kg).
    pub m_t: f64,
    /// Gravitational acceleration (m/s^2).
    pub g: f64,
    /// Rolling-resistance coefficient (dimensionless).
    pub mu: f64,
    /// Drag-area product Cd*A (m^2). Carried as one product; the two factors
    /// are never needed separately.
    pub cd_a: f64,
    /// Air density (kg/m^3).
    pub rho: f64,
    /// When set, the aerodynamic drag term is omitted entirely.
    pub lab_mode: bool,
}

impl PhysicsParams {
    pub fn new(m_t: f64, g: f64, mu: f64, cd_a: f64, rho: f64, lab_mode: bool) -> Result<Self> {
        if !(m_t.is_finite() && m_t > 0.0) {
            return Err(Error::InvalidModel(format!(
                "total mass must be positive, got {m_t}"
            )));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidModel(format!(
                "air density must be positive, got {rho}"
            )));
        }
        if mu < 0.0 || cd_a < 0.0 || !mu.is_finite() || !cd_a.is_finite() || !g.is_finite() {
            return Err(Error::InvalidModel(format!(
                "bad resistance parameters mu={mu} cd_a={cd_a} g={g}"
            )));
        }
        Ok(PhysicsParams {
            m_t,
            g,
            mu,
            cd_a,
            rho,
            lab_mode,
        })
    }

    /// Gravity-plus-rolling resistive force on slope `theta` (N).
    fn grade_force(&self, theta: f64) -> f64 {
        self.m_t * self.g * (theta.sin() + self.mu * theta.cos())
    }

    /// Aerodynamic drag force at velocity `v` (N); zero in lab mode.
    fn drag_force(&self, v: f64) -> f64 {
        if self.lab_mode {
            0.0
        } else {
            0.5 * self.cd_a * self.rho * v * v
        }
    }
}

/// Power required to go from `v_i` to `v_next` over one interval of length
/// `dx` on slope `theta`, evaluated at the interval's mean velocity.
///
/// The kinetic term is the exact work-energy difference across the interval;
/// the drag term uses the squared mean velocity. In lab mode drag is omitted.
/// May be negative on steep descents (the rider would have to brake).
pub fn required_power(
    v_i: f64,
    v_next: f64,
    theta: f64,
    prm: &PhysicsParams,
    dx: f64,
) -> Result<f64> {
    if !(v_i.is_finite() && v_i > 0.0 && v_next.is_finite() && v_next > 0.0) {
        return Err(Error::InvalidInput(format!(
            "velocities must be positive, got {v_i} -> {v_next}"
        )));
    }
    if !(dx.is_finite() && dx > 0.0) {
        return Err(Error::InvalidInput(format!(
            "interval length must be positive, got {dx}"
        )));
    }
    Ok(required_power_raw(v_i, v_next, theta, prm, dx))
}

/// [`required_power`] without precondition checks, for callers that have
/// already validated their grid.
pub(crate) fn required_power_raw(
    v_i: f64,
    v_next: f64,
    theta: f64,
    prm: &PhysicsParams,
    dx: f64,
) -> f64 {
    let v_mean = 0.5 * (v_i + v_next);
    let accel_force = prm.m_t * (v_next * v_next - v_i * v_i) / (2.0 * dx);
    (accel_force + prm.grade_force(theta) + prm.drag_force(v_mean)) * v_mean
}

/// Advances velocity under constant applied power `p` for `dt` seconds by
/// explicit integration of `m_t * dv/dt = p/v - grade - drag` (Heun steps,
/// fixed sub-steps no longer than [`MAX_SUBSTEP_S`]). The result (and every
/// intermediate velocity) is floored at `v_floor`, which keeps the `p/v`
/// term away from its singularity at rest.
pub fn accelerate(
    v: f64,
    p: f64,
    theta: f64,
    prm: &PhysicsParams,
    dt: f64,
    v_floor: f64,
) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidInput(format!(
            "velocity must be positive, got {v}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "duration must be positive, got {dt}"
        )));
    }
    let accel = |v_cur: f64| (p / v_cur - prm.grade_force(theta) - prm.drag_force(v_cur)) / prm.m_t;
    let n = (dt / MAX_SUBSTEP_S).ceil().max(1.0);
    let h = dt / n;
    let mut v_cur = v;
    for _ in 0..n as u64 {
        let k1 = accel(v_cur);
        let v_pred = (v_cur + h * k1).max(v_floor);
        let k2 = accel(v_pred);
        v_cur = (v_cur + 0.5 * h * (k1 + k2)).max(v_floor);
    }
    Ok(v_cur)
}
