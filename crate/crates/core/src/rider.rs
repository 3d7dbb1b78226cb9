//! Physiological rider model: critical power, anaerobic work capacity, the
//! empirical recovery line, and the energy-dependent maximum-power curve.
//!
//! All quantities are SI (W, J, s, m). The model is immutable after
//! construction and every operation is a pure function, so values can be
//! shared freely across threads.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fatigue/recovery parameter set for one rider.
///
/// `cp` and `awc` come from a 3-min all-out test. The recovery line
/// `p_adj = rec_a * p + rec_b` maps an actual sub-CP recovery power to the
/// adjusted power implied by observed energy recovery. The maximum-power
/// curve `p_max(w) = mp_a1 * w^2 + mp_a2 * w + cp` gives the largest power
/// the rider can produce with `w` joules left in the anaerobic tank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiderModel {
    /// Critical power (W).
    pub cp: f64,
    /// Anaerobic work capacity (J).
    pub awc: f64,
    /// Recovery-line slope (dimensionless).
    pub rec_a: f64,
    /// Recovery-line intercept (W).
    pub rec_b: f64,
    /// Quadratic max-power coefficient (W/J^2).
    pub mp_a1: f64,
    /// Linear max-power coefficient (W/J).
    pub mp_a2: f64,
    /// Rider's maximum velocity (m/s).
    pub vmax: f64,
}

impl RiderModel {
    /// Validates invariants and builds the model.
    ///
    /// Rejects non-positive `cp`, `awc` or `vmax`, and any parameter set whose
    /// max-power curve dips below `cp` anywhere on `[0, awc]` (sampled on a
    /// 1 J grid plus the endpoint).
    pub fn new(
        cp: f64,
        awc: f64,
        rec_a: f64,
        rec_b: f64,
        mp_a1: f64,
        mp_a2: f64,
        vmax: f64,
    ) -> Result<Self> {
        if !(cp.is_finite() && cp > 0.0) {
            return Err(Error::InvalidModel(format!("cp must be positive, got {cp}")));
        }
        if !(awc.is_finite() && awc > 0.0) {
            return Err(Error::InvalidModel(format!(
                "awc must be positive, got {awc}"
            )));
        }
        if !(vmax.is_finite() && vmax > 0.0) {
            return Err(Error::InvalidModel(format!(
                "vmax must be positive, got {vmax}"
            )));
        }
        for v in [rec_a, rec_b, mp_a1, mp_a2] {
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("non-finite parameter {v}")));
            }
        }
        let model = RiderModel {
            cp,
            awc,
            rec_a,
            rec_b,
            mp_a1,
            mp_a2,
            vmax,
        };
        // p_max(w) >= cp <=> mp_a1*w^2 + mp_a2*w >= 0 on [0, awc]. Sample on a
        // 1 J grid (coarsened for absurdly large tanks) and pin the quadratic's
        // vertex, which is where the minimum can hide between grid points.
        let tol = -1e-9 * cp.max(1.0);
        let excess = |w: f64| mp_a1 * w * w + mp_a2 * w;
        let step = (awc / 1e6).max(1.0);
        let mut w = 0.0;
        loop {
            if excess(w) < tol {
                return Err(Error::InvalidModel(format!(
                    "max_power({w} J) = {:.3} W falls below cp = {cp} W",
                    model.max_power_unchecked(w)
                )));
            }
            if w >= awc {
                break;
            }
            w = (w + step).min(awc);
        }
        if mp_a1 != 0.0 {
            let vertex = -mp_a2 / (2.0 * mp_a1);
            if vertex > 0.0 && vertex < awc && excess(vertex) < tol {
                return Err(Error::InvalidModel(format!(
                    "max_power({vertex:.1} J) falls below cp = {cp} W"
                )));
            }
        }
        Ok(model)
    }

    /// Energy drained by pedaling at `p >= cp` for `dt` seconds.
    ///
    /// Returns a non-positive delta; the caller clamps the resulting tank
    /// level at zero. Rejects sub-CP powers (wrong branch) and negative
    /// durations. At `p == cp` the drain is exactly zero, the continuous
    /// limit of the fatigue branch.
    pub fn dw_fatigue(&self, p: f64, dt: f64) -> Result<f64> {
        if p < self.cp {
            return Err(Error::InvalidInput(format!(
                "dw_fatigue requires p >= cp ({p} < {})",
                self.cp
            )));
        }
        if dt < 0.0 {
            return Err(Error::InvalidInput(format!("negative duration {dt}")));
        }
        Ok(-(p - self.cp) * dt)
    }

    /// Energy recovered by pedaling at `p < cp` (strict) for `dt` seconds.
    ///
    /// Uses the adjusted-power line: the effective recovery rate is
    /// `cp - (rec_a * p + rec_b)`. The result may be negative when the line
    /// sits above `cp`; no internal clamp is applied. The caller clamps the
    /// tank at `awc`.
    pub fn dw_recovery(&self, p: f64, dt: f64) -> Result<f64> {
        if p >= self.cp {
            return Err(Error::InvalidInput(format!(
                "dw_recovery requires p < cp ({p} >= {})",
                self.cp
            )));
        }
        if dt < 0.0 {
            return Err(Error::InvalidInput(format!("negative duration {dt}")));
        }
        Ok((self.cp - (self.rec_a * p + self.rec_b)) * dt)
    }

    /// Instantaneous tank rate dW/dt at applied power `p`, switching between
    /// the fatigue and recovery branches (zero exactly at `p == cp`).
    pub fn dw_rate(&self, p: f64) -> f64 {
        if p > self.cp {
            -(p - self.cp)
        } else if p < self.cp {
            self.cp - (self.rec_a * p + self.rec_b)
        } else {
            0.0
        }
    }

    /// Maximum producible power with `w` joules remaining, `0 <= w <= awc`.
    pub fn max_power(&self, w: f64) -> Result<f64> {
        if !(0.0..=self.awc).contains(&w) {
            return Err(Error::InvalidInput(format!(
                "w = {w} outside [0, {}]",
                self.awc
            )));
        }
        Ok(self.max_power_unchecked(w))
    }

    pub(crate) fn max_power_unchecked(&self, w: f64) -> f64 {
        self.mp_a1 * w * w + self.mp_a2 * w + self.cp
    }

    /// Constant-power time to exhaustion from a full tank, `awc / (p - cp)`.
    ///
    /// Rejects `p <= cp`, where the time diverges.
    pub fn time_to_exhaustion(&self, p: f64) -> Result<f64> {
        if p <= self.cp {
            return Err(Error::InvalidInput(format!(
                "time_to_exhaustion requires p > cp ({p} <= {})",
                self.cp
            )));
        }
        Ok(self.awc / (p - self.cp))
    }

    /// Clamps a raw tank level into `[0, awc]`.
    pub fn clamp_energy(&self, w: f64) -> f64 {
        w.clamp(0.0, self.awc)
    }

    /// Validated remaining-energy state for this model.
    pub fn energy_state(&self, w: f64) -> Result<EnergyState> {
        if !(0.0..=self.awc).contains(&w) {
            return Err(Error::InvalidInput(format!(
                "energy {w} outside [0, {}]",
                self.awc
            )));
        }
        Ok(EnergyState { w })
    }

    /// True if the max-power curve is non-decreasing over `[0, awc]`.
    /// The derivative `2*mp_a1*w + mp_a2` is linear, so checking the interval
    /// ends is exact. Several solver monotonicity guarantees are conditional
    /// on this.
    pub fn max_power_nondecreasing(&self) -> bool {
        self.mp_a2 >= -1e-12 && 2.0 * self.mp_a1 * self.awc + self.mp_a2 >= -1e-12
    }
}

/// Remaining anaerobic energy, validated against the owning model's `awc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyState {
    w: f64,
}

impl EnergyState {
    /// Remaining energy in joules.
    pub fn joules(&self) -> f64 {
        self.w
    }
}
