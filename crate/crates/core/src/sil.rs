//! Software-in-the-loop pieces: dead-reckoning state estimation from logged
//! power, lookup-table power recommendation, and a closed-loop ride simulator
//! with a configurable noisy rider.
//!
//! The estimator is deterministic: distance integrates logged velocity,
//! energy integrates the switching fatigue/recovery model sample by sample.
//! The recommendation is a stage-local Bellman lookup over the saved backward
//! tables, which is equivalent to full replanning. The simulation loop runs
//! at 1 Hz with physics sub-stepping and is bitwise reproducible for a fixed
//! seed.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::course::CourseProfile;
use crate::physics::{self, PhysicsParams};
use crate::rider::RiderModel;
use crate::solver::{transition, SolverConfig};
use crate::tables::ValueTables;
use crate::{Error, Result};

/// Simulation tick (s).
const TICK_S: f64 = 1.0;

/// One logged sample from the trainer or the simulated rider.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RideSample {
    pub t: f64,
    pub p: f64,
    pub v: f64,
    pub smo2: Option<f64>,
}

/// Dead-reckoned rider state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedState {
    /// Distance along the course (m).
    pub x: f64,
    /// Velocity (m/s).
    pub v: f64,
    /// Remaining anaerobic energy (J).
    pub w: f64,
}

/// Estimator output: the new state plus whether the energy integral had to be
/// clamped into `[0, awc]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateUpdate {
    pub state: EstimatedState,
    pub clamped: bool,
}

/// Advances a state across one batch of samples.
///
/// Distance advances by the trapezoidal integral of velocity; velocity takes
/// the last sample's value; energy integrates the switching model's rate
/// (fatigue above CP, the recovery line below, zero at CP) trapezoidally and
/// clamps into `[0, awc]`.
pub fn estimate_state(
    prev: &EstimatedState,
    samples: &[RideSample],
    model: &RiderModel,
) -> Result<EstimateUpdate> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty sample batch".into()));
    }
    for pair in samples.windows(2) {
        if pair[1].t < pair[0].t {
            return Err(Error::InvalidInput(format!(
                "time goes backwards within batch at t = {}",
                pair[1].t
            )));
        }
    }
    let mut dx = 0.0;
    let mut dw = 0.0;
    for pair in samples.windows(2) {
        let dt = pair[1].t - pair[0].t;
        dx += 0.5 * (pair[0].v + pair[1].v) * dt;
        dw += 0.5 * (model.dw_rate(pair[0].p) + model.dw_rate(pair[1].p)) * dt;
    }
    let w_raw = prev.w + dw;
    let w = w_raw.clamp(0.0, model.awc);
    Ok(EstimateUpdate {
        state: EstimatedState {
            x: prev.x + dx,
            v: samples[samples.len() - 1].v,
            w,
        },
        clamped: w != w_raw,
    })
}

/// A power recommendation; `feasible == false` is the distress signal and the
/// power falls back to holding CP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    pub power: f64,
    pub feasible: bool,
    pub chosen_node: Option<usize>,
}

/// Scores every next-velocity node from the continuous state against the
/// saved cost-to-go tables and returns the power of the cheapest feasible
/// transition (ties toward the lower node). On a grid node this reproduces
/// the stored policy exactly.
pub fn recommend_power(
    state: &EstimatedState,
    tables: &ValueTables,
    course: &CourseProfile,
    model: &RiderModel,
    prm: &PhysicsParams,
) -> Recommendation {
    let cfg = tables.config();
    let stage = ((state.x / cfg.dx).floor() as usize).min(tables.n_stages() - 1);
    let theta = course.theta(stage);
    let v = state.v.clamp(cfg.v_min, cfg.v_max);
    let w = state.w.clamp(0.0, tables.awc());

    let mut best_score = f64::INFINITY;
    let mut best: Option<(usize, f64)> = None;
    for k_next in 0..cfg.n_v {
        let tr = transition(v, w, cfg.v_node(k_next), theta, model, prm, cfg.dx);
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
            best = Some((k_next, tr.p));
        }
    }
    match best {
        Some((node, power)) => Recommendation {
            power,
            feasible: true,
            chosen_node: Some(node),
        },
        None => Recommendation {
            power: model.cp,
            feasible: false,
            chosen_node: None,
        },
    }
}

/// Simulated rider imperfections: constant bias plus first-order-lagged
/// Gaussian noise on the commanded power, from a seeded PRNG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiderBehavior {
    pub power_bias: f64,
    pub power_noise_sd: f64,
    pub response_lag: f64,
    pub seed: u64,
}

impl RiderBehavior {
    /// Perfectly compliant rider.
    pub fn ideal() -> Self {
        RiderBehavior {
            power_bias: 0.0,
            power_noise_sd: 0.0,
            response_lag: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.power_noise_sd < 0.0 || self.response_lag < 0.0 {
            return Err(Error::InvalidInput(format!(
                "noise sd and lag must be non-negative, got {} and {}",
                self.power_noise_sd, self.response_lag
            )));
        }
        Ok(())
    }
}

/// One closed-loop log row, written at the end of its tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RideLogRow {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    pub p_cmd: f64,
    pub p_applied: f64,
    pub w: f64,
}

/// Closed-loop outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub log: Vec<RideLogRow>,
    pub achieved_time: f64,
    /// Ticks on which the energy estimate had to be clamped into `[0, awc]`.
    pub clamp_events: usize,
    /// Ticks on which no feasible transition existed and the distress
    /// fallback (hold CP) was commanded.
    pub infeasible_ticks: usize,
}

/// Closed loop against the saved tables: recommend, perturb, integrate
/// physics, re-estimate. Refuses tables whose fingerprint does not match the
/// given model, physics and course.
pub fn simulate_ride(
    course: &CourseProfile,
    model: &RiderModel,
    prm: &PhysicsParams,
    tables: &ValueTables,
    behavior: &RiderBehavior,
) -> Result<SimulationResult> {
    tables.verify_fingerprint(model, prm, course)?;
    if tables.n_stages() != course.n_intervals() {
        return Err(Error::InvalidInput(format!(
            "tables cover {} stages but course has {}",
            tables.n_stages(),
            course.n_intervals()
        )));
    }
    let cfg = *tables.config();
    simulate_loop(course, model, prm, &cfg, behavior, |state| {
        let rec = recommend_power(state, tables, course, model, prm);
        (rec.power, rec.feasible)
    })
}

/// Closed loop holding one commanded power everywhere (the applied power is
/// still capped at `max_power(w)`, so holding CP stays feasible on an empty
/// tank). This is the baseline rider strategy.
pub fn simulate_hold_power(
    course: &CourseProfile,
    model: &RiderModel,
    prm: &PhysicsParams,
    cfg: &SolverConfig,
    power: f64,
    behavior: &RiderBehavior,
) -> Result<SimulationResult> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "held power must be non-negative, got {power}"
        )));
    }
    simulate_loop(course, model, prm, cfg, behavior, |_| (power, true))
}

fn simulate_loop(
    course: &CourseProfile,
    model: &RiderModel,
    prm: &PhysicsParams,
    cfg: &SolverConfig,
    behavior: &RiderBehavior,
    mut commander: impl FnMut(&EstimatedState) -> (f64, bool),
) -> Result<SimulationResult> {
    behavior.validate()?;
    cfg.validate()?;
    let length = course.total_length();
    let mut rng = ChaCha8Rng::seed_from_u64(behavior.seed);
    let noise = if behavior.power_noise_sd > 0.0 {
        Some(Normal::new(0.0, behavior.power_noise_sd).expect("validated sd"))
    } else {
        None
    };
    let alpha = if behavior.response_lag > 0.0 {
        (-TICK_S / behavior.response_lag).exp()
    } else {
        0.0
    };

    let mut state = EstimatedState {
        x: 0.0,
        v: cfg.v0.clamp(cfg.v_min, cfg.v_max),
        w: cfg.w0.clamp(0.0, model.awc),
    };
    let mut t = 0.0;
    let mut noise_state = 0.0;
    let mut log = Vec::new();
    let mut clamp_events = 0;
    let mut infeasible_ticks = 0;
    // v is floored at v_min, so progress per tick is bounded below.
    let max_ticks = (4.0 * length / (cfg.v_min * TICK_S)).ceil() as usize + 3600;

    for _ in 0..max_ticks {
        if state.x >= length {
            return Ok(SimulationResult {
                log,
                achieved_time: t,
                clamp_events,
                infeasible_ticks,
            });
        }
        let (p_cmd, feasible) = commander(&state);
        if !feasible {
            infeasible_ticks += 1;
        }
        let eps = noise.map(|n| n.sample(&mut rng)).unwrap_or(0.0);
        noise_state = alpha * noise_state + (1.0 - alpha) * eps;
        let p_cap = model.max_power_unchecked(state.w.clamp(0.0, model.awc));
        let p_applied = (p_cmd + behavior.power_bias + noise_state).clamp(0.0, p_cap);

        let theta = course.theta_at(state.x);
        let v_next = physics::accelerate(state.v, p_applied, theta, prm, TICK_S, cfg.v_min)?
            .min(cfg.v_max);
        let batch = [
            RideSample {
                t,
                p: p_applied,
                v: state.v,
                smo2: None,
            },
            RideSample {
                t: t + TICK_S,
                p: p_applied,
                v: v_next,
                smo2: None,
            },
        ];
        let update = estimate_state(&state, &batch, model)?;
        if update.clamped {
            clamp_events += 1;
        }
        let next = update.state;

        if next.x >= length {
            // Interpolate the crossing inside the tick.
            let frac = ((length - state.x) / (next.x - state.x)).clamp(0.0, 1.0);
            let t_cross = t + frac * TICK_S;
            log.push(RideLogRow {
                t: t_cross,
                x: length,
                v: state.v + frac * (next.v - state.v),
                p_cmd,
                p_applied,
                w: state.w + frac * (next.w - state.w),
            });
            return Ok(SimulationResult {
                log,
                achieved_time: t_cross,
                clamp_events,
                infeasible_ticks,
            });
        }

        t += TICK_S;
        state = next;
        log.push(RideLogRow {
            t,
            x: state.x,
            v: state.v,
            p_cmd,
            p_applied,
            w: state.w,
        });
    }
    Err(Error::Infeasible(format!(
        "ride did not finish within {max_ticks} ticks"
    )))
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Writes a ride log as
/// `time_s,distance_m,velocity_mps,power_cmd_w,power_applied_w,remaining_energy_j`.
pub fn write_ridelog_csv(path: &Path, result: &SimulationResult) -> Result<()> {
    let mut out = String::from(
        "time_s,distance_m,velocity_mps,power_cmd_w,power_applied_w,remaining_energy_j\n",
    );
    for row in &result.log {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.t, row.x, row.v, row.p_cmd, row.p_applied, row.w
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a ride log CSV back into rows.
pub fn read_ridelog_csv(path: &Path) -> Result<Vec<RideLogRow>> {
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
        rows.push(RideLogRow {
            t: get(0)?,
            x: get(1)?,
            v: get(2)?,
            p_cmd: get(3)?,
            p_applied: get(4)?,
            w: get(5)?,
        });
    }
    Ok(rows)
}

/// Reads a recorded ride CSV (`time_s,power_w,velocity_mps[,smo2_pct]`) for
/// offline re-estimation.
pub fn read_ride_csv(path: &Path) -> Result<Vec<RideSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 3
            || cols[0] != "time_s"
            || cols[1] != "power_w"
            || cols[2] != "velocity_mps"
        {
            return Err(Error::parse(
                path,
                format!("expected header time_s,power_w,velocity_mps[,smo2_pct], got {cols:?}"),
            ));
        }
    }
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let get = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::parse(path, format!("record {}: missing field", i + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::parse(path, format!("record {}: {e}", i + 1)))
        };
        let smo2 = match record.get(3) {
            Some(s) if !s.is_empty() => Some(
                s.parse::<f64>()
                    .map_err(|e| Error::parse(path, format!("record {}: {e}", i + 1)))?,
            ),
            _ => None,
        };
        samples.push(RideSample {
            t: get(0)?,
            p: get(1)?,
            v: get(2)?,
            smo2,
        });
    }
    Ok(samples)
}

/// Re-estimates states offline across a recorded ride, one state per sample.
pub fn estimate_log(
    samples: &[RideSample],
    model: &RiderModel,
    x0: f64,
    w0: f64,
) -> Result<Vec<EstimatedState>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty ride".into()));
    }
    let mut states = Vec::with_capacity(samples.len());
    let mut state = EstimatedState {
        x: x0,
        v: samples[0].v,
        w: w0.clamp(0.0, model.awc),
    };
    states.push(state);
    for pair in samples.windows(2) {
        state = estimate_state(&state, pair, model)?.state;
        states.push(state);
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn sub9() -> RiderModel {
        RiderModel::new(234.0, 9758.0, 0.5, 60.0, 0.0, 0.05, 16.0).unwrap()
    }

    fn batch(samples: &[(f64, f64, f64)]) -> Vec<RideSample> {
        samples
            .iter()
            .map(|&(t, p, v)| RideSample {
                t,
                p,
                v,
                smo2: None,
            })
            .collect()
    }

    #[test]
    fn estimate_holds_at_cp() {
        let m = sub9();
        let prev = EstimatedState {
            x: 0.0,
            v: 5.0,
            w: 5000.0,
        };
        let samples = batch(&[(0.0, 234.0, 5.0), (1.0, 234.0, 5.0), (2.0, 234.0, 5.0)]);
        let update = estimate_state(&prev, &samples, &m).unwrap();
        assert_eq!(update.state.w, 5000.0);
        assert!(!update.clamped);
    }

    #[test]
    fn estimate_fatigue_drain_matches_model() {
        let m = sub9();
        let prev = EstimatedState {
            x: 0.0,
            v: 5.0,
            w: 5000.0,
        };
        let samples: Vec<RideSample> = (0..=10)
            .map(|i| RideSample {
                t: i as f64,
                p: 334.0,
                v: 5.0,
                smo2: None,
            })
            .collect();
        let update = estimate_state(&prev, &samples, &m).unwrap();
        assert_abs_diff_eq!(update.state.w, 4000.0, epsilon = 1e-9);
    }

    #[test]
    fn estimate_distance_rectangle() {
        let m = sub9();
        let prev = EstimatedState {
            x: 10.0,
            v: 5.0,
            w: 5000.0,
        };
        let samples: Vec<RideSample> = (0..=20)
            .map(|i| RideSample {
                t: i as f64,
                p: 100.0,
                v: 5.0,
                smo2: None,
            })
            .collect();
        let update = estimate_state(&prev, &samples, &m).unwrap();
        assert_abs_diff_eq!(update.state.x, 110.0, epsilon = 1e-9);
    }

    #[test]
    fn estimate_rejects_backwards_time() {
        let m = sub9();
        let prev = EstimatedState {
            x: 0.0,
            v: 5.0,
            w: 5000.0,
        };
        let samples = batch(&[(1.0, 234.0, 5.0), (0.5, 234.0, 5.0)]);
        assert!(estimate_state(&prev, &samples, &m).is_err());
    }

    #[test]
    fn estimate_clamps_and_flags() {
        let m = sub9();
        let prev = EstimatedState {
            x: 0.0,
            v: 5.0,
            w: m.awc - 10.0,
        };
        let samples = batch(&[(0.0, 80.0, 5.0), (60.0, 80.0, 5.0)]);
        let update = estimate_state(&prev, &samples, &m).unwrap();
        assert_eq!(update.state.w, m.awc);
        assert!(update.clamped);
    }

    #[test]
    fn estimate_against_oversampled_oracle() {
        // Piecewise-varying power; 10x oversampled batch must agree within
        // 1e-3 relative.
        let m = sub9();
        let prev = EstimatedState {
            x: 0.0,
            v: 6.0,
            w: 5000.0,
        };
        let profile = |t: f64| 234.0 + 80.0 * (t / 30.0 * std::f64::consts::PI).sin();
        let coarse: Vec<RideSample> = (0..=30)
            .map(|i| {
                let t = i as f64;
                RideSample {
                    t,
                    p: profile(t),
                    v: 6.0,
                    smo2: None,
                }
            })
            .collect();
        let fine: Vec<RideSample> = (0..=300)
            .map(|i| {
                let t = i as f64 / 10.0;
                RideSample {
                    t,
                    p: profile(t),
                    v: 6.0,
                    smo2: None,
                }
            })
            .collect();
        let coarse_w = estimate_state(&prev, &coarse, &m).unwrap().state.w;
        let fine_w = estimate_state(&prev, &fine, &m).unwrap().state.w;
        assert_relative_eq!(coarse_w, fine_w, max_relative = 1e-3);
    }

    #[test]
    fn ride_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ride.csv");
        fs::write(
            &path,
            "time_s,power_w,velocity_mps,smo2_pct\n0,250,5.5,63.2\n1,260,5.6,\n2,255,5.7,61\n",
        )
        .unwrap();
        let samples = read_ride_csv(&path).unwrap();
        assert_eq!(samples.len(), 3);
        assert_eq!(samples[0].smo2, Some(63.2));
        assert_eq!(samples[1].smo2, None);
        let m = sub9();
        let states = estimate_log(&samples, &m, 0.0, m.awc).unwrap();
        assert_eq!(states.len(), 3);
        assert!(states[2].x > 0.0);
    }
}
