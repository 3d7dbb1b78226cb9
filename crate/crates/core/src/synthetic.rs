//! Synthetic trace and course generators.
//!
//! These produce data that is exactly consistent with the crate's own
//! integration rules, so fitting round trips close to machine precision.
//! They back the test suites and are handy for exercising the CLI without
//! laboratory data.

use crate::fitting::{IntervalTestRecord, PowerTrace, TraceSample};
use crate::rider::RiderModel;

/// A step signal sampled at 1 Hz: `p_high` until `t_step`, `p_low` after.
///
/// The sample at the step instant holds the mean of the two levels, the way a
/// power meter reporting one-second averages straddles a step. With that
/// midpoint sample the trapezoidal integral of the samples equals the exact
/// integral of the ideal step signal.
pub fn step_trace(p_high: f64, t_step: f64, p_low: f64, t_end: f64) -> PowerTrace {
    let n = t_end as usize;
    let samples = (0..=n)
        .map(|i| {
            let t = i as f64;
            let p = if t < t_step {
                p_high
            } else if t == t_step {
                0.5 * (p_high + p_low)
            } else {
                p_low
            };
            TraceSample { t, p, smo2: None }
        })
        .collect();
    PowerTrace::new(samples).expect("step trace construction is valid")
}

/// A 3-min all-out trace generated from the rider's max-power curve.
///
/// Power at every sample sits on `max_power(w)` and the energy sequence
/// satisfies the trapezoidal depletion rule exactly, so the max-power fit
/// recovers the generating coefficients to machine precision. Each implicit
/// step solves `w' = w - h/2 * ((p(w) - cp) + (p(w') - cp))` by Newton
/// iteration.
///
/// With `ramp_s > 0` a sub-CP run-up of that many seconds is prepended; the
/// global maximum then sits at the start of the all-out body.
pub fn all_out_trace(m: &RiderModel, hz: f64, ramp_s: f64) -> PowerTrace {
    let h = 1.0 / hz;
    let n = (180.0 * hz).round() as usize;
    let mut body: Vec<(f64, f64)> = Vec::with_capacity(n + 1);
    let mut w = m.awc;
    let mut p = m.max_power_unchecked(w);
    body.push((0.0, p));
    for k in 1..=n {
        let c = w - 0.5 * h * (p - m.cp);
        // Newton on f(w') = w' + h/2 * (a1 w'^2 + a2 w') - c.
        let mut w_next = w;
        for _ in 0..50 {
            let f = w_next + 0.5 * h * (m.mp_a1 * w_next * w_next + m.mp_a2 * w_next) - c;
            let fp = 1.0 + 0.5 * h * (2.0 * m.mp_a1 * w_next + m.mp_a2);
            let step = f / fp;
            w_next -= step;
            if step.abs() < 1e-15 * m.awc.max(1.0) {
                break;
            }
        }
        w = w_next.max(0.0);
        p = m.max_power_unchecked(w);
        body.push((k as f64 * h, p));
    }

    let mut samples: Vec<TraceSample> = Vec::new();
    if ramp_s > 0.0 {
        let steps = (ramp_s * hz).round() as usize;
        for k in 0..steps {
            // Run-up from light pedaling toward (but below) CP.
            let frac = k as f64 / steps as f64;
            let p_ramp = 0.3 * m.cp + 0.65 * m.cp * frac;
            samples.push(TraceSample {
                t: k as f64 * h,
                p: p_ramp,
                smo2: None,
            });
        }
    }
    let offset = ramp_s;
    samples.extend(body.into_iter().map(|(t, p)| TraceSample {
        t: t + offset,
        p,
        smo2: None,
    }));
    PowerTrace::new(samples).expect("all-out trace construction is valid")
}

/// Builds a constant-power segment whose supra-CP area is exactly `area`
/// joules, spread over `duration` seconds at 1 Hz.
pub fn segment_with_area(cp: f64, area: f64, duration: f64) -> PowerTrace {
    let p = cp + area / duration;
    let n = duration as usize;
    PowerTrace::new(
        (0..=n)
            .map(|i| TraceSample {
                t: i as f64,
                p,
                smo2: None,
            })
            .collect(),
    )
    .expect("segment construction is valid")
}

/// A full interval-protocol dataset consistent with the recovery line
/// `p_adj = a * p + b`: three recovery power levels crossed with the three
/// protocol durations (2, 6 and 15 min). Every test books exactly the
/// recovered energy the line implies, so the protocol pipeline recovers
/// `(a, b)` with zero residual.
pub fn recovery_protocol_records(
    cp: f64,
    awc: f64,
    a: f64,
    b: f64,
) -> Vec<IntervalTestRecord> {
    let levels = [80.0, 140.0, 190.0];
    let durations = [120.0, 360.0, 900.0];
    let mut records = Vec::new();
    for &p_rec in &levels {
        for &t_rec in &durations {
            let p_adj = a * p_rec + b;
            let w_rec = (cp - p_adj) * t_rec;
            let e1 = awc / 2.0; // the CP4 bout burns half the tank
            let e2 = w_rec + awc - e1;
            let fatigue = segment_with_area(cp, e1, 120.0);
            let mao = segment_with_area(cp, e2, 180.0);
            records.push(
                IntervalTestRecord::new(fatigue, p_rec, t_rec, mao)
                    .expect("synthetic record is valid"),
            );
        }
    }
    records
}

/// Distance/elevation breakpoints for a synthetic 10.3 km course with two
/// climbs: 1.5 km flat, 3 km at +6%, 1 km at -2%, 3 km at +5%, then flat to
/// the finish.
pub fn two_climb_course() -> Vec<(f64, f64)> {
    let mut points = vec![(0.0, 0.0)];
    let push = |points: &mut Vec<(f64, f64)>, length: f64, grade: f64| {
        let (x0, e0) = *points.last().unwrap();
        points.push((x0 + length, e0 + length * grade));
    };
    push(&mut points, 1500.0, 0.0);
    push(&mut points, 3000.0, 0.06);
    push(&mut points, 1000.0, -0.02);
    push(&mut points, 3000.0, 0.05);
    push(&mut points, 1800.0, 0.0);
    points
}
