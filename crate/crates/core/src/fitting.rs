//! Parameter estimation from laboratory power traces.
//!
//! A 3-min all-out trace yields CP (mean power over the final 30 s) and AWC
//! (supra-CP area over the 180 s window). Interval recovery tests yield the
//! recovery line, and the post-peak portion of the all-out trace yields the
//! quadratic maximum-power curve with its intercept pinned at CP.
//!
//! All integrals use the trapezoidal rule on raw timestamps with no
//! resampling. Supra-CP area clamps the integrand at zero so brief dips below
//! CP contribute nothing rather than negative area.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One timestamped power sample. The muscle-oxygenation channel is carried
/// opaquely when present; nothing in this crate models it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub p: f64,
    pub smo2: Option<f64>,
}

/// A validated power trace: strictly increasing timestamps, non-negative
/// power, at least two samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    samples: Vec<TraceSample>,
}

impl PowerTrace {
    pub fn new(samples: Vec<TraceSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "trace needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        for pair in samples.windows(2) {
            if pair[1].t.partial_cmp(&pair[0].t) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::InvalidInput(format!(
                    "timestamps not strictly increasing at t = {}",
                    pair[1].t
                )));
            }
        }
        if let Some(s) = samples.iter().find(|s| !(s.p.is_finite() && s.p >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "negative or non-finite power {} at t = {}",
                s.p, s.t
            )));
        }
        Ok(PowerTrace { samples })
    }

    /// Convenience constructor from bare (t, p) pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(t, p)| TraceSample { t, p, smo2: None })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    /// Piecewise-linear power at time `t` (clamped to the trace span).
    pub fn power_at(&self, t: f64) -> f64 {
        if t <= self.start_time() {
            return self.samples[0].p;
        }
        if t >= self.end_time() {
            return self.samples[self.samples.len() - 1].p;
        }
        let idx = self.samples.partition_point(|s| s.t <= t);
        let lo = &self.samples[idx - 1];
        let hi = &self.samples[idx];
        if t == lo.t {
            return lo.p;
        }
        lo.p + (t - lo.t) * (hi.p - lo.p) / (hi.t - lo.t)
    }

    /// Samples restricted to `[t0, end]`, inserting an interpolated sample at
    /// `t0` when the cut falls inside a segment.
    fn window_from(&self, t0: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if t0 <= self.start_time() {
            return self.samples.iter().map(|s| (s.t, s.p)).collect();
        }
        out.push((t0, self.power_at(t0)));
        for s in &self.samples {
            if s.t > t0 {
                out.push((s.t, s.p));
            }
        }
        out
    }

    /// Trapezoidal integral of `max(p - threshold, 0)` over the whole trace.
    pub fn area_above(&self, threshold: f64) -> f64 {
        area_above(
            &self.samples.iter().map(|s| (s.t, s.p)).collect::<Vec<_>>(),
            threshold,
        )
    }
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum()
}

fn area_above(points: &[(f64, f64)], threshold: f64) -> f64 {
    let clamped: Vec<(f64, f64)> = points
        .iter()
        .map(|&(t, p)| (t, (p - threshold).max(0.0)))
        .collect();
    trapezoid(&clamped)
}

/// Goodness-of-fit summary. `r_squared` is reported clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub residual_rms: f64,
    pub n_points: usize,
    pub r_squared: f64,
}

fn diagnostics(residuals: &[f64], values: &[f64]) -> FitDiagnostics {
    let n = residuals.len();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sst: f64 = values.iter().map(|y| (y - mean) * (y - mean)).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else if ssr <= 1e-12 {
        1.0
    } else {
        0.0
    };
    FitDiagnostics {
        residual_rms: (ssr / n as f64).sqrt(),
        n_points: n,
        r_squared,
    }
}

/// CP and AWC from a 3-min all-out trace.
///
/// CP is the time-weighted mean power over the final 30 s; AWC is the
/// supra-CP area over the final 180 s. Traces longer than 180 s are cut to
/// their final 180 s first.
pub fn fit_cp_awc(trace: &PowerTrace) -> Result<(f64, f64)> {
    if trace.duration() < 180.0 {
        return Err(Error::InvalidInput(format!(
            "all-out trace must cover at least 180 s, got {:.1} s",
            trace.duration()
        )));
    }
    let t_end = trace.end_time();
    let cp_window = trace.window_from(t_end - 30.0);
    // A constant window needs no quadrature, and skipping it keeps the
    // constant-tail case exact instead of accumulating summation rounding.
    let first = cp_window[0].1;
    let cp = if cp_window.iter().all(|&(_, p)| p == first) {
        first
    } else {
        trapezoid(&cp_window) / 30.0
    };
    let awc_window = trace.window_from(t_end - 180.0);
    let awc = area_above(&awc_window, cp);
    Ok((cp, awc))
}

/// The power sustainable for exactly four minutes from a full tank:
/// `cp + awc / 240`.
pub fn cp4_power(cp: f64, awc: f64) -> Result<f64> {
    if cp < 0.0 || awc < 0.0 {
        return Err(Error::InvalidInput(format!(
            "cp and awc must be non-negative, got cp={cp} awc={awc}"
        )));
    }
    Ok(cp + awc / 240.0)
}

/// One interval recovery test: a fixed fatigue bout, a recovery segment at a
/// known power and duration, then a final all-out to empty the tank.
#[derive(Debug, Clone)]
pub struct IntervalTestRecord {
    pub fatigue_seg: PowerTrace,
    pub recovery_power: f64,
    pub recovery_duration: f64,
    pub final_mao: PowerTrace,
}

impl IntervalTestRecord {
    pub fn new(
        fatigue_seg: PowerTrace,
        recovery_power: f64,
        recovery_duration: f64,
        final_mao: PowerTrace,
    ) -> Result<Self> {
        if !(recovery_duration.is_finite() && recovery_duration > 0.0) {
            return Err(Error::InvalidInput(format!(
                "recovery duration must be positive, got {recovery_duration}"
            )));
        }
        if !(recovery_power.is_finite() && recovery_power >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "recovery power must be non-negative, got {recovery_power}"
            )));
        }
        Ok(IntervalTestRecord {
            fatigue_seg,
            recovery_power,
            recovery_duration,
            final_mao,
        })
    }
}

/// Energy recovered during one interval test.
///
/// Sums the supra-CP areas of the fatigue segment and the final all-out and
/// subtracts AWC: whatever the books show beyond one full tank must have been
/// recovered in between. Noisy data can push the balance negative; the value
/// is reported as-is with `negative` flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveredEnergy {
    pub joules: f64,
    pub negative: bool,
}

pub fn recovered_energy(rec: &IntervalTestRecord, cp: f64, awc: f64) -> Result<RecoveredEnergy> {
    if rec.recovery_power >= cp {
        return Err(Error::InvalidInput(format!(
            "recovery power {} is not below cp {}",
            rec.recovery_power, cp
        )));
    }
    let e1 = rec.fatigue_seg.area_above(cp);
    let e2 = rec.final_mao.area_above(cp);
    let joules = e1 + e2 - awc;
    Ok(RecoveredEnergy {
        joules,
        negative: joules < 0.0,
    })
}

/// Adjusted recovery power implied by recovering `w_rec` joules in `t_rec`
/// seconds: `cp - w_rec / t_rec`.
pub fn adjusted_power(w_rec: f64, t_rec: f64, cp: f64) -> Result<f64> {
    if !(t_rec.is_finite() && t_rec > 0.0) {
        return Err(Error::InvalidInput(format!(
            "recovery duration must be positive, got {t_rec}"
        )));
    }
    Ok(cp - w_rec / t_rec)
}

/// Ordinary least-squares line `p_adj = a * p + b` through the given
/// (actual power, adjusted power) points.
///
/// The caller decides whether points are raw per-test values or per-level
/// means; this fits whatever it is given. Rejects fewer than two points or
/// all-identical abscissae.
pub fn fit_recovery_line(points: &[(f64, f64)]) -> Result<(f64, f64, FitDiagnostics)> {
    if points.len() < 2 {
        return Err(Error::FitFailed(format!(
            "recovery line needs at least 2 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let x_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - x_mean).powi(2)).sum();
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - x_mean) * (p.1 - y_mean))
        .sum();
    let x_scale = points.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
    if sxx <= 1e-12 * x_scale * x_scale {
        return Err(Error::FitFailed(
            "all actual powers identical; line is undetermined".into(),
        ));
    }
    let a = sxy / sxx;
    let b = y_mean - a * x_mean;
    let residuals: Vec<f64> = points.iter().map(|p| p.1 - (a * p.0 + b)).collect();
    let values: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok((a, b, diagnostics(&residuals, &values)))
}

/// One recovery-protocol data point, carrying its bookkeeping for reporting.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryPoint {
    pub p_actual: f64,
    pub p_adj: f64,
    pub w_rec: f64,
    pub t_rec: f64,
    /// Negative recovered energy indicates measurement noise; such points are
    /// excluded from the line fit by default.
    pub excluded: bool,
}

/// Result of running the full interval-protocol pipeline.
#[derive(Debug, Clone)]
pub struct RecoveryFit {
    pub a: f64,
    pub b: f64,
    pub diagnostics: FitDiagnostics,
    pub points: Vec<RecoveryPoint>,
}

/// Full §-protocol pipeline: per-record recovered energy, adjusted power,
/// unweighted per-level means across durations, then the line fit.
pub fn fit_recovery_protocol(
    records: &[IntervalTestRecord],
    cp: f64,
    awc: f64,
) -> Result<RecoveryFit> {
    let mut points = Vec::with_capacity(records.len());
    for rec in records {
        let w = recovered_energy(rec, cp, awc)?;
        let p_adj = adjusted_power(w.joules, rec.recovery_duration, cp)?;
        points.push(RecoveryPoint {
            p_actual: rec.recovery_power,
            p_adj,
            w_rec: w.joules,
            t_rec: rec.recovery_duration,
            excluded: w.negative,
        });
    }
    let level_means = average_by_level(points.iter().filter(|p| !p.excluded));
    let (a, b, diagnostics) = fit_recovery_line(&level_means)?;
    Ok(RecoveryFit {
        a,
        b,
        diagnostics,
        points,
    })
}

/// Groups points by actual power level (within 1e-9 relative) and averages
/// the adjusted powers per level, unweighted.
fn average_by_level<'a>(points: impl Iterator<Item = &'a RecoveryPoint>) -> Vec<(f64, f64)> {
    let mut sorted: Vec<&RecoveryPoint> = points.collect();
    sorted.sort_by(|a, b| a.p_actual.total_cmp(&b.p_actual));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let level = sorted[i].p_actual;
        let tol = 1e-9 * level.abs().max(1.0);
        let mut sum = 0.0;
        let mut count = 0.0;
        while i < sorted.len() && (sorted[i].p_actual - level).abs() <= tol {
            sum += sorted[i].p_adj;
            count += 1.0;
            i += 1;
        }
        out.push((level, sum / count));
    }
    out
}

/// Quadratic maximum-power coefficients from a 3-min all-out trace.
///
/// Samples strictly before the global power maximum are discarded (the rider
/// is still spinning up inertia there) and contribute nothing: the tank is
/// taken as full at the peak sample. From there, remaining energy per sample
/// is `awc` minus the cumulative supra-CP area, and `(p - cp)` is fit against
/// the basis `{w^2, w}` so the curve's intercept is pinned at CP.
pub fn fit_max_power_curve(
    trace: &PowerTrace,
    cp: f64,
    awc: f64,
) -> Result<(f64, f64, FitDiagnostics)> {
    let samples = trace.samples();
    let peak = samples
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.p
                .total_cmp(&b.1.p)
                .then(b.0.cmp(&a.0)) // first occurrence wins
        })
        .map(|(i, _)| i)
        .expect("trace has samples");

    // Cumulative supra-CP area from the peak sample onward.
    let mut w_seq = Vec::with_capacity(samples.len() - peak);
    let mut burned = 0.0;
    w_seq.push(awc);
    for pair in samples[peak..].windows(2) {
        let y0 = (pair[0].p - cp).max(0.0);
        let y1 = (pair[1].p - cp).max(0.0);
        burned += 0.5 * (y0 + y1) * (pair[1].t - pair[0].t);
        w_seq.push(awc - burned);
    }

    let pts: Vec<(f64, f64)> = samples[peak..]
        .iter()
        .zip(&w_seq)
        .map(|(s, &w)| (w, s.p - cp))
        .collect();
    if pts.len() < 2 {
        return Err(Error::FitFailed(format!(
            "need at least 2 post-peak samples, got {}",
            pts.len()
        )));
    }

    // Normalize w for conditioning; the basis columns span 8 orders of
    // magnitude otherwise.
    let w_scale = pts.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    if w_scale <= 0.0 {
        return Err(Error::FitFailed("no spread in remaining energy".into()));
    }
    let (mut s4, mut s3, mut s2, mut s2y, mut s1y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(w, y) in &pts {
        let u = w / w_scale;
        let u2 = u * u;
        s4 += u2 * u2;
        s3 += u2 * u;
        s2 += u2;
        s2y += u2 * y;
        s1y += u * y;
    }
    let det = s4 * s2 - s3 * s3;
    if det.abs() <= 1e-12 * s4.max(1.0) * s2.max(1.0) {
        return Err(Error::FitFailed(
            "degenerate design matrix: remaining energy has no usable spread".into(),
        ));
    }
    let a1_n = (s2y * s2 - s1y * s3) / det;
    let a2_n = (s1y * s4 - s2y * s3) / det;
    let a1 = a1_n / (w_scale * w_scale);
    let a2 = a2_n / w_scale;

    let residuals: Vec<f64> = pts.iter().map(|&(w, y)| y - (a1 * w * w + a2 * w)).collect();
    let values: Vec<f64> = pts.iter().map(|p| p.1).collect();
    Ok((a1, a2, diagnostics(&residuals, &values)))
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Reads a trace CSV with header `time_s,power_w[,smo2_pct]`.
pub fn read_trace_csv(path: &Path) -> Result<PowerTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 2 || cols[0] != "time_s" || cols[1] != "power_w" {
            return Err(Error::parse(
                path,
                format!("expected header time_s,power_w[,smo2_pct], got {cols:?}"),
            ));
        }
    }
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let parse_field = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::parse(path, format!("record {}: missing field {idx}", i + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::parse(path, format!("record {}: {e}", i + 1)))
        };
        let t = parse_field(0)?;
        let p = parse_field(1)?;
        let smo2 = match record.get(2) {
            Some(s) if !s.is_empty() => Some(
                s.parse::<f64>()
                    .map_err(|e| Error::parse(path, format!("record {}: {e}", i + 1)))?,
            ),
            _ => None,
        };
        samples.push(TraceSample { t, p, smo2 });
    }
    PowerTrace::new(samples)
}

/// Writes a trace CSV; emits the `smo2_pct` column only when any sample has it.
pub fn write_trace_csv(path: &Path, trace: &PowerTrace) -> Result<()> {
    let has_smo2 = trace.samples().iter().any(|s| s.smo2.is_some());
    let mut out = String::new();
    out.push_str(if has_smo2 {
        "time_s,power_w,smo2_pct\n"
    } else {
        "time_s,power_w\n"
    });
    for s in trace.samples() {
        if has_smo2 {
            let smo2 = s.smo2.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", s.t, s.p, smo2));
        } else {
            out.push_str(&format!("{},{}\n", s.t, s.p));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// On-disk description of one interval test in a manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub fatigue_csv: String,
    pub mao_csv: String,
    pub recovery_power_w: f64,
    pub recovery_duration_s: f64,
}

/// Interval-protocol manifest: the subject's CP/AWC plus the test list.
/// Segment paths are resolved relative to the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalManifest {
    pub cp_w: f64,
    pub awc_j: f64,
    pub tests: Vec<ManifestEntry>,
}

/// Loads a manifest and all traces it references.
pub fn load_interval_manifest(path: &Path) -> Result<(f64, f64, Vec<IntervalTestRecord>)> {
    let text = fs::read_to_string(path)?;
    let manifest: IntervalManifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::with_capacity(manifest.tests.len());
    for entry in &manifest.tests {
        let fatigue = read_trace_csv(&base.join(&entry.fatigue_csv))?;
        let mao = read_trace_csv(&base.join(&entry.mao_csv))?;
        records.push(IntervalTestRecord::new(
            fatigue,
            entry.recovery_power_w,
            entry.recovery_duration_s,
            mao,
        )?);
    }
    Ok((manifest.cp_w, manifest.awc_j, records))
}
