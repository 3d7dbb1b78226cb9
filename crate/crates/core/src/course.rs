//! Course ingestion: distance/elevation data resampled onto a fixed spatial
//! step, with one slope angle per interval.
//!
//! Slopes come from forward finite differences on the resampled grid with no
//! smoothing by default; an optional moving-average pass is available for
//! noisy GPX elevation. GPX distances accumulate along great-circle arcs on a
//! sphere — centimeter-level ellipsoid corrections are irrelevant at 100 m
//! resolution.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Mean Earth radius used for great-circle distances (m).
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A course resampled onto a fixed `dx` grid.
///
/// Node elevations are the stored truth (n+1 of them); interval slopes are
/// derived from them, which keeps reloading the profile's own grid points
/// bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct CourseProfile {
    dx: f64,
    elevations: Vec<f64>,
    thetas: Vec<f64>,
}

impl CourseProfile {
    /// Interval length (m).
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Number of intervals.
    pub fn n_intervals(&self) -> usize {
        self.thetas.len()
    }

    /// Padded course length, `dx * n_intervals` (m).
    pub fn total_length(&self) -> f64 {
        self.dx * self.thetas.len() as f64
    }

    /// Slope angle of interval `i` (rad), positive uphill.
    pub fn theta(&self, i: usize) -> f64 {
        self.thetas[i]
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Elevation at the start of interval `i` (m).
    pub fn elevation_start(&self, i: usize) -> f64 {
        self.elevations[i]
    }

    pub(crate) fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    /// Slope angle at distance `x`, clamped to the course span.
    pub fn theta_at(&self, x: f64) -> f64 {
        let idx = (x / self.dx).floor() as isize;
        let idx = idx.clamp(0, self.thetas.len() as isize - 1) as usize;
        self.thetas[idx]
    }

    /// The grid nodes as (distance, elevation) points; reloading these with
    /// the same `dx` reproduces the profile exactly.
    pub fn grid_points(&self) -> Vec<(f64, f64)> {
        self.elevations
            .iter()
            .enumerate()
            .map(|(i, &e)| (i as f64 * self.dx, e))
            .collect()
    }
}

/// Resamples (distance, elevation) breakpoints onto a `dx` grid.
///
/// Elevation is interpolated linearly; a trailing partial interval is padded
/// to full `dx` by extrapolating the final input grade.
pub fn load_profile(points: &[(f64, f64)], dx: f64) -> Result<CourseProfile> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "course needs at least 2 points, got {}",
            points.len()
        )));
    }
    if !(dx.is_finite() && dx > 0.0) {
        return Err(Error::InvalidInput(format!(
            "interval length must be positive, got {dx}"
        )));
    }
    if points[0].0.abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "course distance must start at 0, got {}",
            points[0].0
        )));
    }
    for pair in points.windows(2) {
        if pair[1].0.partial_cmp(&pair[0].0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidInput(format!(
                "course distance not strictly increasing at {} m",
                pair[1].0
            )));
        }
    }
    if let Some(&(d, e)) = points.iter().find(|(d, e)| !d.is_finite() || !e.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite course point ({d}, {e})"
        )));
    }

    let length = points[points.len() - 1].0;
    let ratio = length / dx;
    let n = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let n = n.max(1);

    let last = points[points.len() - 1];
    let prev = points[points.len() - 2];
    let final_grade = (last.1 - prev.1) / (last.0 - prev.0);

    let mut elevations = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = i as f64 * dx;
        let e = if x <= length {
            interp_elevation(points, x)
        } else {
            last.1 + (x - length) * final_grade
        };
        elevations.push(e);
    }
    let thetas: Vec<f64> = elevations
        .windows(2)
        .map(|w| ((w[1] - w[0]) / dx).atan())
        .collect();

    Ok(CourseProfile {
        dx,
        elevations,
        thetas,
    })
}

fn interp_elevation(points: &[(f64, f64)], x: f64) -> f64 {
    if x <= points[0].0 {
        return points[0].1;
    }
    let last = points[points.len() - 1];
    if x >= last.0 {
        return last.1;
    }
    let idx = points.partition_point(|p| p.0 <= x);
    let (x0, e0) = points[idx - 1];
    let (x1, e1) = points[idx];
    if x == x0 {
        return e0;
    }
    e0 + (x - x0) * (e1 - e0) / (x1 - x0)
}

/// Centered moving average over elevation, `window` points wide (forced odd).
/// Distances are untouched. A window of 1 returns the input unchanged.
pub fn smooth_elevations(points: &[(f64, f64)], window: usize) -> Vec<(f64, f64)> {
    if window <= 1 || points.is_empty() {
        return points.to_vec();
    }
    let half = window / 2;
    points
        .iter()
        .enumerate()
        .map(|(i, &(d, _))| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(points.len() - 1);
            let mean =
                points[lo..=hi].iter().map(|p| p.1).sum::<f64>() / (hi - lo + 1) as f64;
            (d, mean)
        })
        .collect()
}

/// Great-circle distance between two (lat, lon) points in degrees.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2)
        + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    let c = 2.0 * a.sqrt().atan2((1.0 - a).sqrt());
    EARTH_RADIUS_M * c
}

/// Extracts (cumulative distance, elevation) breakpoints from GPX text.
pub fn gpx_points(xml: &str, source: &Path) -> Result<Vec<(f64, f64)>> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| Error::parse(source, e.to_string()))?;
    let mut track: Vec<(f64, f64, f64)> = Vec::new();
    for node in doc.descendants().filter(|n| n.has_tag_name("trkpt")) {
        let lat: f64 = node
            .attribute("lat")
            .ok_or_else(|| Error::parse(source, "trkpt missing lat attribute"))?
            .parse()
            .map_err(|e| Error::parse(source, format!("bad lat: {e}")))?;
        let lon: f64 = node
            .attribute("lon")
            .ok_or_else(|| Error::parse(source, "trkpt missing lon attribute"))?
            .parse()
            .map_err(|e| Error::parse(source, format!("bad lon: {e}")))?;
        let ele_node = node
            .children()
            .find(|c| c.has_tag_name("ele"))
            .ok_or_else(|| {
                Error::parse(
                    source,
                    format!("trkpt ({lat}, {lon}) missing ele element"),
                )
            })?;
        let ele: f64 = ele_node
            .text()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| Error::parse(source, format!("bad ele: {e}")))?;
        track.push((lat, lon, ele));
    }
    if track.len() < 2 {
        return Err(Error::parse(
            source,
            format!("need at least 2 trackpoints, got {}", track.len()),
        ));
    }
    let mut points = Vec::with_capacity(track.len());
    let mut dist = 0.0;
    points.push((0.0, track[0].2));
    for pair in track.windows(2) {
        let step = haversine_m(pair[0].0, pair[0].1, pair[1].0, pair[1].1);
        if step > 0.0 {
            dist += step;
            points.push((dist, pair[1].2));
        }
    }
    if points.len() < 2 || dist <= 0.0 {
        return Err(Error::parse(source, "degenerate track with zero length"));
    }
    Ok(points)
}

/// Parses GPX 1.1 trackpoints (`trkpt` with `ele`), accumulates great-circle
/// distance, and resamples via [`load_profile`].
pub fn load_gpx_str(xml: &str, dx: f64, source: &Path) -> Result<CourseProfile> {
    load_profile(&gpx_points(xml, source)?, dx)
}

/// Loads a GPX file from disk.
pub fn load_gpx(path: &Path, dx: f64) -> Result<CourseProfile> {
    let xml = fs::read_to_string(path)?;
    load_gpx_str(&xml, dx, path)
}

/// Reads a course CSV with header `distance_m,elevation_m`.
pub fn read_course_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 2 || cols[0] != "distance_m" || cols[1] != "elevation_m" {
            return Err(Error::parse(
                path,
                format!("expected header distance_m,elevation_m, got {cols:?}"),
            ));
        }
    }
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let get = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::parse(path, format!("record {}: missing field", i + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::parse(path, format!("record {}: {e}", i + 1)))
        };
        points.push((get(0)?, get(1)?));
    }
    Ok(points)
}

/// Writes course breakpoints as `distance_m,elevation_m`.
pub fn write_course_csv(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("distance_m,elevation_m\n");
    for (d, e) in points {
        out.push_str(&format!("{d},{e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes the resampled profile as `interval_index,theta_rad,elevation_m`.
pub fn write_profile_csv(path: &Path, profile: &CourseProfile) -> Result<()> {
    let mut out = String::from("interval_index,theta_rad,elevation_m\n");
    for i in 0..profile.n_intervals() {
        out.push_str(&format!(
            "{i},{},{}\n",
            profile.theta(i),
            profile.elevation_start(i)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Loads a course file by extension: `.gpx` as GPX, anything else as CSV.
/// Smoothing, when requested, is applied to the breakpoints before resampling.
pub fn load_course_file(path: &Path, dx: f64, smooth_window: usize) -> Result<CourseProfile> {
    let is_gpx = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("gpx"))
        .unwrap_or(false);
    let mut points = if is_gpx {
        let xml = fs::read_to_string(path)?;
        gpx_points(&xml, path)?
    } else {
        read_course_csv(path)?
    };
    if smooth_window > 1 {
        points = smooth_elevations(&points, smooth_window);
    }
    load_profile(&points, dx).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::parse(path, msg),
        other => other,
    })
}
