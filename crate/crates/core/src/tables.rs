//! Cost-to-go and policy tables produced by the backward DP pass, plus their
//! versioned binary container.
//!
//! Tables are a lookup controller's working set: the backward pass is solved
//! once and saved; the forward pass and any on-line replanning read them.
//! A 64-bit FNV-1a fingerprint over the canonicalized solver config, rider
//! model, physics parameters and course guards against feeding tables to the
//! wrong problem.

use std::fs;
use std::path::Path;

use crate::course::CourseProfile;
use crate::physics::PhysicsParams;
use crate::rider::RiderModel;
use crate::solver::SolverConfig;
use crate::{Error, Result};

/// Magic bytes opening a table file.
pub const TABLE_MAGIC: &[u8; 7] = b"PACRDP1";

/// Policy sentinel for states with no feasible transition.
pub const NO_POLICY: u32 = u32::MAX;

/// Backward-DP output over the (stage × velocity × energy) grid.
///
/// `cost` holds minimum remaining traversal time in seconds with `+inf`
/// marking infeasible states (never NaN); it spans `n_stages + 1` stages, the
/// last being the all-zero terminal boundary. `policy` holds the chosen
/// next-velocity node index per non-terminal state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    n_stages: usize,
    cfg: SolverConfig,
    awc: f64,
    fingerprint: u64,
    cost: Vec<f64>,
    policy: Vec<u32>,
}

impl ValueTables {
    pub(crate) fn new(
        n_stages: usize,
        cfg: SolverConfig,
        awc: f64,
        fingerprint: u64,
        cost: Vec<f64>,
        policy: Vec<u32>,
    ) -> Self {
        debug_assert_eq!(cost.len(), (n_stages + 1) * cfg.n_v * cfg.n_w);
        debug_assert_eq!(policy.len(), n_stages * cfg.n_v * cfg.n_w);
        ValueTables {
            n_stages,
            cfg,
            awc,
            fingerprint,
            cost,
            policy,
        }
    }

    pub fn n_stages(&self) -> usize {
        self.n_stages
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// AWC the energy grid spans (J).
    pub fn awc(&self) -> f64 {
        self.awc
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Velocity of node `k` on the uniform `[v_min, v_max]` grid.
    pub fn v_node(&self, k: usize) -> f64 {
        self.cfg.v_node(k)
    }

    /// Energy of node `j` on the uniform `[0, awc]` grid.
    pub fn w_node(&self, j: usize) -> f64 {
        self.awc * j as f64 / (self.cfg.n_w - 1) as f64
    }

    fn idx(&self, stage: usize, vk: usize, wj: usize) -> usize {
        (stage * self.cfg.n_v + vk) * self.cfg.n_w + wj
    }

    /// Cost-to-go at a grid node (s); `+inf` if infeasible.
    pub fn cost_at(&self, stage: usize, vk: usize, wj: usize) -> f64 {
        self.cost[self.idx(stage, vk, wj)]
    }

    /// Chosen next-velocity node at a grid node, if any transition was
    /// feasible.
    pub fn policy_at(&self, stage: usize, vk: usize, wj: usize) -> Option<usize> {
        match self.policy[(stage * self.cfg.n_v + vk) * self.cfg.n_w + wj] {
            NO_POLICY => None,
            k => Some(k as usize),
        }
    }

    /// Cost-to-go at velocity node `vk` and continuous energy `w`, linearly
    /// interpolated between the two bracketing energy nodes. Exact at nodes;
    /// an infinite bracket makes the interior infinite.
    pub fn interp_cost(&self, stage: usize, vk: usize, w: f64) -> f64 {
        let n_w = self.cfg.n_w;
        let dw = self.awc / (n_w - 1) as f64;
        let u = (w / dw).clamp(0.0, (n_w - 1) as f64);
        let j0 = (u.floor() as usize).min(n_w - 2);
        let frac = u - j0 as f64;
        let c0 = self.cost_at(stage, vk, j0);
        let c1 = self.cost_at(stage, vk, j0 + 1);
        if frac == 0.0 {
            c0
        } else if frac == 1.0 {
            c1
        } else if c0.is_infinite() || c1.is_infinite() {
            f64::INFINITY
        } else {
            c0 + frac * (c1 - c0)
        }
    }

    /// Raw cost array, stage-major; exposed for bitwise comparisons.
    pub fn cost_slice(&self) -> &[f64] {
        &self.cost
    }

    /// Raw policy array, stage-major.
    pub fn policy_slice(&self) -> &[u32] {
        &self.policy
    }

    /// Checks that these tables were produced for exactly this model, physics
    /// and course.
    pub fn verify_fingerprint(
        &self,
        model: &RiderModel,
        prm: &PhysicsParams,
        course: &CourseProfile,
    ) -> Result<()> {
        let expect = fingerprint(&self.cfg, model, prm, course);
        if expect != self.fingerprint {
            return Err(Error::FingerprintMismatch(format!(
                "tables were built for a different problem (stored {:016x}, computed {expect:016x})",
                self.fingerprint
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Fingerprint
// ---------------------------------------------------------------------------

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(FNV_OFFSET)
    }

    fn bytes(&mut self, data: &[u8]) {
        for &b in data {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
}

/// 64-bit FNV-1a over the canonicalized (config, model, physics, course)
/// tuple: tagged sections, little-endian IEEE-754 field bytes in declaration
/// order.
pub fn fingerprint(
    cfg: &SolverConfig,
    model: &RiderModel,
    prm: &PhysicsParams,
    course: &CourseProfile,
) -> u64 {
    let mut h = Fnv::new();
    h.bytes(b"cfg");
    h.f64(cfg.dx);
    h.u64(cfg.n_v as u64);
    h.u64(cfg.n_w as u64);
    h.f64(cfg.v_min);
    h.f64(cfg.v_max);
    h.f64(cfg.tie_epsilon);
    h.f64(cfg.v0);
    h.f64(cfg.w0);
    h.bytes(b"model");
    h.f64(model.cp);
    h.f64(model.awc);
    h.f64(model.rec_a);
    h.f64(model.rec_b);
    h.f64(model.mp_a1);
    h.f64(model.mp_a2);
    h.f64(model.vmax);
    h.bytes(b"phys");
    h.f64(prm.m_t);
    h.f64(prm.g);
    h.f64(prm.mu);
    h.f64(prm.cd_a);
    h.f64(prm.rho);
    h.bytes(if prm.lab_mode { b"1" } else { b"0" });
    h.bytes(b"course");
    h.f64(course.dx());
    h.u64(course.elevations().len() as u64);
    for &e in course.elevations() {
        h.f64(e);
    }
    h.0
}

// ---------------------------------------------------------------------------
// Binary container
// ---------------------------------------------------------------------------

/// Writes tables as a versioned little-endian binary file.
pub fn export_tables(tables: &ValueTables, path: &Path) -> Result<()> {
    let cfg = &tables.cfg;
    let mut buf: Vec<u8> = Vec::with_capacity(
        64 + 8 * tables.cost.len() + 4 * tables.policy.len(),
    );
    buf.extend_from_slice(TABLE_MAGIC);
    buf.push(0);
    buf.extend_from_slice(&tables.fingerprint.to_le_bytes());
    buf.extend_from_slice(&(tables.n_stages as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.n_v as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.n_w as u32).to_le_bytes());
    for v in [
        cfg.dx,
        cfg.v_min,
        cfg.v_max,
        cfg.tie_epsilon,
        cfg.v0,
        cfg.w0,
        tables.awc,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for c in &tables.cost {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    for p in &tables.policy {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::TableFormat(format!(
                "{}: truncated at byte {} (wanted {n} more)",
                self.path.display(),
                self.pos
            )));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a table file back. Structural validation only; pair with
/// [`ValueTables::verify_fingerprint`] before trusting the contents against
/// a model and course.
pub fn import_tables(path: &Path) -> Result<ValueTables> {
    let data = fs::read(path)?;
    let mut cur = Cursor {
        data: &data,
        pos: 0,
        path,
    };
    let magic = cur.take(7)?;
    if magic != TABLE_MAGIC {
        return Err(Error::TableFormat(format!(
            "{}: bad magic {magic:?}",
            path.display()
        )));
    }
    cur.take(1)?;
    let fingerprint = cur.u64()?;
    let n_stages = cur.u32()? as usize;
    let n_v = cur.u32()? as usize;
    let n_w = cur.u32()? as usize;
    if n_v < 2 || n_w < 2 || n_stages == 0 {
        return Err(Error::TableFormat(format!(
            "{}: nonsense dimensions {n_stages}x{n_v}x{n_w}",
            path.display()
        )));
    }
    let dx = cur.f64()?;
    let v_min = cur.f64()?;
    let v_max = cur.f64()?;
    let tie_epsilon = cur.f64()?;
    let v0 = cur.f64()?;
    let w0 = cur.f64()?;
    let awc = cur.f64()?;
    let n_cost = (n_stages + 1) * n_v * n_w;
    let n_policy = n_stages * n_v * n_w;
    let expected = cur.pos + 8 * n_cost + 4 * n_policy;
    if data.len() != expected {
        return Err(Error::TableFormat(format!(
            "{}: length {} does not match header (expected {expected})",
            path.display(),
            data.len()
        )));
    }
    let mut cost = Vec::with_capacity(n_cost);
    for _ in 0..n_cost {
        let c = cur.f64()?;
        if c.is_nan() {
            return Err(Error::TableFormat(format!(
                "{}: NaN cost entry",
                path.display()
            )));
        }
        cost.push(c);
    }
    let mut policy = Vec::with_capacity(n_policy);
    for _ in 0..n_policy {
        let p = cur.u32()?;
        if p != NO_POLICY && p as usize >= n_v {
            return Err(Error::TableFormat(format!(
                "{}: policy index {p} out of range for {n_v} velocity nodes",
                path.display()
            )));
        }
        policy.push(p);
    }
    let cfg = SolverConfig {
        dx,
        n_v,
        n_w,
        v_min,
        v_max,
        tie_epsilon,
        v0,
        w0,
    };
    cfg.validate()?;
    Ok(ValueTables::new(
        n_stages,
        cfg,
        awc,
        fingerprint,
        cost,
        policy,
    ))
}
