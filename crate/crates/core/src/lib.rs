//! Time-trial pacing toolkit built on the critical-power / anaerobic-work-capacity
//! fatigue model.
//!
//! The crate covers the full pipeline:
//!
//! - [`rider`] — the physiological parameter set (CP, AWC, recovery line,
//!   max-power curve) and its fatigue/recovery dynamics.
//! - [`fitting`] — estimation of those parameters from laboratory power traces
//!   (3-min all-out test, interval recovery protocol).
//! - [`course`] — elevation ingestion (CSV / GPX) resampled to a fixed-step
//!   profile of slope angles.
//! - [`physics`] — longitudinal bicycle dynamics, continuous and discrete.
//! - [`solver`] — backward dynamic programming over a (velocity × remaining
//!   energy) grid that minimizes traversal time, plus plan extraction and
//!   table export/import.
//! - [`sil`] — software-in-the-loop closed-loop simulation: state estimation
//!   from logged power, lookup-table power recommendation, and a simulated
//!   rider with configurable noise.

pub mod config;
pub mod course;
pub mod fitting;
pub mod physics;
pub mod rider;
pub mod sil;
pub mod solver;
pub mod synthetic;
pub mod tables;

mod error;

pub use error::{Error, Result};
