//! Rider configuration document.
//!
//! One human-editable JSON file carries both the physiological parameters and
//! the physics parameters, using flat snake_case keys with units in the name:
//!
//! ```json
//! {
//!   "cp_w": 234.0, "awc_j": 9758.0,
//!   "rec_a": 0.5, "rec_b": 60.0,
//!   "mp_a1": -2.0e-6, "mp_a2": 0.045,
//!   "vmax_mps": 16.0,
//!   "mass_kg": 80.0, "g": 9.81, "crr": 0.004,
//!   "cda_m2": 0.32, "rho_kgm3": 1.225, "lab_mode": false
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::physics::PhysicsParams;
use crate::rider::RiderModel;
use crate::{Error, Result};

fn default_g() -> f64 {
    9.81
}

fn default_vmax() -> f64 {
    16.0
}

/// On-disk form of the rider + physics configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiderConfig {
    pub cp_w: f64,
    pub awc_j: f64,
    pub rec_a: f64,
    pub rec_b: f64,
    pub mp_a1: f64,
    pub mp_a2: f64,
    #[serde(default = "default_vmax")]
    pub vmax_mps: f64,
    pub mass_kg: f64,
    #[serde(default = "default_g")]
    pub g: f64,
    pub crr: f64,
    pub cda_m2: f64,
    pub rho_kgm3: f64,
    #[serde(default)]
    pub lab_mode: bool,
}

impl RiderConfig {
    /// Validates both halves of the document.
    pub fn build(&self) -> Result<(RiderModel, PhysicsParams)> {
        let model = RiderModel::new(
            self.cp_w,
            self.awc_j,
            self.rec_a,
            self.rec_b,
            self.mp_a1,
            self.mp_a2,
            self.vmax_mps,
        )?;
        let prm = PhysicsParams::new(
            self.mass_kg,
            self.g,
            self.crr,
            self.cda_m2,
            self.rho_kgm3,
            self.lab_mode,
        )?;
        Ok((model, prm))
    }

    pub fn from_model(model: &RiderModel, prm: &PhysicsParams) -> Self {
        RiderConfig {
            cp_w: model.cp,
            awc_j: model.awc,
            rec_a: model.rec_a,
            rec_b: model.rec_b,
            mp_a1: model.mp_a1,
            mp_a2: model.mp_a2,
            vmax_mps: model.vmax,
            mass_kg: prm.m_t,
            g: prm.g,
            crr: prm.mu,
            cda_m2: prm.cd_a,
            rho_kgm3: prm.rho,
            lab_mode: prm.lab_mode,
        }
    }
}

/// Loads and validates a rider config file.
pub fn load_rider_config(path: &Path) -> Result<(RiderModel, PhysicsParams)> {
    let text = fs::read_to_string(path)?;
    let cfg: RiderConfig =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    cfg.build()
}

/// Writes a rider config file.
pub fn save_rider_config(path: &Path, model: &RiderModel, prm: &PhysicsParams) -> Result<()> {
    let cfg = RiderConfig::from_model(model, prm);
    let text = serde_json::to_string_pretty(&cfg).expect("config serialization cannot fail");
    fs::write(path, text)?;
    Ok(())
}
