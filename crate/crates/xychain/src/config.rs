//! Run configuration: JSON files with strict schema, and built-in presets
//! for the reference parameter sets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ion_chain::{scaled_omega_z, TrapConfig};

fn default_j0_hz() -> f64 {
    20.0
}

/// On-disk configuration. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_ions: usize,
    pub omega_x_mhz: f64,
    pub omega_z_mhz: f64,
    pub mu_mhz: f64,
    pub drive_khz: f64,
    #[serde(default = "default_j0_hz")]
    pub j0_hz: f64,
    /// Upper end of the logarithmic time grid (units 1/J0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,
    /// Number of points on the time grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Explicit beatnote grid for sweeps (MHz); the default grid is
    /// log-spaced above the transverse band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_grid_mhz: Option<Vec<f64>>,
    /// Chain lengths to sweep; defaults to the configured `n_ions`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn trap(&self) -> Result<TrapConfig> {
        let trap = TrapConfig {
            n_ions: self.n_ions,
            omega_x: self.omega_x_mhz,
            omega_z: self.omega_z_mhz,
            mu: self.mu_mhz,
            drive: self.drive_khz,
            j0_target: self.j0_hz,
        };
        trap.validate()?;
        Ok(trap)
    }
}

/// Reference parameter sets: the two interaction-range regimes at N = 16
/// (omega_x = 5 MHz, J0 = 20 Hz) and the sweep bases for N = 16, 64, 256
/// with omega_z scaled down to keep the larger chains linear.
pub fn preset(name: &str) -> Option<RunConfig> {
    let base = |n_ions: usize, omega_z_mhz: f64, mu_mhz: f64, drive_khz: f64| RunConfig {
        n_ions,
        omega_x_mhz: 5.0,
        omega_z_mhz,
        mu_mhz,
        drive_khz,
        j0_hz: 20.0,
        tmax: None,
        grid_points: None,
        mu_grid_mhz: None,
        n_list: None,
    };
    match name {
        "fig2a" => Some(base(16, 0.1, 5.2, 40.0)),
        "fig2b" => Some(base(16, 0.6, 5.02, 3.9)),
        "fig4-n16" => Some(base(16, 0.6, 5.02, 3.9)),
        "fig4-n64" => Some(base(64, scaled_omega_z(64, 16, 0.6), 5.02, 3.9)),
        "fig4-n256" => Some(base(256, scaled_omega_z(256, 16, 0.6), 5.02, 3.9)),
        _ => None,
    }
}

pub fn preset_names() -> &'static [&'static str] {
    &["fig2a", "fig2b", "fig4-n16", "fig4-n64", "fig4-n256"]
}

/// Load and validate a JSON configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    config.trap()?; // range checks
    Ok(config)
}
