//! Browser bindings for the quench simulator: three interactive views onto
//! the pipeline (coupling matrix, quench dynamics, gap structure), each
//! returning a JSON payload for the static demo page to render.
//!
//! The trap is fixed at omega_x = 5 MHz; the interactive knobs are the chain
//! length, the axial frequency and the beatnote detuning above the
//! transverse band. Drive strength and J0 drop out of every exported
//! quantity (all energies are in units of J0, times in 1/J0).

use serde::Serialize;
use wasm_bindgen::prelude::*;

use xychain::dynamics::{position_weights, QuenchState, SpectralDecomposition, TimeAverager};
use xychain::ensembles::{branch_detector, gap_structure, BRANCH_SEPARATION_DECADES};
use xychain::experiments::{log_time_grid, run_pipeline, Pipeline};
use xychain::ion_chain::TrapConfig;

const OMEGA_X_MHZ: f64 = 5.0;

fn trap(n: usize, omega_z_khz: f64, detuning_khz: f64) -> TrapConfig {
    TrapConfig {
        n_ions: n,
        omega_x: OMEGA_X_MHZ,
        omega_z: omega_z_khz * 1e-3,
        mu: OMEGA_X_MHZ + detuning_khz * 1e-3,
        drive: 10.0,
        j0_target: 20.0,
    }
}

#[derive(Serialize)]
struct ErrorPayload {
    error: String,
}

fn err_json(message: String) -> String {
    serde_json::to_string(&ErrorPayload { error: message }).expect("serializes")
}

fn pipeline(n: usize, omega_z_khz: f64, detuning_khz: f64) -> Result<Pipeline, String> {
    let config = trap(n, omega_z_khz, detuning_khz);
    run_pipeline(&config).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CouplingPayload {
    n: usize,
    alpha: Option<f64>,
    /// Row-major J_ij in units of J0.
    j: Vec<f64>,
    band_top_mhz: f64,
    band_bottom_mhz: f64,
}

/// Physical coupling matrix and fitted range exponent.
#[wasm_bindgen]
pub fn coupling_matrix(n: usize, omega_z_khz: f64, detuning_khz: f64) -> String {
    match pipeline(n, omega_z_khz, detuning_khz) {
        Ok(p) => {
            let m = p.coupling.matrix();
            let payload = CouplingPayload {
                n,
                alpha: p.coupling.alpha_fit(),
                j: m.iter().cloned().collect(), // column-major == row-major: symmetric
                band_top_mhz: p.modes.band_top(),
                band_bottom_mhz: p.modes.band_bottom(),
            };
            serde_json::to_string(&payload).expect("serializes")
        }
        Err(e) => err_json(e),
    }
}

#[derive(Serialize)]
struct QuenchPayload {
    n: usize,
    alpha: Option<f64>,
    times: Vec<f64>,
    /// Row per time: <sigma_i^z(t)>, flattened.
    sigma_z: Vec<f64>,
    /// Finite-time average C_bar(t).
    c_avg: Vec<f64>,
    /// Diagonal-ensemble (infinite-time) prediction of C.
    c_de: f64,
}

/// Quench evolution from |up down ... down>: polarization heat map and the
/// time-averaged position observable on a log time grid.
#[wasm_bindgen]
pub fn quench_series(
    n: usize,
    omega_z_khz: f64,
    detuning_khz: f64,
    tmax: f64,
    points: usize,
) -> String {
    if !(tmax.is_finite() && tmax > 0.1) || !(2..=2000).contains(&points) {
        return err_json("need tmax > 0.1 and 2 <= points <= 2000".into());
    }
    match pipeline(n, omega_z_khz, detuning_khz) {
        Ok(p) => {
            let times = log_time_grid(1e-2, tmax, points);
            let psi0 = QuenchState::single_flip(n);
            let weights = position_weights(n);
            let averager = TimeAverager::new(&p.spectral, &psi0, &weights);
            let mut sigma_z = Vec::with_capacity(times.len() * n);
            let mut c_avg = Vec::with_capacity(times.len());
            for &t in &times {
                let state = xychain::dynamics::evolve(&p.spectral, &psi0, t);
                sigma_z.extend(xychain::dynamics::sigma_z_profile(&state));
                c_avg.push(averager.eval(t));
            }
            let de = xychain::ensembles::diagonal_ensemble(&p.spectral, &psi0, None);
            let payload = QuenchPayload {
                n,
                alpha: p.coupling.alpha_fit(),
                times,
                sigma_z,
                c_avg,
                c_de: de.c_value,
            };
            serde_json::to_string(&payload).expect("serializes")
        }
        Err(e) => err_json(e),
    }
}

#[derive(Serialize)]
struct GapsPayload {
    n: usize,
    alpha: Option<f64>,
    /// All pairwise eigenenergy differences, ascending, units of J0.
    gaps: Vec<f64>,
    /// Consecutive-pair gaps E_2k - E_{2k-1}.
    pair_gaps: Vec<f64>,
    branch_detected: bool,
    branch_count: usize,
    prethermal_time: f64,
    thermal_time: f64,
}

fn gaps_payload(n: usize, alpha: Option<f64>, spec: &SpectralDecomposition) -> GapsPayload {
    let gaps = gap_structure(spec);
    let branch = branch_detector(&gaps, BRANCH_SEPARATION_DECADES);
    let (prethermal_time, thermal_time) = xychain::ensembles::timescale_estimates(&gaps);
    GapsPayload {
        n,
        alpha,
        gaps: gaps.all_gaps.clone(),
        pair_gaps: gaps.pair_gaps.clone(),
        branch_detected: branch.detected,
        branch_count: branch.branch_gaps.len(),
        prethermal_time,
        thermal_time,
    }
}

/// Eigenenergy-difference scatter and branch detection for the physical
/// chain.
#[wasm_bindgen]
pub fn gap_scatter(n: usize, omega_z_khz: f64, detuning_khz: f64) -> String {
    match pipeline(n, omega_z_khz, detuning_khz) {
        Ok(p) => serde_json::to_string(&gaps_payload(n, p.coupling.alpha_fit(), &p.spectral))
            .expect("serializes"),
        Err(e) => err_json(e),
    }
}
