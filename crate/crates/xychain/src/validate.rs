//! Built-in self-test: a fast subset of the oracle and invariant checks,
//! runnable from the CLI to confirm an installation behaves.

use serde::Serialize;

use crate::config::preset;
use crate::coupling::build_synthetic_coupling;
use crate::dynamics::{
    build_hamiltonian, c_expectation, decompose, evolve, position_weights, sigma_z_profile,
    time_average, QuenchState,
};
use crate::ensembles::diagonal_ensemble;
use crate::experiments::run_pipeline;
use crate::ion_chain::solve_equilibrium;
use crate::oracle::{full_ising_series, integrate_schrodinger};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

/// Run every self-check; all are deterministic and finish in seconds.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        equilibrium_analytic(),
        com_mode_invariant(),
        alpha_fit_windows(),
        initial_state_contract(),
        uniform_de_closed_form(),
        propagator_cross_check(),
        ising_oracle_agreement(),
        conservation_laws(),
        quadrature_agreement(),
    ]
}

fn equilibrium_analytic() -> CheckResult {
    let cfg = preset("fig2b").unwrap();
    let mut trap = cfg.trap().unwrap();
    trap.n_ions = 2;
    let two = solve_equilibrium(&trap).unwrap();
    let expect2 = 0.25_f64.powf(1.0 / 3.0);
    trap.n_ions = 3;
    let three = solve_equilibrium(&trap).unwrap();
    let expect3 = 1.25_f64.powf(1.0 / 3.0);
    let err = (two.positions()[1] - expect2)
        .abs()
        .max((three.positions()[2] - expect3).abs());
    check(
        "equilibrium-analytic",
        err < 1e-10,
        format!("max deviation from two/three-ion closed forms: {err:.2e}"),
    )
}

fn com_mode_invariant() -> CheckResult {
    let trap = preset("fig2b").unwrap().trap().unwrap();
    let pipeline = run_pipeline(&trap).unwrap();
    let top = pipeline.modes.band_top();
    let rel = (top - trap.omega_x).abs() / trap.omega_x;
    let uniform = 1.0 / (trap.n_ions as f64).sqrt();
    let max_dev = (0..trap.n_ions)
        .map(|i| (pipeline.modes.mode_vectors()[(i, 0)].abs() - uniform).abs())
        .fold(0.0_f64, f64::max);
    check(
        "com-mode",
        rel < 1e-9 && max_dev < 1e-9,
        format!("band top rel. offset {rel:.2e}, mode-vector dev {max_dev:.2e}"),
    )
}

fn alpha_fit_windows() -> CheckResult {
    let a = run_pipeline(&preset("fig2a").unwrap().trap().unwrap())
        .unwrap()
        .coupling
        .alpha_fit()
        .unwrap();
    let b = run_pipeline(&preset("fig2b").unwrap().trap().unwrap())
        .unwrap()
        .coupling
        .alpha_fit()
        .unwrap();
    check(
        "alpha-fits",
        (2.3..=2.9).contains(&a) && (0.37..=0.67).contains(&b),
        format!("short-range alpha = {a:.3}, long-range alpha = {b:.3}"),
    )
}

fn initial_state_contract() -> CheckResult {
    let psi0 = QuenchState::single_flip(16);
    let c0 = c_expectation(&psi0);
    let sum: f64 = sigma_z_profile(&psi0).iter().sum();
    check(
        "initial-state",
        c0 == -1.0 && sum == 2.0 - 16.0,
        format!("C(0) = {c0}, sum sigma_z = {sum}"),
    )
}

fn uniform_de_closed_form() -> CheckResult {
    let n = 16;
    let c = build_synthetic_coupling(n, 0.0, false);
    let spec = decompose(&build_hamiltonian(&c)).unwrap();
    let de = diagonal_ensemble(&spec, &QuenchState::single_flip(n), None);
    let err = (de.c_value - (2.0 / n as f64 - 1.0)).abs();
    check(
        "uniform-de",
        err < 1e-9,
        format!("|C_DE - (2/N - 1)| = {err:.2e}"),
    )
}

fn propagator_cross_check() -> CheckResult {
    let c = build_synthetic_coupling(8, 0.52, false);
    let h = build_hamiltonian(&c);
    let spec = decompose(&h).unwrap();
    let psi0 = QuenchState::single_flip(8);
    let t = 10.0;
    let exact = evolve(&spec, &psi0, t);
    let integrated = integrate_schrodinger(&h, &psi0, t, 1e-12).unwrap();
    let dev = exact
        .amplitudes()
        .iter()
        .zip(integrated.amplitudes())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0_f64, f64::max);
    check(
        "propagator-cross-check",
        dev < 1e-8,
        format!("max amplitude deviation {dev:.2e} at t = 10/J0"),
    )
}

fn ising_oracle_agreement() -> CheckResult {
    // Deep in the validity regime (large field, short time) the full Ising
    // evolution must track the XY reduction; virtual-excitation dephasing
    // scales as (2J)^2 t / 4B.
    let n = 6;
    let c = build_synthetic_coupling(n, 0.52, false);
    let h = build_hamiltonian(&c);
    let spec = decompose(&h).unwrap();
    let psi0 = QuenchState::single_flip(n);
    let b = 500.0 * c.max_abs();
    let mut up = vec![false; n];
    up[0] = true;
    let times = [0.3, 0.7, 1.0];
    let snapshots = full_ising_series(&c, b, &up, &times).unwrap();
    let mut dev = 0.0_f64;
    for snap in &snapshots {
        let xy = sigma_z_profile(&evolve(&spec, &psi0, snap.time));
        for (a, b) in snap.sigma_z.iter().zip(&xy) {
            dev = dev.max((a - b).abs());
        }
    }
    check(
        "ising-oracle",
        dev <= 0.02,
        format!("max per-site sigma_z deviation {dev:.2e} at B = 500 max J, t <= 1"),
    )
}

fn conservation_laws() -> CheckResult {
    let c = build_synthetic_coupling(16, 0.52, false);
    let h = build_hamiltonian(&c);
    let spec = decompose(&h).unwrap();
    let psi0 = QuenchState::single_flip(16);
    let e0 = h.expectation(&psi0);
    let scale = spec.spectral_width();
    let mut norm_err = 0.0_f64;
    let mut energy_err = 0.0_f64;
    for &t in &[0.1, 10.0, 1e3, 1e5] {
        let psi = evolve(&spec, &psi0, t);
        norm_err = norm_err.max((psi.norm() - 1.0).abs());
        energy_err = energy_err.max((h.expectation(&psi) - e0).abs() / scale);
    }
    check(
        "conservation",
        norm_err <= 1e-12 && energy_err <= 1e-10,
        format!("norm drift {norm_err:.2e}, relative energy drift {energy_err:.2e}"),
    )
}

fn quadrature_agreement() -> CheckResult {
    let trap = preset("fig2b").unwrap().trap().unwrap();
    let pipeline = run_pipeline(&trap).unwrap();
    let n = trap.n_ions;
    let psi0 = QuenchState::single_flip(n);
    let w = position_weights(n);
    let t = 10.0;
    let steps = 10_000;
    let dt = t / steps as f64;
    let mut acc = 0.0;
    for k in 0..=steps {
        let state = evolve(&pipeline.spectral, &psi0, k as f64 * dt);
        let weight = if k == 0 || k == steps { 0.5 } else { 1.0 };
        acc += weight * c_expectation(&state);
    }
    let quad = acc * dt / t;
    let closed = time_average(&pipeline.spectral, &psi0, &w, t);
    let err = (closed - quad).abs();
    check(
        "time-average-quadrature",
        err <= 1e-4,
        format!("closed form vs trapezoid: {err:.2e}"),
    )
}
