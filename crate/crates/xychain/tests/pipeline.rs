//! Cross-module invariants exercised through the physical pipeline.

use xychain::config::preset;
use xychain::coupling::normalize_to_j0;
use xychain::dynamics::{
    build_hamiltonian, decompose, evolve, position_weights, sigma_z_profile, QuenchState,
    TimeAverager,
};
use xychain::ensembles::{diagonal_ensemble, gap_structure, timescale_estimates};
use xychain::experiments::run_pipeline;
use xychain::ion_chain::TrapConfig;
use xychain::oracle::full_ising_series;
use xychain::output::{csv_coupling, csv_modes, csv_positions};

fn fig2a() -> TrapConfig {
    preset("fig2a").unwrap().trap().unwrap()
}

fn fig2b() -> TrapConfig {
    preset("fig2b").unwrap().trap().unwrap()
}

#[test]
fn rescaling_couplings_rescales_time() {
    // Evolving with c*J at time t/c reproduces every observable of J at t.
    let trap = TrapConfig {
        n_ions: 8,
        ..fig2b()
    };
    let pipeline = run_pipeline(&trap).unwrap();
    let scaled = normalize_to_j0(&pipeline.coupling, 10.0).unwrap();
    let spec_scaled = decompose(&build_hamiltonian(&scaled)).unwrap();
    let psi0 = QuenchState::single_flip(8);
    for &t in &[0.3, 3.7, 9.0] {
        let reference = evolve(&pipeline.spectral, &psi0, t);
        let fast = evolve(&spec_scaled, &psi0, t / 10.0);
        for (a, b) in reference.probabilities().iter().zip(fast.probabilities()) {
            assert!((a - b).abs() <= 1e-10, "probability mismatch {a} vs {b}");
        }
    }
}

#[test]
fn hamiltonian_inherits_mirror_symmetry() {
    let pipeline = run_pipeline(&fig2b()).unwrap();
    let h = pipeline.hamiltonian.matrix();
    let n = 16;
    for i in 0..n {
        for j in 0..n {
            let mirrored = h[(n - 1 - i, n - 1 - j)];
            assert!(
                (h[(i, j)] - mirrored).abs() <= 1e-12 * h[(i, j)].abs().max(1.0),
                "parity violated at ({i},{j})"
            );
        }
    }
}

#[test]
fn short_range_chain_acts_as_quantum_mirror() {
    // The excitation nearly reaches the far end within t <= 2/J0.
    let pipeline = run_pipeline(&fig2a()).unwrap();
    let psi0 = QuenchState::single_flip(16);
    let mut peak: f64 = 0.0;
    for k in 0..=800 {
        let t = 2.0 * k as f64 / 800.0;
        let state = evolve(&pipeline.spectral, &psi0, t);
        peak = peak.max(state.probabilities()[15]);
    }
    assert!(peak > 0.5, "far-end occupation peaked at only {peak}");
}

#[test]
fn nearest_neighbor_truncation_stays_close_at_short_times() {
    // Tight-binding truncation tracks the full dynamics through the first
    // traversal; measured sup deviation is 0.185 at these parameters.
    let pipeline = run_pipeline(&fig2a()).unwrap();
    let truncated = decompose(&pipeline.hamiltonian.nearest_neighbor_truncation()).unwrap();
    let psi0 = QuenchState::single_flip(16);
    let mut dev: f64 = 0.0;
    for k in 1..=100 {
        let t = k as f64 / 100.0;
        let full = evolve(&pipeline.spectral, &psi0, t);
        let tb = evolve(&truncated, &psi0, t);
        for (a, b) in full.probabilities().iter().zip(tb.probabilities()) {
            dev = dev.max((a - b).abs());
        }
    }
    assert!(dev < 0.2, "truncation deviation {dev}");
}

#[test]
fn long_range_spectrum_has_near_degenerate_pairs_and_split_timescales() {
    let pipeline = run_pipeline(&fig2b()).unwrap();
    let gaps = gap_structure(&pipeline.spectral);
    // Lower half of the ascending spectrum pairs up far below the mean
    // spacing.
    let tight = gaps
        .pair_gaps
        .iter()
        .take(4)
        .filter(|g| **g < 1e-3 * gaps.mean_spacing)
        .count();
    assert!(
        tight >= 3,
        "only {tight} tight doublets: {:?}",
        &gaps.pair_gaps[..4]
    );
    let (prethermal, thermal) = timescale_estimates(&gaps);
    assert!(
        thermal / prethermal >= 1e3,
        "timescale split {prethermal} vs {thermal}"
    );
}

#[test]
fn de_matches_late_time_average_for_physical_chain() {
    let pipeline = run_pipeline(&fig2b()).unwrap();
    let psi0 = QuenchState::single_flip(16);
    let weights = position_weights(16);
    let gaps = gap_structure(&pipeline.spectral);
    let late = 1e3 / gaps.min_spacing;
    let avg = TimeAverager::new(&pipeline.spectral, &psi0, &weights);
    let de = diagonal_ensemble(&pipeline.spectral, &psi0, None);
    assert!((avg.eval(late) - de.c_value).abs() <= 1e-3);
}

#[test]
fn weak_field_breaks_the_xy_reduction() {
    // At B = 2 max J the double-flip terms are no longer frozen out and the
    // single-excitation picture visibly fails.
    let trap = TrapConfig {
        n_ions: 6,
        ..fig2b()
    };
    let pipeline = run_pipeline(&trap).unwrap();
    let coupling = &pipeline.coupling;
    let mut up = vec![false; 6];
    up[0] = true;
    let snaps = full_ising_series(coupling, 2.0 * coupling.max_abs(), &up, &[2.0, 5.0]).unwrap();
    let psi0 = QuenchState::single_flip(6);
    let mut dev: f64 = 0.0;
    for snap in &snaps {
        let xy = sigma_z_profile(&evolve(&pipeline.spectral, &psi0, snap.time));
        for (a, b) in snap.sigma_z.iter().zip(&xy) {
            dev = dev.max((a - b).abs());
        }
    }
    assert!(dev > 0.05, "expected visible breakdown, got {dev}");
}

#[test]
fn pipeline_outputs_are_bit_identical_across_runs() {
    let run = |trap: &TrapConfig| {
        let p = run_pipeline(trap).unwrap();
        (
            csv_positions(&p.chain),
            csv_modes(&p.modes),
            csv_coupling(&p.coupling_physical),
        )
    };
    let trap = fig2b();
    let first = run(&trap);
    let second = run(&trap);
    assert_eq!(first.0, second.0);
    assert_eq!(first.1, second.1);
    assert_eq!(first.2, second.2);
}
