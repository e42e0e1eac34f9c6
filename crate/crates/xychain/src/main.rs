use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use xychain::config::{load_config, preset, preset_names, RunConfig};
use xychain::coupling::{build_physical_coupling, fit_residual};
use xychain::dynamics::{position_weights, QuenchState, TimeAverager};
use xychain::ensembles::{
    branch_detector, diagonal_ensemble, gap_structure, partial_diagonal_ensemble,
    timescale_estimates, BRANCH_SEPARATION_DECADES,
};
use xychain::error::{Error, Result};
use xychain::experiments::{
    crossing_alpha, default_mu_grid, equally_spaced_control, log_time_grid, phase_diagram_sweep,
    quench_bundle, run_pipeline, sharpness, thermal_readout_time, DEFAULT_DELTA, T0,
};
use xychain::ion_chain::{solve_equilibrium, transverse_modes};
use xychain::output::{
    config_hash, csv_all_gaps, csv_coupling, csv_ensemble_profiles, csv_modes, csv_pair_gaps,
    csv_positions, csv_separation, csv_spectrum, csv_sweep, csv_timeseries, csv_zz, Manifest,
    OutputWriter,
};

#[derive(Parser)]
#[command(
    name = "xychain",
    version,
    about = "Long-range XY spin chain quench dynamics in trapped-ion crystals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Built-in parameter set: fig2a, fig2b, fig4-n16, fig4-n64, fig4-n256.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Upper end of the logarithmic time grid, units 1/J0.
    #[arg(long, global = true, value_name = "T")]
    tmax: Option<f64>,

    /// Number of points on the time grid.
    #[arg(long, global = true, value_name = "POINTS")]
    grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Coulomb-crystal equilibrium and export positions.
    Chain,
    /// Equilibrium plus transverse phonon modes.
    Modes,
    /// Physical coupling matrix J_ij and its fitted range exponent.
    Coupling,
    /// Quench time series: sigma_z profiles, C, C_bar and correlators.
    Evolve,
    /// Single-excitation spectrum, gap structure and branch detection.
    Spectrum,
    /// Ensemble predictions against prethermal and thermal time averages.
    Ensembles,
    /// Dynamical phase diagram over the beatnote grid.
    Sweep,
    /// Equally-spaced-lattice control with synthetic power-law couplings.
    Control {
        /// Number of lattice sites.
        #[arg(long)]
        n: usize,
        /// Power-law exponent of the synthetic coupling.
        #[arg(long)]
        alpha: f64,
    },
    /// Run the built-in oracle and invariant self-tests.
    Validate,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => Err(Error::InvalidConfig(
            "--config and --preset are mutually exclusive".into(),
        )),
        (Some(path), None) => load_config(path),
        (None, Some(name)) => preset(name).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown preset '{name}' (available: {})",
                preset_names().join(", ")
            ))
        }),
        (None, None) => Err(Error::InvalidConfig(
            "either --config <path> or --preset <name> is required".into(),
        )),
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        if let Some(k) = threads {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .expect("thread pool");
            return pool.install(f);
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads.is_some() {
        eprintln!("xychain: built without the 'parallel' feature; --threads ignored");
    }
    f()
}

fn paths_json(paths: &[PathBuf]) -> serde_json::Value {
    json!(paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>())
}

fn run(cli: &Cli) -> Result<serde_json::Value> {
    match &cli.command {
        Command::Validate => {
            let results = xychain::validate::run_all();
            let all_passed = results.iter().all(|r| r.passed);
            for r in &results {
                eprintln!(
                    "{} {} — {}",
                    if r.passed { "ok  " } else { "FAIL" },
                    r.name,
                    r.detail
                );
            }
            return Ok(json!({
                "status": if all_passed { "ok" } else { "failed" },
                "subcommand": "validate",
                "version": env!("CARGO_PKG_VERSION"),
                "checks": results,
                "passed": results.iter().filter(|r| r.passed).count(),
                "total": results.len(),
            }));
        }
        Command::Control { n, alpha } => {
            let report = equally_spaced_control(*n, *alpha)?;
            let writer = OutputWriter::new(&cli.out, Manifest::new(config_hash(&(n, alpha))))?;
            let path = writer.write_json(
                "control_report.json",
                &serde_json::to_value(&report).expect("report serializes"),
            )?;
            return Ok(json!({
                "status": "ok",
                "subcommand": "control",
                "version": env!("CARGO_PKG_VERSION"),
                "outputs": paths_json(&[path]),
                "open": {
                    "branch_detected": report.open.branch_detected,
                    "plateau_departure": report.open.plateau_departure,
                    "phase_label": report.open.phase_label.to_string(),
                },
                "ring": {
                    "branch_detected": report.ring.branch_detected,
                    "plateau_departure": report.ring.plateau_departure,
                    "phase_label": report.ring.phase_label.to_string(),
                },
            }));
        }
        _ => {}
    }

    let rc = resolve_config(cli)?;
    let trap = rc.trap()?;
    let hash = config_hash(&rc);
    let writer = OutputWriter::new(&cli.out, Manifest::new(hash.clone()))?;
    let version = env!("CARGO_PKG_VERSION");
    let base = json!({
        "status": "ok",
        "version": version,
        "config_hash": hash,
    });
    let mut summary = base.as_object().cloned().expect("object");

    match &cli.command {
        Command::Chain => {
            let chain = solve_equilibrium(&trap)?;
            let path = writer.write_csv("positions.csv", &csv_positions(&chain))?;
            let u = chain.positions();
            let min_spacing = u
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            summary.insert("subcommand".into(), "chain".into());
            summary.insert("outputs".into(), paths_json(&[path]));
            summary.insert(
                "metrics".into(),
                json!({
                    "n_ions": trap.n_ions,
                    "residual": chain.residual(),
                    "half_length": u[u.len() - 1],
                    "min_spacing": min_spacing,
                }),
            );
        }
        Command::Modes => {
            let chain = solve_equilibrium(&trap)?;
            let modes = transverse_modes(&chain, &trap)?;
            let p1 = writer.write_csv("positions.csv", &csv_positions(&chain))?;
            let p2 = writer.write_csv("modes.csv", &csv_modes(&modes))?;
            summary.insert("subcommand".into(), "modes".into());
            summary.insert("outputs".into(), paths_json(&[p1, p2]));
            summary.insert(
                "metrics".into(),
                json!({
                    "band_top_mhz": modes.band_top(),
                    "band_bottom_mhz": modes.band_bottom(),
                    "band_width_mhz": modes.band_top() - modes.band_bottom(),
                }),
            );
        }
        Command::Coupling => {
            let chain = solve_equilibrium(&trap)?;
            let modes = transverse_modes(&chain, &trap)?;
            let coupling = build_physical_coupling(&modes, &trap)?;
            let p1 = writer.write_csv("coupling.csv", &csv_coupling(&coupling))?;
            let p2 = writer.write_csv("coupling_by_separation.csv", &csv_separation(&coupling))?;
            let fit = json!({
                "alpha": coupling.alpha_fit(),
                "log_log_residual": fit_residual(&coupling).ok(),
                "j0_hz": coupling.j0(),
                "version": version,
                "config_hash": hash,
            });
            let p3 = writer.write_json("coupling_fit.json", &fit)?;
            summary.insert("subcommand".into(), "coupling".into());
            summary.insert("outputs".into(), paths_json(&[p1, p2, p3]));
            summary.insert(
                "metrics".into(),
                json!({
                    "alpha": coupling.alpha_fit(),
                    "j0_hz": coupling.j0(),
                    "max_j_hz": coupling.max_abs(),
                }),
            );
        }
        Command::Evolve => {
            let pipeline = run_pipeline(&trap)?;
            let tmax = cli.tmax.or(rc.tmax).unwrap_or(1e5);
            let points = cli.grid.or(rc.grid_points).unwrap_or(200);
            if !(tmax.is_finite() && tmax > 1e-2) {
                return Err(Error::InvalidConfig(format!(
                    "tmax must exceed the grid start 1e-2 (units 1/J0), got {tmax}"
                )));
            }
            if !(2..=1_000_000).contains(&points) {
                return Err(Error::InvalidConfig(format!(
                    "grid must have between 2 and 1e6 points, got {points}"
                )));
            }
            let grid = log_time_grid(1e-2, tmax, points);
            let bundle = quench_bundle(&pipeline.spectral, pipeline.coupling.alpha_fit(), &grid);
            let p1 = writer.write_csv("timeseries.csv", &csv_timeseries(&bundle))?;
            let p2 = writer.write_csv("correlations.csv", &csv_zz(&bundle))?;
            let psi0 = QuenchState::single_flip(trap.n_ions);
            let weights = position_weights(trap.n_ions);
            let c_bar_t0 = TimeAverager::new(&pipeline.spectral, &psi0, &weights).eval(T0);
            let de = diagonal_ensemble(&pipeline.spectral, &psi0, None);
            summary.insert("subcommand".into(), "evolve".into());
            summary.insert("outputs".into(), paths_json(&[p1, p2]));
            summary.insert(
                "metrics".into(),
                json!({
                    "alpha": bundle.alpha,
                    "c_bar_t0": c_bar_t0,
                    "c_bar_de": de.c_value,
                    "tmax": tmax,
                    "grid_points": points,
                }),
            );
        }
        Command::Spectrum => {
            let pipeline = run_pipeline(&trap)?;
            let gaps = gap_structure(&pipeline.spectral);
            let branch = branch_detector(&gaps, BRANCH_SEPARATION_DECADES);
            let (t_pre, t_thermal) = timescale_estimates(&gaps);
            let p1 = writer.write_csv("spectrum.csv", &csv_spectrum(&pipeline.spectral))?;
            let p2 = writer.write_csv("gaps.csv", &csv_all_gaps(&gaps))?;
            let p3 = writer.write_csv("pair_gaps.csv", &csv_pair_gaps(&gaps))?;
            summary.insert("subcommand".into(), "spectrum".into());
            summary.insert("outputs".into(), paths_json(&[p1, p2, p3]));
            summary.insert(
                "metrics".into(),
                json!({
                    "alpha": pipeline.coupling.alpha_fit(),
                    "branch_detected": branch.detected,
                    "branch_gap_count": branch.branch_gaps.len(),
                    "window_decades": branch.window_decades,
                    "mean_spacing": gaps.mean_spacing,
                    "min_spacing": gaps.min_spacing,
                    "prethermal_time": t_pre,
                    "thermal_time": t_thermal,
                }),
            );
        }
        Command::Ensembles => {
            let pipeline = run_pipeline(&trap)?;
            let n = trap.n_ions;
            let psi0 = QuenchState::single_flip(n);
            let gaps = gap_structure(&pipeline.spectral);
            let t_thermal = thermal_readout_time(&gaps);
            let de = diagonal_ensemble(&pipeline.spectral, &psi0, None);
            let pde = partial_diagonal_ensemble(&pipeline.spectral, &psi0, T0, 0.1);
            let sigma_t0 = xychain::dynamics::time_averaged_sigma_z(&pipeline.spectral, &psi0, T0);
            let sigma_thermal =
                xychain::dynamics::time_averaged_sigma_z(&pipeline.spectral, &psi0, t_thermal);

            let kappa_sensitivity: Vec<serde_json::Value> = [0.01, 0.05, 0.1, 0.2, 0.5]
                .iter()
                .map(|&kappa| {
                    let p = partial_diagonal_ensemble(&pipeline.spectral, &psi0, T0, kappa);
                    json!({
                        "kappa": kappa,
                        "c_value": p.c_value,
                        "retained_pairs": p.retained_pairs.len(),
                    })
                })
                .collect();

            let max_dev_pde = sigma_t0
                .iter()
                .zip(&pde.sigma_z)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            let max_dev_de = sigma_thermal
                .iter()
                .zip(&de.sigma_z)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);

            let p1 = writer.write_csv(
                "ensemble_profiles.csv",
                &csv_ensemble_profiles(&sigma_t0, &pde.sigma_z, &sigma_thermal, &de.sigma_z),
            )?;
            let (t_pre, t_th_est) = timescale_estimates(&gaps);
            let report = json!({
                "version": version,
                "config_hash": hash,
                "t0": T0,
                "thermal_readout_time": t_thermal,
                "de": serde_json::to_value(&de).expect("serializes"),
                "pde": serde_json::to_value(&pde).expect("serializes"),
                "kappa_sensitivity": kappa_sensitivity,
                "timescales": {
                    "prethermal": t_pre,
                    "thermal": t_th_est,
                },
            });
            let p2 = writer.write_json("ensembles.json", &report)?;
            summary.insert("subcommand".into(), "ensembles".into());
            summary.insert("outputs".into(), paths_json(&[p1, p2]));
            summary.insert(
                "metrics".into(),
                json!({
                    "c_de": de.c_value,
                    "c_pde": pde.c_value,
                    "thermal_readout_time": t_thermal,
                    "max_site_dev_pde_at_t0": max_dev_pde,
                    "max_site_dev_de_at_thermal": max_dev_de,
                }),
            );
        }
        Command::Sweep => {
            let mu_grid = rc
                .mu_grid_mhz
                .clone()
                .unwrap_or_else(|| default_mu_grid(trap.omega_x));
            let n_list = rc.n_list.clone().unwrap_or_else(|| vec![trap.n_ions]);
            let result = with_threads(cli.threads, || {
                phase_diagram_sweep(&trap, &mu_grid, &n_list)
            });
            let p1 = writer.write_csv("phase_diagram.csv", &csv_sweep(&result.points))?;
            let manifest = json!({
                "version": version,
                "config_hash": hash,
                "config": rc,
                "mu_grid_mhz": mu_grid,
                "n_list": n_list,
                "failures": result.failures,
                "anomalies": result.anomalies,
            });
            let p2 = writer.write_json("sweep_manifest.json", &manifest)?;

            let mut per_n = serde_json::Map::new();
            for &n in &n_list {
                let points: Vec<_> = result
                    .points
                    .iter()
                    .filter(|p| p.n_ions == n)
                    .cloned()
                    .collect();
                per_n.insert(
                    n.to_string(),
                    json!({
                        "points": points.len(),
                        "alpha_c": crossing_alpha(&points, DEFAULT_DELTA),
                        "sharpness": if points.len() >= 2 { Some(sharpness(&points)) } else { None },
                    }),
                );
            }
            summary.insert("subcommand".into(), "sweep".into());
            summary.insert("outputs".into(), paths_json(&[p1, p2]));
            summary.insert(
                "metrics".into(),
                json!({
                    "points": result.points.len(),
                    "failures": result.failures.len(),
                    "anomalies": result.anomalies.len(),
                    "per_n": per_n,
                }),
            );
        }
        Command::Validate | Command::Control { .. } => unreachable!("handled above"),
    }

    Ok(serde_json::Value::Object(summary))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary")
            );
            if summary["status"] == "failed" {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            let msg = json!({
                "status": "error",
                "category": e.category(),
                "message": e.to_string(),
            });
            println!("{}", serde_json::to_string_pretty(&msg).expect("summary"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
