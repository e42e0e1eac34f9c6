//! Bit-stable result persistence: CSV for bulk series, JSON for structured
//! reports. Numeric fields carry 17 significant digits so every file
//! re-parses to the exact binary values; no wall-clock or randomness enters
//! any output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::coupling::CouplingMatrix;
use crate::dynamics::SpectralDecomposition;
use crate::ensembles::GapStructure;
use crate::error::{Error, Result};
use crate::experiments::{QuenchBundle, SweepPoint};
use crate::ion_chain::{IonChain, PhononSpectrum};

/// 17 significant digits: enough for exact f64 round trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Short hash of the canonical JSON serialization of a configuration.
pub fn config_hash<T: serde::Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("configs serialize");
    let digest = Sha256::digest(json.as_bytes());
    let mut hex = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

/// Provenance line placed at the top of every CSV.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
}

impl Manifest {
    pub fn new(config_hash: String) -> Manifest {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
        }
    }

    fn line(&self) -> String {
        format!("# xychain v{} config={}\n", self.version, self.config_hash)
    }
}

/// Writes named artifacts into one output directory, prefixing CSVs with the
/// manifest line.
pub struct OutputWriter {
    dir: PathBuf,
    manifest: Manifest,
}

impl OutputWriter {
    pub fn new(dir: &Path, manifest: Manifest) -> Result<OutputWriter> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Write a CSV body under the manifest line; returns the path.
    pub fn write_csv(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut contents = self.manifest.line();
        contents.push_str(body);
        std::fs::write(&path, contents)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    /// Write a JSON value; returns the path.
    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).expect("json serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// `index,u` — equilibrium positions (1-based index).
pub fn csv_positions(chain: &IonChain) -> String {
    let mut s = String::from("index,u\n");
    for (i, u) in chain.positions().iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, fmt_f64(*u));
    }
    s
}

/// `mode,omega_mhz,b_1,...,b_N` — transverse modes, one row per mode.
pub fn csv_modes(modes: &PhononSpectrum) -> String {
    let n = modes.n_modes();
    let mut s = String::from("mode,omega_mhz");
    for i in 0..n {
        let _ = write!(s, ",b_{}", i + 1);
    }
    s.push('\n');
    for m in 0..n {
        let _ = write!(s, "{},{}", m + 1, fmt_f64(modes.frequencies()[m]));
        for i in 0..n {
            let _ = write!(s, ",{}", fmt_f64(modes.mode_vectors()[(i, m)]));
        }
        s.push('\n');
    }
    s
}

/// `row,col,value` — coupling entries for i < j.
pub fn csv_coupling(coupling: &CouplingMatrix) -> String {
    let n = coupling.n_sites();
    let mut s = String::from("row,col,value\n");
    for i in 0..n {
        for j in (i + 1)..n {
            let _ = writeln!(s, "{},{},{}", i + 1, j + 1, fmt_f64(coupling.entry(i, j)));
        }
    }
    s
}

/// `separation,j` — couplings against index distance, for range-fit plots.
pub fn csv_separation(coupling: &CouplingMatrix) -> String {
    let n = coupling.n_sites();
    let mut s = String::from("separation,j\n");
    for sep in 1..n {
        for i in 0..(n - sep) {
            let _ = writeln!(s, "{},{}", sep, fmt_f64(coupling.entry(i, i + sep)));
        }
    }
    s
}

/// `t,sigma_z_1..N,c,c_bar` — the quench time series.
pub fn csv_timeseries(bundle: &QuenchBundle) -> String {
    let n = bundle.sigma_z.first().map_or(0, Vec::len);
    let mut s = String::from("t");
    for i in 0..n {
        let _ = write!(s, ",sigma_z_{}", i + 1);
    }
    s.push_str(",c,c_bar\n");
    for (k, &t) in bundle.times.iter().enumerate() {
        let _ = write!(s, "{}", fmt_f64(t));
        for v in &bundle.sigma_z[k] {
            let _ = write!(s, ",{}", fmt_f64(*v));
        }
        let _ = writeln!(
            s,
            ",{},{}",
            fmt_f64(bundle.c_inst[k]),
            fmt_f64(bundle.c_avg[k])
        );
    }
    s
}

/// `t,zz_bar_i_j,...` — selected time-averaged correlators.
pub fn csv_zz(bundle: &QuenchBundle) -> String {
    let mut s = String::from("t");
    for (a, b) in &bundle.zz_pairs {
        let _ = write!(s, ",zz_bar_{}_{}", a + 1, b + 1);
    }
    s.push('\n');
    for (k, &t) in bundle.times.iter().enumerate() {
        let _ = write!(s, "{}", fmt_f64(t));
        for v in &bundle.zz_avg[k] {
            let _ = write!(s, ",{}", fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

/// `index,energy` — the single-excitation spectrum, ascending.
pub fn csv_spectrum(spec: &SpectralDecomposition) -> String {
    let mut s = String::from("index,energy\n");
    for (m, e) in spec.energies().iter().enumerate() {
        let _ = writeln!(s, "{},{}", m + 1, fmt_f64(*e));
    }
    s
}

/// `index,gap` — all pairwise eigenenergy differences, ascending.
pub fn csv_all_gaps(gaps: &GapStructure) -> String {
    let mut s = String::from("index,gap\n");
    for (k, g) in gaps.all_gaps.iter().enumerate() {
        let _ = writeln!(s, "{},{}", k + 1, fmt_f64(*g));
    }
    s
}

/// `pair,gap` — consecutive-pair gaps E_2k - E_{2k-1}.
pub fn csv_pair_gaps(gaps: &GapStructure) -> String {
    let mut s = String::from("pair,gap\n");
    for (k, g) in gaps.pair_gaps.iter().enumerate() {
        let _ = writeln!(s, "{},{}", k + 1, fmt_f64(*g));
    }
    s
}

/// `mu,alpha,c_bar_t0,c_bar_thermal,phase_label,n` — the phase diagram.
pub fn csv_sweep(points: &[SweepPoint]) -> String {
    let mut s = String::from("mu,alpha,c_bar_t0,c_bar_thermal,phase_label,n\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_f64(p.mu),
            fmt_f64(p.alpha),
            fmt_f64(p.c_bar_t0),
            fmt_f64(p.c_bar_thermal),
            p.phase_label,
            p.n_ions
        );
    }
    s
}

/// `site,sigma_z_bar_t0,pde,sigma_z_bar_thermal,de` — prethermal and thermal
/// profiles against their ensemble predictions.
pub fn csv_ensemble_profiles(
    sigma_t0: &[f64],
    pde: &[f64],
    sigma_thermal: &[f64],
    de: &[f64],
) -> String {
    let mut s = String::from("site,sigma_z_bar_t0,pde,sigma_z_bar_thermal,de\n");
    for i in 0..sigma_t0.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            i + 1,
            fmt_f64(sigma_t0[i]),
            fmt_f64(pde[i]),
            fmt_f64(sigma_thermal[i]),
            fmt_f64(de[i])
        );
    }
    s
}
