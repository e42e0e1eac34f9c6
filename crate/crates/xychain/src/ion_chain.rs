//! Equilibrium structure of a linear Coulomb crystal and its transverse
//! phonon modes.
//!
//! Axial positions are kept dimensionless (unit: the axial length scale set
//! by the trap), so a chain is fully described by the ion count and the
//! trap-frequency ratio. The transverse normal modes feed the spin-spin
//! coupling formula in [`crate::coupling`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical inputs of a run: ion count, trap frequencies, Raman beatnote and
/// drive strength.
///
/// Frequencies are in MHz, the drive `eta_x * Omega` in kHz, and the coupling
/// rescale target `j0_target` in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub n_ions: usize,
    /// Transverse trap frequency omega_x (MHz).
    pub omega_x: f64,
    /// Axial trap frequency omega_z (MHz).
    pub omega_z: f64,
    /// Raman beatnote frequency mu (MHz).
    pub mu: f64,
    /// Effective drive strength eta_x * Omega (kHz).
    pub drive: f64,
    /// Average coupling J0 the physical matrix is rescaled to (Hz).
    pub j0_target: f64,
}

impl TrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_ions < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_ions must be >= 2, got {}",
                self.n_ions
            )));
        }
        // NaN fails every guard below.
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.omega_z) || !(self.omega_x.is_finite() && self.omega_x > self.omega_z) {
            return Err(Error::InvalidConfig(format!(
                "need omega_x > omega_z > 0 for a linear chain, got omega_x = {}, omega_z = {}",
                self.omega_x, self.omega_z
            )));
        }
        if !positive(self.mu) {
            return Err(Error::InvalidConfig(format!(
                "mu must be > 0, got {}",
                self.mu
            )));
        }
        if !positive(self.drive) {
            return Err(Error::InvalidConfig(format!(
                "drive must be > 0, got {}",
                self.drive
            )));
        }
        if !positive(self.j0_target) {
            return Err(Error::InvalidConfig(format!(
                "j0_target must be > 0, got {}",
                self.j0_target
            )));
        }
        Ok(())
    }

    /// Same trap with a different ion count, the axial frequency rescaled by
    /// `scaled_omega_z` to keep the chain linear.
    pub fn with_scaled_n(&self, n_ions: usize) -> TrapConfig {
        TrapConfig {
            n_ions,
            omega_z: scaled_omega_z(n_ions, self.n_ions, self.omega_z),
            ..self.clone()
        }
    }
}

/// Dimensionless equilibrium positions of the chain, strictly increasing.
#[derive(Debug, Clone)]
pub struct IonChain {
    positions: Vec<f64>,
    residual: f64,
}

impl IonChain {
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Max force-balance residual of the solution, measured relative to the
    /// local force scale |u_m| + sum |d^-2| of each ion. (For long chains
    /// the absolute residual bottoms out at the coordinate resolution, a few
    /// 1e-12 at N = 256; the relative metric stays meaningful at every N.)
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Dimensionless potential energy: harmonic confinement plus pairwise
    /// Coulomb repulsion.
    pub fn potential_energy(&self) -> f64 {
        potential_energy(&self.positions)
    }
}

/// Transverse phonon modes: frequencies in MHz sorted descending, orthonormal
/// mode vectors b_{i,m} as matrix columns, and the per-mode Lamb-Dicke factor
/// sqrt(omega_x / omega_m) relating b_{i,m} to eta_{i,m} = eta_x *
/// sqrt(omega_x / omega_m) * b_{i,m}.
#[derive(Debug, Clone)]
pub struct PhononSpectrum {
    frequencies: Vec<f64>,
    mode_vectors: DMatrix<f64>,
    lamb_dicke_scale: Vec<f64>,
}

impl PhononSpectrum {
    /// Mode frequencies omega_m in MHz, descending; the first entry is the
    /// center-of-mass mode at omega_x.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Orthonormal mode matrix; column m is the mode vector b_{.,m}.
    pub fn mode_vectors(&self) -> &DMatrix<f64> {
        &self.mode_vectors
    }

    /// Per-mode factor sqrt(omega_x / omega_m).
    pub fn lamb_dicke_scale(&self) -> &[f64] {
        &self.lamb_dicke_scale
    }

    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    /// Lowest transverse frequency (bottom of the band), MHz.
    pub fn band_bottom(&self) -> f64 {
        *self.frequencies.last().expect("at least one mode")
    }

    /// Highest transverse frequency (top of the band), MHz.
    pub fn band_top(&self) -> f64 {
        self.frequencies[0]
    }
}

/// Force-balance residual for every ion (the gradient of the dimensionless
/// potential), Kahan-compensated, plus the per-ion force scale
/// |u_m| + sum |d^-2| used to normalize it.
fn force_residual(u: &[f64], out: &mut [f64], scale: &mut [f64]) {
    let n = u.len();
    for m in 0..n {
        let mut sum = u[m];
        let mut comp = 0.0;
        let mut mag = u[m].abs();
        for k in 0..n {
            if k == m {
                continue;
            }
            let d = u[m] - u[k];
            let term = -d.signum() / (d * d);
            mag += term.abs();
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        out[m] = sum;
        scale[m] = mag.max(1.0);
    }
}

/// Largest per-ion residual relative to its force scale.
fn relative_residual(f: &[f64], scale: &[f64]) -> f64 {
    f.iter()
        .zip(scale)
        .fold(0.0_f64, |a, (x, s)| a.max(x.abs() / s))
}

fn potential_energy(u: &[f64]) -> f64 {
    let n = u.len();
    let mut e = 0.0;
    for i in 0..n {
        e += 0.5 * u[i] * u[i];
        for j in (i + 1)..n {
            e += 1.0 / (u[j] - u[i]).abs();
        }
    }
    e
}

fn is_strictly_increasing(u: &[f64]) -> bool {
    u.windows(2).all(|w| w[1] > w[0])
}

/// Force exact mirror antisymmetry u_i = -u_{N+1-i} on an iterate.
///
/// The equilibrium is mirror symmetric; averaging the iterate with its
/// negated reverse keeps Newton on the symmetric manifold bit-exactly.
fn symmetrize(u: &mut [f64]) {
    let n = u.len();
    for i in 0..n / 2 {
        let s = 0.5 * (u[i] - u[n - 1 - i]);
        u[i] = s;
        u[n - 1 - i] = -s;
    }
    if n % 2 == 1 {
        u[n / 2] = 0.0;
    }
}

const EQUILIBRIUM_TOL: f64 = 1e-12;
const MAX_NEWTON_ITERATIONS: usize = 200;

/// Solve the force balance u_m - sum_{n<m} (u_m - u_n)^-2
/// + sum_{n>m} (u_m - u_n)^-2 = 0 for the equilibrium positions.
///
/// Damped Newton iteration from a uniformly spaced symmetric guess; the
/// Jacobian is the axial Hessian of the potential. Deterministic for fixed N.
pub fn solve_equilibrium(config: &TrapConfig) -> Result<IonChain> {
    config.validate()?;
    let n = config.n_ions;

    // Empirical spacing scale; the guess spans [-N/2 * s, N/2 * s].
    let s = 2.0 * (1.0 / n as f64).powf(0.56);
    let half = 0.5 * n as f64 * s;
    let mut u: Vec<f64> = (0..n)
        .map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64)
        .collect();
    symmetrize(&mut u);

    let mut f = vec![0.0; n];
    let mut f_new = vec![0.0; n];
    let mut scale = vec![0.0; n];
    let mut scale_new = vec![0.0; n];
    force_residual(&u, &mut f, &mut scale);
    let mut residual = relative_residual(&f, &scale);

    for iteration in 0..MAX_NEWTON_ITERATIONS {
        if residual <= EQUILIBRIUM_TOL {
            return Ok(IonChain {
                positions: u,
                residual,
            });
        }

        // Axial Hessian doubles as the Newton Jacobian.
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut diag = 1.0;
            for k in 0..n {
                if k == i {
                    continue;
                }
                let d3 = (u[i] - u[k]).abs().powi(3);
                diag += 2.0 / d3;
                jac[(i, k)] = -2.0 / d3;
            }
            jac[(i, i)] = diag;
        }

        let rhs = DVector::from_iterator(n, f.iter().map(|x| -x));
        let step = jac.lu().solve(&rhs).ok_or(Error::SolverFailure {
            iterations: iteration,
            residual,
        })?;

        // Step halving until the residual decreases and ordering survives.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial: Vec<f64> = u
                .iter()
                .zip(step.iter())
                .map(|(ui, di)| ui + lambda * di)
                .collect();
            symmetrize(&mut trial);
            if is_strictly_increasing(&trial) {
                force_residual(&trial, &mut f_new, &mut scale_new);
                let r_new = relative_residual(&f_new, &scale_new);
                if r_new < residual {
                    u = trial;
                    std::mem::swap(&mut f, &mut f_new);
                    std::mem::swap(&mut scale, &mut scale_new);
                    residual = r_new;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::SolverFailure {
                iterations: iteration,
                residual,
            });
        }
    }

    if residual <= EQUILIBRIUM_TOL {
        Ok(IonChain {
            positions: u,
            residual,
        })
    } else {
        Err(Error::SolverFailure {
            iterations: MAX_NEWTON_ITERATIONS,
            residual,
        })
    }
}

/// Transverse Hessian in units of omega_z^2:
/// diagonal (omega_x/omega_z)^2 - sum_{n != i} |u_i - u_n|^-3,
/// off-diagonal +|u_i - u_j|^-3.
fn transverse_hessian(u: &[f64], freq_ratio_sq: f64) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = freq_ratio_sq;
        for k in 0..n {
            if k == i {
                continue;
            }
            let inv_d3 = 1.0 / (u[i] - u[k]).abs().powi(3);
            diag -= inv_d3;
            h[(i, k)] = inv_d3;
        }
        h[(i, i)] = diag;
    }
    h
}

/// Diagonalize the transverse Hessian and return the phonon spectrum,
/// frequencies descending. The center-of-mass mode sits at omega_x and tops
/// the band.
pub fn transverse_modes(chain: &IonChain, config: &TrapConfig) -> Result<PhononSpectrum> {
    config.validate()?;
    let n = chain.len();
    let ratio_sq = (config.omega_x / config.omega_z).powi(2);
    let hessian = transverse_hessian(chain.positions(), ratio_sq);

    let eig = crate::dynamics::symmetric_eigen(&hessian)?;

    // Ascending stiffness; check stability before taking square roots.
    if let Some((mode, &stiffness)) = eig.0.iter().enumerate().find(|(_, &lambda)| lambda <= 0.0) {
        return Err(Error::ZigzagInstability { mode, stiffness });
    }

    // Reverse to descending frequency order.
    let mut frequencies = Vec::with_capacity(n);
    let mut mode_vectors = DMatrix::<f64>::zeros(n, n);
    for m in 0..n {
        let src = n - 1 - m;
        frequencies.push(config.omega_z * eig.0[src].sqrt());
        mode_vectors.set_column(m, &eig.1.column(src));
    }
    let lamb_dicke_scale = frequencies
        .iter()
        .map(|&w| (config.omega_x / w).sqrt())
        .collect();

    Ok(PhononSpectrum {
        frequencies,
        mode_vectors,
        lamb_dicke_scale,
    })
}

/// Axial frequency keeping a longer chain linear: omega_z scales as
/// sqrt(ln N) / N relative to the reference point.
pub fn scaled_omega_z(n_ions: usize, reference_n: usize, reference_omega_z: f64) -> f64 {
    assert!(n_ions >= 2 && reference_n >= 2, "need at least two ions");
    let shape = |n: f64| n.ln().sqrt() / n;
    reference_omega_z * shape(n_ions as f64) / shape(reference_n as f64)
}
