//! Exact quench dynamics in the single-excitation subspace: Hamiltonian
//! assembly, spectral decomposition, propagation, observables and closed-form
//! finite-time averages.
//!
//! With one up-spin the XY Hamiltonian reduces to an N x N hopping matrix
//! h_ij = 2 J_ij; the uniform field term is a constant in this sector and is
//! dropped. All dynamics below is exact in the eigenbasis.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};

/// Hopping matrix of the XY model restricted to one spin excitation.
#[derive(Debug, Clone)]
pub struct SingleExcitationHamiltonian {
    h: DMatrix<f64>,
}

impl SingleExcitationHamiltonian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn n_sites(&self) -> usize {
        self.h.nrows()
    }

    /// Energy expectation <psi| h |psi> (real for Hermitian h).
    pub fn expectation(&self, state: &QuenchState) -> f64 {
        let n = self.n_sites();
        let a = state.amplitudes();
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                e += (a[i].conj() * self.h[(i, j)] * a[j]).re;
            }
        }
        e
    }

    /// Truncation keeping only nearest-neighbour hopping, for comparing with
    /// tight-binding transport.
    pub fn nearest_neighbor_truncation(&self) -> SingleExcitationHamiltonian {
        let n = self.n_sites();
        let mut h = DMatrix::<f64>::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            h[(i, i + 1)] = self.h[(i, i + 1)];
            h[(i + 1, i)] = self.h[(i + 1, i)];
        }
        SingleExcitationHamiltonian { h }
    }
}

/// h_ij = 2 J_ij off-diagonal, zero diagonal, in the units of the coupling
/// matrix.
pub fn build_hamiltonian(coupling: &CouplingMatrix) -> SingleExcitationHamiltonian {
    let n = coupling.n_sites();
    let mut h = coupling.matrix().scale(2.0);
    for i in 0..n {
        h[(i, i)] = 0.0;
    }
    SingleExcitationHamiltonian { h }
}

/// Full eigensystem of a real symmetric matrix: ascending eigenvalues,
/// orthonormal eigenvector columns, and a deterministic sign convention
/// (first component of largest magnitude made positive).
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000 * n)
        .ok_or_else(|| Error::Eigensolver(format!("no convergence for {n} x {n} matrix")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("eigenvalues are finite")
    });

    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (m_new, &m_old) in order.iter().enumerate() {
        values.push(eig.eigenvalues[m_old]);
        let col = eig.eigenvectors.column(m_old);
        let mut max_idx = 0;
        let mut max_abs = 0.0;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > max_abs {
                max_abs = v.abs();
                max_idx = i;
            }
        }
        let sign = if col[max_idx] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, m_new)] = sign * col[i];
        }
    }
    Ok((values, vectors))
}

/// Eigenpairs of the single-excitation Hamiltonian; the engine for all
/// dynamics and ensemble predictions.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    /// Assemble from a precomputed eigensystem. `energies` must be ascending
    /// and `vectors` orthonormal with column m matching `energies[m]`.
    pub fn from_parts(energies: Vec<f64>, vectors: DMatrix<f64>) -> SpectralDecomposition {
        assert_eq!(energies.len(), vectors.nrows());
        assert_eq!(vectors.nrows(), vectors.ncols());
        debug_assert!(energies.windows(2).all(|w| w[0] <= w[1]));
        SpectralDecomposition { energies, vectors }
    }

    /// Eigenvalues in ascending order, in the energy units of the Hamiltonian.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Orthonormal eigenvectors; column m belongs to `energies()[m]`.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn n_sites(&self) -> usize {
        self.energies.len()
    }

    /// E_max - E_min.
    pub fn spectral_width(&self) -> f64 {
        self.energies[self.energies.len() - 1] - self.energies[0]
    }

    /// Overlaps c_m = sum_j v_{j,m} psi_j of a state with every eigenvector.
    pub fn overlaps(&self, state: &QuenchState) -> Vec<Complex64> {
        let n = self.n_sites();
        let a = state.amplitudes();
        (0..n)
            .map(|m| {
                self.vectors
                    .column(m)
                    .iter()
                    .zip(a)
                    .map(|(v, amp)| v * amp)
                    .sum()
            })
            .collect()
    }
}

/// Exact diagonalization of the single-excitation Hamiltonian.
pub fn decompose(h: &SingleExcitationHamiltonian) -> Result<SpectralDecomposition> {
    let (energies, vectors) = symmetric_eigen(&h.h)?;
    Ok(SpectralDecomposition { energies, vectors })
}

/// Normalized state of the single-excitation sector at a given time
/// (time in inverse units of the Hamiltonian's energy scale).
#[derive(Debug, Clone)]
pub struct QuenchState {
    amplitudes: Vec<Complex64>,
    time: f64,
}

impl QuenchState {
    /// The quench initial state |up down down ... down>: the excitation on
    /// the first site.
    pub fn single_flip(n: usize) -> QuenchState {
        assert!(n >= 1);
        let mut amplitudes = vec![Complex64::ZERO; n];
        amplitudes[0] = Complex64::ONE;
        QuenchState {
            amplitudes,
            time: 0.0,
        }
    }

    /// Integrator output may drift off unit norm by its tolerance; bypass
    /// the strict normalization check.
    pub(crate) fn new_unchecked(amplitudes: Vec<Complex64>, time: f64) -> QuenchState {
        QuenchState { amplitudes, time }
    }

    /// Build from raw amplitudes; they must be normalized to 1e-12.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>, time: f64) -> Result<QuenchState> {
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "state norm^2 = {norm_sq}, expected 1 within 1e-12"
            )));
        }
        Ok(QuenchState { amplitudes, time })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn n_sites(&self) -> usize {
        self.amplitudes.len()
    }

    /// Site occupation probabilities |psi_i|^2.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Site-reversed copy (i -> N + 1 - i).
    pub fn mirrored(&self) -> QuenchState {
        let mut amplitudes = self.amplitudes.clone();
        amplitudes.reverse();
        QuenchState {
            amplitudes,
            time: self.time,
        }
    }
}

/// Propagate by duration `t`: psi_i(t) = sum_m v_{i,m} e^{+i E_m t} c_m.
pub fn evolve(spec: &SpectralDecomposition, psi0: &QuenchState, t: f64) -> QuenchState {
    let n = spec.n_sites();
    assert_eq!(n, psi0.n_sites());
    let c = spec.overlaps(psi0);
    let phased: Vec<Complex64> = c
        .iter()
        .zip(spec.energies())
        .map(|(cm, &e)| cm * Complex64::from_polar(1.0, e * t))
        .collect();
    let mut amplitudes = vec![Complex64::ZERO; n];
    for (m, &p) in phased.iter().enumerate() {
        if p.norm_sqr() == 0.0 {
            continue;
        }
        for (amp, v) in amplitudes.iter_mut().zip(spec.vectors().column(m).iter()) {
            *amp += v * p;
        }
    }
    QuenchState {
        amplitudes,
        time: psi0.time + t,
    }
}

/// Local polarization <sigma_i^z> = 2 |psi_i|^2 - 1.
pub fn sigma_z_profile(state: &QuenchState) -> Vec<f64> {
    state
        .probabilities()
        .iter()
        .map(|p| 2.0 * p - 1.0)
        .collect()
}

/// Two-point correlator <sigma_i^z sigma_j^z> = 1 - 2(|psi_i|^2 + |psi_j|^2),
/// exact with a single excitation.
pub fn zz_correlation(state: &QuenchState, i: usize, j: usize) -> Result<f64> {
    let n = state.n_sites();
    if i >= n {
        return Err(Error::SiteOutOfRange { index: i, n });
    }
    if j >= n {
        return Err(Error::SiteOutOfRange { index: j, n });
    }
    if i == j {
        return Err(Error::EqualSites(i));
    }
    let a = state.amplitudes();
    Ok(1.0 - 2.0 * (a[i].norm_sqr() + a[j].norm_sqr()))
}

/// Position weights f_i = (2i - N - 1)/(N - 1) (1-based i): equally spaced,
/// f_1 = -1 at the left edge, f_N = +1 at the right.
pub fn position_weights(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| (2.0 * (i + 1) as f64 - n as f64 - 1.0) / (n as f64 - 1.0))
        .collect()
}

/// Excitation-position observable `<C> = sum_i f_i |psi_i|^2`: -1 with the
/// excitation at the left edge, 0 for mirror-symmetric profiles.
pub fn c_expectation(state: &QuenchState) -> f64 {
    let w = position_weights(state.n_sites());
    state
        .probabilities()
        .iter()
        .zip(&w)
        .map(|(p, f)| f * p)
        .sum()
}

/// sin(x)/x, accurate through x = 0.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-7 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// (1/t) * integral_0^t e^{i delta tau} d tau = e^{i delta t / 2} sinc(delta t / 2).
fn phase_average(delta: f64, t: f64) -> Complex64 {
    let half = 0.5 * delta * t;
    Complex64::from_polar(sinc(half), half)
}

/// Closed-form evaluator of finite-time averages of a site-diagonal
/// observable A = sum_i w_i |i><i| over the occupation probabilities:
///
///   A_bar(t) = sum_{m,n} c_m c_n^* K_nm * (1/t) int_0^t e^{i(E_m - E_n) tau} d tau,
///
/// with K = V^T diag(w) V. Exact; no quadrature error. Construction is
/// O(N^3), each evaluation O(N^2).
pub struct TimeAverager {
    energies: Vec<f64>,
    overlaps: Vec<Complex64>,
    k: DMatrix<f64>,
}

impl TimeAverager {
    pub fn new(spec: &SpectralDecomposition, psi0: &QuenchState, weights: &[f64]) -> TimeAverager {
        let n = spec.n_sites();
        assert_eq!(weights.len(), n);
        let v = spec.vectors();
        let mut wv = v.clone();
        for i in 0..n {
            for m in 0..n {
                wv[(i, m)] *= weights[i];
            }
        }
        let k = v.transpose() * wv;
        TimeAverager {
            energies: spec.energies().to_vec(),
            overlaps: spec.overlaps(psi0),
            k,
        }
    }

    /// A_bar(t); the t -> 0 limit (the instantaneous value) is returned at
    /// t = 0.
    pub fn eval(&self, t: f64) -> f64 {
        assert!(t >= 0.0, "time average needs t >= 0");
        let n = self.energies.len();
        let mut total = 0.0;
        for m in 0..n {
            total += self.overlaps[m].norm_sqr() * self.k[(m, m)];
        }
        for m in 0..n {
            for l in (m + 1)..n {
                let rho = self.overlaps[m] * self.overlaps[l].conj();
                let g = phase_average(self.energies[m] - self.energies[l], t);
                total += 2.0 * (rho * g).re * self.k[(m, l)];
            }
        }
        total
    }

    /// The t -> infinity limit: only strictly degenerate pairs survive.
    pub fn infinite_time(&self) -> f64 {
        let n = self.energies.len();
        let mut total = 0.0;
        for m in 0..n {
            total += self.overlaps[m].norm_sqr() * self.k[(m, m)];
        }
        for m in 0..n {
            for l in (m + 1)..n {
                if self.energies[m] == self.energies[l] {
                    let rho = self.overlaps[m] * self.overlaps[l].conj();
                    total += 2.0 * rho.re * self.k[(m, l)];
                }
            }
        }
        total
    }
}

/// Finite-time average (1/t) int_0^t <A(tau)> d tau of A = sum_i w_i |i><i|
/// on the occupation probabilities, evaluated in closed form.
pub fn time_average(
    spec: &SpectralDecomposition,
    psi0: &QuenchState,
    weights: &[f64],
    t: f64,
) -> f64 {
    TimeAverager::new(spec, psi0, weights).eval(t)
}

/// Time-averaged occupation probabilities p_bar_i(t) for every site.
pub fn time_averaged_probabilities(
    spec: &SpectralDecomposition,
    psi0: &QuenchState,
    t: f64,
) -> Vec<f64> {
    assert!(t >= 0.0);
    let n = spec.n_sites();
    let v = spec.vectors();
    let c = spec.overlaps(psi0);
    let mut p = vec![0.0; n];
    for m in 0..n {
        let w = c[m].norm_sqr();
        for i in 0..n {
            p[i] += w * v[(i, m)] * v[(i, m)];
        }
    }
    for m in 0..n {
        for l in (m + 1)..n {
            let rho = c[m] * c[l].conj();
            let g = phase_average(spec.energies()[m] - spec.energies()[l], t);
            let w = 2.0 * (rho * g).re;
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                p[i] += w * v[(i, m)] * v[(i, l)];
            }
        }
    }
    p
}

/// Time-averaged polarization profile sigma_bar_i^z(t) = 2 p_bar_i(t) - 1.
pub fn time_averaged_sigma_z(spec: &SpectralDecomposition, psi0: &QuenchState, t: f64) -> Vec<f64> {
    time_averaged_probabilities(spec, psi0, t)
        .into_iter()
        .map(|p| 2.0 * p - 1.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::build_synthetic_coupling;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn two_site_h() -> SingleExcitationHamiltonian {
        // J_12 = 2 in j0 = 1 units -> h = [[0, 4], [4, 0]].
        let c = build_synthetic_coupling(2, 0.0, false);
        build_hamiltonian(&c)
    }

    #[test]
    fn two_site_hamiltonian_and_spectrum() {
        let h = two_site_h();
        assert_eq!(h.matrix()[(0, 1)], 4.0);
        assert_eq!(h.matrix()[(0, 0)], 0.0);
        let spec = decompose(&h).unwrap();
        assert_abs_diff_eq!(spec.energies()[0], -4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.energies()[1], 4.0, epsilon = 1e-12);
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        // Sign convention: first-largest component positive.
        assert_abs_diff_eq!(spec.vectors()[(0, 0)], inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.vectors()[(1, 0)], -inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.vectors()[(0, 1)], inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.vectors()[(1, 1)], inv_sqrt2, epsilon = 1e-12);
    }

    #[test]
    fn uniform_chain_spectrum_structure() {
        // Uniform coupling: one symmetric level at 2 J'(N-1) and an
        // (N-1)-fold degenerate level at -2 J', J' = N/(N-1).
        let n = 4;
        let c = build_synthetic_coupling(n, 0.0, false);
        let h = build_hamiltonian(&c);
        let spec = decompose(&h).unwrap();
        let jp = 2.0 * n as f64 / (n as f64 - 1.0);
        for m in 0..n - 1 {
            assert_abs_diff_eq!(spec.energies()[m], -jp, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(
            spec.energies()[n - 1],
            jp * (n as f64 - 1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn shifted_matrix_shifts_spectrum() {
        let mut m = DMatrix::<f64>::zeros(3, 3);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        m[(1, 2)] = 1.0;
        m[(2, 1)] = 1.0;
        let (e0, _) = symmetric_eigen(&m).unwrap();
        let shifted = &m + DMatrix::<f64>::identity(3, 3).scale(2.5);
        let (e1, _) = symmetric_eigen(&shifted).unwrap();
        for (a, b) in e0.iter().zip(&e1) {
            assert_relative_eq!(a + 2.5, *b, max_relative = 1e-12);
        }
    }

    #[test]
    fn random_symmetric_matches_jacobi_oracle() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let n = 8;
            let mut m = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = rng.random::<f64>() * 2.0 - 1.0;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let (values, vectors) = symmetric_eigen(&m).unwrap();
            let oracle = crate::test_oracles::jacobi_eigenvalues(&m);
            for (a, b) in values.iter().zip(&oracle) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
            // Residual ||h v - E v|| <= 1e-10 ||h||.
            let h_norm = m.norm();
            for (k, &value) in values.iter().enumerate() {
                let v = vectors.column(k);
                let res = (&m * v) - v.scale(value);
                assert!(res.norm() <= 1e-10 * h_norm);
            }
        }
    }

    #[test]
    fn evolve_at_zero_is_identity() {
        let h = two_site_h();
        let spec = decompose(&h).unwrap();
        let psi0 = QuenchState::single_flip(2);
        let psi = evolve(&spec, &psi0, 0.0);
        for (a, b) in psi.amplitudes().iter().zip(psi0.amplitudes()) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_site_rabi_oscillation() {
        let h = two_site_h();
        let spec = decompose(&h).unwrap();
        let psi0 = QuenchState::single_flip(2);
        for &t in &[0.05, 0.3, 1.7, 4.0] {
            let psi = evolve(&spec, &psi0, t);
            let p2 = psi.probabilities()[1];
            assert_abs_diff_eq!(p2, (4.0 * t).sin().powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn initial_profile_and_sum_rule() {
        let psi0 = QuenchState::single_flip(5);
        let prof = sigma_z_profile(&psi0);
        assert_eq!(prof[0], 1.0);
        for &s in &prof[1..] {
            assert_eq!(s, -1.0);
        }
        assert_abs_diff_eq!(prof.iter().sum::<f64>(), 2.0 - 5.0, epsilon = 1e-15);

        let uniform =
            QuenchState::from_amplitudes(vec![Complex64::new(1.0 / 5.0_f64.sqrt(), 0.0); 5], 0.0)
                .unwrap();
        for s in sigma_z_profile(&uniform) {
            assert_abs_diff_eq!(s, 2.0 / 5.0 - 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn zz_correlation_values_and_errors() {
        let psi0 = QuenchState::single_flip(4);
        assert_abs_diff_eq!(zz_correlation(&psi0, 0, 1).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(zz_correlation(&psi0, 1, 2).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            zz_correlation(&psi0, 2, 2),
            Err(Error::EqualSites(2))
        ));
        assert!(matches!(
            zz_correlation(&psi0, 0, 9),
            Err(Error::SiteOutOfRange { .. })
        ));
    }

    #[test]
    fn connected_zz_equals_minus_4pp_in_full_hilbert_space() {
        // Evolve an 8-site chain, then embed the state in the full 2^8 space
        // and evaluate the correlator exactly there.
        let c = build_synthetic_coupling(8, 0.9, false);
        let h = build_hamiltonian(&c);
        let spec = decompose(&h).unwrap();
        let psi = evolve(&spec, &QuenchState::single_flip(8), 0.37);
        let p = psi.probabilities();
        for (i, j) in [(0, 1), (2, 6), (3, 4)] {
            let zz = zz_correlation(&psi, i, j).unwrap();
            let si = 2.0 * p[i] - 1.0;
            let sj = 2.0 * p[j] - 1.0;
            assert_abs_diff_eq!(zz - si * sj, -4.0 * p[i] * p[j], epsilon = 1e-12);
            let zz_full = crate::test_oracles::full_space_zz(psi.amplitudes(), i, j);
            assert_abs_diff_eq!(zz, zz_full, epsilon = 1e-12);
        }
    }

    #[test]
    fn c_operator_edge_cases() {
        let n = 6;
        let psi0 = QuenchState::single_flip(n);
        assert_abs_diff_eq!(c_expectation(&psi0), -1.0, epsilon = 1e-15);

        let mut right = vec![Complex64::ZERO; n];
        right[n - 1] = Complex64::ONE;
        let right = QuenchState::from_amplitudes(right, 0.0).unwrap();
        assert_abs_diff_eq!(c_expectation(&right), 1.0, epsilon = 1e-15);

        // Mirror-symmetric profile averages to zero.
        let mut sym = vec![Complex64::ZERO; n];
        sym[0] = Complex64::new(1.0 / 2.0_f64.sqrt(), 0.0);
        sym[n - 1] = Complex64::new(1.0 / 2.0_f64.sqrt(), 0.0);
        let sym = QuenchState::from_amplitudes(sym, 0.0).unwrap();
        assert_abs_diff_eq!(c_expectation(&sym), 0.0, epsilon = 1e-14);

        let f = position_weights(n);
        assert_eq!(f[0], -1.0);
        assert_eq!(f[n - 1], 1.0);
        let df = f[1] - f[0];
        for w in f.windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], df, epsilon = 1e-15);
        }
    }

    #[test]
    fn time_average_limits() {
        let c = build_synthetic_coupling(6, 1.1, false);
        let h = build_hamiltonian(&c);
        let spec = decompose(&h).unwrap();
        let psi0 = QuenchState::single_flip(6);
        let w = position_weights(6);
        let avg = TimeAverager::new(&spec, &psi0, &w);

        // t -> 0 limit: the instantaneous value.
        assert_abs_diff_eq!(avg.eval(0.0), c_expectation(&psi0), epsilon = 1e-12);
        assert_abs_diff_eq!(avg.eval(1e-9), c_expectation(&psi0), epsilon = 1e-9);

        // t -> infinity: every nonzero gap is averaged away.
        let gaps: Vec<f64> = spec
            .energies()
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|g| *g > 0.0)
            .collect();
        let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        let t_late = 1e6 / min_gap;
        assert_abs_diff_eq!(avg.eval(t_late), avg.infinite_time(), epsilon = 1e-5);
    }

    #[test]
    fn closed_form_matches_trapezoidal_quadrature() {
        let c = build_synthetic_coupling(8, 0.7, false);
        let h = build_hamiltonian(&c);
        let spec = decompose(&h).unwrap();
        let psi0 = QuenchState::single_flip(8);
        let w = position_weights(8);
        let t = 3.0;
        let steps = 20_000;
        let dt = t / steps as f64;
        let mut acc = 0.0;
        for k in 0..=steps {
            let val = c_expectation(&evolve(&spec, &psi0, k as f64 * dt));
            let weight = if k == 0 || k == steps { 0.5 } else { 1.0 };
            acc += weight * val;
        }
        let quad = acc * dt / t;
        assert_abs_diff_eq!(time_average(&spec, &psi0, &w, t), quad, epsilon = 1e-6);
    }

    #[test]
    fn parity_covariance_is_exact() {
        // Mirror-symmetric couplings: evolving the mirrored state mirrors
        // every profile.
        let c = build_synthetic_coupling(7, 1.3, false);
        let h = build_hamiltonian(&c);
        let spec = decompose(&h).unwrap();
        let psi0 = QuenchState::single_flip(7);
        let t = 2.3;
        let forward = evolve(&spec, &psi0, t);
        let mirrored = evolve(&spec, &psi0.mirrored(), t);
        let p_fwd = forward.probabilities();
        let p_mir = mirrored.probabilities();
        for i in 0..7 {
            assert_abs_diff_eq!(p_fwd[i], p_mir[6 - i], epsilon = 1e-13);
        }
        assert_abs_diff_eq!(
            c_expectation(&forward),
            -c_expectation(&mirrored),
            epsilon = 1e-13
        );
    }

    proptest! {
        #[test]
        fn norm_and_energy_are_conserved(
            alpha in 0.0_f64..2.5,
            t in 0.0_f64..1e5,
            n in 3_usize..12,
        ) {
            let c = build_synthetic_coupling(n, alpha, false);
            let h = build_hamiltonian(&c);
            let spec = decompose(&h).unwrap();
            let psi0 = QuenchState::single_flip(n);
            let e0 = h.expectation(&psi0);
            let psi = evolve(&spec, &psi0, t);
            prop_assert!((psi.norm() - 1.0).abs() <= 1e-12);
            let e1 = h.expectation(&psi);
            let scale = spec.spectral_width().max(1.0);
            prop_assert!((e1 - e0).abs() <= 1e-10 * scale);
        }

        #[test]
        fn sinc_is_accurate_near_zero(x in -1e-6_f64..1e-6) {
            // Series and direct evaluation agree through the crossover.
            let direct = if x == 0.0 { 1.0 } else { x.sin() / x };
            prop_assert!((sinc(x) - direct).abs() < 1e-15);
        }
    }
}
