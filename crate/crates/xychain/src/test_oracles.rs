//! Independent numerical oracles used only by the unit tests. These must not
//! share code with the implementation paths they check.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigenvalues of a real symmetric matrix by the classical Jacobi rotation
/// method, ascending. Robust and completely independent of the
/// tridiagonalization-based solver used in production.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + a.norm()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut values: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values
}

/// Embed a single-excitation state in the full 2^N Hilbert space and
/// evaluate <sigma_i^z sigma_j^z> directly there.
pub fn full_space_zz(amplitudes: &[Complex64], i: usize, j: usize) -> f64 {
    let n = amplitudes.len();
    assert!(n <= 20, "full-space embedding blows up beyond 20 sites");
    let dim = 1usize << n;
    let mut full = vec![Complex64::ZERO; dim];
    for (site, amp) in amplitudes.iter().enumerate() {
        full[1usize << site] = *amp;
    }
    let mut expect = 0.0;
    for (state, amp) in full.iter().enumerate() {
        let w = amp.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let zi = if state >> i & 1 == 1 { 1.0 } else { -1.0 };
        let zj = if state >> j & 1 == 1 { 1.0 } else { -1.0 };
        expect += w * zi * zj;
    }
    expect
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_solves_a_2x2_exactly() {
        let mut m = DMatrix::<f64>::zeros(2, 2);
        m[(0, 1)] = 4.0;
        m[(1, 0)] = 4.0;
        let e = jacobi_eigenvalues(&m);
        assert!((e[0] + 4.0).abs() < 1e-13);
        assert!((e[1] - 4.0).abs() < 1e-13);
    }
}
