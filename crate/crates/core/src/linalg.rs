//! Dense linear-algebra helpers over `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest singular value.
pub fn op_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.nrows() == 1 || a.ncols() == 1 {
        return a.norm();
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix in increasing order.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Eigenvalues of a real symmetric matrix in increasing order.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn block_diag(blocks: &[&CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `max |A*A - I|` entrywise.
pub fn unitarity_defect(a: &CMatrix) -> f64 {
    let p = a.adjoint() * a;
    let n = a.nrows();
    (p - identity(n)).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn to_faer(a: &CMatrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Determinant via LU with partial pivoting.
pub fn lu_det(a: &CMatrix) -> Complex64 {
    to_faer(a).determinant()
}

/// `det A` and `tr(A^{-1} B)` from a single LU factorization with partial
/// pivoting. A singular `A` shows up as a zero determinant and a non-finite
/// trace.
pub fn det_and_trace_solve(a: &CMatrix, b: &CMatrix) -> (Complex64, Complex64) {
    let lu = to_faer(a).partial_piv_lu();
    let u = lu.U();
    let mut det: Complex64 = (0..u.nrows()).map(|i| u[(i, i)]).product();
    // Sign of the row permutation from its cycle decomposition.
    let (fwd, _) = lu.P().arrays();
    let mut seen = vec![false; fwd.len()];
    for start in 0..fwd.len() {
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = fwd[i];
            len += 1;
        }
        if len % 2 == 0 && len > 0 {
            det = -det;
        }
    }
    // tr(A^{-1} B) = Σ_ij (A^{-1})_ij B_ji; the explicit inverse is cheaper
    // than solving against all columns of B.
    let inv = faer::linalg::solvers::DenseSolveCore::inverse(&lu);
    let n = inv.nrows();
    let mut trace = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            trace += inv[(i, j)] * b[(j, i)];
        }
    }
    (det, trace)
}

/// Eigenpair of `a` whose eigenvalue lies closest to `target`, by shifted
/// inverse iteration. Returns the Rayleigh quotient and a unit eigenvector.
pub fn eigenpair_near(a: &CMatrix, target: Complex64, max_iter: usize) -> Result<(Complex64, CVector)> {
    let n = a.nrows();
    // Tiny offset keeps the shifted matrix invertible when target is an exact eigenvalue.
    let scale = a.norm().max(1.0);
    let shift = target + Complex64::new(1e-13 * scale, 1e-13 * scale);
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let lu = shifted.lu();
    let mut x = CVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * (i as f64).sin(), 0.05 * (i as f64).cos()));
    x /= Complex64::from(x.norm());
    let mut mu = target;
    for _ in 0..max_iter {
        let y = lu
            .solve(&x)
            .ok_or_else(|| Error::NoConvergence("shifted matrix is singular".into()))?;
        let norm = y.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NoConvergence("inverse iteration produced a degenerate vector".into()));
        }
        let next = y / Complex64::from(norm);
        let ax = a * &next;
        let new_mu = next.dotc(&ax);
        let res = (&ax - &next * new_mu).norm();
        let converged = (new_mu - mu).norm() <= 1e-15 * scale && res <= 1e-13 * scale;
        x = next;
        mu = new_mu;
        if converged {
            break;
        }
    }
    Ok((mu, x))
}

/// Dominant eigenpair of a real matrix by power iteration.
///
/// The iterate is normalized in the max norm with a positive largest entry,
/// which suits Perron-Frobenius type operators.
pub fn power_iteration(a: &DMatrix<f64>, max_iter: usize, tol: f64) -> Result<(f64, DVector<f64>)> {
    let n = a.nrows();
    let mut x = DVector::from_element(n, 1.0);
    let mut lambda = 0.0;
    for it in 0..max_iter {
        let y = a * &x;
        let big = y.iter().cloned().fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if big == 0.0 || !big.is_finite() {
            return Err(Error::NoConvergence("power iteration collapsed".into()));
        }
        let next = y / big;
        let delta = (&next - &x).amax();
        x = next;
        let prev = lambda;
        lambda = big;
        if it > 2 && delta <= tol && (lambda - prev).abs() <= tol * lambda.abs() {
            return Ok((lambda, x));
        }
    }
    Err(Error::NoConvergence(format!("power iteration exceeded {max_iter} steps")))
}

/// Moduli of all eigenvalues of a real matrix, decreasing.
pub fn eigenvalue_moduli(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().complex_eigenvalues().iter().map(|z| z.norm()).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_agrees_with_nalgebra() {
        let a = CMatrix::from_fn(7, 7, |i, j| Complex64::new(((3 * i + 5 * j) % 7) as f64 - 2.5, ((i * j) % 3) as f64));
        let b = CMatrix::from_fn(7, 7, |i, j| Complex64::new((i + 2 * j) as f64, -(i as f64)));
        let want = a.clone().lu().determinant();
        assert!((lu_det(&a) - want).norm() < 1e-10 * want.norm());
        let (det, tr) = det_and_trace_solve(&a, &b);
        assert!((det - want).norm() < 1e-10 * want.norm());
        let x = a.clone().lu().solve(&b).unwrap();
        assert!((tr - x.trace()).norm() < 1e-10 * tr.norm());
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn op_norm_of_diagonal() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, -3.0)]));
        assert!((op_norm(&a) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lu_det_matches_formula() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(2.0, 0.0), c(0.0, 1.0), c(3.0, -1.0)]);
        let expect = c(1.0, 1.0) * c(3.0, -1.0) - c(2.0, 0.0) * c(0.0, 1.0);
        assert!((lu_det(&a) - expect).norm() < 1e-12);
    }

    #[test]
    fn inverse_iteration_finds_nearest_eigenvalue() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[c(2.0, 0.0), c(1.0, 0.0), ZERO, ZERO, c(0.9, 0.1), c(0.5, 0.0), ZERO, ZERO, c(-1.0, 0.0)],
        );
        let (mu, v) = eigenpair_near(&a, ONE, 100).unwrap();
        assert!((mu - c(0.9, 0.1)).norm() < 1e-10);
        assert!((&a * &v - &v * mu).norm() < 1e-10);
    }

    #[test]
    fn power_iteration_on_positive_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (l, v) = power_iteration(&a, 1000, 1e-14).unwrap();
        assert!((l - 3.0).abs() < 1e-12);
        assert!((v[0] - v[1]).abs() < 1e-12);
    }
}
