//! Small dense-matrix helpers shared by the model, filter and analysis code.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius needs a square matrix");
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|ev| ev.norm())
        .fold(0.0, f64::max)
}

/// `(M + Mᵀ) / 2`
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

const EXPM_TOL: f64 = 1e-12;

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
///
/// The argument is scaled by `2^-s` until its 1-norm is at most 1/2, the
/// series is summed until the next term is below `1e-12` relative to the
/// partial sum, and the result is squared `s` times.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "matrix exponential needs a square matrix");
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm1 * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled = a * scale;

    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..64 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.abs().max() <= EXPM_TOL * sum.abs().max() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Solves the discrete Lyapunov equation `X = A X Aᵀ + Q`.
///
/// Uses the Kronecker form `(I - A ⊗ A) vec(X) = vec(Q)`; intended for the
/// small (n ≤ ~10) systems used here.
pub fn solve_discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "lyapunov: A is {:?}, Q is {:?}",
            a.shape(),
            q.shape()
        )));
    }
    let radius = spectral_radius(a);
    if radius >= 1.0 {
        return Err(Error::UnstableClosedLoop { radius });
    }
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - a.kronecker(a);
    let rhs = nalgebra::DVector::from_column_slice(q.as_slice());
    let vec_x = lhs
        .lu()
        .solve(&rhs)
        .ok_or(Error::UnstableClosedLoop { radius })?;
    let x = DMatrix::from_column_slice(n, n, vec_x.as_slice());
    Ok(symmetrize(&x))
}
