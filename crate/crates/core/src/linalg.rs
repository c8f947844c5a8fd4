//! Small dense helpers on top of `faer` shared by the physics modules.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;
pub type CVec = Col<Complex64>;

pub fn max_abs(m: MatRef<'_, Complex64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

pub fn max_abs_col(v: &CVec) -> f64 {
    v.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut out = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            out = out.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    out
}

pub fn max_abs_diff_col(a: &CVec, b: &CVec) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    a.iter().zip(b.iter()).fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `max |A_ij - conj(A_ji)|`
pub fn hermiticity_defect(m: MatRef<'_, Complex64>) -> f64 {
    let n = m.nrows();
    let mut out = 0.0f64;
    for i in 0..n {
        for j in i..n {
            out = out.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    out
}

/// Deviation of `A A^†` from the identity.
pub fn unitarity_defect(m: MatRef<'_, Complex64>) -> f64 {
    let prod = m * m.adjoint();
    max_abs_diff(prod.as_ref(), CMat::identity(m.nrows(), m.nrows()).as_ref())
}

/// Symmetrise a nearly Hermitian matrix as `(A + A^†) / 2`.
pub fn hermitian_part(m: MatRef<'_, Complex64>) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn conj(m: MatRef<'_, Complex64>) -> CMat {
    m.conjugate().to_owned()
}

pub fn trace(m: MatRef<'_, Complex64>) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Solve `A x = b` with partial-pivoting LU.
pub fn lu_solve(a: MatRef<'_, Complex64>, b: &CVec) -> CVec {
    let lu = a.partial_piv_lu();
    lu.solve(b)
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
/// Eigenvectors are the columns of the returned matrix.
pub fn hermitian_eigen(m: MatRef<'_, Complex64>) -> Result<(Vec<f64>, CMat)> {
    let evd = m.self_adjoint_eigen(faer::Side::Lower).map_err(|e| Error::NumericalFailure {
        what: format!("hermitian eigensolver did not converge: {e:?}"),
        residual: f64::NAN,
    })?;
    let vals = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenvalues of a general complex matrix.
pub fn general_eigenvalues(m: MatRef<'_, Complex64>) -> Result<Vec<Complex64>> {
    m.eigenvalues().map_err(|e| Error::NumericalFailure {
        what: format!("general eigensolver did not converge: {e:?}"),
        residual: f64::NAN,
    })
}

/// Right eigenvectors (columns) and eigenvalues of a general complex matrix.
pub fn general_eigen(m: MatRef<'_, Complex64>) -> Result<(Vec<Complex64>, CMat)> {
    let evd = m.eigen().map_err(|e| Error::NumericalFailure {
        what: format!("general eigensolver did not converge: {e:?}"),
        residual: f64::NAN,
    })?;
    Ok((evd.S().column_vector().iter().copied().collect(), evd.U().to_owned()))
}

/// Singular values sorted in nonincreasing order.
pub fn singular_values(m: MatRef<'_, Complex64>) -> Result<Vec<f64>> {
    let s = m
        .singular_values()
        .map_err(|e| Error::NumericalFailure { what: format!("svd did not converge: {e:?}"), residual: f64::NAN })?;
    Ok(s)
}

/// Ratio of extreme singular values; infinite for exactly singular input.
pub fn condition_number(m: MatRef<'_, Complex64>) -> Result<f64> {
    let s = singular_values(m)?;
    let (hi, lo) = (s.first().copied().unwrap_or(0.0), s.last().copied().unwrap_or(0.0));
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}
