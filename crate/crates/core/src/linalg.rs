//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetric eigendecomposition; the input is symmetrized first.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !m.is_square() {
        return Err(Error::Linalg(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let sym = (m + m.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym))
}

/// Relative tolerance used to declare an eigenvalue zero.
pub fn eig_tolerance(values: &DVector<f64>) -> f64 {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    scale * 1e-10 * (values.len().max(1) as f64)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let scale = 1.0f64.max(m[(i, j)].abs()).max(m[(j, i)].abs());
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Checks symmetry and positive semidefiniteness up to a relative tolerance.
pub fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !is_symmetric(m, 1e-9) {
        return Err(Error::InvalidArgument(format!("{what} is not symmetric")));
    }
    let eig = sym_eigen(m)?;
    let tol = eig_tolerance(&eig.eigenvalues);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::InvalidArgument(format!(
            "{what} is not positive semidefinite (smallest eigenvalue {min:e})"
        )));
    }
    Ok(())
}

/// Symmetric PSD square root via the eigendecomposition.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_psd(m, "matrix")?;
    let eig = sym_eigen(m)?;
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Orthogonal projector onto the range of a symmetric PSD matrix.
pub fn range_projector(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(m)?;
    let tol = eig_tolerance(&eig.eigenvalues);
    let n = m.nrows();
    let mut p = DMatrix::zeros(n, n);
    for k in 0..n {
        if eig.eigenvalues[k] > tol {
            let v = eig.eigenvectors.column(k);
            p += &v * v.transpose();
        }
    }
    Ok(p)
}

/// Solves `m x = b` for symmetric positive definite `m`.
pub fn spd_solve(m: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Linalg("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

pub fn spd_solve_vec(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Linalg("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// General square solve with partial pivoting.
pub fn solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    m.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Linalg("singular system".into()))
}

/// Left pseudo-inverse `(A^T A)^{-1} A^T` of a full-column-rank matrix.
pub fn left_pseudo_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = a.transpose() * a;
    let eig = sym_eigen(&gram)?;
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > max * 1e-12) {
        return Err(Error::Linalg(
            "observation operator does not have full column rank".into(),
        ));
    }
    spd_solve(&gram, &a.transpose())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Numerically stable `log(sum(exp(v)))`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let out = m * DVector::from_column_slice(v);
    out.as_slice().to_vec()
}
