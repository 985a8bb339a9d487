//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{HinfError, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Eigenvalue tolerance used by every semidefiniteness test.
pub const EIG_TOL: f64 = 1e-9;

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn max_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_positive_definite(m: &Matrix) -> bool {
    min_eigenvalue(m) > 0.0
}

pub fn inverse(m: &Matrix) -> Result<Matrix> {
    if m.nrows() == 1 {
        let v = m[(0, 0)];
        if v == 0.0 || !v.is_finite() {
            return Err(HinfError::Numerical("singular 1x1 matrix".into()));
        }
        return Ok(Matrix::from_element(1, 1, 1.0 / v));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| HinfError::Numerical(format!("singular {}x{} matrix", m.nrows(), m.ncols())))
}

/// Solves `m x = rhs` for a square, nonsingular `m`.
pub fn solve(m: &Matrix, rhs: &Vector) -> Result<Vector> {
    if m.nrows() == 1 {
        let v = m[(0, 0)];
        if v == 0.0 || !v.is_finite() {
            return Err(HinfError::Numerical("singular 1x1 system".into()));
        }
        return Ok(Vector::from_element(1, rhs[0] / v));
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| HinfError::Numerical("singular linear system".into()))
}

/// Right inverse `B^T (B B^T)^{-1}` of a full-row-rank `B`.
pub fn right_pseudo_inverse(b: &Matrix) -> Result<Matrix> {
    let bbt = b * b.transpose();
    Ok(b.transpose() * inverse(&bbt)?)
}

pub fn rank(m: &Matrix) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * (m.nrows().max(m.ncols()) as f64) * f64::EPSILON * 16.0;
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

pub fn condition_number(m: &Matrix) -> f64 {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(HinfError::Config("empty matrix".into()));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(HinfError::Config("ragged or empty matrix rows".into()));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn scalar(v: f64) -> Vector {
    Vector::from_element(1, v)
}

pub fn relative_difference(a: &Matrix, b: &Matrix) -> f64 {
    let scale = a.norm().max(b.norm()).max(1e-300);
    (a - b).norm() / scale
}
