use super::{ConvexFn, Structure};
use crate::error::{HinfError, Result};
use crate::linalg::{self, Matrix, Vector};

/// `x ↦ xᵀ W x` with `W` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticFn {
    weight: Matrix,
    weight_inv: Matrix,
}

impl QuadraticFn {
    pub fn new(weight: Matrix) -> Result<Self> {
        if !weight.is_square() || weight.nrows() == 0 {
            return Err(HinfError::Dimension("quadratic weight must be square".into()));
        }
        if !weight.iter().all(|v| v.is_finite()) {
            return Err(HinfError::Config("quadratic weight has non-finite entries".into()));
        }
        let asym = (&weight - weight.transpose()).norm();
        if asym > 1e-10 * weight.norm().max(1.0) {
            return Err(HinfError::Config("quadratic weight is not symmetric".into()));
        }
        let weight = linalg::symmetrize(&weight);
        if !linalg::is_positive_definite(&weight) {
            return Err(HinfError::Config("quadratic weight is not positive definite".into()));
        }
        let weight_inv = linalg::symmetrize(&linalg::inverse(&weight)?);
        Ok(Self { weight, weight_inv })
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        Self {
            weight: Matrix::identity(n, n) * c,
            weight_inv: Matrix::identity(n, n) / c,
        }
    }

    pub fn scalar(c: f64) -> Result<Self> {
        Self::new(Matrix::from_element(1, 1, c))
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }
}

impl ConvexFn for QuadraticFn {
    fn dim(&self) -> usize {
        self.weight.nrows()
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(x.dot(&(&self.weight * x)))
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(&self.weight * x * 2.0)
    }

    fn hessian(&self, _x: &Vector) -> Result<Matrix> {
        Ok(&self.weight * 2.0)
    }

    fn conjugate_value(&self, y: &Vector) -> Result<f64> {
        Ok(0.25 * y.dot(&(&self.weight_inv * y)))
    }

    fn conjugate_gradient(&self, y: &Vector) -> Result<Vector> {
        Ok(&self.weight_inv * y * 0.5)
    }

    fn conjugate_hessian(&self, _y: &Vector) -> Result<Matrix> {
        Ok(&self.weight_inv * 0.5)
    }

    fn structure(&self) -> Structure {
        Structure::Quadratic(self.weight.clone())
    }

    fn name(&self) -> String {
        if self.dim() == 1 {
            format!("quadratic({})", self.weight[(0, 0)])
        } else {
            format!("quadratic[{}x{}]", self.dim(), self.dim())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_matches_closed_form() {
        let w = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = QuadraticFn::new(w.clone()).unwrap();
        let y = Vector::from_vec(vec![0.3, -1.2]);
        let expected = 0.25 * y.dot(&(w.try_inverse().unwrap() * &y));
        assert!((f.conjugate_value(&y).unwrap() - expected).abs() < 1e-14);
        let x = f.conjugate_gradient(&y).unwrap();
        assert!((f.gradient(&x).unwrap() - &y).norm() < 1e-14);
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        assert!(QuadraticFn::new(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        assert!(QuadraticFn::new(Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).is_err());
    }
}
