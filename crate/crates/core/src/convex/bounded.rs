use super::{ConvexFn, Structure};
use crate::error::{HinfError, Result};
use crate::linalg::{Matrix, Vector};

/// Relative slack on the box boundary so that clipped points, which may
/// land a rounding error outside, still have finite cost.
const DOMAIN_SLACK: f64 = 1e-12;

/// `x ↦ Σ wᵢ xᵢ²` on the closed box `|xᵢ| ≤ tᵢ`, `+∞` outside.
///
/// The conjugate is the Huber-type function
/// `yᵢ²/(4wᵢ)` for `|yᵢ| ≤ 2wᵢtᵢ` and `tᵢ|yᵢ| − wᵢtᵢ²` beyond, whose
/// gradient is the clip `clip(yᵢ/(2wᵢ), ±tᵢ)`.
#[derive(Debug, Clone)]
pub struct BoundedQuadraticFn {
    weights: Vec<f64>,
    bounds: Vec<f64>,
}

impl BoundedQuadraticFn {
    /// Unit weights with a common bound `t`.
    pub fn new(dim: usize, bound: f64) -> Result<Self> {
        Self::with_weights(vec![1.0; dim], vec![bound; dim])
    }

    pub fn with_weights(weights: Vec<f64>, bounds: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != bounds.len() {
            return Err(HinfError::Dimension("bounded quadratic: weights and bounds differ".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(HinfError::Config("bounded quadratic: weights must be positive".into()));
        }
        if bounds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(HinfError::Config("bounded quadratic: bound must be positive".into()));
        }
        Ok(Self { weights, bounds })
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn domain_error(&self) -> HinfError {
        HinfError::Domain { function: self.name() }
    }
}

impl ConvexFn for BoundedQuadraticFn {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn in_domain(&self, x: &Vector) -> bool {
        x.iter()
            .zip(&self.bounds)
            .all(|(xi, t)| xi.abs() <= t * (1.0 + DOMAIN_SLACK))
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        if !self.in_domain(x) {
            return Ok(f64::INFINITY);
        }
        Ok(x.iter().zip(&self.weights).map(|(xi, w)| w * xi * xi).sum())
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        if !self.in_domain(x) {
            return Err(self.domain_error());
        }
        Ok(Vector::from_iterator(
            x.len(),
            x.iter().zip(&self.weights).map(|(xi, w)| 2.0 * w * xi),
        ))
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        if !self.in_domain(x) {
            return Err(self.domain_error());
        }
        let d = Vector::from_iterator(self.dim(), self.weights.iter().map(|w| 2.0 * w));
        Ok(Matrix::from_diagonal(&d))
    }

    fn conjugate_value(&self, y: &Vector) -> Result<f64> {
        let mut total = 0.0;
        for ((yi, w), t) in y.iter().zip(&self.weights).zip(&self.bounds) {
            let a = yi.abs();
            total += if a <= 2.0 * w * t {
                a * a / (4.0 * w)
            } else {
                t * a - w * t * t
            };
        }
        Ok(total)
    }

    fn conjugate_gradient(&self, y: &Vector) -> Result<Vector> {
        Ok(Vector::from_iterator(
            y.len(),
            y.iter()
                .zip(&self.weights)
                .zip(&self.bounds)
                .map(|((yi, w), t)| (yi / (2.0 * w)).clamp(-t, *t)),
        ))
    }

    fn conjugate_hessian(&self, y: &Vector) -> Result<Matrix> {
        let d = Vector::from_iterator(
            y.len(),
            y.iter()
                .zip(&self.weights)
                .zip(&self.bounds)
                .map(|((yi, w), t)| if yi.abs() < 2.0 * w * t { 0.5 / w } else { 0.0 }),
        );
        Ok(Matrix::from_diagonal(&d))
    }

    fn structure(&self) -> Structure {
        Structure::BoxQuadratic {
            weights: self.weights.clone(),
            bounds: self.bounds.clone(),
        }
    }

    fn has_kinks(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        if self.dim() == 1 {
            format!("bounded_quadratic(w={}, t={})", self.weights[0], self.bounds[0])
        } else {
            format!("bounded_quadratic[{}]", self.dim())
        }
    }
}
