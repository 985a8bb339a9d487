use super::ConvexFn;
use crate::error::Result;
use crate::linalg::{Matrix, Vector};

/// Separable `u ↦ Σ (e^{|uᵢ|} − |uᵢ| − 1)`.
///
/// Conjugate: `Σ (1+|yᵢ|) ln(1+|yᵢ|) − |yᵢ|`, gradient
/// `sign(yᵢ) ln(1+|yᵢ|)`, Hessian `1/(1+|yᵢ|)`.
#[derive(Debug, Clone)]
pub struct ExpAbsFn {
    dim: usize,
}

impl ExpAbsFn {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

fn value_1d(u: f64) -> f64 {
    let a = u.abs();
    if a < 1e-3 {
        let a2 = a * a;
        a2 * (0.5 + a * (1.0 / 6.0 + a * (1.0 / 24.0 + a * (1.0 / 120.0 + a / 720.0))))
    } else {
        a.exp_m1() - a
    }
}

fn conj_value_1d(y: f64) -> f64 {
    let a = y.abs();
    if a < 1e-3 {
        // Σ_{k≥2} (−1)^k a^k / (k(k−1))
        let a2 = a * a;
        a2 * (0.5 - a * (1.0 / 6.0 - a * (1.0 / 12.0 - a * (1.0 / 20.0 - a / 30.0))))
    } else {
        (1.0 + a) * a.ln_1p() - a
    }
}

impl ConvexFn for ExpAbsFn {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(x.iter().map(|&u| value_1d(u)).sum())
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(x.map(|u| u.signum() * u.abs().exp_m1()))
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        Ok(Matrix::from_diagonal(&x.map(|u| u.abs().exp())))
    }

    fn conjugate_value(&self, y: &Vector) -> Result<f64> {
        Ok(y.iter().map(|&v| conj_value_1d(v)).sum())
    }

    fn conjugate_gradient(&self, y: &Vector) -> Result<Vector> {
        Ok(y.map(|v| v.signum() * v.abs().ln_1p()))
    }

    fn conjugate_hessian(&self, y: &Vector) -> Result<Matrix> {
        Ok(Matrix::from_diagonal(&y.map(|v| 1.0 / (1.0 + v.abs()))))
    }

    fn name(&self) -> String {
        if self.dim == 1 {
            "exp_abs".into()
        } else {
            format!("exp_abs[{}]", self.dim)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::scalar;

    #[test]
    fn series_branches_agree_with_direct_formula() {
        for &u in &[9e-4f64, 1.1e-3, -9.99e-4] {
            let direct = u.abs().exp_m1() - u.abs();
            assert!(((value_1d(u) - direct) / direct).abs() < 1e-9);
            let direct = (1.0 + u.abs()) * u.abs().ln_1p() - u.abs();
            assert!(((conj_value_1d(u) - direct) / direct).abs() < 1e-9);
        }
    }

    #[test]
    fn conjugate_pair() {
        let f = ExpAbsFn::new(1);
        let y = scalar(-2.7);
        let x = f.conjugate_gradient(&y).unwrap();
        assert!((f.gradient(&x).unwrap()[0] + 2.7).abs() < 1e-14);
        let fy = f.value(&x).unwrap() + f.conjugate_value(&y).unwrap() - x.dot(&y);
        assert!(fy.abs() < 1e-14);
    }
}
