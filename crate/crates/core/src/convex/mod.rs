//! Convex-function calculus: evaluation, Fenchel conjugation, gradient
//! inversion and Bregman divergences.
//!
//! Every cost in the toolkit (`q`, `r`, `s`, the storage function `p`, the
//! shaping functions `m` and `g`, and all of their conjugates) is a
//! [`ConvexFn`]. Primitive costs expose closed-form conjugates; composite
//! ones fall back to numeric inversion of the gradient map.

mod bounded;
mod compose;
mod exp_abs;
mod piecewise;
mod quadratic;
pub mod solve;
mod spec;

use std::fmt;
use std::sync::Arc;

pub use bounded::BoundedQuadraticFn;
pub use compose::{Combination, ComposedFn, ConjugateDifference, ConjugateFn, Term};
pub use exp_abs::ExpAbsFn;
pub use piecewise::{Piece, PiecewiseQuadraticFn};
pub use quadratic::QuadraticFn;
pub use spec::FnSpec;

use crate::error::{HinfError, Result};
use crate::linalg::{self, Matrix, Vector};

pub type SharedFn = Arc<dyn ConvexFn>;

/// Structural information used to collapse compositions into closed forms.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    /// `x ↦ xᵀ W x`.
    Quadratic(Matrix),
    /// `x ↦ Σ wᵢ xᵢ²` on the box `|xᵢ| ≤ tᵢ`, `+∞` outside.
    BoxQuadratic { weights: Vec<f64>, bounds: Vec<f64> },
    General,
}

/// A differentiable, strictly convex function with access to its Fenchel
/// conjugate.
///
/// Values outside the effective domain are `+∞`; gradients and Hessians
/// there are domain errors. The conjugate methods default to numeric
/// inversion of the gradient map (see [`solve::invert_gradient`]).
pub trait ConvexFn: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> Result<f64>;

    fn gradient(&self, x: &Vector) -> Result<Vector>;

    /// Second derivative; one-sided at kinks of piecewise functions.
    fn hessian(&self, x: &Vector) -> Result<Matrix>;

    fn in_domain(&self, _x: &Vector) -> bool {
        true
    }

    /// `f*(y) = sup_x { xᵀy − f(x) }`.
    fn conjugate_value(&self, y: &Vector) -> Result<f64> {
        let x = self.conjugate_gradient(y)?;
        Ok(x.dot(y) - self.value(&x)?)
    }

    /// `∇f*(y)`, the inverse of the gradient map.
    fn conjugate_gradient(&self, y: &Vector) -> Result<Vector> {
        solve::invert_gradient(self, y)
    }

    fn conjugate_hessian(&self, y: &Vector) -> Result<Matrix> {
        let x = self.conjugate_gradient(y)?;
        linalg::inverse(&self.hessian(&x)?)
    }

    fn structure(&self) -> Structure {
        Structure::General
    }

    /// True when the function or its conjugate has kinks in the second
    /// derivative (domain-bounded or piecewise functions).
    fn has_kinks(&self) -> bool {
        false
    }

    fn name(&self) -> String;
}

fn check_dims(f: &dyn ConvexFn, x: &Vector) -> Result<()> {
    if x.len() != f.dim() {
        return Err(HinfError::Dimension(format!(
            "{} expects dimension {}, got {}",
            f.name(),
            f.dim(),
            x.len()
        )));
    }
    Ok(())
}

fn require_domain(f: &dyn ConvexFn, x: &Vector) -> Result<()> {
    check_dims(f, x)?;
    if !f.in_domain(x) {
        return Err(HinfError::Domain { function: f.name() });
    }
    Ok(())
}

/// Bregman divergence `D_f(x, y) = f(x) − f(y) − ∇f(y)ᵀ(x − y)`.
pub fn bregman(f: &dyn ConvexFn, x: &Vector, y: &Vector) -> Result<f64> {
    require_domain(f, x)?;
    require_domain(f, y)?;
    let grad = f.gradient(y)?;
    Ok(f.value(x)? - f.value(y)? - grad.dot(&(x - y)))
}

/// Bregman divergence anchored at a dual point:
/// `f(x) + f*(ζ) − ζᵀx`, which equals `D_f(x, ∇f*(ζ))`.
///
/// This is the form to use when the anchor sits on the boundary of the
/// domain, where `ζ` is the subgradient selected by the optimality
/// conditions rather than the one-sided derivative.
pub fn bregman_dual(f: &dyn ConvexFn, x: &Vector, zeta: &Vector) -> Result<f64> {
    require_domain(f, x)?;
    check_dims(f, zeta)?;
    Ok(f.value(x)? + f.conjugate_value(zeta)? - zeta.dot(x))
}

/// `D_{f*}(a, b)` evaluated through the conjugate methods of `f`.
pub fn bregman_conjugate(f: &dyn ConvexFn, a: &Vector, b: &Vector) -> Result<f64> {
    check_dims(f, a)?;
    check_dims(f, b)?;
    let grad = f.conjugate_gradient(b)?;
    Ok(f.conjugate_value(a)? - f.conjugate_value(b)? - grad.dot(&(a - b)))
}

/// `|D_f(x,y) − D_{f*}(∇f(y), ∇f(x))|`.
pub fn check_duality_identity(f: &dyn ConvexFn, x: &Vector, y: &Vector) -> Result<f64> {
    let primal = bregman(f, x, y)?;
    let dual = bregman_conjugate(f, &f.gradient(y)?, &f.gradient(x)?)?;
    Ok((primal - dual).abs())
}

/// Residual of the three-point identity
/// `D₁(x,y) + D₂(x,z) = D₁₊₂(x,x*) + D₁(x*,y) + D₂(x*,z)` where
/// `∇(f₁+f₂)(x*) = ∇f₁(y) + ∇f₂(z)`.
pub fn check_three_point(
    f1: &SharedFn,
    f2: &SharedFn,
    x: &Vector,
    y: &Vector,
    z: &Vector,
) -> Result<f64> {
    if f1.dim() != f2.dim() {
        return Err(HinfError::Dimension("three-point identity needs equal dimensions".into()));
    }
    let sum = Combination::new(vec![Term::plain(1.0, f1.clone()), Term::plain(1.0, f2.clone())])?;
    let target = f1.gradient(y)? + f2.gradient(z)?;
    let x_star = sum.conjugate_gradient(&target)?;
    let lhs = bregman(f1.as_ref(), x, y)? + bregman(f2.as_ref(), x, z)?;
    let rhs = bregman(&sum, x, &x_star)?
        + bregman(f1.as_ref(), &x_star, y)?
        + bregman(f2.as_ref(), &x_star, z)?;
    Ok((lhs - rhs).abs())
}

/// Finite-difference gradient and Hessian errors at `x`.
///
/// Central differences with steps `1e-5` (gradient, from values) and
/// `1e-4` (Hessian, from the analytic gradient), both scaled by
/// `max(1, |xᵢ|)`. Errors are `‖Δ‖ / max(1, ‖analytic‖)`.
pub fn finite_diff_check(f: &dyn ConvexFn, x: &Vector) -> Result<(f64, f64)> {
    require_domain(f, x)?;
    let n = f.dim();
    let grad = f.gradient(x)?;
    let hess = f.hessian(x)?;
    let mut fd_grad = Vector::zeros(n);
    let mut fd_hess = Matrix::zeros(n, n);
    for i in 0..n {
        let h = 1e-5 * x[i].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        fd_grad[i] = (f.value(&xp)? - f.value(&xm)?) / (2.0 * h);

        let h2 = 1e-4 * x[i].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h2;
        xm[i] -= h2;
        let column = (f.gradient(&xp)? - f.gradient(&xm)?) / (2.0 * h2);
        fd_hess.set_column(i, &column);
    }
    let grad_err = (&fd_grad - &grad).norm() / grad.norm().max(1.0);
    let hess_err = (&fd_hess - &hess).norm() / hess.norm().max(1.0);
    Ok((grad_err, hess_err))
}

/// Checks the inverse-function-theorem identity
/// `∇²f(∇f*(y)) ∇²f*(y) = I`, returning the Frobenius error.
pub fn inverse_hessian_error(f: &dyn ConvexFn, y: &Vector) -> Result<f64> {
    let x = f.conjugate_gradient(y)?;
    let product = f.hessian(&x)? * f.conjugate_hessian(y)?;
    Ok((product - Matrix::identity(f.dim(), f.dim())).norm())
}
