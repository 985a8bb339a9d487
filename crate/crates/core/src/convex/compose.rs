use std::sync::Arc;

use super::solve::{invert_scalar, newton_system};
use super::{BoundedQuadraticFn, ConvexFn, QuadraticFn, SharedFn, Structure};
use crate::error::{HinfError, Result};
use crate::linalg::{self, Matrix, Vector};

/// `x ↦ c · f(M x + b)`.
///
/// When `M` is square and invertible the conjugate is closed-form:
/// `c f*(M⁻ᵀ y / c) − yᵀ M⁻¹ b`.
#[derive(Debug, Clone)]
pub struct ComposedFn {
    inner: SharedFn,
    map: Matrix,
    shift: Vector,
    scale: f64,
    map_inv: Option<Matrix>,
}

impl ComposedFn {
    pub fn new(inner: SharedFn, map: Matrix, shift: Vector, scale: f64) -> Result<Self> {
        if map.nrows() != inner.dim() || shift.len() != inner.dim() {
            return Err(HinfError::Dimension(format!(
                "composition: map is {}x{}, shift {}, inner dimension {}",
                map.nrows(),
                map.ncols(),
                shift.len(),
                inner.dim()
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(HinfError::Config("composition scale must be positive".into()));
        }
        let map_inv = if map.is_square() {
            linalg::inverse(&map).ok()
        } else {
            None
        };
        Ok(Self { inner, map, shift, scale, map_inv })
    }

    pub fn scaled(inner: SharedFn, scale: f64) -> Result<Self> {
        let n = inner.dim();
        Self::new(inner, Matrix::identity(n, n), Vector::zeros(n), scale)
    }

    fn inner_point(&self, x: &Vector) -> Vector {
        &self.map * x + &self.shift
    }
}

impl ConvexFn for ComposedFn {
    fn dim(&self) -> usize {
        self.map.ncols()
    }

    fn in_domain(&self, x: &Vector) -> bool {
        self.inner.in_domain(&self.inner_point(x))
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self.scale * self.inner.value(&self.inner_point(x))?)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.map.transpose() * self.inner.gradient(&self.inner_point(x))? * self.scale)
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        let h = self.inner.hessian(&self.inner_point(x))?;
        Ok(self.map.transpose() * h * &self.map * self.scale)
    }

    fn conjugate_value(&self, y: &Vector) -> Result<f64> {
        match &self.map_inv {
            Some(mi) => {
                let z = mi.transpose() * y / self.scale;
                Ok(self.scale * self.inner.conjugate_value(&z)? - y.dot(&(mi * &self.shift)))
            }
            None => {
                let x = self.conjugate_gradient(y)?;
                Ok(x.dot(y) - self.value(&x)?)
            }
        }
    }

    fn conjugate_gradient(&self, y: &Vector) -> Result<Vector> {
        match &self.map_inv {
            Some(mi) => {
                let z = mi.transpose() * y / self.scale;
                Ok(mi * (self.inner.conjugate_gradient(&z)? - &self.shift))
            }
            None => super::solve::invert_gradient(self, y),
        }
    }

    fn conjugate_hessian(&self, y: &Vector) -> Result<Matrix> {
        match &self.map_inv {
            Some(mi) => {
                let z = mi.transpose() * y / self.scale;
                Ok(mi * self.inner.conjugate_hessian(&z)? * mi.transpose() / self.scale)
            }
            None => {
                let x = self.conjugate_gradient(y)?;
                linalg::inverse(&self.hessian(&x)?)
            }
        }
    }

    fn structure(&self) -> Structure {
        match self.inner.structure() {
            Structure::Quadratic(w) if self.shift.iter().all(|v| *v == 0.0) => {
                Structure::Quadratic(self.map.transpose() * w * &self.map * self.scale)
            }
            _ => Structure::General,
        }
    }

    fn has_kinks(&self) -> bool {
        self.inner.has_kinks()
    }

    fn name(&self) -> String {
        format!("{}·{}(M·+b)", self.scale, self.inner.name())
    }
}

/// One summand `c · f(M x)` of a [`Combination`]; `map = None` is the
/// identity.
#[derive(Debug, Clone)]
pub struct Term {
    pub coeff: f64,
    pub map: Option<Matrix>,
    pub f: SharedFn,
}

impl Term {
    pub fn plain(coeff: f64, f: SharedFn) -> Self {
        Self { coeff, map: None, f }
    }

    pub fn mapped(coeff: f64, map: Matrix, f: SharedFn) -> Self {
        Self { coeff, map: Some(map), f }
    }

    fn apply(&self, x: &Vector) -> Vector {
        match &self.map {
            Some(m) => m * x,
            None => x.clone(),
        }
    }

    fn quadratic_weight(&self) -> Option<Matrix> {
        match self.f.structure() {
            Structure::Quadratic(w) => Some(match &self.map {
                Some(m) => m.transpose() * w * m * self.coeff,
                None => w * self.coeff,
            }),
            _ => None,
        }
    }
}

/// `x ↦ Σ cᵢ fᵢ(Mᵢ x)`. Coefficients may be negative (differences such as
/// `p − m`); convexity of the result is then the caller's responsibility.
#[derive(Debug, Clone)]
pub struct Combination {
    terms: Vec<Term>,
    dim: usize,
}

impl Combination {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| HinfError::Dimension("empty combination".into()))?;
        let dim = match &first.map {
            Some(m) => m.ncols(),
            None => first.f.dim(),
        };
        for t in &terms {
            let (rows, cols) = match &t.map {
                Some(m) => (m.nrows(), m.ncols()),
                None => (t.f.dim(), t.f.dim()),
            };
            if rows != t.f.dim() || cols != dim {
                return Err(HinfError::Dimension(format!(
                    "combination term {} has map {}x{}, expected {}x{}",
                    t.f.name(),
                    rows,
                    cols,
                    t.f.dim(),
                    dim
                )));
            }
            if !t.coeff.is_finite() {
                return Err(HinfError::Config("non-finite combination coefficient".into()));
            }
        }
        Ok(Self { terms, dim })
    }

    /// Builds the combination, replacing it by a closed form when every
    /// term is quadratic, or when it is one box quadratic plus quadratic
    /// terms with a diagonal total weight.
    pub fn build(terms: Vec<Term>, collapse: bool) -> Result<SharedFn> {
        let combo = Self::new(terms)?;
        if collapse {
            if let Some(f) = combo.collapsed()? {
                return Ok(f);
            }
        }
        Ok(Arc::new(combo))
    }

    fn collapsed(&self) -> Result<Option<SharedFn>> {
        if let Structure::Quadratic(w) = self.structure() {
            let w = linalg::symmetrize(&w);
            if linalg::is_positive_definite(&w) {
                return Ok(Some(Arc::new(QuadraticFn::new(w)?)));
            }
            return Ok(None);
        }
        let mut boxed = None;
        let mut quad = Matrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            if let Some(w) = t.quadratic_weight() {
                quad += w;
                continue;
            }
            match (t.f.structure(), &t.map) {
                (Structure::BoxQuadratic { weights, bounds }, None) if boxed.is_none() && t.coeff > 0.0 => {
                    boxed = Some((weights, bounds, t.coeff));
                }
                _ => return Ok(None),
            }
        }
        let Some((weights, bounds, c)) = boxed else {
            return Ok(None);
        };
        let off_diag = (0..self.dim)
            .flat_map(|i| (0..self.dim).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .any(|(i, j)| quad[(i, j)].abs() > 0.0);
        if off_diag {
            return Ok(None);
        }
        let merged: Vec<f64> = (0..self.dim).map(|i| c * weights[i] + quad[(i, i)]).collect();
        if merged.iter().any(|w| *w <= 0.0) {
            return Ok(None);
        }
        Ok(Some(Arc::new(BoundedQuadraticFn::with_weights(merged, bounds)?)))
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }
}

impl ConvexFn for Combination {
    fn dim(&self) -> usize {
        self.dim
    }

    fn in_domain(&self, x: &Vector) -> bool {
        self.terms.iter().all(|t| t.f.in_domain(&t.apply(x)))
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        let mut total = 0.0;
        for t in &self.terms {
            let v = t.f.value(&t.apply(x))?;
            if v.is_infinite() {
                return Ok(f64::INFINITY);
            }
            total += t.coeff * v;
        }
        Ok(total)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let mut g = Vector::zeros(self.dim);
        for t in &self.terms {
            let inner = t.f.gradient(&t.apply(x))? * t.coeff;
            g += match &t.map {
                Some(m) => m.transpose() * inner,
                None => inner,
            };
        }
        Ok(g)
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        let mut h = Matrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            let inner = t.f.hessian(&t.apply(x))? * t.coeff;
            h += match &t.map {
                Some(m) => m.transpose() * inner * m,
                None => inner,
            };
        }
        Ok(h)
    }

    fn structure(&self) -> Structure {
        let mut total = Matrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            match t.quadratic_weight() {
                Some(w) => total += w,
                None => return Structure::General,
            }
        }
        Structure::Quadratic(total)
    }

    fn has_kinks(&self) -> bool {
        self.terms.iter().any(|t| t.f.has_kinks())
    }

    fn name(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| format!("{}·{}", t.coeff, t.f.name()))
            .collect();
        parts.join(" + ")
    }
}

/// The Fenchel conjugate `f*` as a function in its own right.
#[derive(Debug, Clone)]
pub struct ConjugateFn {
    inner: SharedFn,
}

impl ConjugateFn {
    pub fn new(inner: SharedFn) -> Self {
        Self { inner }
    }

    /// Conjugate with closed-form shortcut for quadratics.
    pub fn of(inner: SharedFn) -> Result<SharedFn> {
        if let Structure::Quadratic(w) = inner.structure() {
            let wi = linalg::inverse(&w)?;
            return Ok(Arc::new(QuadraticFn::new(linalg::symmetrize(&wi) * 0.25)?));
        }
        Ok(Arc::new(Self::new(inner)))
    }

    pub fn inner(&self) -> &SharedFn {
        &self.inner
    }
}

impl ConvexFn for ConjugateFn {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        self.inner.conjugate_value(x)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.inner.conjugate_gradient(x)
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        self.inner.conjugate_hessian(x)
    }

    fn conjugate_value(&self, y: &Vector) -> Result<f64> {
        self.inner.value(y)
    }

    fn conjugate_gradient(&self, y: &Vector) -> Result<Vector> {
        self.inner.gradient(y)
    }

    fn conjugate_hessian(&self, y: &Vector) -> Result<Matrix> {
        self.inner.hessian(y)
    }

    fn structure(&self) -> Structure {
        match self.inner.structure() {
            Structure::Quadratic(w) => match linalg::inverse(&w) {
                Ok(wi) => Structure::Quadratic(wi * 0.25),
                Err(_) => Structure::General,
            },
            _ => Structure::General,
        }
    }

    fn has_kinks(&self) -> bool {
        self.inner.has_kinks()
    }

    fn name(&self) -> String {
        format!("({})*", self.inner.name())
    }
}

/// `x ↦ p(x) − q(x)` where `p` is only known through its conjugate `p*`.
///
/// The conjugate gradient is found in the dual variable `ξ = ∇p(x)` by
/// solving `ξ − ∇q(∇p*(ξ)) = y`, which avoids nesting an inversion of `p*`
/// inside an inversion of `p − q`.
#[derive(Debug, Clone)]
pub struct ConjugateDifference {
    p_conj: SharedFn,
    q: SharedFn,
}

impl ConjugateDifference {
    pub fn new(p_conj: SharedFn, q: SharedFn) -> Result<Self> {
        if p_conj.dim() != q.dim() {
            return Err(HinfError::Dimension("conjugate difference: dimensions differ".into()));
        }
        Ok(Self { p_conj, q })
    }

    /// Returns `(ξ, x)` with `x = ∇p*(ξ)` and `∇p(x) − ∇q(x) = y`.
    fn solve_dual(&self, y: &Vector) -> Result<(Vector, Vector)> {
        let what = format!("dual solve for {}", self.name());
        if self.dim() == 1 {
            let xi = invert_scalar(
                &what,
                y[0],
                y[0],
                |xi| {
                    let x = self.p_conj.gradient(&linalg::scalar(xi))?;
                    Ok(xi - self.q.gradient(&x)?[0])
                },
                |xi| {
                    let v = linalg::scalar(xi);
                    let x = self.p_conj.gradient(&v)?;
                    Ok(1.0 - self.q.hessian(&x)?[(0, 0)] * self.p_conj.hessian(&v)?[(0, 0)])
                },
            )?;
            let xi = linalg::scalar(xi);
            let x = self.p_conj.gradient(&xi)?;
            return Ok((xi, x));
        }
        let n = self.dim();
        let xi = newton_system(&what, y.clone(), y.norm(), |xi| {
            let x = self.p_conj.gradient(xi)?;
            let r = xi - self.q.gradient(&x)? - y;
            let jac = Matrix::identity(n, n) - self.q.hessian(&x)? * self.p_conj.hessian(xi)?;
            Ok((r, jac))
        })?;
        let x = self.p_conj.gradient(&xi)?;
        Ok((xi, x))
    }
}

impl ConvexFn for ConjugateDifference {
    fn dim(&self) -> usize {
        self.q.dim()
    }

    fn in_domain(&self, x: &Vector) -> bool {
        self.q.in_domain(x)
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self.p_conj.conjugate_value(x)? - self.q.value(x)?)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.p_conj.conjugate_gradient(x)? - self.q.gradient(x)?)
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        Ok(self.p_conj.conjugate_hessian(x)? - self.q.hessian(x)?)
    }

    fn conjugate_value(&self, y: &Vector) -> Result<f64> {
        let (xi, x) = self.solve_dual(y)?;
        // p(x) = ξᵀx − p*(ξ) at the matched pair.
        let p = xi.dot(&x) - self.p_conj.value(&xi)?;
        Ok(x.dot(y) - p + self.q.value(&x)?)
    }

    fn conjugate_gradient(&self, y: &Vector) -> Result<Vector> {
        Ok(self.solve_dual(y)?.1)
    }

    fn conjugate_hessian(&self, y: &Vector) -> Result<Matrix> {
        let (xi, x) = self.solve_dual(y)?;
        let p_hess = linalg::inverse(&self.p_conj.hessian(&xi)?)?;
        linalg::inverse(&(p_hess - self.q.hessian(&x)?))
    }

    fn has_kinks(&self) -> bool {
        self.p_conj.has_kinks() || self.q.has_kinks()
    }

    fn name(&self) -> String {
        format!("({})* − {}", self.p_conj.name(), self.q.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::ExpAbsFn;
    use crate::linalg::scalar;

    #[test]
    fn composed_conjugate_closed_form_matches_numeric() {
        let inner: SharedFn = Arc::new(ExpAbsFn::new(2));
        let map = Matrix::from_row_slice(2, 2, &[1.0, 0.5, -0.2, 2.0]);
        let shift = Vector::from_vec(vec![0.3, -0.1]);
        let f = ComposedFn::new(inner, map, shift, 1.7).unwrap();
        let y = Vector::from_vec(vec![0.8, -1.1]);
        let closed = f.conjugate_gradient(&y).unwrap();
        let numeric = super::super::solve::invert_gradient(&f, &y).unwrap();
        assert!((closed - numeric).norm() < 1e-9);
    }

    #[test]
    fn quadratic_terms_collapse() {
        let a: SharedFn = Arc::new(QuadraticFn::scaled_identity(1, 3.0));
        let b: SharedFn = Arc::new(QuadraticFn::scaled_identity(1, 1.0));
        let f = Combination::build(vec![Term::plain(1.0, a), Term::plain(-1.0, b)], true).unwrap();
        assert_eq!(f.structure(), Structure::Quadratic(Matrix::from_element(1, 1, 2.0)));
        assert!(f.name().starts_with("quadratic"));
    }

    #[test]
    fn box_plus_quadratic_collapses_to_box() {
        let a: SharedFn = Arc::new(BoundedQuadraticFn::new(1, 2.0).unwrap());
        let b: SharedFn = Arc::new(QuadraticFn::scaled_identity(1, 0.5));
        let f = Combination::build(vec![Term::plain(1.0, a), Term::plain(1.0, b)], true).unwrap();
        match f.structure() {
            Structure::BoxQuadratic { weights, bounds } => {
                assert_eq!(weights, vec![1.5]);
                assert_eq!(bounds, vec![2.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn conjugate_difference_inverts_gradient() {
        // p = exp_abs + 2x², so p − q with q = x² is exp_abs + x².
        let q: SharedFn = Arc::new(QuadraticFn::scaled_identity(1, 1.0));
        let p = Combination::build(
            vec![
                Term::plain(1.0, Arc::new(ExpAbsFn::new(1))),
                Term::plain(1.0, Arc::new(QuadraticFn::scaled_identity(1, 2.0))),
            ],
            true,
        )
        .unwrap();
        let p_conj = ConjugateFn::of(p).unwrap();
        let m = ConjugateDifference::new(p_conj, q).unwrap();
        for &y in &[-3.0, 0.0, 0.4, 12.0] {
            let x = m.conjugate_gradient(&scalar(y)).unwrap();
            let expected = x[0].signum() * x[0].abs().exp_m1() + 2.0 * x[0];
            assert!((expected - y).abs() < 1e-10, "y = {y}");
            let fy = m.value(&x).unwrap() + m.conjugate_value(&scalar(y)).unwrap() - x[0] * y;
            assert!(fy.abs() < 1e-9);
        }
    }
}
