use serde::{Deserialize, Serialize};

use super::ConvexFn;
use crate::error::{HinfError, Result};
use crate::linalg::{Matrix, Vector};

/// One piece `a x² + b |x| + c`, valid for `|x| ≥ start` up to the next
/// piece's start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Piece {
    fn value(&self, r: f64) -> f64 {
        self.a * r * r + self.b * r + self.c
    }

    fn slope(&self, r: f64) -> f64 {
        2.0 * self.a * r + self.b
    }
}

/// Even scalar function built from quadratic pieces in `|x|`.
///
/// Construction rejects discontinuous or nonconvex piece sets; the
/// `differentiable` flag records whether slopes also match at every
/// breakpoint (including `x = 0`).
#[derive(Debug, Clone)]
pub struct PiecewiseQuadraticFn {
    pieces: Vec<Piece>,
    differentiable: bool,
}

const JOIN_TOL: f64 = 1e-9;

impl PiecewiseQuadraticFn {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        let bad = |msg: String| Err(HinfError::Config(format!("piecewise quadratic: {msg}")));
        if pieces.is_empty() {
            return bad("no pieces".into());
        }
        if pieces[0].start != 0.0 {
            return bad("first piece must start at 0".into());
        }
        for p in &pieces {
            if !(p.a.is_finite() && p.b.is_finite() && p.c.is_finite() && p.start.is_finite()) {
                return bad("non-finite coefficient".into());
            }
            if p.a <= 0.0 {
                return bad(format!("curvature {} is not positive", p.a));
            }
        }
        if pieces[0].b < -JOIN_TOL {
            return bad("negative slope at the origin".into());
        }
        let mut differentiable = pieces[0].b.abs() <= JOIN_TOL;
        for w in pieces.windows(2) {
            let (prev, next) = (w[0], w[1]);
            let r = next.start;
            if r <= prev.start {
                return bad("breakpoints must increase".into());
            }
            let scale = prev.value(r).abs().max(1.0);
            if (prev.value(r) - next.value(r)).abs() > JOIN_TOL * scale {
                return bad(format!("discontinuous at |x| = {r}"));
            }
            let jump = next.slope(r) - prev.slope(r);
            let sscale = prev.slope(r).abs().max(1.0);
            if jump < -JOIN_TOL * sscale {
                return bad(format!("slope decreases at |x| = {r}"));
            }
            if jump.abs() > JOIN_TOL * sscale {
                differentiable = false;
            }
        }
        Ok(Self { pieces, differentiable })
    }

    pub fn is_differentiable(&self) -> bool {
        self.differentiable
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    fn piece_for(&self, r: f64) -> &Piece {
        let idx = self.pieces.partition_point(|p| p.start <= r);
        &self.pieces[idx.saturating_sub(1)]
    }

    /// Inverse of the slope map on `r ≥ 0`, returning the radius and the
    /// curvature of `f*` there (zero inside slope jumps).
    fn invert_slope(&self, y: f64) -> (f64, f64) {
        for (i, p) in self.pieces.iter().enumerate() {
            let lo = p.slope(p.start);
            if y < lo {
                return (p.start, 0.0);
            }
            let hi = self
                .pieces
                .get(i + 1)
                .map(|n| p.slope(n.start))
                .unwrap_or(f64::INFINITY);
            if y <= hi {
                return ((y - p.b) / (2.0 * p.a), 0.5 / p.a);
            }
        }
        unreachable!("last piece is unbounded")
    }
}

impl ConvexFn for PiecewiseQuadraticFn {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        let r = x[0].abs();
        Ok(self.piece_for(r).value(r))
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let r = x[0].abs();
        let slope = if r == 0.0 { 0.0 } else { self.piece_for(r).slope(r) };
        Ok(Vector::from_element(1, x[0].signum() * slope))
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        Ok(Matrix::from_element(1, 1, 2.0 * self.piece_for(x[0].abs()).a))
    }

    fn conjugate_value(&self, y: &Vector) -> Result<f64> {
        let (r, _) = self.invert_slope(y[0].abs());
        let r0 = self.piece_for(r).value(r);
        Ok(r * y[0].abs() - r0)
    }

    fn conjugate_gradient(&self, y: &Vector) -> Result<Vector> {
        let (r, _) = self.invert_slope(y[0].abs());
        Ok(Vector::from_element(1, y[0].signum() * r))
    }

    fn conjugate_hessian(&self, y: &Vector) -> Result<Matrix> {
        let (_, h) = self.invert_slope(y[0].abs());
        Ok(Matrix::from_element(1, 1, h))
    }

    fn has_kinks(&self) -> bool {
        self.pieces.len() > 1 || !self.differentiable
    }

    fn name(&self) -> String {
        format!("piecewise_quadratic({} pieces)", self.pieces.len())
    }
}
