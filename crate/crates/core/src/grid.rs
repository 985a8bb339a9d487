//! Sample sets for condition verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HinfError, Result};
use crate::linalg::Vector;

/// Symmetric, log-spaced sample set of `points` values on `[−radius, radius]`.
///
/// In one dimension the set is `{0} ∪ {±radius·10^(−4 + 4j/(h−1))}` with
/// `h = (points − 1)/2`. In higher dimensions it is that set placed on
/// every coordinate axis and on the main diagonals, plus `points·n`
/// seeded pseudo-random points in the cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub radius: f64,
    pub points: usize,
}

pub const DEFAULT_POINTS: usize = 41;

impl SampleGrid {
    pub fn new(radius: f64, points: usize) -> Result<Self> {
        let g = Self { radius, points };
        g.validate()?;
        Ok(g)
    }

    pub fn with_radius(radius: f64) -> Self {
        Self { radius, points: DEFAULT_POINTS }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(HinfError::Config("grid radius must be positive".into()));
        }
        if self.points == 0 {
            return Err(HinfError::Config("grid has no points".into()));
        }
        Ok(())
    }

    /// Multiplies the point count by `factor`, keeping it odd so the
    /// origin stays on the grid.
    pub fn densified(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(HinfError::Config("grid scale must be positive".into()));
        }
        let mut points = ((self.points as f64) * factor).round() as usize;
        if points == 0 {
            return Err(HinfError::Config("grid scale leaves no points".into()));
        }
        if points % 2 == 0 {
            points += 1;
        }
        Ok(Self { points, ..*self })
    }

    pub fn axis(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![0.0];
        }
        let half = (self.points - 1) / 2;
        let mut out = Vec::with_capacity(self.points);
        out.push(0.0);
        for j in 0..half {
            let expo = if half == 1 { 0.0 } else { -4.0 + 4.0 * j as f64 / (half - 1) as f64 };
            let v = self.radius * 10f64.powf(expo);
            out.push(v);
            out.push(-v);
        }
        if self.points % 2 == 0 {
            out.push(self.radius * 0.5);
        }
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn points(&self, n: usize) -> Vec<Vector> {
        let axis = self.axis();
        if n == 1 {
            return axis.into_iter().map(|v| Vector::from_element(1, v)).collect();
        }
        let mut out = Vec::new();
        for i in 0..n {
            for &v in &axis {
                let mut e = Vector::zeros(n);
                e[i] = v;
                out.push(e);
            }
        }
        let diag = 1.0 / (n as f64).sqrt();
        for &v in axis.iter().filter(|v| **v != 0.0) {
            out.push(Vector::from_element(n, v * diag));
            let mut alt = Vector::from_element(n, v * diag);
            for i in (1..n).step_by(2) {
                alt[i] = -alt[i];
            }
            out.push(alt);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..self.points * n {
            out.push(Vector::from_fn(n, |_, _| rng.random_range(-self.radius..=self.radius)));
        }
        out
    }
}
