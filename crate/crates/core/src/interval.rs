//! Finite unions of closed real intervals, used by the scalar feasibility
//! solvers.

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    /// Disjoint, sorted `[lo, hi]` pieces; `hi` may be `+∞`.
    pub pieces: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self { pieces: Vec::new() }
    }

    pub fn all() -> Self {
        Self::between(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn between(lo: f64, hi: f64) -> Self {
        if lo <= hi {
            Self { pieces: vec![(lo, hi)] }
        } else {
            Self::empty()
        }
    }

    pub fn at_least(lo: f64) -> Self {
        Self::between(lo, f64::INFINITY)
    }

    pub fn at_most(hi: f64) -> Self {
        Self::between(f64::NEG_INFINITY, hi)
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.pieces.iter().any(|&(lo, hi)| lo <= v && v <= hi)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut pieces = Vec::new();
        for &(a, b) in &self.pieces {
            for &(c, d) in &other.pieces {
                let lo = a.max(c);
                let hi = b.min(d);
                if lo <= hi {
                    pieces.push((lo, hi));
                }
            }
        }
        pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
        Self { pieces }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all: Vec<(f64, f64)> = self.pieces.iter().chain(&other.pieces).copied().collect();
        all.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut pieces: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in all {
            match pieces.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => pieces.push((lo, hi)),
            }
        }
        Self { pieces }
    }

    /// `{x : c·x ≤ d}`.
    pub fn linear_le(c: f64, d: f64) -> Self {
        if c > 0.0 {
            Self::at_most(d / c)
        } else if c < 0.0 {
            Self::at_least(d / c)
        } else if d >= 0.0 {
            Self::all()
        } else {
            Self::empty()
        }
    }

    /// `{x : c2·x² + c1·x + c0 ≥ 0}`.
    pub fn quadratic_ge(c2: f64, c1: f64, c0: f64) -> Self {
        if c2 == 0.0 {
            return Self::linear_le(-c1, c0);
        }
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc < 0.0 {
            return if c2 > 0.0 { Self::all() } else { Self::empty() };
        }
        let sq = disc.sqrt();
        // Stable root pair.
        let sign = if c1 >= 0.0 { 1.0 } else { -1.0 };
        let t = -0.5 * (c1 + sign * sq);
        let (r1, r2) = if t == 0.0 {
            (0.0, 0.0)
        } else {
            let a = t / c2;
            let b = c0 / t;
            (a.min(b), a.max(b))
        };
        if c2 > 0.0 {
            Self::at_most(r1).union(&Self::at_least(r2))
        } else {
            Self::between(r1, r2)
        }
    }

    pub fn lower(&self) -> Option<f64> {
        self.pieces.first().map(|p| p.0)
    }

    pub fn upper(&self) -> Option<f64> {
        self.pieces.last().map(|p| p.1)
    }

    /// A representative point: the midpoint of the first piece, or
    /// `lo + max(lo, 1)` when that piece is unbounded above.
    pub fn representative(&self) -> Option<f64> {
        let &(lo, hi) = self.pieces.first()?;
        Some(match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo + lo.max(1.0),
            (false, true) => hi - hi.abs().max(1.0),
            (false, false) => 0.0,
        })
    }
}

impl std::fmt::Display for IntervalSet {
    /// `∅`, or pieces joined by `∪`. A lower end at the smallest positive
    /// float is shown as the open end `(0`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.pieces.is_empty() {
            return write!(f, "∅");
        }
        for (i, (lo, hi)) in self.pieces.iter().enumerate() {
            if i > 0 {
                write!(f, " ∪ ")?;
            }
            if *lo == f64::MIN_POSITIVE {
                write!(f, "(0")?;
            } else if lo.is_infinite() {
                write!(f, "(-∞")?;
            } else {
                write!(f, "[{lo:.6}")?;
            }
            if hi.is_infinite() {
                write!(f, ", ∞)")?;
            } else {
                write!(f, ", {hi:.6}]")?;
            }
        }
        Ok(())
    }
}
