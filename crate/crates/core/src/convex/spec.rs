use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BoundedQuadraticFn, ExpAbsFn, Piece, PiecewiseQuadraticFn, QuadraticFn, SharedFn};
use crate::error::{HinfError, Result};
use crate::linalg;

/// Serializable description of a primitive cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FnSpec {
    /// `xᵀ W x`.
    Quadratic { weight: Vec<Vec<f64>> },
    /// `c ‖x‖²` in dimension `dim`.
    ScaledIdentity { dim: usize, scale: f64 },
    /// `Σ wᵢ xᵢ²` on `|xᵢ| ≤ tᵢ`. A single bound or weight is broadcast.
    BoundedQuadratic {
        dim: usize,
        bound: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<Vec<f64>>,
    },
    /// `Σ e^{|xᵢ|} − |xᵢ| − 1`.
    ExpAbs { dim: usize },
    /// Even scalar function, quadratic in `|x|` on each piece.
    PiecewiseQuadratic { pieces: Vec<Piece> },
}

fn broadcast(values: &[f64], dim: usize, what: &str) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; dim]),
        n if n == dim => Ok(values.to_vec()),
        n => Err(HinfError::Config(format!("{what}: expected 1 or {dim} entries, got {n}"))),
    }
}

impl FnSpec {
    pub fn build(&self) -> Result<SharedFn> {
        Ok(match self {
            FnSpec::Quadratic { weight } => Arc::new(QuadraticFn::new(linalg::matrix_from_rows(weight)?)?),
            FnSpec::ScaledIdentity { dim, scale } => {
                if *dim == 0 || !(scale.is_finite() && *scale > 0.0) {
                    return Err(HinfError::Config("scaled identity needs dim > 0 and scale > 0".into()));
                }
                Arc::new(QuadraticFn::scaled_identity(*dim, *scale))
            }
            FnSpec::BoundedQuadratic { dim, bound, weight } => {
                let bounds = broadcast(bound, *dim, "bound")?;
                let weights = match weight {
                    Some(w) => broadcast(w, *dim, "weight")?,
                    None => vec![1.0; *dim],
                };
                Arc::new(BoundedQuadraticFn::with_weights(weights, bounds)?)
            }
            FnSpec::ExpAbs { dim } => {
                if *dim == 0 {
                    return Err(HinfError::Config("exp_abs needs dim > 0".into()));
                }
                Arc::new(ExpAbsFn::new(*dim))
            }
            FnSpec::PiecewiseQuadratic { pieces } => Arc::new(PiecewiseQuadraticFn::new(pieces.clone())?),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            FnSpec::Quadratic { weight } => weight.len(),
            FnSpec::ScaledIdentity { dim, .. }
            | FnSpec::BoundedQuadratic { dim, .. }
            | FnSpec::ExpAbs { dim } => *dim,
            FnSpec::PiecewiseQuadratic { .. } => 1,
        }
    }
}
