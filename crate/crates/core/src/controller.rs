//! Full-information policies `u = F(x, w)`.

use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::linalg::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Central,
    Linear,
    CaseStudy,
    Open,
}

pub trait Controller: Send + Sync + fmt::Debug {
    fn control(&self, x: &Vector, w: &Vector) -> Result<Vector>;

    fn input_dim(&self) -> usize;

    fn kind(&self) -> ControllerKind;

    fn name(&self) -> String;
}

pub type SharedController = Arc<dyn Controller>;

/// `u ≡ 0`, used as a negative control for the certificate.
#[derive(Debug, Clone)]
pub struct ZeroController {
    pub dim: usize,
}

impl Controller for ZeroController {
    fn control(&self, _x: &Vector, _w: &Vector) -> Result<Vector> {
        Ok(Vector::zeros(self.dim))
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> ControllerKind {
        ControllerKind::Open
    }

    fn name(&self) -> String {
        "zero".into()
    }
}
