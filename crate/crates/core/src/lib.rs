//! H∞ synthesis and verification for discrete-time linear systems with
//! strictly convex, nonquadratic stage costs.
//!
//! The storage function, the central controller and the worst-case
//! disturbance are all expressed through Fenchel conjugates of the stage
//! costs, and every verification step reduces to checking Bregman
//! divergences. See the `examples/` directory for end-to-end usage.

pub mod cases;
pub mod central;
pub mod config;
pub mod controller;
pub mod convex;
pub mod error;
pub mod grid;
pub mod interval;
pub mod linalg;
pub mod quad;
pub mod run;
pub mod sim;
pub mod synthesis;

pub use error::{HinfError, Result};
pub use linalg::{Matrix, Vector};
