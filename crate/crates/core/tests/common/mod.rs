//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use convex_hinf::central::Certificate;
use convex_hinf::convex::{ComposedFn, ExpAbsFn, QuadraticFn, SharedFn};
use convex_hinf::quad::{self, QuadWeights, SystemLti};
use convex_hinf::synthesis;
use convex_hinf::Matrix;

/// A stable two-state, single-input plant with an exponential input
/// penalty, designed through the QR route with `G` taken from the
/// quadratic game at `1.05 γ_inf`.
pub fn two_state_qr() -> Certificate {
    let a = Matrix::from_row_slice(2, 2, &[0.5, 0.3, 0.0, 0.6]);
    let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let sys = SystemLti::new(a, b).unwrap();
    let mut weights = QuadWeights::unit(2, 1, 1.0);
    weights.q = Matrix::identity(2, 2) * 0.1;
    let gamma = 1.05 * quad::gamma_search(&sys, &weights, 1e-6).unwrap().gamma_inf;
    let weights = weights.with_gamma(gamma);
    let p = quad::stationary_are(&sys, &weights).unwrap();
    let g = quad::woodbury_g(&p, &weights.r, &sys).unwrap();
    let q: SharedFn = Arc::new(QuadraticFn::scaled_identity(2, 0.1));
    let r: SharedFn = Arc::new(ComposedFn::scaled(Arc::new(ExpAbsFn::new(1)), 2.0).unwrap());
    synthesis::induce_qr(&sys, gamma, q, r, &g, true).unwrap()
}
