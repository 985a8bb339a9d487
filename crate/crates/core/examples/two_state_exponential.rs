//! A two-state, single-input plant with an exponential input penalty.
//! With fewer inputs than states only the route that fixes `q` and `r`
//! applies; its shaping weight `G` is taken from the quadratic game.

use std::sync::Arc;

use convex_hinf::central::{verify_certificate, CentralController, VerifyGrids};
use convex_hinf::convex::{ComposedFn, ExpAbsFn, QuadraticFn, SharedFn};
use convex_hinf::grid::SampleGrid;
use convex_hinf::quad::{self, QuadWeights, SystemLti};
use convex_hinf::sim::{self, DisturbanceKind, DisturbanceModel};
use convex_hinf::synthesis;
use convex_hinf::{Matrix, Result};

fn main() -> Result<()> {
    let sys = SystemLti::new(
        Matrix::from_row_slice(2, 2, &[0.5, 0.3, 0.0, 0.6]),
        Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
    )?;
    let mut weights = QuadWeights::unit(2, 1, 1.0);
    weights.q = Matrix::identity(2, 2) * 0.1;
    let gamma = 1.05 * quad::gamma_search(&sys, &weights, 1e-6)?.gamma_inf;
    let weights = weights.with_gamma(gamma);
    let p = quad::stationary_are(&sys, &weights)?;
    let g = quad::woodbury_g(&p, &weights.r, &sys)?;
    println!("gamma = {gamma:.6}, G = {g:.6}");

    let q: SharedFn = Arc::new(QuadraticFn::scaled_identity(2, 0.1));
    let r: SharedFn = Arc::new(ComposedFn::scaled(Arc::new(ExpAbsFn::new(1)), 2.0)?);
    let cert = Arc::new(synthesis::induce_qr(&sys, gamma, q, r, &g, true)?);
    let grids = VerifyGrids {
        xi: SampleGrid::new(2.0, 21)?,
        x: SampleGrid::new(1.5, 15)?,
        w: SampleGrid::new(1.5, 15)?,
    };
    let report = verify_certificate(&cert, &grids)?;
    println!("certificate {}", if report.passed() { "verified" } else { "FAILED" });
    for c in report.failures() {
        println!("  {} worst {:.3e}", c.name, c.worst);
    }

    let controller = CentralController::new(cert.clone());
    let traj = sim::rollout(&cert, &controller, DisturbanceModel::new(DisturbanceKind::Laplace, 0.3, 3), 100, None)?;
    let m = sim::metrics(&traj);
    println!("J_G = {:.4} <= gamma^2 = {:.4}, J_T = {:.4}", m.j_g.unwrap_or(0.0), gamma * gamma, m.j_t);
    Ok(())
}
