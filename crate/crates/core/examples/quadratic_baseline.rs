//! The quadratic game: `γ_inf` by bisection, the stationary Riccati
//! solution, and the same design seen through the convex machinery.

use convex_hinf::central::{verify_certificate, VerifyGrids};
use convex_hinf::grid::SampleGrid;
use convex_hinf::quad::{self, LinearController, QuadWeights, SystemLti};
use convex_hinf::synthesis;
use convex_hinf::{Matrix, Result, Vector};

fn main() -> Result<()> {
    let sys = SystemLti::new(
        Matrix::from_row_slice(2, 2, &[1.1, 0.4, 0.0, 0.8]),
        Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
    )?;
    let base = QuadWeights::unit(2, 1, 1.0);
    let search = quad::gamma_search(&sys, &base, 1e-8)?;
    println!("gamma_inf = {:.6}", search.gamma_inf);

    let weights = base.with_gamma(1.5 * search.gamma_inf);
    let p = quad::stationary_are(&sys, &weights)?;
    println!("P = {p:.6}");
    println!("ARE residual = {:.2e}", quad::are_residual(&p, &sys, &weights)?);
    let linear = LinearController::new(&p, &weights, &sys)?;
    println!("u = Kx x + Kw w with Kx = {:.4} and Kw = {:.4}", linear.gain_x, linear.gain_w);

    let cert = synthesis::quadratic_certificate(&sys, &weights)?;
    let grids = VerifyGrids {
        xi: SampleGrid::with_radius(3.0),
        x: SampleGrid::with_radius(3.0),
        w: SampleGrid::with_radius(3.0),
    };
    let report = verify_certificate(&cert, &grids)?;
    for c in &report.conditions {
        println!("{:<24} worst {:>10.3e}  tol {:.0e}  {}", c.name, c.worst, c.tolerance, if c.passed { "ok" } else { "FAIL" });
    }
    let x = Vector::from_vec(vec![1.0, -0.5]);
    let u = cert.central_control(&x, &Vector::zeros(2))?;
    println!("central u(x, 0) = {:.6}, linear law {:.6}", u[0], (&linear.gain_x * &x)[0]);
    Ok(())
}
