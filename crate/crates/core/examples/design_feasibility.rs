//! Feasible shaping parameters of the three scalar design routes as the
//! performance level varies.

use convex_hinf::quad::{self, QuadWeights, SystemLti};
use convex_hinf::synthesis::{self, CurvatureBounds, QsCoupling};
use convex_hinf::Result;

fn main() -> Result<()> {
    let sys = SystemLti::scalar(0.6, 1.0)?;
    let gamma_inf = quad::gamma_search(&sys, &QuadWeights::unit(1, 1, 1.0), 1e-9)?.gamma_inf;
    println!("quadratic gamma_inf = {gamma_inf:.6}");

    let two = CurvatureBounds::scalar(2.0, 2.0)?;
    println!("{:>8} {:>24} {:>24}", "gamma", "rs: m", "qs: m");
    for factor in [0.99, 1.0001, 1.05, 1.2, 1.5, 2.0] {
        let gamma = factor * gamma_inf;
        let rs = synthesis::feasibility_rs(&sys, gamma, &two, &two)?;
        let qs = synthesis::feasibility_qs(&sys, gamma, &two, &two, QsCoupling::Derived)?;
        println!("{gamma:>8.4} {:>24} {:>24}", rs.to_string(), qs.to_string());
    }

    // The QR route does not depend on gamma. The exponential cost has
    // curvature in [1, e^|u|], so the upper bound grows with the input range.
    let sys = SystemLti::scalar(0.9, 0.1)?;
    let q_bounds = CurvatureBounds::scalar(2.0, 2.0)?;
    for umax in [1.0f64, 3.0, 5.0] {
        let r_bounds = CurvatureBounds::scalar(1.0, umax.exp())?;
        let qr = synthesis::feasibility_qr(&sys, &q_bounds, &r_bounds)?;
        println!("qr on a = 0.9, b = 0.1 with |u| <= {umax}: G in {qr}");
    }
    Ok(())
}
