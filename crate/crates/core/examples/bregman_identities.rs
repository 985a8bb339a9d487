//! Bregman divergences of a few stage costs and the identities they obey.
//!
//! Run with `cargo run --example bregman_identities`.

use std::sync::Arc;

use convex_hinf::convex::{self, BoundedQuadraticFn, ExpAbsFn, QuadraticFn, SharedFn};
use convex_hinf::linalg::scalar;
use convex_hinf::Result;

fn main() -> Result<()> {
    let costs: Vec<SharedFn> = vec![
        Arc::new(QuadraticFn::scalar(0.5)?),
        Arc::new(BoundedQuadraticFn::new(1, 2.0)?),
        Arc::new(ExpAbsFn::new(1)),
    ];
    let (x, y) = (scalar(1.3), scalar(-0.4));
    println!("{:<28} {:>12} {:>12} {:>12}", "f", "D_f(x,y)", "dual gap", "fd grad");
    for f in &costs {
        let d = convex::bregman(f.as_ref(), &x, &y)?;
        let gap = convex::check_duality_identity(f.as_ref(), &x, &y)?;
        let (fd, _) = convex::finite_diff_check(f.as_ref(), &x)?;
        println!("{:<28} {:>12.6} {:>12.2e} {:>12.2e}", f.name(), d, gap, fd);
    }

    // Three-point identity for a sum of costs.
    let z = scalar(0.9);
    let residual = convex::check_three_point(&costs[0], &costs[2], &x, &y, &z)?;
    println!("three-point residual: {residual:.2e}");

    // Conjugate round trip for the exponential cost.
    let f = &costs[2];
    let g = f.gradient(&x)?;
    println!("grad f(1.3) = {:.6}, grad f*(grad f(1.3)) = {:.6}", g[0], f.conjugate_gradient(&g)?[0]);
    Ok(())
}
