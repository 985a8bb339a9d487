//! Scalar plant with a hard input limit `|u| ≤ t`: the feasible shaping
//! interval, the closed-form law against the generic one, and a rollout
//! that never exceeds the limit.

use convex_hinf::cases::CaseStudy;
use convex_hinf::controller::Controller;
use convex_hinf::linalg::scalar;
use convex_hinf::sim::{self, DisturbanceKind, DisturbanceModel};
use convex_hinf::Result;

fn main() -> Result<()> {
    let case = CaseStudy::preset("fig1")?;
    let p = case.params;
    println!("a = {}, b = {}, gamma = {}, t = {}", p.plant.a, p.plant.b, p.gamma, p.t);
    println!("feasible m: {}, chosen m = {}", case.feasible, p.m);

    let central = case.central();
    let closed = case.closed_form_controller();
    println!("{:>6} {:>6} {:>12} {:>12}", "x", "w", "central", "closed form");
    for (x, w) in [(0.5, 0.0), (2.0, 0.5), (-4.0, 1.0), (5.0, -5.0)] {
        let (xv, wv) = (scalar(x), scalar(w));
        println!(
            "{x:>6} {w:>6} {:>12.6} {:>12.6}",
            central.control(&xv, &wv)?[0],
            closed.control(&xv, &wv)?[0]
        );
    }

    let model = DisturbanceModel::new(DisturbanceKind::WhiteGaussian, 1.0, 7);
    let traj = sim::rollout(&case.certificate, &central, model, 200, None)?;
    let m = sim::metrics(&traj);
    println!("max |u| = {:.4} (limit {}), J_G = {:.4} <= gamma^2 = {:.4}", m.max_abs_u, p.t, m.j_g.unwrap_or(0.0), p.gamma * p.gamma);
    Ok(())
}
