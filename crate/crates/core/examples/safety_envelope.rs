//! Scalar plant with a state box `|x| ≤ t` encoded as an infinite state
//! penalty outside the box. The induced input cost is piecewise quadratic.

use convex_hinf::cases::CaseStudy;
use convex_hinf::controller::Controller;
use convex_hinf::linalg::scalar;
use convex_hinf::Result;

fn main() -> Result<()> {
    let case = CaseStudy::preset("fig2")?;
    let p = case.params;
    let cert = &case.certificate;
    println!("box |x| <= {}, feasible m: {}", p.t, case.feasible);

    let r = case.closed_form.as_ref().expect("safety design has a closed-form r");
    println!("{:>6} {:>14} {:>14}", "u", "r(u) closed", "r(u) generic");
    for u in [0.0, 0.5, 1.0, 2.0, 4.0] {
        println!("{u:>6} {:>14.8} {:>14.8}", r.value(&scalar(u))?, cert.r.value(&scalar(u))?);
    }

    // Starting at the edge of the box, the worst disturbance cannot push
    // the state out under the central law.
    let central = case.central();
    let mut x = scalar(p.t);
    for k in 0..10 {
        let w = cert.worst_case_disturbance(&x)?;
        let u = central.control(&x, &w)?;
        x = cert.sys.step(&x, &u, &w);
        println!("k={k:<2} w={:>9.5} u={:>9.5} x={:>9.5}", w[0], u[0], x[0]);
    }
    Ok(())
}
