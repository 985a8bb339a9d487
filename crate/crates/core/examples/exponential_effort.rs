//! Exponential input penalty `e^{|u|} − |u| − 1` with a quadratic state
//! cost. The central law is logarithmic in the state, so input effort
//! grows only slowly with large deviations.

use convex_hinf::cases::{self, CaseStudy};
use convex_hinf::controller::Controller;
use convex_hinf::linalg::scalar;
use convex_hinf::quad::LinearController;
use convex_hinf::run;
use convex_hinf::Result;

fn main() -> Result<()> {
    let case = CaseStudy::preset("fig3")?;
    let p = case.params;
    println!("G = {}, feasible G: {}", p.g, case.feasible);
    println!("input envelope over |x|,|w| <= {}: {:.4}", p.envelope, cases::exponential_input_envelope(&p));

    let base = run::baseline(&case.certificate.sys, &case.baseline_weights())?;
    let linear: &LinearController = &base.controller;
    let central = case.central();
    println!("{:>6} {:>12} {:>12}", "x", "central", "quadratic");
    for x in [0.1, 1.0, 3.0, 10.0, 30.0] {
        let (xv, wv) = (scalar(x), scalar(0.0));
        println!("{x:>6} {:>12.6} {:>12.6}", central.control(&xv, &wv)?[0], linear.control(&xv, &wv)?[0]);
    }
    println!("max deviation from the closed form: {:.2e}", run::closed_form_deviation(&case, 200)?);
    Ok(())
}
