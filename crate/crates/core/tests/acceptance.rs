//! Acceptance suite: one PASS/FAIL line per criterion, with runtime
//! budgets where they apply. Runs without the libtest harness so that
//! the lines are always printed.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use convex_hinf::cases::{self, CaseStudy, PRESETS};
use convex_hinf::central::{bregman_identity_gap, Certificate, CentralController};
use convex_hinf::controller::Controller;
use convex_hinf::convex::{
    self, BoundedQuadraticFn, Combination, ComposedFn, ConjugateFn, ExpAbsFn, Piece,
    PiecewiseQuadraticFn, QuadraticFn, SharedFn, Term,
};
use convex_hinf::linalg;
use convex_hinf::quad::{self, LinearController, QuadWeights, SystemLti};
use convex_hinf::run;
use convex_hinf::sim::{self, DisturbanceKind, DisturbanceModel, Trajectory};
use convex_hinf::synthesis::{self, CurvatureBounds, QsCoupling};
use convex_hinf::{Matrix, Vector};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-r..r))
}

fn presets() -> Result<Vec<(&'static str, CaseStudy)>, String> {
    PRESETS.iter().map(|&p| CaseStudy::preset(p).map(|c| (p, c)).map_err(err)).collect()
}

// Quadratic collapse -------------------------------------------------------

fn spectral_radius(a: &Matrix) -> f64 {
    a.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let l = Matrix::from_fn(n, n, |_, _| rng.random_range(-0.6..0.6));
    linalg::symmetrize(&(&l * l.transpose() + Matrix::identity(n, n) * 0.5))
}

struct Instance {
    sys: SystemLti,
    weights: QuadWeights,
    gamma_inf: f64,
}

fn random_instance(rng: &mut ChaCha8Rng, stable: bool) -> Instance {
    let normal = Normal::new(0.0, 1.0).unwrap();
    loop {
        let n = rng.random_range(1..=3);
        let d = rng.random_range(1..=3);
        let a = Matrix::from_fn(n, n, |_, _| normal.sample(rng));
        let rho = spectral_radius(&a);
        if rho < 1e-3 {
            continue;
        }
        let target = if stable { rng.random_range(0.3..0.95) } else { rng.random_range(1.05..1.6) };
        let a = a * (target / rho);
        if a.determinant().abs() < 0.05 * target.powi(n as i32) {
            continue;
        }
        let b = Matrix::from_fn(n, d, |_, _| normal.sample(rng));
        let Ok(sys) = SystemLti::new(a, b) else { continue };
        let weights = QuadWeights {
            q: random_spd(rng, n),
            r: random_spd(rng, d),
            s: random_spd(rng, n),
            p_terminal: Matrix::identity(n, n),
            gamma: 1.0,
        };
        let Ok(search) = quad::gamma_search(&sys, &weights, 1e-4) else { continue };
        return Instance { sys, weights, gamma_inf: search.gamma_inf };
    }
}

fn quadratic_collapse() -> Check {
    let mut rng = rng(1);
    let mut worst_p: f64 = 0.0;
    let mut worst_eig: f64 = 0.0;
    let mut worst_u: f64 = 0.0;
    let mut sign_checks = 0;
    for i in 0..50 {
        let inst = random_instance(&mut rng, i % 2 == 0);
        let (sys, n, d) = (&inst.sys, inst.sys.n(), inst.sys.d());
        let gamma = 1.5 * inst.gamma_inf;
        let w = inst.weights.with_gamma(gamma);
        let p = quad::stationary_are(sys, &w).map_err(err)?;
        let m = linalg::symmetrize(&(&p - &w.q));
        let r: SharedFn = Arc::new(QuadraticFn::new(w.r.clone()).map_err(err)?);
        let s: SharedFn = Arc::new(QuadraticFn::new(w.s.clone()).map_err(err)?);
        let cert = synthesis::induce_rs(sys, gamma, r, s, &m, false).map_err(err)?;
        let central = CentralController::new(Arc::new(cert.clone()));
        let linear = LinearController::new(&p, &w, sys).map_err(err)?;
        for _ in 0..5 {
            let x = uniform_vec(&mut rng, n, 2.0);
            let wv = uniform_vec(&mut rng, n, 2.0);

            let h = cert.p.hessian(&x).map_err(err)? * 0.5;
            worst_p = worst_p.max(linalg::relative_difference(&h, &p));

            let u_c = central.control(&x, &wv).map_err(err)?;
            let u_l = linear.control(&x, &wv).map_err(err)?;
            let scale = linear.gain_x.norm() * x.norm() + linear.gain_w.norm() * wv.norm();
            worst_u = worst_u.max((&u_c - &u_l).norm() / scale.max(f64::MIN_POSITIVE));
            ensure(u_c.len() == d, || format!("instance {i}: input dimension"))?;

            // The nonquadratic test at another level keeps p fixed, as
            // does the quadratic one.
            for level in [gamma, 0.6 * inst.gamma_inf] {
                let eig = cert.with_gamma(level).concavity_max_eig(&x, &wv).map_err(err)?;
                let wl = w.with_gamma(level);
                let delta = quad::delta(&p, &wl, sys).map_err(err)?;
                let reference = 2.0 * linalg::max_eigenvalue(&delta);
                let scale = 2.0 * (quad::woodbury_g(&p, &wl.r, sys).map_err(err)?.norm() + level * level * wl.s.norm());
                worst_eig = worst_eig.max((eig - reference).abs() / scale);
                ensure((eig <= 1e-8) == quad::negativity_test(&p, &wl, sys), || {
                    format!("instance {i}: concavity {eig:e} disagrees with the negativity test at γ = {level}")
                })?;
                sign_checks += 1;
            }
        }
    }
    ensure(worst_p <= 1e-8, || format!("p Hessian/2 vs P relative error {worst_p:.2e}"))?;
    ensure(worst_eig <= 1e-8, || format!("concavity eigenvalue relative error {worst_eig:.2e}"))?;
    ensure(worst_u <= 1e-8, || format!("controller relative error {worst_u:.2e}"))?;
    Ok(format!(
        "50 instances; max rel err p {worst_p:.1e}, concavity {worst_eig:.1e}, control {worst_u:.1e}; {sign_checks} sign checks"
    ))
}

// Bregman identities -------------------------------------------------------

struct Library {
    name: &'static str,
    f: SharedFn,
    /// Samples a point in the interior of the domain.
    sample: Box<dyn Fn(&mut ChaCha8Rng) -> Vector>,
}

fn library() -> Result<Vec<Library>, String> {
    let fig3 = CaseStudy::preset("fig3").map_err(err)?;
    let fig1 = CaseStudy::preset("fig1").map_err(err)?;
    let spd = random_spd(&mut rng(7), 3);
    let map = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    let exp2: SharedFn = Arc::new(ExpAbsFn::new(2));
    let box_fn: SharedFn = Arc::new(BoundedQuadraticFn::with_weights(vec![1.0, 2.0], vec![0.5, 1.0]).map_err(err)?);
    let quad2: SharedFn = Arc::new(QuadraticFn::new(Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5])).map_err(err)?);
    // Only Legendre-type functions: the Huber conjugate of the box is not
    // strictly convex, so it is left to the finite-difference check.
    Ok(vec![
        Library {
            name: "quadratic",
            f: Arc::new(QuadraticFn::new(spd).map_err(err)?),
            sample: Box::new(|r| uniform_vec(r, 3, 3.0)),
        },
        Library {
            name: "bounded_quadratic",
            f: box_fn.clone(),
            sample: Box::new(|r| Vector::from_vec(vec![r.random_range(-0.5..0.5), r.random_range(-1.0..1.0)])),
        },
        Library { name: "exp_abs", f: exp2.clone(), sample: Box::new(|r| uniform_vec(r, 2, 3.0)) },
        Library {
            name: "piecewise_quadratic",
            f: fig1.closed_form.clone().ok_or("fig1 has no closed-form cost")?,
            sample: Box::new(|r| uniform_vec(r, 1, 4.0)),
        },
        Library {
            name: "composed",
            f: Arc::new(ComposedFn::new(exp2.clone(), map, Vector::from_vec(vec![0.1, -0.2]), 1.5).map_err(err)?),
            sample: Box::new(|r| uniform_vec(r, 2, 2.0)),
        },
        Library {
            name: "combination",
            f: Arc::new(
                Combination::new(vec![
                    Term::plain(1.0, exp2.clone()),
                    Term::mapped(0.5, Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), quad2),
                ])
                .map_err(err)?,
            ),
            sample: Box::new(|r| uniform_vec(r, 2, 2.5)),
        },
        Library {
            name: "conjugate",
            f: Arc::new(ConjugateFn::new(exp2)),
            sample: Box::new(|r| uniform_vec(r, 2, 10.0)),
        },
        Library {
            name: "conjugate_difference",
            f: fig3.certificate.m.clone(),
            sample: Box::new(|r| uniform_vec(r, 1, 5.0)),
        },
        Library {
            name: "induced_disturbance_cost",
            f: fig3.certificate.s.clone(),
            sample: Box::new(|r| uniform_vec(r, 1, 3.0)),
        },
    ])
}

fn bregman_suite() -> Check {
    let mut rng = rng(2);
    let mut worst: f64 = 0.0;
    let lib = library()?;
    for entry in &lib {
        let f = entry.f.as_ref();
        let n = f.dim();
        let partner: SharedFn = Arc::new(QuadraticFn::scaled_identity(n, 0.7));
        for k in 0..1000 {
            let (x, y, z) = ((entry.sample)(&mut rng), (entry.sample)(&mut rng), (entry.sample)(&mut rng));
            let fx = f.value(&x).map_err(err)?;
            let fy = f.value(&y).map_err(err)?;
            let fz = f.value(&z).map_err(err)?;
            let gy = f.gradient(&y).map_err(err)?;
            let scale = 1.0 + fx.abs() + fy.abs() + fz.abs() + gy.dot(&(&x - &y)).abs();
            let d = convex::bregman(f, &x, &y).map_err(err)?;
            let dual = convex::check_duality_identity(f, &x, &y).map_err(err)?;
            let three = convex::check_three_point(&entry.f, &partner, &x, &y, &z).map_err(err)?;
            ensure(d >= -1e-9 * scale, || format!("{} sample {k}: D = {d:e}", entry.name))?;
            worst = worst.max(dual / scale).max(three / scale);
        }
        ensure(worst <= 1e-9, || format!("{}: relative identity error {worst:.2e}", entry.name))?;
    }
    Ok(format!("{} functions x 1000 samples; max relative error {worst:.1e}", lib.len()))
}

// Trajectory identity ------------------------------------------------------

fn trajectory(cert: &Certificate, xs: Vec<Vector>, us: Vec<Vector>, ws: Vec<Vector>) -> Result<Trajectory, String> {
    let mut t = Trajectory {
        q: Vec::new(),
        r: Vec::new(),
        s: Vec::new(),
        p_next: Vec::new(),
        gamma: cert.gamma,
        xs,
        us,
        ws,
    };
    for k in 0..t.ws.len() {
        t.q.push(cert.q.value(&t.xs[k]).map_err(err)?);
        t.r.push(cert.r.value(&t.us[k]).map_err(err)?);
        t.s.push(cert.s.value(&t.ws[k]).map_err(err)?);
        t.p_next.push(cert.p.value(&t.xs[k + 1]).map_err(err)?);
    }
    Ok(t)
}

/// Random admissible inputs: `u` keeps every cost finite.
fn random_input(name: &str, cert: &Certificate, rng: &mut ChaCha8Rng, x: &Vector, w: &Vector) -> Result<Vector, String> {
    let sys = &cert.sys;
    Ok(match name {
        "fig1" => uniform_vec(rng, 1, 0.1),
        "fig2" => {
            // Aim at a random point inside the state box.
            let target = rng.random_range(-0.199..0.199);
            Vector::from_element(1, (target - (&sys.a * x + w)[0]) / sys.b[(0, 0)])
        }
        _ => cert.central_control(x, w).map_err(err)? + uniform_vec(rng, sys.d(), 0.5),
    })
}

fn trajectory_identity() -> Check {
    let mut cases: Vec<(&str, Certificate)> =
        presets()?.into_iter().map(|(n, c)| (n, c.certificate.as_ref().clone())).collect();
    cases.push(("two_state", common::two_state_qr()));
    let mut rng = rng(3);
    let mut worst: f64 = 0.0;
    for (name, cert) in &cases {
        let n = cert.sys.n();
        for j in 0..100 {
            let scale = rng.random_range(0.05..0.5);
            let central_loop = j % 2 == 0;
            let mut xs = vec![Vector::zeros(n)];
            let (mut us, mut ws) = (Vec::new(), Vec::new());
            for _ in 0..=50 {
                let x = xs.last().unwrap().clone();
                let w = uniform_vec(&mut rng, n, scale);
                let u = if central_loop {
                    cert.central_control(&x, &w).map_err(err)?
                } else {
                    random_input(name, cert, &mut rng, &x, &w)?
                };
                xs.push(cert.sys.step(&x, &u, &w));
                us.push(u);
                ws.push(w);
            }
            let traj = trajectory(cert, xs, us, ws)?;
            let gap = bregman_identity_gap(cert, &traj).map_err(err)?;
            ensure(gap.max_step_gap <= 1e-7, || format!("{name} trajectory {j}: step gap {:.2e}", gap.max_step_gap))?;
            ensure(gap.total_gap <= 1e-7 * 51.0, || format!("{name} trajectory {j}: total gap {:.2e}", gap.total_gap))?;
            worst = worst.max(gap.max_step_gap);
        }
    }
    Ok(format!("{} plants x 100 trajectories of T = 50; max step gap {worst:.1e}", cases.len()))
}

// Worst-case attainment -------------------------------------------------------

const W_LO: f64 = -5.0;
const W_STEPS: usize = 100_000;
const W_STEP: f64 = 1e-4;

fn objective_at(cert: &Certificate, x: f64, i: usize) -> Result<f64, String> {
    let w = W_LO + i as f64 * W_STEP;
    cert.disturbance_objective(&linalg::scalar(x), &linalg::scalar(w)).map_err(err)
}

/// Argmax over the grid by exhaustive search.
fn grid_argmax_exhaustive(cert: &Certificate, x: f64) -> Result<(f64, f64), String> {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..=W_STEPS {
        let v = objective_at(cert, x, i)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok((W_LO + best.0 as f64 * W_STEP, best.1))
}

/// Argmax over the same grid by discrete ternary search, exact for a
/// strictly concave objective.
fn grid_argmax_unimodal(cert: &Certificate, x: f64) -> Result<(f64, f64), String> {
    let (mut lo, mut hi) = (0usize, W_STEPS);
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if objective_at(cert, x, m1)? < objective_at(cert, x, m2)? {
            lo = m1 + 1;
        } else {
            hi = m2;
        }
    }
    let mut best = (lo, objective_at(cert, x, lo)?);
    for i in lo + 1..=hi {
        let v = objective_at(cert, x, i)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok((W_LO + best.0 as f64 * W_STEP, best.1))
}

fn worst_case_attainment() -> Check {
    let mut rng = rng(4);
    let mut worst_arg: f64 = 0.0;
    let mut worst_val: f64 = 0.0;
    let mut notes = Vec::new();
    for (name, case) in presets()? {
        let cert = case.certificate.as_ref();
        // The exponential design has a numerically induced s, which makes
        // the exhaustive scan too slow for every sample; its verified
        // concavity makes the unimodal search exact, and a few exhaustive
        // scans confirm the two agree.
        let exhaustive = name != "fig3";
        if !exhaustive {
            for k in 0..3 {
                let x = -4.0 + 4.0 * k as f64 + 0.37;
                let a = grid_argmax_exhaustive(cert, x)?;
                let b = grid_argmax_unimodal(cert, x)?;
                ensure(a == b, || format!("{name}: unimodal search disagrees with the scan at x = {x}"))?;
            }
        }
        for k in 0..1000 {
            let x = rng.random_range(-5.0..5.0);
            let (w_grid, v_grid) =
                if exhaustive { grid_argmax_exhaustive(cert, x)? } else { grid_argmax_unimodal(cert, x)? };
            let w_hat = cert.worst_case_disturbance(&linalg::scalar(x)).map_err(err)?[0];
            let v_hat = cert.disturbance_objective(&linalg::scalar(x), &linalg::scalar(w_hat)).map_err(err)?;
            let da = (w_hat - w_grid).abs();
            let dv = (v_hat - v_grid).abs();
            ensure(da <= 1e-3 && dv <= 1e-6, || {
                format!("{name} sample {k} (x = {x}): ŵ = {w_hat}, grid {w_grid}, value gap {dv:.2e}")
            })?;
            ensure(v_hat >= v_grid - 1e-12 * (1.0 + v_grid.abs()), || {
                format!("{name} sample {k}: the grid beats ŵ by {:.2e}", v_grid - v_hat)
            })?;
            worst_arg = worst_arg.max(da);
            worst_val = worst_val.max(dv);
        }
        notes.push(if exhaustive { format!("{name} scan") } else { format!("{name} unimodal") });
    }
    Ok(format!(
        "1000 x per preset ({}); max |Δw| {worst_arg:.1e}, max |Δvalue| {worst_val:.1e}",
        notes.join(", ")
    ))
}

// Case-study formulas ------------------------------------------------------

fn case_formulas() -> Check {
    // Reference values computed by hand from the closed forms.
    let v = cases::v_gamma(0.6, 1.0, 0.11, 1.32);
    ensure((v - 0.09359).abs() <= 1e-5, || format!("v_γ = {v}"))?;
    let fig3 = CaseStudy::preset("fig3").map_err(err)?;
    let target = -(3.7f64).ln();
    let generic = fig3.central().control(&linalg::scalar(1.0), &linalg::scalar(0.0)).map_err(err)?[0];
    let closed = fig3.closed_form_controller().scalar(1.0, 0.0);
    ensure((generic - target).abs() <= 1e-10, || format!("generic u(1,0) = {generic}, expected {target}"))?;
    ensure((closed - target).abs() <= 1e-10, || format!("closed-form u(1,0) = {closed}, expected {target}"))?;
    let mut devs = Vec::new();
    for (name, case) in presets()? {
        let dev = run::closed_form_deviation(&case, 100).map_err(err)?;
        ensure(dev <= 1e-8, || format!("{name}: closed-form vs generic deviation {dev:.2e}"))?;
        devs.push(format!("{name} {dev:.1e}"));
    }
    Ok(format!("v_γ = {v:.6}; u(1,0) = {generic:.12}; 10⁴-point deviations: {}", devs.join(", ")))
}

// Certified bound ------------------------------------------------------------

fn certified_bound() -> Check {
    let mut notes = Vec::new();
    for (index, (name, case)) in presets()?.into_iter().enumerate() {
        let cert = case.certificate.as_ref();
        let base = run::baseline(&cert.sys, &case.baseline_weights()).map_err(err)?;
        let scales: [f64; 3] = if name == "fig3" { [0.25, 0.5, 1.0] } else { [0.1, 0.5, 1.0] };
        let mut models = Vec::with_capacity(10_000);
        let mut seed = 1_000_000 * index as u64;
        for kind in DisturbanceKind::NOISE {
            for scale in scales {
                for _ in 0..1100 {
                    models.push(DisturbanceModel::new(kind, scale, seed));
                    seed += 1;
                }
            }
        }
        for kind in [DisturbanceKind::WorstCaseCentral, DisturbanceKind::WorstCaseQuadratic] {
            for _ in 0..50 {
                models.push(DisturbanceModel::new(kind, scales[1], seed));
                seed += 1;
            }
        }
        let controller = case.central();
        let summary =
            sim::monte_carlo(cert, &controller, &models, 100, Some(&base.worst_case_gain)).map_err(err)?;
        let g2 = cert.gamma * cert.gamma;
        ensure(summary.runs == 10_000, || format!("{name}: {} runs", summary.runs))?;
        ensure(summary.violations == 0, || {
            format!(
                "{name}: {} violating runs (max J_G {} vs γ² {g2}, min J_T {:e})",
                summary.violations, summary.max_j_g, summary.min_j_t
            )
        })?;
        if name == "fig1" {
            ensure(summary.max_abs_u <= case.params.t, || format!("fig1: max |u| = {}", summary.max_abs_u))?;
        }
        notes.push(format!("{name} J_G ≤ {:.4} (γ² {g2:.4}), min J_T {:.2e}", summary.max_j_g, summary.min_j_t));
    }
    Ok(notes.join("; "))
}

// Lyapunov convergence ---------------------------------------------------------

fn lyapunov() -> Check {
    let mut rng = rng(6);
    let mut slowest = 0usize;
    for (name, case) in presets()? {
        let cert = case.certificate.as_ref();
        let controller = case.central();
        let r = case.params.envelope;
        for j in 0..1000 {
            let kick = loop {
                let v = rng.random_range(-r..r);
                if v.abs() > 1e-3 {
                    break linalg::scalar(v);
                }
            };
            // x₁ after the kick, then 199 more steps: the last state is x₂₀₀.
            let (values, last) = sim::free_response(cert, &controller, &kick, 199).map_err(err)?;
            for k in 0..values.len() - 1 {
                if values[k] < 1e-250 {
                    break;
                }
                ensure(values[k + 1] < values[k], || {
                    format!("{name} kick {j}: p rises at step {} ({:e} → {:e})", k + 1, values[k], values[k + 1])
                })?;
                slowest = slowest.max(k + 1);
            }
            ensure(last.norm() < 1e-6, || format!("{name} kick {j}: ‖x₂₀₀‖ = {:e}", last.norm()))?;
        }
    }
    Ok(format!("3 presets x 1000 kicks; p strictly decreasing over up to {slowest} steps, ‖x₂₀₀‖ < 1e-6"))
}

// Feasibility programs ---------------------------------------------------------

fn feasibility() -> Check {
    let two = CurvatureBounds::scalar(2.0, 2.0).map_err(err)?;
    let p1 = cases::CaseParams::preset("fig1").map_err(err)?;
    let p2 = cases::CaseParams::preset("fig2").map_err(err)?;
    let p3 = cases::CaseParams::preset("fig3").map_err(err)?;

    let sys1 = p1.plant.system().map_err(err)?;
    let rs = synthesis::feasibility_rs(&sys1, p1.gamma, &two, &two).map_err(err)?;
    ensure(rs.contains(0.11), || format!("RS interval {rs} misses m = 0.11"))?;

    let sys2 = p2.plant.system().map_err(err)?;
    let qs = synthesis::feasibility_qs(&sys2, p2.gamma, &two, &two, QsCoupling::Derived).map_err(err)?;
    ensure(qs.contains(0.2), || format!("QS interval {qs} misses m = 0.2"))?;

    let sys3 = p3.plant.system().map_err(err)?;
    let u_max = cases::exponential_input_envelope(&p3);
    let r_bounds = CurvatureBounds::scalar(1.0, u_max.exp()).map_err(err)?;
    let qr = synthesis::feasibility_qr(&sys3, &two, &r_bounds).map_err(err)?;
    ensure(qr.contains(15.0), || format!("QR interval {qr} misses G = 15"))?;

    let gamma_inf = quad::gamma_search(&sys1, &QuadWeights::unit(1, 1, 1.0), 1e-9).map_err(err)?.gamma_inf;
    for below in [gamma_inf * (1.0 - 1e-6), 0.92] {
        let set = synthesis::feasibility_rs(&sys1, below, &two, &two).map_err(err)?;
        ensure(set.is_empty(), || format!("RS interval nonempty at γ = {below} below γ_inf = {gamma_inf}"))?;
    }
    Ok(format!("RS {rs}, QS {qs}, QR {qr}; RS empty below γ_inf = {gamma_inf:.6}"))
}

// Finite-difference fidelity -----------------------------------------------------

struct FdCase {
    name: String,
    f: SharedFn,
    radius: f64,
    /// Rejects points too close to a kink of the Hessian.
    interior: Box<dyn Fn(&Vector) -> bool>,
}

fn away_from(points: Vec<f64>, tol: f64) -> Box<dyn Fn(&Vector) -> bool> {
    Box::new(move |x: &Vector| x.iter().all(|v| points.iter().all(|k| (v - k).abs() > tol)))
}

fn fd_cases() -> Result<Vec<FdCase>, String> {
    let exp2: SharedFn = Arc::new(ExpAbsFn::new(2));
    let box_fn: SharedFn = Arc::new(BoundedQuadraticFn::with_weights(vec![1.0, 2.0], vec![0.5, 1.0]).map_err(err)?);
    let pieces: SharedFn = Arc::new(
        PiecewiseQuadraticFn::new(vec![
            Piece { start: 0.0, a: 1.0, b: 0.0, c: 0.0 },
            Piece { start: 1.0, a: 2.0, b: -2.0, c: 1.0 },
        ])
        .map_err(err)?,
    );
    let map = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    let shift = Vector::from_vec(vec![0.1, -0.2]);
    let composed: SharedFn = Arc::new(ComposedFn::new(exp2.clone(), map.clone(), shift.clone(), 1.5).map_err(err)?);
    let quad2: SharedFn = Arc::new(QuadraticFn::new(Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5])).map_err(err)?);
    let combination: SharedFn = Arc::new(
        Combination::new(vec![Term::plain(1.0, exp2.clone()), Term::plain(0.5, quad2)]).map_err(err)?,
    );
    let fig3 = CaseStudy::preset("fig3").map_err(err)?;
    let tol = 1e-2;
    let box_interior = Box::new(|x: &Vector| x[0].abs() < 0.49 && x[1].abs() < 0.99);
    Ok(vec![
        FdCase {
            name: "quadratic".into(),
            f: Arc::new(QuadraticFn::new(random_spd(&mut rng(9), 3)).map_err(err)?),
            radius: 3.0,
            interior: Box::new(|_| true),
        },
        FdCase { name: "bounded_quadratic".into(), f: box_fn.clone(), radius: 1.0, interior: box_interior },
        FdCase {
            name: "conjugate(bounded_quadratic)".into(),
            f: Arc::new(ConjugateFn::new(box_fn)),
            radius: 6.0,
            interior: away_from(vec![-4.0, -1.0, 1.0, 4.0], tol),
        },
        FdCase { name: "exp_abs".into(), f: exp2.clone(), radius: 3.0, interior: away_from(vec![0.0], tol) },
        FdCase {
            name: "conjugate(exp_abs)".into(),
            f: Arc::new(ConjugateFn::new(exp2.clone())),
            radius: 10.0,
            interior: away_from(vec![0.0], tol),
        },
        FdCase {
            name: "piecewise_quadratic".into(),
            f: pieces.clone(),
            radius: 3.0,
            interior: away_from(vec![-1.0, 1.0], tol),
        },
        FdCase {
            name: "conjugate(piecewise_quadratic)".into(),
            f: Arc::new(ConjugateFn::new(pieces)),
            radius: 6.0,
            interior: away_from(vec![-2.0, 2.0], tol),
        },
        FdCase {
            name: "composed".into(),
            f: composed,
            radius: 2.0,
            interior: Box::new(move |x: &Vector| (&map * x + &shift).iter().all(|v| v.abs() > tol)),
        },
        FdCase { name: "combination".into(), f: combination, radius: 2.0, interior: away_from(vec![0.0], tol) },
        FdCase {
            name: "conjugate_difference".into(),
            f: fig3.certificate.m.clone(),
            radius: 5.0,
            interior: away_from(vec![0.0], tol),
        },
        FdCase {
            name: "induced_disturbance_cost".into(),
            f: fig3.certificate.s.clone(),
            radius: 5.0,
            interior: away_from(vec![0.0], tol),
        },
    ])
}

fn finite_differences() -> Check {
    let mut rng = rng(8);
    let mut worst: f64 = 0.0;
    let cases = fd_cases()?;
    for case in &cases {
        let n = case.f.dim();
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < 100 {
            attempts += 1;
            ensure(attempts < 10_000, || format!("{}: too few interior points", case.name))?;
            let x = uniform_vec(&mut rng, n, case.radius);
            if !(case.interior)(&x) {
                continue;
            }
            let (ge, he) = convex::finite_diff_check(case.f.as_ref(), &x).map_err(err)?;
            ensure(ge < 1e-5 && he < 1e-5, || format!("{} at {:?}: gradient {ge:.2e}, Hessian {he:.2e}", case.name, x.as_slice()))?;
            worst = worst.max(ge).max(he);
            accepted += 1;
        }
    }
    Ok(format!("{} functions x 100 points; max relative error {worst:.1e}", cases.len()))
}

// Runner ---------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(&str, Option<Duration>, fn() -> Check); 9] = [
        ("quadratic_collapse", Some(Duration::from_secs(30)), quadratic_collapse),
        ("bregman_identities", Some(Duration::from_secs(5)), bregman_suite),
        ("trajectory_identity", Some(Duration::from_secs(10)), trajectory_identity),
        ("worst_case_attainment", None, worst_case_attainment),
        ("case_study_formulas", None, case_formulas),
        ("certified_bound", Some(Duration::from_secs(120)), certified_bound),
        ("lyapunov_convergence", None, lyapunov),
        ("feasibility_programs", None, feasibility),
        ("finite_difference_fidelity", None, finite_differences),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.1?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} [{elapsed:.1?}] {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} [{elapsed:.1?}] {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
