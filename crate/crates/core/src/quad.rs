//! Quadratic H∞ baseline: finite-horizon recursion, stationary
//! inverse-form ARE, existence tests, the linear central law and the
//! search for the infimal performance level.

use serde::{Deserialize, Serialize};

use crate::controller::{Controller, ControllerKind};
use crate::error::{HinfError, Result};
use crate::linalg::{self, Matrix, Vector, EIG_TOL};

/// Plant `x⁺ = A x + B u + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemLti {
    pub a: Matrix,
    pub b: Matrix,
    a_inv: Matrix,
}

impl SystemLti {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(HinfError::Dimension("A must be square".into()));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(HinfError::Dimension(format!(
                "B is {}x{}, A is {}x{}",
                b.nrows(),
                b.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(HinfError::Config("non-finite system matrix".into()));
        }
        let cond = linalg::condition_number(&a);
        if !cond.is_finite() || cond > 1e12 {
            return Err(HinfError::Config(format!("A is not invertible (condition number {cond:.3e})")));
        }
        if linalg::rank(&b) < b.nrows().min(b.ncols()) {
            return Err(HinfError::Config("B is rank deficient".into()));
        }
        let a_inv = linalg::inverse(&a)?;
        Ok(Self { a, b, a_inv })
    }

    /// Plant without the invertibility requirement on `A`; only the
    /// finite-horizon recursion accepts it.
    pub fn new_unchecked(a: Matrix, b: Matrix) -> Self {
        let a_inv = a.clone().try_inverse().unwrap_or_else(|| Matrix::zeros(a.nrows(), a.ncols()));
        Self { a, b, a_inv }
    }

    pub fn scalar(a: f64, b: f64) -> Result<Self> {
        Self::new(Matrix::from_element(1, 1, a), Matrix::from_element(1, 1, b))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.b.ncols()
    }

    pub fn a_inv(&self) -> &Matrix {
        &self.a_inv
    }

    pub fn step(&self, x: &Vector, u: &Vector, w: &Vector) -> Vector {
        &self.a * x + &self.b * u + w
    }
}

/// Weights of the quadratic problem with performance level `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadWeights {
    pub q: Matrix,
    pub r: Matrix,
    pub s: Matrix,
    pub p_terminal: Matrix,
    pub gamma: f64,
}

impl QuadWeights {
    pub fn unit(n: usize, d: usize, gamma: f64) -> Self {
        Self {
            q: Matrix::identity(n, n),
            r: Matrix::identity(d, d),
            s: Matrix::identity(n, n),
            p_terminal: Matrix::identity(n, n),
            gamma,
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    pub fn validate(&self, sys: &SystemLti) -> Result<()> {
        let (n, d) = (sys.n(), sys.d());
        for (name, m, k) in [
            ("Q", &self.q, n),
            ("R", &self.r, d),
            ("S", &self.s, n),
            ("P_terminal", &self.p_terminal, n),
        ] {
            if m.nrows() != k || m.ncols() != k {
                return Err(HinfError::Dimension(format!("{name} must be {k}x{k}")));
            }
            if (m - m.transpose()).norm() > 1e-10 * m.norm().max(1.0) {
                return Err(HinfError::Config(format!("{name} is not symmetric")));
            }
            if linalg::min_eigenvalue(m) < -EIG_TOL {
                return Err(HinfError::Config(format!("{name} is not positive semidefinite")));
            }
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(HinfError::Config("gamma must be positive".into()));
        }
        Ok(())
    }

    pub fn require_definite(&self) -> Result<()> {
        if !linalg::is_positive_definite(&self.r) || !linalg::is_positive_definite(&self.s) {
            return Err(HinfError::Config("stationary problem needs R ≻ 0 and S ≻ 0".into()));
        }
        Ok(())
    }
}

/// Output of the backward recursion. `p[k]` is `P_k` for `k = 0..=T+1`;
/// the per-step vectors are indexed by `k = 0..=T`.
#[derive(Debug, Clone)]
pub struct RiccatiRun {
    pub p: Vec<Matrix>,
    pub gains: Vec<Matrix>,
    pub re_blocks: Vec<Matrix>,
    pub deltas: Vec<Matrix>,
    pub feasible: bool,
}

/// `Δ = −γ²S + P − P B (R + BᵀPB)⁻¹ BᵀP`.
pub fn delta(p: &Matrix, w: &QuadWeights, sys: &SystemLti) -> Result<Matrix> {
    let rb = &w.r + sys.b.transpose() * p * &sys.b;
    let pb = p * &sys.b;
    let corr = &pb * linalg::inverse(&rb).map_err(|_| HinfError::Synthesis("R + BᵀPB is singular".into()))?
        * pb.transpose();
    Ok(linalg::symmetrize(&(p - corr - &w.s * (w.gamma * w.gamma))))
}

/// Joint gain `K_c = R_e⁻¹ [Bᵀ; I] P A` and the block `R_e`.
pub fn joint_gain(p: &Matrix, w: &QuadWeights, sys: &SystemLti) -> Result<(Matrix, Matrix)> {
    let (n, d) = (sys.n(), sys.d());
    let bt = sys.b.transpose();
    let mut re = Matrix::zeros(d + n, d + n);
    re.view_mut((0, 0), (d, d)).copy_from(&(&w.r + &bt * p * &sys.b));
    re.view_mut((0, d), (d, n)).copy_from(&(&bt * p));
    re.view_mut((d, 0), (n, d)).copy_from(&(p * &sys.b));
    re.view_mut((d, d), (n, n)).copy_from(&(p - &w.s * (w.gamma * w.gamma)));
    let mut stacked = Matrix::zeros(d + n, n);
    stacked.view_mut((0, 0), (d, n)).copy_from(&bt);
    stacked.view_mut((d, 0), (n, n)).copy_from(&Matrix::identity(n, n));
    let rhs = stacked * p * &sys.a;
    let gain = re
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| HinfError::Synthesis("R_e is singular".into()))?;
    Ok((gain, re))
}

/// Backward recursion `P_k = AᵀP_{k+1}A + Q − K_cᵀ R_e K_c` from
/// `P_{T+1} = P_terminal`, recording `Δ_k` at every step.
pub fn riccati_backward(sys: &SystemLti, w: &QuadWeights, horizon: usize) -> Result<RiccatiRun> {
    w.validate(sys)?;
    let steps = horizon + 1;
    let mut p = vec![Matrix::zeros(0, 0); steps + 1];
    let mut gains = vec![Matrix::zeros(0, 0); steps];
    let mut re_blocks = vec![Matrix::zeros(0, 0); steps];
    let mut deltas = vec![Matrix::zeros(0, 0); steps];
    p[steps] = w.p_terminal.clone();
    let mut feasible = true;
    for k in (0..steps).rev() {
        let next = &p[k + 1];
        let d = delta(next, w, sys)?;
        if linalg::max_eigenvalue(&d) > EIG_TOL {
            feasible = false;
        }
        let (gain, re) = joint_gain(next, w, sys)?;
        let pk = sys.a.transpose() * next * &sys.a + &w.q - gain.transpose() * &re * &gain;
        let drift = (&pk - pk.transpose()).norm();
        if drift > 1e-8 * pk.norm().max(1.0) {
            return Err(HinfError::Numerical(format!("P_{k} lost symmetry (drift {drift:.3e})")));
        }
        p[k] = linalg::symmetrize(&pk);
        gains[k] = gain;
        re_blocks[k] = re;
        deltas[k] = d;
    }
    Ok(RiccatiRun { p, gains, re_blocks, deltas, feasible })
}

/// Discrete-time LQR Riccati solution by value iteration from `P = Q`.
pub fn lqr_are(sys: &SystemLti, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    let mut p = q.clone();
    let bt = sys.b.transpose();
    for _ in 0..100_000 {
        let rb = r + &bt * &p * &sys.b;
        let pa = &p * &sys.a;
        let next = linalg::symmetrize(
            &(sys.a.transpose() * &pa + q - pa.transpose() * &sys.b * linalg::inverse(&rb)? * &bt * &pa),
        );
        let diff = (&next - &p).norm();
        p = next;
        if diff <= 1e-14 * p.norm().max(1.0) {
            return Ok(p);
        }
        if !p.norm().is_finite() {
            break;
        }
    }
    Err(HinfError::NoConvergence {
        what: "LQR Riccati iteration".into(),
        iterations: 100_000,
        residual: f64::NAN,
    })
}

/// Right-hand side of the inverse-form ARE,
/// `Q + Aᵀ (P⁻¹ + BR⁻¹Bᵀ − γ⁻²S⁻¹)⁻¹ A`, evaluated as
/// `Q + Aᵀ (I + P N)⁻¹ P A` so that `P` need not be inverted.
fn are_map(p: &Matrix, n_mat: &Matrix, sys: &SystemLti, q: &Matrix) -> Option<Matrix> {
    let n = p.nrows();
    let core = (Matrix::identity(n, n) + p * n_mat).lu().solve(p)?;
    let core = linalg::symmetrize(&core);
    if linalg::min_eigenvalue(&core) <= 0.0 {
        return None;
    }
    Some(linalg::symmetrize(&(q + sys.a.transpose() * core * &sys.a)))
}

/// `N = BR⁻¹Bᵀ − γ⁻²S⁻¹`.
pub fn are_coupling(sys: &SystemLti, w: &QuadWeights) -> Result<Matrix> {
    let r_inv = linalg::inverse(&w.r)?;
    let s_inv = linalg::inverse(&w.s)?;
    Ok(&sys.b * r_inv * sys.b.transpose() - s_inv / (w.gamma * w.gamma))
}

/// Residual `‖P − Q − Aᵀ(P⁻¹ + N)⁻¹A‖ / max(1, ‖P‖)`.
pub fn are_residual(p: &Matrix, sys: &SystemLti, w: &QuadWeights) -> Result<f64> {
    let n_mat = are_coupling(sys, w)?;
    match are_map(p, &n_mat, sys, &w.q) {
        Some(next) => Ok((next - p).norm() / p.norm().max(1.0)),
        None => Ok(f64::INFINITY),
    }
}

const ARE_MAX_ITER: usize = 200_000;

/// Stationary solution of `P = Q + Aᵀ(P⁻¹ + BR⁻¹Bᵀ − γ⁻²S⁻¹)⁻¹A` by damped
/// fixed-point iteration (damping ½) from the LQR solution.
///
/// Divergence, loss of positivity or stagnation is reported as an
/// infeasible level.
pub fn stationary_are(sys: &SystemLti, w: &QuadWeights) -> Result<Matrix> {
    w.validate(sys)?;
    w.require_definite()?;
    let n_mat = are_coupling(sys, w)?;
    let mut p = lqr_are(sys, &w.q, &w.r)?;
    let infeasible = |why: &str| HinfError::Infeasible(format!("stationary ARE at γ = {}: {why}", w.gamma));
    for _ in 0..ARE_MAX_ITER {
        let next = are_map(&p, &n_mat, sys, &w.q).ok_or_else(|| infeasible("P⁻¹ + N lost positivity"))?;
        let resid = (&next - &p).norm() / p.norm().max(1.0);
        if !resid.is_finite() || p.norm() > 1e12 {
            return Err(infeasible("iteration diverged"));
        }
        if resid <= 1e-13 {
            p = next;
            break;
        }
        p = (&p + next) * 0.5;
    }
    let resid = are_residual(&p, sys, w)?;
    if resid > 1e-10 {
        return Err(infeasible(&format!("no fixed point (residual {resid:.3e})")));
    }
    if !linalg::is_positive_definite(&p) {
        return Err(infeasible("solution is not positive definite"));
    }
    Ok(p)
}

/// `−γ²S + P − PB(R+BᵀPB)⁻¹BᵀP ⪯ 0` to eigenvalue tolerance.
pub fn negativity_test(p: &Matrix, w: &QuadWeights, sys: &SystemLti) -> bool {
    match delta(p, w, sys) {
        Ok(d) => linalg::max_eigenvalue(&d) <= EIG_TOL,
        Err(_) => false,
    }
}

/// Woodbury form `G = (P⁻¹ + BR⁻¹Bᵀ)⁻¹ = P − PB(R + BᵀPB)⁻¹BᵀP`.
pub fn woodbury_g(p: &Matrix, r: &Matrix, sys: &SystemLti) -> Result<Matrix> {
    let pb = p * &sys.b;
    let rb = r + sys.b.transpose() * &pb;
    Ok(linalg::symmetrize(&(p - &pb * linalg::inverse(&rb)? * pb.transpose())))
}

/// Full-information law `u = K_x x + K_w w` with
/// `K_w = −(R + BᵀPB)⁻¹BᵀP`, `K_x = K_w A`.
#[derive(Debug, Clone)]
pub struct LinearController {
    pub gain_x: Matrix,
    pub gain_w: Matrix,
    r_inv: Matrix,
    g: Matrix,
    b: Matrix,
    a: Matrix,
}

impl LinearController {
    pub fn new(p: &Matrix, w: &QuadWeights, sys: &SystemLti) -> Result<Self> {
        let bt = sys.b.transpose();
        let rb = &w.r + &bt * p * &sys.b;
        let gain_w = -(linalg::inverse(&rb)? * &bt * p);
        let gain_x = &gain_w * &sys.a;
        let r_inv = linalg::inverse(&w.r)?;
        let g = woodbury_g(p, &w.r, sys)?;
        Ok(Self {
            gain_x,
            gain_w,
            r_inv,
            g,
            b: sys.b.clone(),
            a: sys.a.clone(),
        })
    }

    /// The same law written as `−R⁻¹BᵀG(Ax + w)`.
    pub fn control_woodbury(&self, x: &Vector, w: &Vector) -> Vector {
        -(&self.r_inv * self.b.transpose() * &self.g * (&self.a * x + w))
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }
}

impl Controller for LinearController {
    fn control(&self, x: &Vector, w: &Vector) -> Result<Vector> {
        Ok(&self.gain_x * x + &self.gain_w * w)
    }

    fn input_dim(&self) -> usize {
        self.gain_x.nrows()
    }

    fn kind(&self) -> ControllerKind {
        ControllerKind::Linear
    }

    fn name(&self) -> String {
        "quadratic_hinf".into()
    }
}

/// Maximizing disturbance of the quadratic game, `ŵ = −K_w x` where
/// `K_w` is the disturbance block of the stationary `K_c`.
pub fn worst_case_gain(p: &Matrix, w: &QuadWeights, sys: &SystemLti) -> Result<Matrix> {
    let (gain, _) = joint_gain(p, w, sys)?;
    let d = sys.d();
    Ok(-gain.rows(d, sys.n()).into_owned())
}

/// True when the stationary problem at `w.gamma` has a positive definite
/// solution that passes the negativity test.
pub fn is_feasible(sys: &SystemLti, w: &QuadWeights) -> bool {
    match stationary_are(sys, w) {
        Ok(p) => negativity_test(&p, w, sys),
        Err(_) => false,
    }
}

/// Result of a bisection on γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSearch {
    pub gamma_inf: f64,
    pub lower: f64,
    pub evaluations: usize,
}

/// Infimal feasible γ to absolute tolerance `tol`, found by bracketing
/// and bisection over [`is_feasible`]. The returned level is feasible.
pub fn gamma_search(sys: &SystemLti, weights: &QuadWeights, tol: f64) -> Result<GammaSearch> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(HinfError::Config("gamma_search tolerance must be positive".into()));
    }
    let mut evaluations = 0;
    let mut feasible = |g: f64| {
        evaluations += 1;
        is_feasible(sys, &weights.with_gamma(g))
    };
    let mut hi = 1.0;
    while !feasible(hi) {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(HinfError::Config("no feasible γ below 1e8".into()));
        }
    }
    let mut lo = hi / 2.0;
    while feasible(lo) {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-9 {
            return Ok(GammaSearch { gamma_inf: hi, lower: 0.0, evaluations });
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(GammaSearch { gamma_inf: hi, lower: lo, evaluations })
}
