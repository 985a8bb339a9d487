//! Central controller machinery for nonquadratic costs: the Riccati-like
//! dual identity, the concavity condition, the central law `u*`, the
//! worst-case disturbance `ŵ`, the Bregman form of the cost and the
//! dissipation checks.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{Controller, ControllerKind};
use crate::convex::{bregman_dual, SharedFn};
use crate::error::{HinfError, Result};
use crate::grid::SampleGrid;
use crate::linalg::{self, Matrix, Vector};
use crate::quad::SystemLti;
use crate::sim::Trajectory;

/// Stage costs and the shaping functions `p`, `m = p − q` and `g` with
/// `g* = p* + r*∘Bᵀ`, together with the plant and performance level.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub sys: SystemLti,
    pub gamma: f64,
    pub q: SharedFn,
    pub r: SharedFn,
    pub s: SharedFn,
    pub p: SharedFn,
    pub m: SharedFn,
    pub g: SharedFn,
}

impl Certificate {
    pub fn new(
        sys: SystemLti,
        gamma: f64,
        costs: (SharedFn, SharedFn, SharedFn),
        shaping: (SharedFn, SharedFn, SharedFn),
    ) -> Result<Self> {
        let (q, r, s) = costs;
        let (p, m, g) = shaping;
        let (n, d) = (sys.n(), sys.d());
        for (name, f, dim) in [
            ("q", &q, n),
            ("r", &r, d),
            ("s", &s, n),
            ("p", &p, n),
            ("m", &m, n),
            ("g", &g, n),
        ] {
            if f.dim() != dim {
                return Err(HinfError::Dimension(format!("{name} has dimension {}, expected {dim}", f.dim())));
            }
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(HinfError::Config("gamma must be positive".into()));
        }
        Ok(Self { sys, gamma, q, r, s, p, m, g })
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    fn g2(&self) -> f64 {
        self.gamma * self.gamma
    }

    /// `(|p*(ξ) + r*(Bᵀξ) − m*(Aᵀξ) − γ²s*(γ⁻²ξ)|, |p*(ξ) + r*(Bᵀξ)|)`.
    pub fn riccati_residual(&self, xi: &Vector) -> Result<(f64, f64)> {
        let lhs = self.p.conjugate_value(xi)? + self.r.conjugate_value(&(self.sys.b.transpose() * xi))?;
        let rhs = self.m.conjugate_value(&(self.sys.a.transpose() * xi))?
            + self.g2() * self.s.conjugate_value(&(xi / self.g2()))?;
        Ok(((lhs - rhs).abs(), lhs.abs()))
    }

    /// `|g*(ξ) − p*(ξ) − r*(Bᵀξ)|`.
    pub fn g_additivity_residual(&self, xi: &Vector) -> Result<f64> {
        let rhs = self.p.conjugate_value(xi)? + self.r.conjugate_value(&(self.sys.b.transpose() * xi))?;
        Ok((self.g.conjugate_value(xi)? - rhs).abs())
    }

    /// `λ_max(∇²g(Ax + w) − γ²∇²s(w))`.
    ///
    /// When `g` or `s` has kinks the Hessian is replaced by symmetric
    /// second differences of `w ↦ g(Ax + w) − γ²s(w)` along the coordinate
    /// axes and their pairwise sums.
    pub fn concavity_max_eig(&self, x: &Vector, w: &Vector) -> Result<f64> {
        let y = &self.sys.a * x + w;
        if self.g.has_kinks() || self.s.has_kinks() {
            return self.concavity_second_difference(&y, w);
        }
        let h = self.g.hessian(&y)? - self.s.hessian(w)? * self.g2();
        Ok(linalg::max_eigenvalue(&h))
    }

    fn concavity_second_difference(&self, y: &Vector, w: &Vector) -> Result<f64> {
        let n = w.len();
        let phi = |dw: &Vector| -> Result<f64> {
            Ok(self.g.value(&(y + dw))? - self.g2() * self.s.value(&(w + dw))?)
        };
        let mut dirs = Vec::new();
        for i in 0..n {
            let mut e = Vector::zeros(n);
            e[i] = 1.0;
            dirs.push(e);
            for j in i + 1..n {
                let mut e = Vector::zeros(n);
                e[i] = std::f64::consts::FRAC_1_SQRT_2;
                e[j] = std::f64::consts::FRAC_1_SQRT_2;
                dirs.push(e);
            }
        }
        let h = 1e-4 * (1.0 + w.norm());
        let center = phi(&Vector::zeros(n))?;
        let mut worst = f64::NEG_INFINITY;
        for d in dirs {
            let second = (phi(&(&d * h))? + phi(&(&d * -h))? - 2.0 * center) / (h * h);
            worst = worst.max(second);
        }
        Ok(worst)
    }

    /// `u* = −∇r*(Bᵀ∇g(Ax + w))`.
    pub fn central_control(&self, x: &Vector, w: &Vector) -> Result<Vector> {
        let grad = self.g.gradient(&(&self.sys.a * x + w))?;
        Ok(-self.r.conjugate_gradient(&(self.sys.b.transpose() * grad))?)
    }

    /// `ŵ = ∇s*(γ⁻² A⁻ᵀ ∇m(x))`.
    pub fn worst_case_disturbance(&self, x: &Vector) -> Result<Vector> {
        let eta = self.sys.a_inv().transpose() * self.m.gradient(x)? / self.g2();
        self.s.conjugate_gradient(&eta)
    }

    /// `w ↦ −γ²s(w) + g(Ax + w)`, maximised by `ŵ`.
    pub fn disturbance_objective(&self, x: &Vector, w: &Vector) -> Result<f64> {
        let s = self.s.value(w)?;
        if s.is_infinite() {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.g.value(&(&self.sys.a * x + w))? - self.g2() * s)
    }

    /// `γ²s(w) − r(u*) − q(x) − p(Ax + Bu* + w) + p(x)`.
    pub fn lyapunov_slack(&self, x: &Vector, w: &Vector) -> Result<f64> {
        let u = self.central_control(x, w)?;
        let next = self.sys.step(x, &u, w);
        Ok(self.g2() * self.s.value(w)? - self.r.value(&u)? - self.q.value(x)? - self.p.value(&next)?
            + self.p.value(x)?)
    }

    /// Residuals of `∇p(Ax + Bu* + w) = ∇g(Ax + w)` and
    /// `∇r(u*) + Bᵀ∇p(Ax + Bu* + w) = 0`.
    pub fn auxiliary_residuals(&self, x: &Vector, w: &Vector) -> Result<(f64, f64)> {
        let u = self.central_control(x, w)?;
        let next = self.sys.step(x, &u, w);
        let gp = self.p.gradient(&next)?;
        let gg = self.g.gradient(&(&self.sys.a * x + w))?;
        let first = (&gp - &gg).norm() / (1.0 + gg.norm());
        let second = (self.r.gradient(&u)? + self.sys.b.transpose() * &gp).norm() / (1.0 + gp.norm());
        Ok((first, second))
    }

    /// `∇r(û) + Bᵀ∇g(Ax + ŵ)` at `û = u*(x, ŵ)`.
    pub fn worst_case_stationarity(&self, x: &Vector) -> Result<f64> {
        let w_hat = self.worst_case_disturbance(x)?;
        let u_hat = self.central_control(x, &w_hat)?;
        let gg = self.g.gradient(&(&self.sys.a * x + &w_hat))?;
        Ok((self.r.gradient(&u_hat)? + self.sys.b.transpose() * &gg).norm() / (1.0 + gg.norm()))
    }

    /// Per-step value `γ²s(w) − q(x) − r(u)` of the cost.
    pub fn supply(&self, x: &Vector, u: &Vector, w: &Vector) -> Result<f64> {
        Ok(self.g2() * self.s.value(w)? - self.q.value(x)? - self.r.value(u)?)
    }
}

#[derive(Debug, Clone)]
pub struct CentralController {
    cert: Arc<Certificate>,
}

impl CentralController {
    pub fn new(cert: Arc<Certificate>) -> Self {
        Self { cert }
    }

    pub fn certificate(&self) -> &Arc<Certificate> {
        &self.cert
    }
}

impl Controller for CentralController {
    fn control(&self, x: &Vector, w: &Vector) -> Result<Vector> {
        self.cert.central_control(x, w)
    }

    fn input_dim(&self) -> usize {
        self.cert.sys.d()
    }

    fn kind(&self) -> ControllerKind {
        ControllerKind::Central
    }

    fn name(&self) -> String {
        "central".into()
    }
}

/// Both Bregman forms of one step of the cost, with dual anchors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepIdentity {
    /// `γ²s(w) − q(x) − r(u) − p(x⁺) + p(x)`.
    pub direct: f64,
    /// `D_{γ²s}(w,ŵ) − D_g(Ax+w, Ax+ŵ) − D_r(u,u*) − D_p(x⁺, Ax+Bu*+w)`.
    pub four_term: f64,
    /// `D_{γ²s}(w,ŵ) − D_r(u,û) − D_p(x⁺, Ax+Bû+ŵ)`, which needs no
    /// inverse of `B`.
    pub three_term: f64,
}

impl StepIdentity {
    pub fn gap(&self) -> f64 {
        (self.direct - self.four_term).abs().max((self.direct - self.three_term).abs())
    }
}

/// Evaluates both sides of the per-step identity at `(x, u, w)` where
/// `x⁺ = Ax + Bu + w`.
///
/// Divergences are anchored at the dual points selected by the
/// optimality conditions, so boundary maximisers of domain-bounded costs
/// are handled exactly.
pub fn step_identity(cert: &Certificate, x: &Vector, u: &Vector, w: &Vector) -> Result<StepIdentity> {
    let sys = &cert.sys;
    let g2 = cert.g2();
    let ax = &sys.a * x;
    let next = sys.step(x, u, w);
    let direct = cert.supply(x, u, w)? - cert.p.value(&next)? + cert.p.value(x)?;

    let w_hat = cert.worst_case_disturbance(x)?;
    let zeta_s = cert.g.gradient(&(&ax + &w_hat))?;
    let zeta_p = cert.g.gradient(&(&ax + w))?;
    let bt = sys.b.transpose();

    // D_{γ²s}(w, ŵ) = γ²s(w) + γ²s*(γ⁻²ζ) − ζᵀw
    let d_s = g2 * cert.s.value(w)? + g2 * cert.s.conjugate_value(&(&zeta_s / g2))? - zeta_s.dot(w);
    let d_g = bregman_dual(cert.g.as_ref(), &(&ax + w), &zeta_s)?;
    let d_r = bregman_dual(cert.r.as_ref(), u, &-(&bt * &zeta_p))?;
    let d_p = bregman_dual(cert.p.as_ref(), &next, &zeta_p)?;
    let four_term = d_s - d_g - d_r - d_p;

    let d_r_hat = bregman_dual(cert.r.as_ref(), u, &-(&bt * &zeta_s))?;
    let d_p_hat = bregman_dual(cert.p.as_ref(), &next, &zeta_s)?;
    let three_term = d_s - d_r_hat - d_p_hat;

    Ok(StepIdentity { direct, four_term, three_term })
}

/// Comparison of the defining sum of the cost with its Bregman form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityGap {
    pub max_step_gap: f64,
    pub total_gap: f64,
    pub j_direct: f64,
    pub j_bregman: f64,
}

/// `J_T = Σ (γ²s(w) − q(x) − r(u)) − p(x_{T+1})` from the definition and
/// from the telescoped Bregman identity (with `p(x₀)` added back).
pub fn bregman_identity_gap(cert: &Certificate, traj: &Trajectory) -> Result<IdentityGap> {
    let steps = traj.ws.len();
    let mut j_direct = -cert.p.value(&traj.xs[steps])?;
    let mut j_bregman = -cert.p.value(&traj.xs[0])?;
    let mut max_step_gap: f64 = 0.0;
    for k in 0..steps {
        let (x, u, w) = (&traj.xs[k], &traj.us[k], &traj.ws[k]);
        j_direct += cert.supply(x, u, w)?;
        let step = step_identity(cert, x, u, w)?;
        j_bregman += step.four_term;
        max_step_gap = max_step_gap.max(step.gap());
    }
    Ok(IdentityGap {
        max_step_gap,
        total_gap: (j_direct - j_bregman).abs(),
        j_direct,
        j_bregman,
    })
}

/// `J_G = [p(x_{T+1}) + Σ (q + r)] / Σ s(w)`.
pub fn performance_ratio(cert: &Certificate, traj: &Trajectory) -> Result<f64> {
    let steps = traj.ws.len();
    let mut num = cert.p.value(&traj.xs[steps])?;
    let mut den = 0.0;
    for k in 0..steps {
        num += cert.q.value(&traj.xs[k])? + cert.r.value(&traj.us[k])?;
        den += cert.s.value(&traj.ws[k])?;
    }
    if den <= 0.0 {
        return Err(HinfError::UndefinedRatio);
    }
    Ok(num / den)
}

/// Scalar grid search for the maximiser of `−γ²s(w) + g(ax + w)` over
/// `[lo, hi]` with the given step, refined by safeguarded Newton ascent.
/// Returns `(grid argmax, grid max, refined argmax)`.
pub fn scalar_worst_case_search(cert: &Certificate, x: f64, lo: f64, hi: f64, step: f64) -> Result<(f64, f64, f64)> {
    if cert.sys.n() != 1 {
        return Err(HinfError::Dimension("scalar worst-case search needs n = 1".into()));
    }
    let count = ((hi - lo) / step).round() as usize;
    let xv = linalg::scalar(x);
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..=count {
        let w = lo + step * i as f64;
        let v = cert.disturbance_objective(&xv, &linalg::scalar(w))?;
        if v > best.1 {
            best = (w, v);
        }
    }
    let refined = local_ascent(cert, &xv, &linalg::scalar(best.0))?[0];
    Ok((best.0, best.1, refined))
}

/// Newton ascent on `w ↦ −γ²s(w) + g(Ax + w)` from `w0`, with
/// backtracking on the objective.
pub fn local_ascent(cert: &Certificate, x: &Vector, w0: &Vector) -> Result<Vector> {
    let g2 = cert.g2();
    let ax = &cert.sys.a * x;
    let mut w = w0.clone();
    let mut val = cert.disturbance_objective(x, &w)?;
    for _ in 0..200 {
        let grad = cert.g.gradient(&(&ax + &w))? - cert.s.gradient(&w)? * g2;
        if grad.norm() <= 1e-13 * (1.0 + w.norm()) {
            break;
        }
        let h = linalg::symmetrize(&(cert.g.hessian(&(&ax + &w))? - cert.s.hessian(&w)? * g2));
        let dir = if linalg::max_eigenvalue(&h) < 0.0 {
            linalg::solve(&(-h), &grad)?
        } else {
            grad.clone()
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-14 {
            let trial = &w + &dir * t;
            let v = cert.disturbance_objective(x, &trial)?;
            if v >= val {
                moved = (&trial - &w).norm() > 0.0;
                w = trial;
                val = v;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(w)
}

/// Outcome of one verified condition over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMargin {
    pub name: String,
    /// Worst observed value of the checked quantity; `null` in JSON when
    /// no sample was available.
    #[serde(with = "finite_or_null")]
    pub worst: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub passed: bool,
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl ConditionMargin {
    pub(crate) fn upper(name: &str, worst: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            name: name.into(),
            worst,
            tolerance,
            samples,
            passed: worst.is_finite() && worst <= tolerance,
        }
    }
}

/// Sample sets and their radii used for verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyGrids {
    pub xi: SampleGrid,
    pub x: SampleGrid,
    pub w: SampleGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub gamma: f64,
    pub grids: VerifyGrids,
    pub conditions: Vec<ConditionMargin>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&ConditionMargin> {
        self.conditions.iter().filter(|c| !c.passed).collect()
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionMargin> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

pub(crate) fn par_max<T: Sync>(items: &[T], f: impl Fn(&T) -> Result<f64> + Sync) -> Result<f64> {
    items
        .par_iter()
        .map(|it| f(it))
        .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))
}

/// Checks every certificate condition on the given grids.
///
/// * Riccati-like identity, relative to `1 + |p*(ξ) + r*(Bᵀξ)|`, tolerance 1e-7;
/// * `g* = p* + r*∘Bᵀ`, tolerance 1e-9 relative;
/// * concavity `λ_max(∇²g(Ax+w) − γ²∇²s(w)) ≤ 1e-8` over `x × w`;
/// * `m = p − q` on the domain of `q`;
/// * `p(0) = 0` and `∇²p ≻ 0` on the x-grid;
/// * `ŵ` against a local ascent of the disturbance objective, 1e-5.
pub fn verify_certificate(cert: &Certificate, grids: &VerifyGrids) -> Result<VerifyReport> {
    let n = cert.sys.n();
    let xis = grids.xi.points(n);
    let xs = grids.x.points(n);
    let ws = grids.w.points(n);
    if xis.is_empty() || xs.is_empty() || ws.is_empty() {
        return Err(HinfError::Config("verification grid is empty".into()));
    }
    let mut conditions = Vec::new();

    let ric = par_max(&xis, |xi| {
        let (res, lhs) = cert.riccati_residual(xi)?;
        Ok(res / (1.0 + lhs))
    })?;
    conditions.push(ConditionMargin::upper("riccati_identity", ric, 1e-7, xis.len()));

    let add = par_max(&xis, |xi| {
        let scale = 1.0 + cert.g.conjugate_value(xi)?.abs();
        Ok(cert.g_additivity_residual(xi)? / scale)
    })?;
    conditions.push(ConditionMargin::upper("g_additivity", add, 1e-9, xis.len()));

    let pairs: Vec<(Vector, Vector)> = xs
        .iter()
        .flat_map(|x| ws.iter().map(move |w| (x.clone(), w.clone())))
        .collect();
    let conc = par_max(&pairs, |(x, w)| cert.concavity_max_eig(x, w))?;
    conditions.push(ConditionMargin::upper("concavity", conc, 1e-8, pairs.len()));

    let in_dom: Vec<Vector> = xs.iter().filter(|x| cert.q.in_domain(x)).cloned().collect();
    let gap = par_max(&in_dom, |x| {
        let p = cert.p.value(x)?;
        let lhs = cert.m.value(x)?;
        let rhs = p - cert.q.value(x)?;
        Ok((lhs - rhs).abs() / (1.0 + p.abs()))
    })?;
    conditions.push(ConditionMargin::upper("m_equals_p_minus_q", gap, 1e-8, in_dom.len()));

    let p0 = cert.p.value(&Vector::zeros(n))?.abs();
    conditions.push(ConditionMargin::upper("p_vanishes_at_origin", p0, 1e-12, 1));

    let p_dom: Vec<Vector> = xs.iter().filter(|x| cert.p.in_domain(x)).cloned().collect();
    let convex = par_max(&p_dom, |x| Ok(-linalg::min_eigenvalue(&cert.p.hessian(x)?)))?;
    conditions.push(ConditionMargin::upper("p_strictly_convex", convex, -0.0, p_dom.len()).strict());

    let ascent = par_max(&in_dom, |x| {
        let w_hat = cert.worst_case_disturbance(x)?;
        let start = &w_hat + Vector::from_element(n, 0.25 * (1.0 + w_hat.norm()));
        let w_star = local_ascent(cert, x, &start)?;
        Ok((&w_star - &w_hat).norm() / (1.0 + w_hat.norm()))
    })?;
    conditions.push(ConditionMargin::upper("worst_case_ascent", ascent, 1e-5, in_dom.len()));

    Ok(VerifyReport { gamma: cert.gamma, grids: *grids, conditions })
}

impl ConditionMargin {
    pub(crate) fn strict(mut self) -> Self {
        self.passed = self.worst.is_finite() && self.worst < 0.0;
        self
    }
}

/// Quadratic data `(P, M, G)` of a certificate whose shaping functions
/// are all quadratic.
pub fn quadratic_data(cert: &Certificate) -> Option<(Matrix, Matrix, Matrix)> {
    use crate::convex::Structure;
    match (cert.p.structure(), cert.m.structure(), cert.g.structure()) {
        (Structure::Quadratic(p), Structure::Quadratic(m), Structure::Quadratic(g)) => Some((p, m, g)),
        _ => None,
    }
}
