//! Closed-form scalar designs: an input-limited controller, a hard state
//! envelope and an exponential input penalty. Each preset carries the
//! certificate built by the generic synthesis routes together with the
//! closed-form cost and control law used to cross-check it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::central::{Certificate, CentralController, VerifyGrids};
use crate::controller::{Controller, ControllerKind};
use crate::convex::{BoundedQuadraticFn, ExpAbsFn, Piece, PiecewiseQuadraticFn, QuadraticFn, SharedFn};
use crate::error::{HinfError, Result};
use crate::grid::SampleGrid;
use crate::interval::IntervalSet;
use crate::linalg::{Matrix, Vector};
use crate::quad::{QuadWeights, SystemLti};
use crate::synthesis::{self, CurvatureBounds, QsCoupling};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarPlant {
    pub a: f64,
    pub b: f64,
}

impl ScalarPlant {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a == 0.0 || b == 0.0 {
            return Err(HinfError::Config("scalar plant needs finite, nonzero a and b".into()));
        }
        Ok(Self { a, b })
    }

    pub fn system(&self) -> Result<SystemLti> {
        SystemLti::scalar(self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    InputLimited,
    Safety,
    Exponential,
}

/// Parameters of one scalar case study. `s` weights `s(w) = s·w²`; `m`
/// and `t` are used by the input-limited and safety designs, `g` by the
/// exponential one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    pub kind: CaseKind,
    pub plant: ScalarPlant,
    pub gamma: f64,
    pub s: f64,
    pub m: f64,
    pub t: f64,
    pub g: f64,
    /// Radius of the state and disturbance region the certificate is
    /// checked on.
    pub envelope: f64,
}

pub const PRESETS: [&str; 3] = ["fig1", "fig2", "fig3"];

impl CaseParams {
    pub fn preset(name: &str) -> Result<Self> {
        let p = match name {
            "fig1" => Self {
                kind: CaseKind::InputLimited,
                plant: ScalarPlant::new(0.6, 1.0)?,
                gamma: 1.32,
                s: 1.0,
                m: 0.11,
                t: 0.1,
                g: 0.0,
                envelope: 5.0,
            },
            "fig2" => Self {
                kind: CaseKind::Safety,
                plant: ScalarPlant::new(1.1, 1.0)?,
                gamma: 1.32,
                s: 1.0,
                m: 0.2,
                t: 0.2,
                g: 0.0,
                envelope: 5.0,
            },
            "fig3" => Self {
                kind: CaseKind::Exponential,
                plant: ScalarPlant::new(0.9, 0.1)?,
                gamma: 7.45,
                s: 0.0,
                m: 0.0,
                t: 0.0,
                g: 15.0,
                envelope: 5.0,
            },
            other => return Err(HinfError::Config(format!("unknown preset {other:?} (fig1, fig2, fig3)"))),
        };
        Ok(p)
    }

    pub fn v_gamma(&self) -> f64 {
        v_gamma(self.plant.a, self.s, self.m, self.gamma)
    }

    /// Quadratic weight `G` of `g(x) = Gx²`.
    pub fn g_weight(&self) -> f64 {
        match self.kind {
            CaseKind::Exponential => self.g,
            _ => self.v_gamma() / (self.plant.a * self.plant.a),
        }
    }

    pub fn grids(&self) -> VerifyGrids {
        let g = SampleGrid::with_radius(self.envelope);
        VerifyGrids { xi: g, x: g, w: g }
    }
}

/// `v_γ = γ²msa² / (m + γ²a²s)`, so that `g(x) = (v_γ/a²)x²`.
pub fn v_gamma(a: f64, s: f64, m: f64, gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    g2 * m * s * a * a / (m + g2 * a * a * s)
}

/// Closed-form control laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseStudyController {
    params: CaseParams,
}

impl CaseStudyController {
    pub fn new(params: CaseParams) -> Self {
        Self { params }
    }

    pub fn scalar(&self, x: f64, w: f64) -> f64 {
        let p = &self.params;
        let (a, b) = (p.plant.a, p.plant.b);
        match p.kind {
            CaseKind::InputLimited => {
                let v = p.v_gamma();
                -(b * v / a * (x + w / a)).clamp(-p.t, p.t)
            }
            CaseKind::Safety => {
                let (lin, sat) = safety_branches(p, x, w);
                if safety_linear_region(p, x, w) {
                    lin
                } else {
                    sat
                }
            }
            CaseKind::Exponential => {
                let y = a * x + w;
                -(b * y).signum() * (2.0 * b * p.g * y).abs().ln_1p()
            }
        }
    }
}

/// `|2v/a·(x + w/a)| ≤ 2(1 + m)t`.
pub fn safety_linear_region(p: &CaseParams, x: f64, w: f64) -> bool {
    let a = p.plant.a;
    (2.0 * p.v_gamma() / a * (x + w / a)).abs() <= 2.0 * (1.0 + p.m) * p.t
}

/// Both branch formulas of the safety law at `(x, w)`: the linear one and
/// the one that places the next state on the envelope.
pub fn safety_branches(p: &CaseParams, x: f64, w: f64) -> (f64, f64) {
    let (a, b) = (p.plant.a, p.plant.b);
    let v = p.v_gamma();
    let y = x + w / a;
    let lin = (-a / b + v / (a * b * (1.0 + p.m))) * y;
    let sat = -(a / b) * y + p.t * y.signum() / b;
    (lin, sat)
}

impl Controller for CaseStudyController {
    fn control(&self, x: &Vector, w: &Vector) -> Result<Vector> {
        if x.len() != 1 || w.len() != 1 {
            return Err(HinfError::Dimension("case-study laws are scalar".into()));
        }
        Ok(Vector::from_element(1, self.scalar(x[0], w[0])))
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn kind(&self) -> ControllerKind {
        ControllerKind::CaseStudy
    }

    fn name(&self) -> String {
        format!("{:?} closed form", self.params.kind)
    }
}

/// A case study with its certificate and closed-form data.
#[derive(Debug, Clone)]
pub struct CaseStudy {
    pub params: CaseParams,
    pub certificate: Arc<Certificate>,
    /// The induced cost in closed form: `q` for the input-limited design,
    /// `r` for the safety design, `None` for the exponential one.
    pub closed_form: Option<SharedFn>,
    pub feasible: IntervalSet,
}

impl CaseStudy {
    pub fn preset(name: &str) -> Result<Self> {
        Self::build(CaseParams::preset(name)?)
    }

    pub fn build(params: CaseParams) -> Result<Self> {
        match params.kind {
            CaseKind::InputLimited => input_limited(params),
            CaseKind::Safety => safety(params),
            CaseKind::Exponential => exponential(params),
        }
    }

    pub fn central(&self) -> CentralController {
        CentralController::new(self.certificate.clone())
    }

    pub fn closed_form_controller(&self) -> CaseStudyController {
        CaseStudyController::new(self.params)
    }

    /// The design parameter checked against the feasibility interval:
    /// `m` for the first two designs, `G` for the exponential one.
    pub fn design_parameter(&self) -> f64 {
        match self.params.kind {
            CaseKind::Exponential => self.params.g,
            _ => self.params.m,
        }
    }

    /// Unit-weight quadratic baseline at the same `γ`.
    pub fn baseline_weights(&self) -> QuadWeights {
        QuadWeights::unit(1, 1, self.params.gamma)
    }
}

fn check_positive(names: &[(&str, f64)]) -> Result<()> {
    for (name, v) in names {
        if !(v.is_finite() && *v > 0.0) {
            return Err(HinfError::Config(format!("{name} must be positive")));
        }
    }
    Ok(())
}

fn require_feasible(set: &IntervalSet, value: f64, what: &str) -> Result<()> {
    if !set.contains(value) {
        return Err(HinfError::Synthesis(format!(
            "{what} = {value} lies outside the feasible set {:?}",
            set.pieces
        )));
    }
    Ok(())
}

fn input_limited(p: CaseParams) -> Result<CaseStudy> {
    check_positive(&[("s", p.s), ("m", p.m), ("t", p.t), ("gamma", p.gamma)])?;
    let sys = p.plant.system()?;
    let r_bounds = CurvatureBounds::scalar(2.0, 2.0)?;
    let s_bounds = CurvatureBounds::scalar(2.0 * p.s, 2.0 * p.s)?;
    let feasible = synthesis::feasibility_rs(&sys, p.gamma, &r_bounds, &s_bounds)?;
    require_feasible(&feasible, p.m, "m")?;
    let r: SharedFn = Arc::new(BoundedQuadraticFn::new(1, p.t)?);
    let s: SharedFn = Arc::new(QuadraticFn::scalar(p.s)?);
    let cert = synthesis::induce_rs(&sys, p.gamma, r, s, &Matrix::from_element(1, 1, p.m), true)?;
    let (a2, b) = (p.plant.a * p.plant.a, p.plant.b.abs());
    let v = p.v_gamma();
    let t = p.t;
    let q = PiecewiseQuadraticFn::new(vec![
        Piece { start: 0.0, a: v / (a2 - b * b * v) - p.m, b: 0.0, c: 0.0 },
        Piece {
            start: a2 * t / (v * b) - t * b,
            a: v / a2 - p.m,
            b: 2.0 * v * b * t / a2,
            c: t * t * (v * b * b / a2 - 1.0),
        },
    ])?;
    Ok(CaseStudy { params: p, certificate: Arc::new(cert), closed_form: Some(Arc::new(q)), feasible })
}

fn safety(p: CaseParams) -> Result<CaseStudy> {
    check_positive(&[("s", p.s), ("m", p.m), ("t", p.t), ("gamma", p.gamma)])?;
    let sys = p.plant.system()?;
    let q_bounds = CurvatureBounds::scalar(2.0, 2.0)?;
    let s_bounds = CurvatureBounds::scalar(2.0 * p.s, 2.0 * p.s)?;
    let feasible = synthesis::feasibility_qs(&sys, p.gamma, &q_bounds, &s_bounds, QsCoupling::Derived)?;
    require_feasible(&feasible, p.m, "m")?;
    let q: SharedFn = Arc::new(BoundedQuadraticFn::new(1, p.t)?);
    let s: SharedFn = Arc::new(QuadraticFn::scalar(p.s)?);
    let cert = synthesis::induce_qs(&sys, p.gamma, q, s, &Matrix::from_element(1, 1, p.m), true)?;
    let (a2, b) = (p.plant.a * p.plant.a, p.plant.b.abs());
    let v = p.v_gamma();
    let (t, m) = (p.t, p.m);
    let r = PiecewiseQuadraticFn::new(vec![
        Piece { start: 0.0, a: b * b * v * (1.0 + m) / (a2 * (1.0 + m) - v), b: 0.0, c: 0.0 },
        Piece {
            start: (1.0 + m) * t * a2 / (b * v) - t / b,
            a: v * b * b / a2,
            b: 2.0 * v * b * t / a2,
            c: v * t * t / a2 - (1.0 + m) * t * t,
        },
    ])?;
    Ok(CaseStudy { params: p, certificate: Arc::new(cert), closed_form: Some(Arc::new(r)), feasible })
}

/// Largest `|u*|` over `|x|, |w| ≤ envelope` for the exponential law.
pub fn exponential_input_envelope(p: &CaseParams) -> f64 {
    let y = (p.plant.a.abs() + 1.0) * p.envelope;
    (2.0 * p.plant.b.abs() * p.g * y).ln_1p()
}

fn exponential(p: CaseParams) -> Result<CaseStudy> {
    check_positive(&[("g", p.g), ("gamma", p.gamma)])?;
    let sys = p.plant.system()?;
    let q_bounds = CurvatureBounds::scalar(2.0, 2.0)?;
    let r_bounds = CurvatureBounds::scalar(1.0, exponential_input_envelope(&p).exp())?;
    let feasible = synthesis::feasibility_qr(&sys, &q_bounds, &r_bounds)?;
    require_feasible(&feasible, p.g, "g")?;
    let q: SharedFn = Arc::new(QuadraticFn::identity(1));
    let r: SharedFn = Arc::new(ExpAbsFn::new(1));
    let cert = synthesis::induce_qr(&sys, p.gamma, q, r, &Matrix::from_element(1, 1, p.g), true)?;
    Ok(CaseStudy { params: p, certificate: Arc::new(cert), closed_form: None, feasible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::central::verify_certificate;
    use crate::linalg::scalar;
    use proptest::prelude::*;

    #[test]
    fn v_gamma_reference_value() {
        // Oracle: G = 1/(a²/m + 1/(γ²s)), v = a²G.
        let p = CaseParams::preset("fig1").unwrap();
        let g = 1.0 / (0.36 / 0.11 + 1.0 / (1.32f64.powi(2)));
        assert!((p.v_gamma() - 0.36 * g).abs() < 1e-15);
        assert!((p.v_gamma() - 0.09359).abs() < 1e-5);
    }

    #[test]
    fn exponential_law_reference_value() {
        let c = CaseStudyController::new(CaseParams::preset("fig3").unwrap());
        assert!((c.scalar(1.0, 0.0) + 3.7f64.ln()).abs() < 1e-10);
        assert!((c.scalar(1.0, 0.0) + 1.30833).abs() < 1e-5);
        assert_eq!(c.scalar(0.0, 0.0), 0.0);
        assert_eq!(c.scalar(-0.4, 0.3), -c.scalar(0.4, -0.3));
    }

    #[test]
    fn closed_form_costs_match_induced_ones() {
        let fig1 = CaseStudy::preset("fig1").unwrap();
        let q = fig1.closed_form.as_ref().unwrap();
        for x in [-3.0, -0.5, -0.01, 0.0, 0.02, 0.3, 1.7, 4.0] {
            let x = scalar(x);
            let generic = fig1.certificate.q.value(&x).unwrap();
            assert!((q.value(&x).unwrap() - generic).abs() < 1e-9 * (1.0 + generic.abs()), "{x}");
        }
        let fig2 = CaseStudy::preset("fig2").unwrap();
        let r = fig2.closed_form.as_ref().unwrap();
        for u in [-3.0, -0.5, -0.01, 0.0, 0.02, 0.3, 1.7, 4.0] {
            let u = scalar(u);
            let generic = fig2.certificate.r.value(&u).unwrap();
            assert!((r.value(&u).unwrap() - generic).abs() < 1e-9 * (1.0 + generic.abs()), "{u}");
        }
    }

    #[test]
    fn safety_branches_meet_at_threshold() {
        let p = CaseParams::preset("fig2").unwrap();
        let a = p.plant.a;
        // |2v/a·y| = 2(1+m)t at y = (1+m)t·a/v.
        let y = (1.0 + p.m) * p.t * a / p.v_gamma();
        for (x, w) in [(y, 0.0), (-y, 0.0), (0.5 * y, 0.5 * a * y)] {
            let (lin, sat) = safety_branches(&p, x, w);
            assert!((lin - sat).abs() < 1e-9);
        }
    }

    #[test]
    fn presets_certify() {
        for name in PRESETS {
            let case = CaseStudy::preset(name).unwrap();
            let report = verify_certificate(&case.certificate, &case.params.grids()).unwrap();
            assert!(report.passed(), "{name}: {:?}", report.failures());
            assert!(case.feasible.contains(case.design_parameter()));
        }
    }

    #[test]
    fn infeasible_margin_is_a_synthesis_error() {
        let mut p = CaseParams::preset("fig1").unwrap();
        p.gamma = 0.9;
        assert!(matches!(CaseStudy::build(p), Err(HinfError::Synthesis(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn closed_form_laws_match_central(x in -5.0f64..5.0, w in -5.0f64..5.0, which in 0usize..3) {
            let case = CaseStudy::preset(PRESETS[which]).unwrap();
            let generic = case.central().control(&scalar(x), &scalar(w)).unwrap()[0];
            let closed = case.closed_form_controller().scalar(x, w);
            prop_assert!((generic - closed).abs() <= 1e-8 * (1.0 + closed.abs()));
        }

        #[test]
        fn input_limit_is_structural(x in -50.0f64..50.0, w in -50.0f64..50.0) {
            let case = CaseStudy::preset("fig1").unwrap();
            let u = case.central().control(&scalar(x), &scalar(w)).unwrap()[0];
            prop_assert!(u.abs() <= 0.1);
        }

        #[test]
        fn safety_envelope_is_structural(x in -0.2f64..0.2, w in -50.0f64..50.0) {
            let case = CaseStudy::preset("fig2").unwrap();
            let u = case.central().control(&scalar(x), &scalar(w)).unwrap();
            let next = case.certificate.sys.step(&scalar(x), &u, &scalar(w));
            prop_assert!(next[0].abs() <= 0.2 * (1.0 + 1e-12));
        }
    }
}
