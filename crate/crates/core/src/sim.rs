//! Closed-loop rollouts, disturbance models, metrics and CSV output.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::central::Certificate;
use crate::controller::Controller;
use crate::error::{HinfError, Result};
use crate::linalg::{Matrix, Vector};
use crate::quad::SystemLti;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    WhiteGaussian,
    Uniform,
    Laplace,
    WorstCaseCentral,
    WorstCaseQuadratic,
}

impl DisturbanceKind {
    pub const NOISE: [DisturbanceKind; 3] = [
        DisturbanceKind::WhiteGaussian,
        DisturbanceKind::Uniform,
        DisturbanceKind::Laplace,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            DisturbanceKind::WhiteGaussian => "white_gaussian",
            DisturbanceKind::Uniform => "uniform",
            DisturbanceKind::Laplace => "laplace",
            DisturbanceKind::WorstCaseCentral => "worst_case_central",
            DisturbanceKind::WorstCaseQuadratic => "worst_case_quadratic",
        }
    }

    pub fn is_worst_case(&self) -> bool {
        matches!(self, DisturbanceKind::WorstCaseCentral | DisturbanceKind::WorstCaseQuadratic)
    }
}

/// A seeded disturbance stream.
///
/// `scale` is the standard deviation (Gaussian), the half-width
/// (uniform) or the diversity (Laplace). The worst-case models start from
/// `x₀ = 0`, where the maximiser vanishes, so `w₀` is a uniform kick of
/// half-width `scale` and the maximising disturbance is applied from
/// `k = 1` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceModel {
    pub kind: DisturbanceKind,
    pub scale: f64,
    pub seed: u64,
}

impl DisturbanceModel {
    pub fn new(kind: DisturbanceKind, scale: f64, seed: u64) -> Self {
        Self { kind, scale, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale >= 0.0) {
            return Err(HinfError::Config(format!("disturbance scale {} is invalid", self.scale)));
        }
        Ok(())
    }
}

enum Law<'a> {
    Gaussian(Normal<f64>),
    Uniform,
    Laplace,
    Central(&'a Certificate),
    Linear(&'a Matrix),
}

/// Runtime state of a [`DisturbanceModel`].
pub struct DisturbanceSource<'a> {
    model: DisturbanceModel,
    rng: ChaCha8Rng,
    law: Law<'a>,
    n: usize,
}

impl<'a> DisturbanceSource<'a> {
    /// `central` is required by `worst_case_central`, `quadratic_gain`
    /// (`ŵ = K x`) by `worst_case_quadratic`.
    pub fn new(
        model: DisturbanceModel,
        n: usize,
        central: Option<&'a Certificate>,
        quadratic_gain: Option<&'a Matrix>,
    ) -> Result<Self> {
        model.validate()?;
        let law = match model.kind {
            DisturbanceKind::WhiteGaussian => Law::Gaussian(
                Normal::new(0.0, model.scale).map_err(|e| HinfError::Config(format!("gaussian scale: {e}")))?,
            ),
            DisturbanceKind::Uniform => Law::Uniform,
            DisturbanceKind::Laplace => Law::Laplace,
            DisturbanceKind::WorstCaseCentral => Law::Central(
                central.ok_or_else(|| HinfError::Config("worst_case_central needs a certificate".into()))?,
            ),
            DisturbanceKind::WorstCaseQuadratic => Law::Linear(
                quadratic_gain
                    .ok_or_else(|| HinfError::Config("worst_case_quadratic needs the quadratic gain".into()))?,
            ),
        };
        Ok(Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            law,
            n,
        })
    }

    fn uniform(&mut self) -> Vector {
        let s = self.model.scale;
        let rng = &mut self.rng;
        Vector::from_fn(self.n, |_, _| if s == 0.0 { 0.0 } else { rng.random_range(-s..=s) })
    }

    pub fn next(&mut self, k: usize, x: &Vector) -> Result<Vector> {
        let scale = self.model.scale;
        match &self.law {
            Law::Gaussian(normal) => {
                let normal = *normal;
                let rng = &mut self.rng;
                Ok(Vector::from_fn(self.n, |_, _| normal.sample(rng)))
            }
            Law::Uniform => Ok(self.uniform()),
            Law::Laplace => {
                let rng = &mut self.rng;
                Ok(Vector::from_fn(self.n, |_, _| {
                    let u: f64 = rng.random::<f64>() - 0.5;
                    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
                }))
            }
            Law::Central(cert) => {
                if k == 0 {
                    Ok(self.uniform())
                } else {
                    cert.worst_case_disturbance(x)
                }
            }
            Law::Linear(gain) => {
                if k == 0 {
                    Ok(self.uniform())
                } else {
                    Ok(*gain * x)
                }
            }
        }
    }
}

/// States `x₀ … x_{T+1}`, inputs and disturbances `k = 0 … T`, and the
/// per-step costs `q(x_k)`, `r(u_k)`, `s(w_k)`, `p(x_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub xs: Vec<Vector>,
    pub us: Vec<Vector>,
    pub ws: Vec<Vector>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub p_next: Vec<f64>,
    pub gamma: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.ws.len().saturating_sub(1)
    }

    /// `max_k ‖x_{k+1} − Ax_k − Bu_k − w_k‖`.
    pub fn recursion_error(&self, sys: &SystemLti) -> f64 {
        (0..self.ws.len())
            .map(|k| (&self.xs[k + 1] - sys.step(&self.xs[k], &self.us[k], &self.ws[k])).norm())
            .fold(0.0, f64::max)
    }
}

/// Closed loop from `x₀ = 0` over `k = 0 … T`. Costs are taken from
/// `cert`, which also supplies `ŵ` for the central worst-case model.
pub fn rollout(
    cert: &Certificate,
    controller: &dyn Controller,
    model: DisturbanceModel,
    horizon: usize,
    quadratic_gain: Option<&Matrix>,
) -> Result<Trajectory> {
    let mut source = DisturbanceSource::new(model, cert.sys.n(), Some(cert), quadratic_gain)?;
    rollout_with(cert, controller, horizon, |k, x| source.next(k, x))
}

/// Closed loop with an arbitrary disturbance callback `w_k = f(k, x_k)`.
pub fn rollout_with(
    cert: &Certificate,
    controller: &dyn Controller,
    horizon: usize,
    mut disturbance: impl FnMut(usize, &Vector) -> Result<Vector>,
) -> Result<Trajectory> {
    let sys = &cert.sys;
    let steps = horizon + 1;
    let abort = |step: usize| move |e: HinfError| HinfError::Aborted { step, source: Box::new(e) };
    let mut traj = Trajectory {
        xs: Vec::with_capacity(steps + 1),
        us: Vec::with_capacity(steps),
        ws: Vec::with_capacity(steps),
        q: Vec::with_capacity(steps),
        r: Vec::with_capacity(steps),
        s: Vec::with_capacity(steps),
        p_next: Vec::with_capacity(steps),
        gamma: cert.gamma,
    };
    let mut x = Vector::zeros(sys.n());
    traj.xs.push(x.clone());
    for k in 0..steps {
        let w = disturbance(k, &x).map_err(abort(k))?;
        let u = controller.control(&x, &w).map_err(abort(k))?;
        let next = sys.step(&x, &u, &w);
        traj.q.push(cert.q.value(&x).map_err(abort(k))?);
        traj.r.push(cert.r.value(&u).map_err(abort(k))?);
        traj.s.push(cert.s.value(&w).map_err(abort(k))?);
        traj.p_next.push(cert.p.value(&next).map_err(abort(k))?);
        traj.us.push(u);
        traj.ws.push(w);
        traj.xs.push(next.clone());
        x = next;
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `Σ (γ²s − q − r) − p(x_{T+1})`.
    pub j_t: f64,
    /// `[p(x_{T+1}) + Σ (q + r)] / Σ s`, absent when `Σ s = 0`.
    pub j_g: Option<f64>,
    pub max_abs_x: f64,
    pub max_abs_u: f64,
}

pub fn metrics(traj: &Trajectory) -> Metrics {
    let g2 = traj.gamma * traj.gamma;
    let terminal = traj.p_next.last().copied().unwrap_or(0.0);
    let qr: f64 = traj.q.iter().zip(&traj.r).map(|(q, r)| q + r).sum();
    let s: f64 = traj.s.iter().sum();
    let amax = |vs: &[Vector]| vs.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    Metrics {
        j_t: g2 * s - qr - terminal,
        j_g: if s > 0.0 { Some((terminal + qr) / s) } else { None },
        max_abs_x: amax(&traj.xs),
        max_abs_u: amax(&traj.us),
    }
}

pub fn csv_header(n: usize, d: usize) -> String {
    let mut cols = vec!["k".to_string()];
    cols.extend((1..=n).map(|i| format!("x_{i}")));
    cols.extend((1..=d).map(|i| format!("u_{i}")));
    cols.extend((1..=n).map(|i| format!("w_{i}")));
    cols.extend(["q", "r", "s", "p"].map(String::from));
    cols.join(",")
}

/// CSV text: one row per `k = 0 … T` with `x_k`, `u_k`, `w_k`, `q(x_k)`,
/// `r(u_k)`, `s(w_k)` and `p(x_{k+1})`, 17 significant digits.
pub fn to_csv(traj: &Trajectory) -> String {
    let n = traj.xs.first().map(|x| x.len()).unwrap_or(0);
    let d = traj.us.first().map(|u| u.len()).unwrap_or(0);
    let mut out = csv_header(n, d);
    out.push('\n');
    for k in 0..traj.ws.len() {
        let _ = write!(out, "{k}");
        let costs = [traj.q[k], traj.r[k], traj.s[k], traj.p_next[k]];
        let values = traj.xs[k]
            .iter()
            .chain(traj.us[k].iter())
            .chain(traj.ws[k].iter())
            .chain(costs.iter());
        for v in values {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn export_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(traj)).map_err(|e| HinfError::io(path, e))
}

/// Aggregate over many rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub max_j_g: f64,
    pub min_j_t: f64,
    pub max_abs_x: f64,
    pub max_abs_u: f64,
    /// Runs with `J_G > γ² + 1e-6` or `J_T < −1e-7`.
    pub violations: usize,
}

/// Runs every `(model, seed)` pair in parallel.
pub fn monte_carlo(
    cert: &Certificate,
    controller: &dyn Controller,
    models: &[DisturbanceModel],
    horizon: usize,
    quadratic_gain: Option<&Matrix>,
) -> Result<MonteCarloSummary> {
    let g2 = cert.gamma * cert.gamma;
    let results: Vec<Metrics> = models
        .par_iter()
        .map(|m| rollout(cert, controller, *m, horizon, quadratic_gain).map(|t| metrics(&t)))
        .collect::<Result<_>>()?;
    let mut summary = MonteCarloSummary {
        runs: results.len(),
        max_j_g: f64::NEG_INFINITY,
        min_j_t: f64::INFINITY,
        max_abs_x: 0.0,
        max_abs_u: 0.0,
        violations: 0,
    };
    for m in results {
        let mut violated = m.j_t < -1e-7;
        if let Some(jg) = m.j_g {
            summary.max_j_g = summary.max_j_g.max(jg);
            violated |= jg > g2 + 1e-6;
        }
        summary.min_j_t = summary.min_j_t.min(m.j_t);
        if violated {
            summary.violations += 1;
        }
        summary.max_abs_x = summary.max_abs_x.max(m.max_abs_x);
        summary.max_abs_u = summary.max_abs_u.max(m.max_abs_u);
    }
    Ok(summary)
}

/// Zero-noise closed loop after a single initial disturbance `w₀`.
/// Returns the storage values `p(x_k)` for `k = 0 … steps` and the final state.
pub fn free_response(cert: &Certificate, controller: &dyn Controller, kick: &Vector, steps: usize) -> Result<(Vec<f64>, Vector)> {
    let sys = &cert.sys;
    let zero = Vector::zeros(sys.n());
    let u0 = controller.control(&zero, kick)?;
    let mut x = sys.step(&zero, &u0, kick);
    let mut values = Vec::with_capacity(steps + 1);
    values.push(cert.p.value(&x)?);
    for k in 0..steps {
        let u = controller
            .control(&x, &zero)
            .map_err(|e| HinfError::Aborted { step: k, source: Box::new(e) })?;
        x = sys.step(&x, &u, &zero);
        values.push(cert.p.value(&x)?);
    }
    Ok((values, x))
}
