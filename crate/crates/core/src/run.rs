//! The `synthesize`, `verify`, `simulate` and `reproduce` commands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cases::{CaseParams, CaseStudy};
use crate::central::{verify_certificate, Certificate, CentralController, ConditionMargin, VerifyReport};
use crate::config::{
    CertificateBody, CertificateFile, DesignSpec, GammaSpec, RunConfig, ShapingSearch, SimulationSpec,
    CERTIFICATE_FORMAT,
};
use crate::controller::Controller;
use crate::convex::FnSpec;
use crate::error::{HinfError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::quad::{self, LinearController, QuadWeights, SystemLti};
use crate::sim::{self, DisturbanceKind, Metrics};
use crate::synthesis::{self, CurvatureBounds, QsCoupling};

/// `γ` from the configuration, searching the quadratic baseline if asked.
pub fn resolve_gamma(cfg: &RunConfig, sys: &SystemLti) -> Result<f64> {
    match cfg.gamma {
        GammaSpec::Value(g) => Ok(g),
        GammaSpec::Search { factor, tol } => {
            let weights = cfg.design.baseline_weights(sys, 1.0)?;
            let found = quad::gamma_search(sys, &weights, tol)?;
            Ok(factor * found.gamma_inf)
        }
    }
}

fn bounds(n: usize, spec: &crate::config::CurvatureSpec) -> Result<CurvatureBounds> {
    CurvatureBounds::isotropic(n, spec.lower, spec.upper)
}

fn pick(set: &crate::interval::IntervalSet, what: &str) -> Result<Vec<Vec<f64>>> {
    let v = set
        .representative()
        .ok_or_else(|| HinfError::Infeasible(format!("the {what} interval is empty")))?;
    Ok(vec![vec![v]])
}

fn scalar_only(sys: &SystemLti, mode: &str) -> Result<()> {
    if sys.n() != 1 || sys.d() != 1 {
        return Err(HinfError::Config(format!("{mode} search supports scalar plants only")));
    }
    Ok(())
}

/// Replaces a search block by the shaping matrix it selects.
pub fn resolve_design(design: &DesignSpec, sys: &SystemLti, gamma: f64) -> Result<DesignSpec> {
    let mut out = design.clone();
    match &mut out {
        DesignSpec::Quadratic { .. } => {}
        DesignSpec::Rs { m, m_search, .. } => {
            if let Some(ShapingSearch { first, second, seed }) = m_search.take() {
                let rb = bounds(sys.d(), &first)?;
                let sb = bounds(sys.n(), &second)?;
                *m = Some(if sys.n() == 1 && sys.d() == 1 {
                    pick(&synthesis::feasibility_rs(sys, gamma, &rb, &sb)?, "m")?
                } else {
                    linalg::matrix_to_rows(&synthesis::solve_rs_lmi(sys, gamma, &rb, &sb, seed)?.m)
                });
            }
        }
        DesignSpec::Qs { m, m_search, .. } => {
            if let Some(ShapingSearch { first, second, .. }) = m_search.take() {
                scalar_only(sys, "qs")?;
                let set = synthesis::feasibility_qs(
                    sys,
                    gamma,
                    &bounds(1, &first)?,
                    &bounds(1, &second)?,
                    QsCoupling::Derived,
                )?;
                *m = Some(pick(&set, "m")?);
            }
        }
        DesignSpec::Qr { g, g_search, .. } => {
            if let Some(ShapingSearch { first, second, .. }) = g_search.take() {
                scalar_only(sys, "qr")?;
                let set = synthesis::feasibility_qr(sys, &bounds(1, &first)?, &bounds(1, &second)?)?;
                *g = Some(pick(&set, "g")?);
            }
        }
    }
    Ok(out)
}

fn shaping(rows: &Option<Vec<Vec<f64>>>) -> Result<Matrix> {
    let rows = rows
        .as_ref()
        .ok_or_else(|| HinfError::Config("design shaping matrix is unresolved".into()))?;
    linalg::matrix_from_rows(rows)
}

fn check_dim(spec: &FnSpec, dim: usize, name: &str) -> Result<()> {
    if spec.dim() != dim {
        return Err(HinfError::Dimension(format!("design.{name} has dimension {}, expected {dim}", spec.dim())));
    }
    Ok(())
}

/// Builds the certificate of a resolved design.
pub fn build_certificate(sys: &SystemLti, gamma: f64, design: &DesignSpec, collapse: bool) -> Result<Certificate> {
    let (n, d) = (sys.n(), sys.d());
    match design {
        DesignSpec::Quadratic { .. } => {
            let weights = design.baseline_weights(sys, gamma)?;
            weights.validate(sys)?;
            synthesis::quadratic_certificate(sys, &weights)
        }
        DesignSpec::Rs { r, s, m, .. } => {
            check_dim(r, d, "r")?;
            check_dim(s, n, "s")?;
            synthesis::induce_rs(sys, gamma, r.build()?, s.build()?, &shaping(m)?, collapse)
        }
        DesignSpec::Qs { q, s, m, .. } => {
            check_dim(q, n, "q")?;
            check_dim(s, n, "s")?;
            synthesis::induce_qs(sys, gamma, q.build()?, s.build()?, &shaping(m)?, collapse)
        }
        DesignSpec::Qr { q, r, g, .. } => {
            check_dim(q, n, "q")?;
            check_dim(r, d, "r")?;
            synthesis::induce_qr(sys, gamma, q.build()?, r.build()?, &shaping(g)?, collapse)
        }
    }
}

/// Sampled design conditions of the route, empty for the quadratic mode.
pub fn design_conditions(
    cert: &Certificate,
    design: &DesignSpec,
    grids: &crate::central::VerifyGrids,
) -> Result<Vec<ConditionMargin>> {
    match design {
        DesignSpec::Quadratic { .. } => Ok(Vec::new()),
        DesignSpec::Rs { m, .. } => synthesis::check_conditions_rs(cert, &shaping(m)?, grids),
        DesignSpec::Qs { m, .. } => synthesis::check_conditions_qs(cert, &shaping(m)?, grids),
        DesignSpec::Qr { g, .. } => synthesis::check_conditions_qr(cert, &shaping(g)?, grids),
    }
}

fn failure_summary(report: &VerifyReport, design: &[ConditionMargin]) -> Option<String> {
    let failed: Vec<String> = report
        .failures()
        .into_iter()
        .chain(design.iter().filter(|c| !c.passed))
        .map(|c| format!("{} (worst {:.3e}, tolerance {:.1e})", c.name, c.worst, c.tolerance))
        .collect();
    if failed.is_empty() {
        None
    } else {
        Some(failed.join(", "))
    }
}

/// Outcome of `synthesize`: the certificate file and the live certificate.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub file: CertificateFile,
    pub certificate: Arc<Certificate>,
}

impl Synthesis {
    pub fn passed(&self) -> bool {
        self.file.report.passed() && self.file.design_conditions.iter().all(|c| c.passed)
    }
}

/// Runs the selected design route and verifies the result. Failing
/// conditions are recorded in the report, not raised.
pub fn synthesize(cfg: &RunConfig, grid_scale: f64) -> Result<Synthesis> {
    cfg.validate()?;
    let sys = cfg.system.build()?;
    let gamma = resolve_gamma(cfg, &sys)?;
    let design = resolve_design(&cfg.design, &sys, gamma)?;
    let cert = build_certificate(&sys, gamma, &design, cfg.collapse)?;
    let grids = cfg.grids.build(grid_scale)?;
    let report = verify_certificate(&cert, &grids)?;
    let design_conditions = design_conditions(&cert, &design, &grids)?;
    let body = CertificateBody {
        system: cfg.system.clone(),
        synthesis_gamma: gamma,
        design,
        grids: cfg.grids,
        collapse: cfg.collapse,
    };
    let file = CertificateFile {
        format: CERTIFICATE_FORMAT.into(),
        gamma,
        integrity: body.hash(),
        body,
        report,
        design_conditions,
    };
    Ok(Synthesis { file, certificate: Arc::new(cert) })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HinfError::io(dir, e))
}

/// Writes `certificate.json` into `out`; returns an infeasibility error
/// naming the violated conditions when verification fails.
pub fn cmd_synthesize(cfg: &RunConfig, out: &Path, grid_scale: f64) -> Result<Synthesis> {
    let result = synthesize(cfg, grid_scale)?;
    create_dir(out)?;
    result.file.save(&out.join("certificate.json"))?;
    if let Some(failed) = failure_summary(&result.file.report, &result.file.design_conditions) {
        return Err(HinfError::Infeasible(format!("violated conditions: {failed}")));
    }
    Ok(result)
}

/// Rebuilds a certificate from its file: functions at the synthesis level,
/// checked at the claimed one.
pub fn load_certificate(file: &CertificateFile) -> Result<Certificate> {
    let sys = file.body.system.build()?;
    let cert = build_certificate(&sys, file.body.synthesis_gamma, &file.body.design, file.body.collapse)?;
    Ok(cert.with_gamma(file.gamma))
}

/// Re-checks a certificate file on grids densified by `grid_scale`.
pub fn cmd_verify(path: &Path, grid_scale: f64) -> Result<(VerifyReport, Vec<ConditionMargin>)> {
    let file = CertificateFile::load(path)?;
    let cert = load_certificate(&file)?;
    let grids = file.body.grids.build(grid_scale)?;
    let report = verify_certificate(&cert, &grids)?;
    let design = design_conditions(&cert, &file.body.design, &grids)?;
    Ok((report, design))
}

/// One simulated run in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: crate::sim::DisturbanceModel,
    pub controller: String,
    pub csv: String,
    pub csv_sha256: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub certificate: String,
    pub certificate_integrity: String,
    pub gamma: f64,
    pub simulation: SimulationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_note: Option<String>,
    pub runs: Vec<RunRecord>,
}

/// The unit-weight (or configured) quadratic baseline at the certificate's
/// `γ`: its own certificate, its linear law and the worst-case gain.
pub struct Baseline {
    pub certificate: Certificate,
    pub controller: LinearController,
    pub worst_case_gain: Matrix,
}

pub fn baseline(sys: &SystemLti, weights: &QuadWeights) -> Result<Baseline> {
    let certificate = synthesis::quadratic_certificate(sys, weights)?;
    let (p, _, _) = crate::central::quadratic_data(&certificate)
        .ok_or_else(|| HinfError::Numerical("baseline certificate is not quadratic".into()))?;
    Ok(Baseline {
        controller: LinearController::new(&p, weights, sys)?,
        worst_case_gain: quad::worst_case_gain(&p, weights, sys)?,
        certificate,
    })
}

fn sha256_file_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn write_csv(dir: &Path, name: &str, traj: &sim::Trajectory) -> Result<String> {
    let text = sim::to_csv(traj);
    let path = dir.join(name);
    std::fs::write(&path, &text).map_err(|e| HinfError::io(&path, e))?;
    Ok(sha256_file_text(&text))
}

/// Runs the central controller and the quadratic baseline on identical
/// disturbance streams; writes one CSV pair per model and `manifest.json`.
pub fn cmd_simulate(
    cert_path: &Path,
    simulation: &SimulationSpec,
    out: &Path,
    config_sha256: Option<String>,
) -> Result<Manifest> {
    simulation.validate()?;
    let file = CertificateFile::load(cert_path)?;
    let cert = Arc::new(load_certificate(&file)?);
    let sys = cert.sys.clone();
    create_dir(out)?;
    let local = out.join("certificate.json");
    if !local.exists() {
        file.save(&local)?;
    }
    let weights = file.body.design.baseline_weights(&sys, file.gamma)?;
    let (base, baseline_note) = match baseline(&sys, &weights) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(format!("quadratic baseline unavailable at this gamma: {e}"))),
    };
    let central = CentralController::new(cert.clone());
    let mut runs = Vec::new();
    for (i, model) in simulation.models.iter().enumerate() {
        let gain = base.as_ref().map(|b| &b.worst_case_gain);
        if model.kind == DisturbanceKind::WorstCaseQuadratic && gain.is_none() {
            return Err(HinfError::Config("worst_case_quadratic needs the quadratic baseline".into()));
        }
        let stem = format!("{:02}_{}_seed{}", i, model.kind.label(), model.seed);
        let ours = sim::rollout(&cert, &central, *model, simulation.horizon, gain)?;
        let name = format!("{stem}_central.csv");
        runs.push(RunRecord {
            model: *model,
            controller: "central".into(),
            csv_sha256: write_csv(out, &name, &ours)?,
            csv: name,
            metrics: sim::metrics(&ours),
        });
        if let Some(b) = &base {
            let theirs = sim::rollout(&b.certificate, &b.controller, *model, simulation.horizon, gain)?;
            let name = format!("{stem}_baseline.csv");
            runs.push(RunRecord {
                model: *model,
                controller: "baseline".into(),
                csv_sha256: write_csv(out, &name, &theirs)?,
                csv: name,
                metrics: sim::metrics(&theirs),
            });
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        certificate: "certificate.json".into(),
        certificate_integrity: file.integrity.clone(),
        gamma: file.gamma,
        simulation: simulation.clone(),
        config_sha256,
        baseline_note,
        runs,
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(&path, text).map_err(|e| HinfError::io(&path, e))?;
    Ok(manifest)
}

/// Largest deviation between the closed-form law of a preset and the
/// central controller over a uniform `points × points` grid on the
/// envelope.
pub fn closed_form_deviation(case: &CaseStudy, points: usize) -> Result<f64> {
    let r = case.params.envelope;
    let central = case.central();
    let closed = case.closed_form_controller();
    let step = 2.0 * r / (points.max(2) - 1) as f64;
    let mut worst = 0.0f64;
    for i in 0..points {
        for j in 0..points {
            let (x, w) = (-r + i as f64 * step, -r + j as f64 * step);
            let generic = central.control(&Vector::from_element(1, x), &Vector::from_element(1, w))?[0];
            let c = closed.scalar(x, w);
            worst = worst.max((generic - c).abs() / (1.0 + c.abs()));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceSummary {
    pub preset: String,
    pub params: CaseParams,
    pub certificate_passed: bool,
    pub closed_form_max_deviation: f64,
    pub feasible_interval: Vec<(f64, f64)>,
    pub manifest: String,
}

/// Runs a preset end to end: config, certificate, closed-form cross-check
/// and the simulation pairs.
pub fn cmd_reproduce(preset: &str, out: &Path, seed: Option<u64>, grid_scale: f64) -> Result<ReproduceSummary> {
    let mut cfg = RunConfig::preset(preset)?;
    if let (Some(seed), Some(sim)) = (seed, cfg.simulation.as_mut()) {
        *sim = sim.reseeded(seed);
    }
    create_dir(out)?;
    let cfg_text = serde_json::to_string_pretty(&cfg)? + "\n";
    let cfg_path = out.join("config.json");
    std::fs::write(&cfg_path, &cfg_text).map_err(|e| HinfError::io(&cfg_path, e))?;
    let synth = cmd_synthesize(&cfg, out, grid_scale)?;
    let case = CaseStudy::preset(preset)?;
    let deviation = closed_form_deviation(&case, 101)?;
    let sim = cfg.simulation.clone().expect("presets carry a simulation block");
    cmd_simulate(&out.join("certificate.json"), &sim, out, Some(cfg.hash()))?;
    let interval = case
        .feasible
        .pieces
        .iter()
        .map(|&(lo, hi)| (lo, if hi.is_finite() { hi } else { f64::MAX }))
        .collect();
    let summary = ReproduceSummary {
        preset: preset.into(),
        params: case.params,
        certificate_passed: synth.passed(),
        closed_form_max_deviation: deviation,
        feasible_interval: interval,
        manifest: "manifest.json".into(),
    };
    let path = out.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| HinfError::io(&path, e))?;
    Ok(summary)
}

/// Resolves the output directory: the flag wins over the config field.
pub fn output_dir(flag: Option<&Path>, cfg: Option<&RunConfig>) -> Result<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.and_then(|c| c.output.as_ref().map(PathBuf::from)))
        .ok_or_else(|| HinfError::Config("no output directory: pass --out or set `output`".into()))
}
