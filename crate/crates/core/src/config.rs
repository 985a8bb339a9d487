//! JSON run configuration and the certificate file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cases::{CaseKind, CaseParams};
use crate::central::{VerifyGrids, VerifyReport};
use crate::convex::FnSpec;
use crate::error::{HinfError, Result};
use crate::grid::{SampleGrid, DEFAULT_POINTS};
use crate::linalg::{self, Matrix};
use crate::quad::{QuadWeights, SystemLti};
use crate::sim::{DisturbanceKind, DisturbanceModel};

pub const CERTIFICATE_FORMAT: &str = "convex-hinf-certificate/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<SystemLti> {
        SystemLti::new(linalg::matrix_from_rows(&self.a)?, linalg::matrix_from_rows(&self.b)?)
    }
}

/// Explicit curvature bounds `[lower, upper]` (isotropic) used by the
/// shaping-parameter search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureSpec {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingSearch {
    /// Bounds on the Hessian of the first given cost (`r` for rs, `q` for
    /// qs and qr).
    pub first: CurvatureSpec,
    /// Bounds on the Hessian of the second given cost (`s` for rs and qs,
    /// `r` for qr, over the input envelope).
    pub second: CurvatureSpec,
    #[serde(default)]
    pub seed: u64,
}

/// The design route with its given data. Exactly one of the shaping
/// matrix and its search block must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    Quadratic {
        q: Vec<Vec<f64>>,
        r: Vec<Vec<f64>>,
        s: Vec<Vec<f64>>,
    },
    Rs {
        r: FnSpec,
        s: FnSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m_search: Option<ShapingSearch>,
    },
    Qs {
        q: FnSpec,
        s: FnSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m_search: Option<ShapingSearch>,
    },
    Qr {
        q: FnSpec,
        r: FnSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g_search: Option<ShapingSearch>,
    },
}

impl DesignSpec {
    pub fn mode(&self) -> &'static str {
        match self {
            DesignSpec::Quadratic { .. } => "quadratic",
            DesignSpec::Rs { .. } => "rs",
            DesignSpec::Qs { .. } => "qs",
            DesignSpec::Qr { .. } => "qr",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (given, search, name) = match self {
            DesignSpec::Quadratic { .. } => return Ok(()),
            DesignSpec::Rs { m, m_search, .. } | DesignSpec::Qs { m, m_search, .. } => {
                (m.is_some(), m_search.is_some(), "m")
            }
            DesignSpec::Qr { g, g_search, .. } => (g.is_some(), g_search.is_some(), "g"),
        };
        match (given, search) {
            (true, false) | (false, true) => Ok(()),
            _ => Err(HinfError::Config(format!(
                "design.{name}: give exactly one of `{name}` and `{name}_search`"
            ))),
        }
    }

    /// Unit or given quadratic weights for the baseline and for γ search.
    pub fn baseline_weights(&self, sys: &SystemLti, gamma: f64) -> Result<QuadWeights> {
        match self {
            DesignSpec::Quadratic { q, r, s } => Ok(QuadWeights {
                q: linalg::matrix_from_rows(q)?,
                r: linalg::matrix_from_rows(r)?,
                s: linalg::matrix_from_rows(s)?,
                p_terminal: Matrix::zeros(sys.n(), sys.n()),
                gamma,
            }),
            _ => Ok(QuadWeights::unit(sys.n(), sys.d(), gamma)),
        }
    }
}

/// Either a fixed `γ` or `factor × γ_inf` of the quadratic baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSpec {
    Value(f64),
    Search {
        factor: f64,
        #[serde(default = "default_search_tol")]
        tol: f64,
    },
}

fn default_search_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub radius: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    DEFAULT_POINTS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsSpec {
    pub xi: GridSpec,
    pub x: GridSpec,
    pub w: GridSpec,
}

impl GridsSpec {
    pub fn uniform(radius: f64) -> Self {
        let g = GridSpec { radius, points: DEFAULT_POINTS };
        Self { xi: g, x: g, w: g }
    }

    pub fn build(&self, scale: f64) -> Result<VerifyGrids> {
        let one = |g: &GridSpec| SampleGrid::new(g.radius, g.points)?.densified(scale);
        Ok(VerifyGrids { xi: one(&self.xi)?, x: one(&self.x)?, w: one(&self.w)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub horizon: usize,
    pub models: Vec<DisturbanceModel>,
}

impl SimulationSpec {
    /// White, uniform and Laplace noise at `scale`, plus both worst-case
    /// models, with consecutive seeds from `seed`.
    pub fn standard(horizon: usize, scale: f64, seed: u64) -> Self {
        let kinds = [
            DisturbanceKind::WhiteGaussian,
            DisturbanceKind::Uniform,
            DisturbanceKind::Laplace,
            DisturbanceKind::WorstCaseCentral,
            DisturbanceKind::WorstCaseQuadratic,
        ];
        let models = kinds
            .iter()
            .enumerate()
            .map(|(i, k)| DisturbanceModel::new(*k, scale, seed + i as u64))
            .collect();
        Self { horizon, models }
    }

    /// Replaces every seed by `seed + index`.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut out = self.clone();
        for (i, m) in out.models.iter_mut().enumerate() {
            m.seed = seed.wrapping_add(i as u64);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(HinfError::Config("horizon must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(HinfError::Config("models is empty".into()));
        }
        for (i, m) in self.models.iter().enumerate() {
            m.validate().map_err(at(format!("models[{i}]")))?;
        }
        Ok(())
    }
}

fn default_collapse() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub gamma: GammaSpec,
    pub design: DesignSpec,
    pub grids: GridsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Replace compositions of quadratics by closed forms.
    #[serde(default = "default_collapse")]
    pub collapse: bool,
}

/// Parses JSON, reporting the path of the offending field.
fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            HinfError::Json(inner)
        } else {
            HinfError::Config(format!("{path}: {inner}"))
        }
    })
}

/// Prefixes a validation error with the field it concerns.
fn at(field: impl std::fmt::Display) -> impl FnOnce(HinfError) -> HinfError {
    move |e| {
        let msg = match e {
            HinfError::Config(m) | HinfError::Dimension(m) => m,
            other => other.to_string(),
        };
        HinfError::Config(format!("{field}: {msg}"))
    }
}

fn check_shape(field: &str, rows: &Option<Vec<Vec<f64>>>, n: usize) -> Result<()> {
    if let Some(rows) = rows {
        let m = linalg::matrix_from_rows(rows).map_err(at(field))?;
        if m.nrows() != n || m.ncols() != n {
            return Err(HinfError::Config(format!("{field}: expected {n}x{n}, got {}x{}", m.nrows(), m.ncols())));
        }
    }
    Ok(())
}

fn check_fn(field: &str, spec: &FnSpec, dim: usize) -> Result<()> {
    if spec.dim() != dim {
        return Err(HinfError::Config(format!("{field}: dimension {} does not match the plant ({dim})", spec.dim())));
    }
    spec.build().map(|_| ()).map_err(at(field))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HinfError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let sys = self.system.build().map_err(at("system"))?;
        let (n, d) = (sys.n(), sys.d());
        self.design.validate()?;
        match &self.design {
            DesignSpec::Quadratic { q, r, s } => {
                check_shape("design.q", &Some(q.clone()), n)?;
                check_shape("design.r", &Some(r.clone()), d)?;
                check_shape("design.s", &Some(s.clone()), n)?;
            }
            DesignSpec::Rs { r, s, m, .. } => {
                check_fn("design.r", r, d)?;
                check_fn("design.s", s, n)?;
                check_shape("design.m", m, n)?;
            }
            DesignSpec::Qs { q, s, m, .. } => {
                check_fn("design.q", q, n)?;
                check_fn("design.s", s, n)?;
                check_shape("design.m", m, n)?;
            }
            DesignSpec::Qr { q, r, g, .. } => {
                check_fn("design.q", q, n)?;
                check_fn("design.r", r, d)?;
                check_shape("design.g", g, n)?;
            }
        }
        for (name, grid) in [("grids.xi", &self.grids.xi), ("grids.x", &self.grids.x), ("grids.w", &self.grids.w)] {
            SampleGrid::new(grid.radius, grid.points).map_err(at(name))?;
        }
        let (GammaSpec::Value(g) | GammaSpec::Search { factor: g, .. }) = self.gamma;
        if !(g.is_finite() && g > 0.0) {
            return Err(HinfError::Config("gamma: must be positive".into()));
        }
        if let Some(sim) = &self.simulation {
            sim.validate().map_err(at("simulation"))?;
        }
        Ok(())
    }

    /// Run configuration reproducing a case-study preset.
    pub fn preset(name: &str) -> Result<Self> {
        let p = CaseParams::preset(name)?;
        let scalar = |v: f64| vec![vec![v]];
        let design = match p.kind {
            CaseKind::InputLimited => DesignSpec::Rs {
                r: FnSpec::BoundedQuadratic { dim: 1, bound: vec![p.t], weight: None },
                s: FnSpec::Quadratic { weight: scalar(p.s) },
                m: Some(scalar(p.m)),
                m_search: None,
            },
            CaseKind::Safety => DesignSpec::Qs {
                q: FnSpec::BoundedQuadratic { dim: 1, bound: vec![p.t], weight: None },
                s: FnSpec::Quadratic { weight: scalar(p.s) },
                m: Some(scalar(p.m)),
                m_search: None,
            },
            CaseKind::Exponential => DesignSpec::Qr {
                q: FnSpec::Quadratic { weight: scalar(1.0) },
                r: FnSpec::ExpAbs { dim: 1 },
                g: Some(scalar(p.g)),
                g_search: None,
            },
        };
        let scale = match p.kind {
            CaseKind::Exponential => 1.0,
            _ => 0.5,
        };
        Ok(Self {
            system: SystemSpec { a: scalar(p.plant.a), b: scalar(p.plant.b) },
            gamma: GammaSpec::Value(p.gamma),
            design,
            grids: GridsSpec::uniform(p.envelope),
            simulation: Some(SimulationSpec::standard(100, scale, 1)),
            output: None,
            collapse: true,
        })
    }

    /// SHA-256 of the canonical JSON text.
    pub fn hash(&self) -> String {
        sha256_json(self)
    }
}

fn sha256_json<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("serializable");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// The parts of a certificate covered by the integrity hash. The level
/// being claimed (`CertificateFile::gamma`) is left out so that the same
/// functions can be re-verified at another level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateBody {
    pub system: SystemSpec,
    /// Level at which the shaping functions were induced.
    pub synthesis_gamma: f64,
    /// The design with its shaping matrix resolved.
    pub design: DesignSpec,
    pub grids: GridsSpec,
    pub collapse: bool,
}

impl CertificateBody {
    pub fn hash(&self) -> String {
        sha256_json(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub format: String,
    pub gamma: f64,
    pub body: CertificateBody,
    pub integrity: String,
    pub report: VerifyReport,
    #[serde(default)]
    pub design_conditions: Vec<crate::central::ConditionMargin>,
}

impl CertificateFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HinfError::io(path, e))?;
        let file: Self = parse_json(&text)?;
        file.check_integrity()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| HinfError::io(path, e))
    }

    pub fn check_integrity(&self) -> Result<()> {
        if self.format != CERTIFICATE_FORMAT {
            return Err(HinfError::Integrity(format!("unknown format {:?}", self.format)));
        }
        let expected = self.body.hash();
        if expected != self.integrity {
            return Err(HinfError::Integrity(format!(
                "hash mismatch: recorded {}, recomputed {expected}",
                self.integrity
            )));
        }
        Ok(())
    }
}
