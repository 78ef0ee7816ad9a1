//! Experiment configuration documents and their translation into library objects.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use finsler_spectra::bounds::{ChengIndexing, CurvatureAssumption};
use finsler_spectra::eigen::SolverConfig;
use finsler_spectra::expr::Expr;
use finsler_spectra::measure::MeasureDensity;
use finsler_spectra::mesh::{Mesh, MeshModel};
use finsler_spectra::metric::{MetricSpec, MinkowskiNorm, NormKind, Symmetrization};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    pub measure: MeasureConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub bounds: Option<BoundsSection>,
    #[serde(default)]
    pub packing: Option<PackingSection>,
    #[serde(default)]
    pub cross_validate: Option<CrossValidateSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshConfig {
    Circle {
        n: usize,
    },
    Interval {
        n: usize,
    },
    Torus {
        nx: usize,
        ny: usize,
    },
    Disk {
        rings: usize,
    },
    Icosphere {
        level: usize,
    },
    /// A mesh in the plain-text format, relative to the config file.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default = "riemannian")]
    pub kind: NormKind,
    /// Row-major quadratic part; the identity when omitted.
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Randers drift covector.
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
    #[serde(default)]
    pub symmetrization: Symmetrization,
    /// Positive conformal factor `c(x)`: the norm becomes `c(x) F`.
    #[serde(default)]
    pub modulation: Option<Expr>,
}

fn riemannian() -> NormKind {
    NormKind::Riemannian
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            kind: NormKind::Riemannian,
            matrix: None,
            drift: None,
            symmetrization: Symmetrization::None,
            modulation: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    BusemannHausdorff,
    HolmesThompson,
    /// `e^{−f} √det a` with `f` given by `weight`.
    WeightedRiemannian {
        weight: Expr,
    },
    Custom {
        sigma: Expr,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Linear pencil for Riemannian metrics, nonlinear pipeline otherwise.
    #[default]
    Auto,
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub method: SolveMethod,
    #[serde(default)]
    pub nonlinear: SolverConfig,
}

fn default_k_max() -> usize {
    7
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            k_max: default_k_max(),
            method: SolveMethod::Auto,
            nonlinear: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(rename = "N")]
    pub n_eff: f64,
    #[serde(rename = "K")]
    pub k: f64,
    /// Declared diameter; the measured graph diameter when omitted.
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(rename = "Theta", default = "one")]
    pub theta: f64,
    #[serde(rename = "Lambda", default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub indexing: ChengIndexing,
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Radius of the package whose Dirichlet regions give the lower value.
    #[serde(default)]
    pub region_radius: Option<f64>,
    #[serde(default)]
    pub continuum_factor: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_slack() -> f64 {
    0.02
}

impl BoundsSection {
    pub fn assumption(&self, measured_diameter: f64) -> CurvatureAssumption {
        CurvatureAssumption {
            n_eff: self.n_eff,
            k: self.k,
            d: self.d.unwrap_or(measured_diameter),
            theta: self.theta,
            lambda: self.lambda,
            injectivity: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackingSection {
    pub radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossValidateSection {
    #[serde(default = "default_cross_k")]
    pub k_max: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_cross_k() -> usize {
    4
}

fn default_tolerance() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub plots: bool,
    #[serde(default = "yes")]
    pub json: bool,
    /// Include eigenfield values in the JSON report.
    #[serde(default)]
    pub fields: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            plots: true,
            json: true,
            fields: false,
        }
    }
}

/// Config plus the directory it was read from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(Loaded {
        config,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let positive = match &self.mesh {
            MeshConfig::Circle { n } | MeshConfig::Interval { n } => *n > 0,
            MeshConfig::Torus { nx, ny } => *nx > 0 && *ny > 0,
            MeshConfig::Disk { rings } => *rings > 0,
            MeshConfig::Icosphere { .. } | MeshConfig::File { .. } => true,
        };
        if !positive {
            return Err(invalid("mesh resolution must be positive"));
        }
        if self.solver.k_max == 0 {
            return Err(invalid("solver.k_max must be positive"));
        }
        self.solver.nonlinear.validate().map_err(|e| invalid(e.to_string()))?;
        if let Some(b) = &self.bounds {
            if !(b.slack >= 0.0) {
                return Err(invalid("bounds.slack must be non-negative"));
            }
            if matches!(b.region_radius, Some(r) if !(r > 0.0)) {
                return Err(invalid("bounds.region_radius must be positive"));
            }
        }
        if let Some(p) = &self.packing {
            if !(p.radius > 0.0) {
                return Err(invalid("packing.radius must be positive"));
            }
        }
        if let Some(c) = &self.cross_validate {
            if !matches!(self.measure, MeasureConfig::WeightedRiemannian { .. }) {
                return Err(invalid("cross_validate needs a weighted_riemannian measure"));
            }
            if c.k_max == 0 || !(c.tolerance > 0.0) {
                return Err(invalid("cross_validate needs k_max ≥ 1 and a positive tolerance"));
            }
        }
        if matches!(self.metric.kind, NormKind::Randers) && self.metric.symmetrization == Symmetrization::None {
            return Err(invalid("a Randers metric must be symmetrized (mean or quartic_mean)"));
        }
        Ok(())
    }

    pub fn mesh_model(&self) -> Option<MeshModel> {
        Some(match self.mesh {
            MeshConfig::Circle { n } => MeshModel::Circle { n },
            MeshConfig::Interval { n } => MeshModel::Interval { n },
            MeshConfig::Torus { nx, ny } => MeshModel::Torus { nx, ny },
            MeshConfig::Disk { rings } => MeshModel::Disk { rings },
            MeshConfig::Icosphere { level } => MeshModel::Icosphere { level },
            MeshConfig::File { .. } => return None,
        })
    }

    pub fn build_mesh(&self, base_dir: &Path) -> Result<Mesh, CliError> {
        match (&self.mesh, self.mesh_model()) {
            (_, Some(model)) => Ok(model.build()?),
            (MeshConfig::File { path }, None) => {
                let full = base_dir.join(path);
                let text =
                    std::fs::read_to_string(&full).map_err(|e| CliError::Io(format!("{}: {e}", full.display())))?;
                Ok(Mesh::from_text(&text)?)
            }
            _ => unreachable!("every built-in model has a MeshModel"),
        }
    }

    pub fn build_metric(&self, mesh: &Mesh) -> Result<MetricSpec, CliError> {
        let n = mesh.dimension;
        let m = &self.metric;
        let a = match &m.matrix {
            None => DMatrix::identity(n, n),
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(invalid(format!("metric.matrix must be {n}×{n}")));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
        };
        let b = match (&m.drift, m.kind) {
            (None, _) => DVector::zeros(n),
            (Some(_), NormKind::Riemannian) => return Err(invalid("metric.drift needs kind randers")),
            (Some(v), NormKind::Randers) if v.len() != n => {
                return Err(invalid(format!("metric.drift must have {n} entries")))
            }
            (Some(v), NormKind::Randers) => DVector::from_column_slice(v),
        };
        let base = match m.kind {
            NormKind::Riemannian => MinkowskiNorm::riemannian(a)?,
            NormKind::Randers => MinkowskiNorm::randers(a, b)?,
        };
        if mesh.is_embedded() {
            let isotropic = base.kind == NormKind::Riemannian
                && (base.a.clone() - DMatrix::identity(n, n) * base.a[(0, 0)]).abs().max() < 1e-14;
            if !isotropic {
                return Err(invalid("embedded meshes take only isotropic Riemannian metrics"));
            }
        }
        let label = match (m.kind, m.symmetrization) {
            (NormKind::Riemannian, _) => "riemannian".to_string(),
            (NormKind::Randers, Symmetrization::Mean) => "randers(mean)".to_string(),
            (NormKind::Randers, _) => "randers(quartic_mean)".to_string(),
        };
        let spec = match &m.modulation {
            None => MetricSpec::constant(base, m.symmetrization)?.with_label(label),
            Some(c) => {
                for v in &mesh.vertices {
                    let value = c.eval(v);
                    if !(value > 0.0) || !value.is_finite() {
                        return Err(invalid(format!("metric.modulation is not positive at {v:?}")));
                    }
                }
                let c = c.clone();
                let field = Arc::new(move |x: &[f64]| {
                    let s = c.eval(x);
                    MinkowskiNorm {
                        kind: base.kind,
                        a: &base.a * (s * s),
                        b: &base.b * s,
                    }
                });
                MetricSpec::varying(n, field, m.symmetrization, format!("{label}·c(x)"))?
            }
        };
        Ok(spec)
    }

    pub fn build_measure(&self) -> MeasureDensity {
        match &self.measure {
            MeasureConfig::BusemannHausdorff => MeasureDensity::BusemannHausdorff,
            MeasureConfig::HolmesThompson => MeasureDensity::HolmesThompson,
            MeasureConfig::WeightedRiemannian { weight } => {
                let f = weight.clone();
                MeasureDensity::weighted(move |x| f.eval(x))
            }
            MeasureConfig::Custom { sigma } => {
                let s = sigma.clone();
                MeasureDensity::custom(move |x| s.eval(x))
            }
        }
    }

    pub fn weight(&self) -> Option<Expr> {
        match &self.measure {
            MeasureConfig::WeightedRiemannian { weight } => Some(weight.clone()),
            _ => None,
        }
    }

    pub fn output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        override_dir
            .map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}
