//! Weighted Riemannian manifolds `(M, g, e^{−f} dvol_g)`: the drift Laplacian
//! `Δ_f u = Δ_g u − g(∇f, ∇u)` solved as a linear pencil, and its comparison
//! with the nonlinear pipeline run on the same weighted measure.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::eigen::report::fmt_real;
use crate::eigen::{solve_linear_spectrum, NonlinearSolver, SolverConfig, SpectrumReport};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fem::Discretization;
use crate::measure::{MeasureDensity, ScalarFn};
use crate::mesh::Mesh;
use crate::metric::MetricSpec;

/// Base geometries whose Ricci tensor is known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseGeometry {
    Flat,
    /// Unit round sphere, points and directions given in the embedding.
    UnitSphere,
}

#[derive(Clone)]
pub struct WeightedSpec {
    pub riemannian: MetricSpec,
    pub weight_f: ScalarFn,
    pub n_effective: Option<f64>,
    pub base: Option<BaseGeometry>,
}

impl std::fmt::Debug for WeightedSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightedSpec")
            .field("riemannian", &self.riemannian)
            .field("n_effective", &self.n_effective)
            .field("base", &self.base)
            .finish_non_exhaustive()
    }
}

impl WeightedSpec {
    pub fn new(riemannian: MetricSpec, weight_f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            riemannian,
            weight_f: Arc::new(weight_f),
            n_effective: None,
            base: None,
        }
    }

    pub fn from_expr(riemannian: MetricSpec, f: Expr) -> Self {
        Self::new(riemannian, move |x| f.eval(x))
    }

    pub fn with_base(mut self, base: BaseGeometry) -> Self {
        self.base = Some(base);
        self
    }

    pub fn with_n_effective(mut self, n: f64) -> Self {
        self.n_effective = Some(n);
        self
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let n = self.riemannian.chart_dimension as f64;
        if let Some(ne) = self.n_effective {
            if !(ne > n) {
                return Err(Error::invalid(format!("effective dimension {ne} must exceed {n}")));
            }
        }
        if !self
            .riemannian
            .is_riemannian_at(&mesh.vertices[..1.min(mesh.vertices.len())])
        {
            return Err(Error::invalid("weighted spec needs a Riemannian base metric"));
        }
        for v in &mesh.vertices {
            let f = (self.weight_f)(v);
            if !f.is_finite() {
                return Err(Error::numeric(format!("weight is not finite at {v:?}"), f));
            }
        }
        Ok(())
    }
}

/// `σ = e^{−f} √det a`.
pub fn weighted_measure(spec: &WeightedSpec) -> MeasureDensity {
    MeasureDensity::WeightedRiemannian {
        weight: spec.weight_f.clone(),
    }
}

pub fn weighted_discretization(mesh: &Mesh, spec: &WeightedSpec) -> Result<Discretization> {
    spec.validate(mesh)?;
    let disc = Discretization::new(mesh, &spec.riemannian, &weighted_measure(spec))?;
    if !disc.riemannian {
        return Err(Error::invalid("weighted spec needs a Riemannian base metric"));
    }
    Ok(disc)
}

/// Lowest `k_max` eigenvalues of `Δ_f` from the weighted stiffness and mass pencil.
pub fn solve_bakry_emery(mesh: &Mesh, spec: &WeightedSpec, k_max: usize) -> Result<SpectrumReport> {
    solve_linear_spectrum(&weighted_discretization(mesh, spec)?, k_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub k: usize,
    pub linear: f64,
    pub nonlinear: f64,
    pub relative_difference: f64,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedComparison {
    pub tolerance: f64,
    pub records: Vec<ComparisonRecord>,
    /// Set when the nonlinear pipeline stopped early.
    pub failure: Option<String>,
}

impl WeightedComparison {
    pub fn all_agree(&self) -> bool {
        self.failure.is_none() && self.records.iter().all(|r| r.agree)
    }

    pub fn max_relative_difference(&self) -> f64 {
        self.records.iter().map(|r| r.relative_difference).fold(0.0, f64::max)
    }

    /// Columns `k,linear_lambda,nonlinear_lambda,relative_difference,agree`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,linear_lambda,nonlinear_lambda,relative_difference,agree\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.k,
                fmt_real(r.linear),
                fmt_real(r.nonlinear),
                fmt_real(r.relative_difference),
                r.agree
            );
        }
        out
    }
}

pub fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Runs the linear drift-Laplacian solve and the generic nonlinear pipeline
/// on the same weighted measure, concurrently, and compares them entrywise.
pub fn cross_validate_weighted(
    mesh: &Mesh,
    spec: &WeightedSpec,
    k_max: usize,
    config: &SolverConfig,
    tolerance: f64,
) -> Result<WeightedComparison> {
    let disc = weighted_discretization(mesh, spec)?;
    let solver = NonlinearSolver::new(&disc, *config)?;
    let (linear, nonlinear) = rayon::join(|| solve_linear_spectrum(&disc, k_max), || solver.higher(k_max));
    let linear = linear?;
    let (nonlinear, failure) = nonlinear?;
    let records = linear
        .entries
        .iter()
        .zip(&nonlinear.entries)
        .map(|(a, b)| {
            let rel = relative_difference(a.lambda, b.lambda);
            ComparisonRecord {
                k: a.k,
                linear: a.lambda,
                nonlinear: b.lambda,
                relative_difference: rel,
                agree: rel <= tolerance,
            }
        })
        .collect();
    Ok(WeightedComparison {
        tolerance,
        records,
        failure: failure.map(|e| e.to_string()),
    })
}

/// `Ric_N(y, y) = Ric(y, y) + Hess f(y, y) − df(y)² / (N − n)`, with the
/// derivatives of `f` taken along the geodesic through `x` in direction `y`.
pub fn bakry_emery_ricci(spec: &WeightedSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    let n = spec.riemannian.chart_dimension;
    let ne = spec
        .n_effective
        .ok_or_else(|| Error::invalid("effective dimension is required"))?;
    if !(ne > n as f64) {
        return Err(Error::invalid(format!("effective dimension {ne} must exceed {n}")));
    }
    let base = spec
        .base
        .ok_or_else(|| Error::invalid("base geometry must be flat or the unit sphere"))?;
    let f = &spec.weight_f;
    let (ricci, geodesic): (f64, Box<dyn Fn(f64) -> Vec<f64>>) = match base {
        BaseGeometry::Flat => {
            if x.len() != n || y.len() != n {
                return Err(Error::invalid("point and direction must be chart vectors"));
            }
            let yv = DVector::from_column_slice(y);
            let g2 = spec.riemannian.eval_norm(x, &yv)?.powi(2);
            if (g2 - 1.0).abs() > 1e-8 {
                return Err(Error::invalid("direction must be a unit vector"));
            }
            let (x, y) = (x.to_vec(), y.to_vec());
            (
                0.0,
                Box::new(move |t| x.iter().zip(&y).map(|(a, b)| a + t * b).collect()),
            )
        }
        BaseGeometry::UnitSphere => {
            if n != 2 || x.len() != 3 || y.len() != 3 {
                return Err(Error::invalid("sphere points and directions live in R^3"));
            }
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
            if (dot(x, x) - 1.0).abs() > 1e-8 || (dot(y, y) - 1.0).abs() > 1e-8 || dot(x, y).abs() > 1e-8 {
                return Err(Error::invalid("need a unit point and a unit tangent direction"));
            }
            let (x, y) = (x.to_vec(), y.to_vec());
            (
                (n - 1) as f64,
                Box::new(move |t| x.iter().zip(&y).map(|(a, b)| t.cos() * a + t.sin() * b).collect()),
            )
        }
    };
    let h = 1e-4;
    let (fp, f0, fm) = (f(&geodesic(h)), f(&geodesic(0.0)), f(&geodesic(-h)));
    let hess = (fp - 2.0 * f0 + fm) / (h * h);
    let df = (fp - fm) / (2.0 * h);
    Ok(ricci + hess - df * df / (ne - n as f64))
}
