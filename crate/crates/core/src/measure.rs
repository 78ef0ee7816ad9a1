//! Measure densities against the chart Lebesgue measure, and the distortion.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{MetricSpec, PointNorm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    BusemannHausdorff,
    HolmesThompson,
    WeightedRiemannian,
    Custom,
}

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum MeasureDensity {
    BusemannHausdorff,
    HolmesThompson,
    /// `e^{-f} √det a` for a Riemannian metric with quadratic part `a`.
    WeightedRiemannian {
        weight: ScalarFn,
    },
    Custom {
        sigma: ScalarFn,
    },
}

impl fmt::Debug for MeasureDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MeasureDensity({:?})", self.kind())
    }
}

fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => PI,
        _ => unreachable!("chart dimension is 1 or 2"),
    }
}

impl MeasureDensity {
    pub fn kind(&self) -> MeasureKind {
        match self {
            MeasureDensity::BusemannHausdorff => MeasureKind::BusemannHausdorff,
            MeasureDensity::HolmesThompson => MeasureKind::HolmesThompson,
            MeasureDensity::WeightedRiemannian { .. } => MeasureKind::WeightedRiemannian,
            MeasureDensity::Custom { .. } => MeasureKind::Custom,
        }
    }

    pub fn weighted(weight: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        MeasureDensity::WeightedRiemannian {
            weight: Arc::new(weight),
        }
    }

    pub fn custom(sigma: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        MeasureDensity::Custom { sigma: Arc::new(sigma) }
    }

    /// True when the density does not depend on the point for a constant metric.
    pub fn is_metric_canonical(&self) -> bool {
        matches!(self, MeasureDensity::BusemannHausdorff | MeasureDensity::HolmesThompson)
    }

    /// Density at `x` for the already-evaluated local norm.
    pub fn density_with(&self, norm: &PointNorm, x: &[f64]) -> Result<f64> {
        let sigma = match self {
            MeasureDensity::BusemannHausdorff => {
                let (vol, _) = norm.unit_ball_integrals()?;
                unit_ball_volume(norm.dim()) / vol
            }
            MeasureDensity::HolmesThompson => {
                let (_, det) = norm.unit_ball_integrals()?;
                det / unit_ball_volume(norm.dim())
            }
            MeasureDensity::WeightedRiemannian { weight } => {
                if !norm.is_riemannian() {
                    return Err(Error::invalid("weighted measure needs a Riemannian metric"));
                }
                norm.norm.a.determinant().sqrt() * (-weight(x)).exp()
            }
            MeasureDensity::Custom { sigma } => sigma(x),
        };
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::numeric(format!("density is not positive at {x:?}"), sigma));
        }
        Ok(sigma)
    }

    pub fn density(&self, spec: &MetricSpec, x: &[f64]) -> Result<f64> {
        self.density_with(&spec.at(x), x)
    }
}

/// Density of a canonical Finsler measure at `x`.
pub fn measure_density(spec: &MetricSpec, x: &[f64], kind: MeasureKind) -> Result<f64> {
    match kind {
        MeasureKind::BusemannHausdorff => MeasureDensity::BusemannHausdorff.density(spec, x),
        MeasureKind::HolmesThompson => MeasureDensity::HolmesThompson.density(spec, x),
        other => Err(Error::invalid(format!(
            "measure_density computes canonical measures only, got {other:?}"
        ))),
    }
}

/// `τ(y) = log(√det g_y / σ)`.
pub fn distortion(spec: &MetricSpec, x: &[f64], y: &DVector<f64>, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("density must be positive"));
    }
    let g = spec.at(x).tensor(y)?;
    Ok((g.determinant().sqrt() / sigma).ln())
}
