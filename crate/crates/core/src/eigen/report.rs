//! Spectrum reports: ordered eigenpairs with provenance, multiplicity
//! clusters, the counting function and tabular output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::fem::ScalarField;
use crate::measure::MeasureKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Generalized eigenpair of the linear pencil.
    Linear,
    /// The constant function on a closed manifold, eigenvalue exactly zero.
    ConstantKernel,
    /// Minimizer of the Rayleigh quotient among zero-mean functions.
    ZeroMeanMin,
    /// Critical point reached by deflated descent and polishing.
    NonlinearDescent,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::ConstantKernel => "constant_kernel",
            Method::ZeroMeanMin => "zero_mean_min",
            Method::NonlinearDescent => "nonlinear_descent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    /// 1-based index counted with multiplicity.
    pub k: usize,
    pub lambda: f64,
    pub eigenfield: ScalarField,
    /// Weak residual `‖½∇N(u) − λ M u‖_{M⁻¹}` at the normalized eigenfield.
    pub residual: f64,
    /// Size of the cluster of numerically equal eigenvalues containing this one.
    pub multiplicity_cluster: usize,
    pub method: Method,
    /// Set for non-Riemannian metrics, where the value is only known to be
    /// a critical value bounding the min-max value from above.
    pub upper_bound_candidate: bool,
    /// `sup E` over the span of the eigenfields up to this index.
    pub minimax_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub entries: Vec<SpectrumEntry>,
    pub metric_id: String,
    pub measure_kind: MeasureKind,
    pub mesh_id: String,
}

impl SpectrumReport {
    pub fn new(metric_id: impl Into<String>, measure_kind: MeasureKind, mesh_id: impl Into<String>) -> Self {
        Self {
            entries: Vec::new(),
            metric_id: metric_id.into(),
            measure_kind,
            mesh_id: mesh_id.into(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorts by eigenvalue (stable), renumbers and recomputes clusters.
    pub fn finalize(&mut self, multiplicity_gap: f64) {
        self.entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        for (i, e) in self.entries.iter_mut().enumerate() {
            e.k = i + 1;
        }
        let sizes = cluster_sizes(&self.values(), multiplicity_gap);
        for (e, s) in self.entries.iter_mut().zip(sizes) {
            e.multiplicity_cluster = s;
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.entries.windows(2).all(|w| w[0].lambda <= w[1].lambda)
    }

    /// Columns `k,lambda,residual,multiplicity_cluster,method`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,lambda,residual,multiplicity_cluster,method\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.k,
                fmt_real(e.lambda),
                fmt_real(e.residual),
                e.multiplicity_cluster,
                e.method.as_str()
            );
        }
        out
    }

    /// JSON document; eigenfields are emptied unless requested.
    pub fn to_json(&self, with_fields: bool) -> String {
        let mut copy = self.clone();
        if !with_fields {
            for e in &mut copy.entries {
                e.eigenfield.values.clear();
            }
        }
        serde_json::to_string_pretty(&copy).expect("report serializes")
    }
}

/// Fixed-width scientific notation used in every CSV artifact.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        format!("{v}")
    }
}

/// Cluster size for each entry of a sorted list: neighbours closer than
/// `gap·(1+λ)` are chained into one cluster.
pub fn cluster_sizes(values: &[f64], gap: f64) -> Vec<usize> {
    let mut sizes = vec![0; values.len()];
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || values[i] - values[i - 1] > gap * (1.0 + values[i - 1].abs());
        if split {
            sizes[start..i].iter_mut().for_each(|s| *s = i - start);
            start = i;
        }
    }
    sizes
}

/// `N(λ)`: the number of reported eigenvalues strictly below `lambda`.
pub fn counting_function(report: &SpectrumReport, lambda: f64) -> usize {
    report.entries.iter().take_while(|e| e.lambda < lambda).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(values: &[f64]) -> SpectrumReport {
        let mut r = SpectrumReport::new("test", MeasureKind::BusemannHausdorff, "mesh");
        for &lambda in values {
            r.entries.push(SpectrumEntry {
                k: 0,
                lambda,
                eigenfield: ScalarField {
                    mesh_id: "mesh".into(),
                    values: vec![1.0],
                },
                residual: 0.0,
                multiplicity_cluster: 0,
                method: Method::Linear,
                upper_bound_candidate: false,
                minimax_upper: None,
            });
        }
        r.finalize(1e-6);
        r
    }

    #[test]
    fn counting_on_circle_spectrum() {
        let r = report(&[0.0, 1.0, 1.0, 4.0, 4.0]);
        assert_eq!(counting_function(&r, 2.0), 3);
        assert_eq!(counting_function(&r, 0.0), 0);
        assert_eq!(counting_function(&r, 0.5), 1);
        assert_eq!(counting_function(&r, 100.0), 5);
    }

    #[test]
    fn clusters_and_order() {
        let r = report(&[4.0, 0.0, 1.0 + 1e-9, 1.0, 4.0]);
        assert!(r.is_monotone());
        let sizes: Vec<usize> = r.entries.iter().map(|e| e.multiplicity_cluster).collect();
        assert_eq!(sizes, vec![1, 2, 2, 2, 2]);
        assert_eq!(r.entries[3].k, 4);
    }

    #[test]
    fn csv_layout_is_stable() {
        let r = report(&[0.0, 1.0]);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,lambda,residual,multiplicity_cluster,method");
        assert_eq!(lines[2], "2,1.000000000000e0,0.000000000000e0,1,linear");
        assert!(!r.to_json(false).contains("\"values\": [\n        1.0"));
    }
}
