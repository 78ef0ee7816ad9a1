//! P1 finite elements: the L²(dm) mass matrix, the Dirichlet energy
//! `∫ F*²(du) dm` with its gradient, and linear stiffness matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{MeasureDensity, MeasureKind};
use crate::mesh::{signed_volume, Mesh};
use crate::metric::{MetricField, MetricSpec, PointNorm};
use crate::sparse::{dot, Cholesky, CsrMatrix, TripletBuilder};

/// Values of a P1 function, one per degree of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub mesh_id: String,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ElementData {
    pub nodes: Vec<usize>,
    pub dofs: Vec<Option<usize>>,
    /// Gradients of the nodal basis functions in local coordinates.
    pub grads: Vec<DVector<f64>>,
    pub volume: f64,
    pub center: Vec<f64>,
    pub norm: PointNorm,
    pub sigma: f64,
}

impl ElementData {
    /// Constant differential of the P1 function on this element.
    pub fn differential(&self, u: &[f64]) -> DVector<f64> {
        let mut eta = DVector::zeros(self.grads[0].len());
        for (g, d) in self.grads.iter().zip(&self.dofs) {
            if let Some(i) = d {
                eta.axpy(u[*i], g, 1.0);
            }
        }
        eta
    }

    fn weight(&self) -> f64 {
        self.sigma * self.volume
    }
}

/// A mesh, metric and measure discretized together.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh_id: String,
    pub metric_id: String,
    pub measure_kind: MeasureKind,
    pub dimension: usize,
    pub vertex_dof: Vec<Option<usize>>,
    pub n_dofs: usize,
    pub closed: bool,
    pub elements: Vec<ElementData>,
    pub mass: CsrMatrix,
    /// Stiffness of the quadratic parts `a`, exact for Riemannian metrics.
    pub reference_stiffness: CsrMatrix,
    pub riemannian: bool,
    mass_factor: Cholesky,
    dof_vertex: Vec<usize>,
    vertex_coords: Vec<Vec<f64>>,
}

fn basis_gradients(local: &[Vec<f64>]) -> Vec<DVector<f64>> {
    match local.len() {
        2 => {
            let len = local[1][0] - local[0][0];
            vec![
                DVector::from_element(1, -1.0 / len),
                DVector::from_element(1, 1.0 / len),
            ]
        }
        3 => {
            let twice = 2.0 * signed_volume(local);
            (0..3)
                .map(|i| {
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    DVector::from_vec(vec![
                        (local[j][1] - local[k][1]) / twice,
                        (local[k][0] - local[j][0]) / twice,
                    ])
                })
                .collect()
        }
        _ => unreachable!("simplices of dimension 1 or 2"),
    }
}

impl Discretization {
    pub fn new(mesh: &Mesh, spec: &MetricSpec, measure: &MeasureDensity) -> Result<Self> {
        mesh.validate()?;
        if spec.chart_dimension != mesh.dimension {
            return Err(Error::invalid(format!(
                "metric has chart dimension {} but mesh has dimension {}",
                spec.chart_dimension, mesh.dimension
            )));
        }
        let (vertex_dof, n_dofs) = mesh.dof_map();
        if n_dofs == 0 {
            return Err(Error::invalid("mesh has no free degrees of freedom"));
        }
        let mut dof_vertex = vec![usize::MAX; n_dofs];
        for (v, d) in vertex_dof.iter().enumerate() {
            if let Some(d) = d {
                if dof_vertex[*d] == usize::MAX {
                    dof_vertex[*d] = v;
                }
            }
        }

        // constant metric with a metric-derived density: one evaluation suffices
        let shared = match (&spec.field, measure.is_metric_canonical()) {
            (MetricField::Constant(_), true) => {
                let norm = spec.at(&mesh.vertices[0]);
                let sigma = measure.density_with(&norm, &mesh.vertices[0])?;
                Some((norm, sigma))
            }
            _ => None,
        };

        let mut elements = Vec::with_capacity(mesh.elements.len());
        for (e, nodes) in mesh.elements.iter().enumerate() {
            let geo = mesh.element_geometry(e);
            let (norm, sigma) = match &shared {
                Some((n, s)) => (n.clone(), *s),
                None => {
                    let norm = spec.at(&geo.center);
                    let sigma = measure.density_with(&norm, &geo.center)?;
                    (norm, sigma)
                }
            };
            elements.push(ElementData {
                nodes: nodes.clone(),
                dofs: nodes.iter().map(|&v| vertex_dof[v]).collect(),
                grads: basis_gradients(&geo.local),
                volume: signed_volume(&geo.local).abs(),
                center: geo.center,
                norm,
                sigma,
            });
        }
        let riemannian = elements.iter().all(|e| e.norm.is_riemannian());

        let d = mesh.dimension as f64;
        let mut mass = TripletBuilder::new(n_dofs);
        for el in &elements {
            let scale = el.weight() / ((d + 1.0) * (d + 2.0));
            for (i, di) in el.dofs.iter().enumerate() {
                for (j, dj) in el.dofs.iter().enumerate() {
                    if let (Some(p), Some(q)) = (di, dj) {
                        mass.add(*p, *q, if i == j { 2.0 * scale } else { scale });
                    }
                }
            }
        }
        let mass = mass.build();
        let mass_factor = Cholesky::factor(&mass)?;
        let reference_stiffness = assemble_stiffness(&elements, n_dofs, |el| el.norm.quadratic_part_inverse().clone());

        Ok(Self {
            mesh_id: mesh.id.clone(),
            metric_id: spec.label.clone(),
            measure_kind: measure.kind(),
            dimension: mesh.dimension,
            vertex_dof,
            n_dofs,
            closed: mesh.is_closed(),
            elements,
            mass,
            reference_stiffness,
            riemannian,
            mass_factor,
            dof_vertex,
            vertex_coords: mesh.vertices.clone(),
        })
    }

    pub fn field(&self, values: Vec<f64>) -> ScalarField {
        assert_eq!(values.len(), self.n_dofs);
        ScalarField {
            mesh_id: self.mesh_id.clone(),
            values,
        }
    }

    /// Samples `f` at the vertex carrying each degree of freedom.
    pub fn interpolate(&self, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        self.field(self.dof_vertex.iter().map(|&v| f(&self.vertex_coords[v])).collect())
    }

    pub fn dof_position(&self, dof: usize) -> &[f64] {
        &self.vertex_coords[self.dof_vertex[dof]]
    }

    /// Per-vertex values with zeros on fixed vertices.
    pub fn vertex_values(&self, u: &[f64]) -> Vec<f64> {
        self.vertex_dof.iter().map(|d| d.map_or(0.0, |i| u[i])).collect()
    }

    pub fn constant(&self) -> Option<Vec<f64>> {
        self.closed.then(|| vec![1.0; self.n_dofs])
    }

    pub fn total_measure(&self) -> f64 {
        self.elements.iter().map(ElementData::weight).sum()
    }

    pub fn mass_norm_sq(&self, u: &[f64]) -> f64 {
        self.mass.quadratic(u)
    }

    pub fn mass_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.bilinear(u, v)
    }

    /// `∫ u dm`.
    pub fn integral(&self, u: &[f64]) -> f64 {
        self.elements
            .iter()
            .map(|el| {
                let s: f64 = el.dofs.iter().flatten().map(|&i| u[i]).sum();
                s * el.weight() / el.nodes.len() as f64
            })
            .sum()
    }

    /// `√(rᵀ M⁻¹ r)`, the dual norm of a weak-form defect.
    pub fn dual_mass_norm(&self, r: &[f64]) -> f64 {
        dot(r, &self.mass_factor.solve(r)).max(0.0).sqrt()
    }

    pub fn solve_mass(&self, r: &[f64]) -> Vec<f64> {
        self.mass_factor.solve(r)
    }

    /// Lumped vertex masses `∫ φ_v dm` indexed by mesh vertex.
    pub fn vertex_masses(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.vertex_coords.len()];
        for el in &self.elements {
            let share = el.weight() / el.nodes.len() as f64;
            for &v in &el.nodes {
                m[v] += share;
            }
        }
        m
    }

    /// `∫ F*²(du) dm`, one centroid evaluation per element.
    pub fn energy_numerator(&self, u: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for el in &self.elements {
            let eta = el.differential(u);
            if eta.iter().all(|&v| v == 0.0) {
                continue;
            }
            let fs = el.norm.dual(&eta)?;
            total += fs * fs * el.weight();
        }
        Ok(total)
    }

    /// Gradient of [`Self::energy_numerator`] with respect to the nodal values.
    pub fn energy_gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.n_dofs];
        for el in &self.elements {
            let eta = el.differential(u);
            if eta.iter().all(|&v| v == 0.0) {
                continue;
            }
            // ∇_η F*²(η) = 2 𝔏⁻¹(η)
            let y = el.norm.legendre_inv(&eta)?;
            let w = 2.0 * el.weight();
            for (g, d) in el.grads.iter().zip(&el.dofs) {
                if let Some(i) = d {
                    grad[*i] += w * g.dot(&y);
                }
            }
        }
        Ok(grad)
    }

    /// Energy and gradient in one pass.
    pub fn energy_and_gradient(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.n_dofs];
        let mut total = 0.0;
        for el in &self.elements {
            let eta = el.differential(u);
            if eta.iter().all(|&v| v == 0.0) {
                continue;
            }
            let y = el.norm.legendre_inv(&eta)?;
            // F*(η)² = η(𝔏⁻¹η)
            total += eta.dot(&y) * el.weight();
            let w = 2.0 * el.weight();
            for (g, d) in el.grads.iter().zip(&el.dofs) {
                if let Some(i) = d {
                    grad[*i] += w * g.dot(&y);
                }
            }
        }
        Ok((total, grad))
    }

    /// Linear stiffness `∫ g*(du, dv) dm`; requires a Riemannian metric.
    pub fn stiffness(&self) -> Result<CsrMatrix> {
        if !self.riemannian {
            return Err(Error::invalid("linear stiffness needs a Riemannian metric"));
        }
        Ok(self.reference_stiffness.clone())
    }

    /// The matrix `A(u)` with `A(u)u = ½∇E(u)`: element Hessians of
    /// `F*²/2` at the current differential.
    pub fn linearized_stiffness(&self, u: &[f64]) -> Result<CsrMatrix> {
        if self.riemannian {
            return Ok(self.reference_stiffness.clone());
        }
        let mut inverse_tensors = Vec::with_capacity(self.elements.len());
        for el in &self.elements {
            let eta = el.differential(u);
            let h = if eta.iter().all(|&v| v == 0.0) {
                el.norm.quadratic_part_inverse().clone()
            } else {
                let y = el.norm.legendre_inv(&eta)?;
                el.norm
                    .tensor(&y)?
                    .try_inverse()
                    .ok_or_else(|| Error::numeric("singular fundamental tensor", f64::NAN))?
            };
            inverse_tensors.push(h);
        }
        let mut k = 0;
        Ok(assemble_stiffness(&self.elements, self.n_dofs, |_| {
            k += 1;
            inverse_tensors[k - 1].clone()
        }))
    }
}

fn assemble_stiffness(
    elements: &[ElementData],
    n_dofs: usize,
    mut cometric: impl FnMut(&ElementData) -> DMatrix<f64>,
) -> CsrMatrix {
    let mut t = TripletBuilder::new(n_dofs);
    for el in elements {
        let h = cometric(el);
        let w = el.weight();
        for (gi, di) in el.grads.iter().zip(&el.dofs) {
            let hg = &h * gi;
            for (gj, dj) in el.grads.iter().zip(&el.dofs) {
                if let (Some(p), Some(q)) = (di, dj) {
                    t.add(*p, *q, w * gj.dot(&hg));
                }
            }
        }
    }
    t.build()
}

/// Mass matrix of the L²(dm) inner product.
pub fn assemble_mass(mesh: &Mesh, spec: &MetricSpec, measure: &MeasureDensity) -> Result<CsrMatrix> {
    Ok(Discretization::new(mesh, spec, measure)?.mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{MinkowskiNorm, Symmetrization};
    use nalgebra::{dmatrix, dvector};
    use std::f64::consts::PI;

    fn circle(n: usize) -> Discretization {
        Discretization::new(
            &Mesh::circle(n).unwrap(),
            &MetricSpec::euclidean(1),
            &MeasureDensity::BusemannHausdorff,
        )
        .unwrap()
    }

    #[test]
    fn circle_total_mass_is_circumference() {
        let d = circle(64);
        let ones = vec![1.0; d.n_dofs];
        assert!((d.mass_norm_sq(&ones) - 2.0 * PI).abs() < 1e-10);
        assert!((d.total_measure() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn constant_has_zero_energy() {
        let d = circle(32);
        assert_eq!(d.energy_numerator(&vec![3.0; d.n_dofs]).unwrap(), 0.0);
        assert!(d
            .energy_gradient(&vec![3.0; d.n_dofs])
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn circle_cosine_energy() {
        let d = circle(256);
        let u = d.interpolate(|x| x[0].cos());
        let e = d.energy_numerator(&u.values).unwrap();
        assert!((e - PI).abs() < 0.01 * PI, "{e}");
    }

    #[test]
    fn torus_sine_energy() {
        let d = Discretization::new(
            &Mesh::torus(48, 48).unwrap(),
            &MetricSpec::euclidean(2),
            &MeasureDensity::BusemannHausdorff,
        )
        .unwrap();
        let u = d.interpolate(|x| (2.0 * PI * x[0]).sin());
        let e = d.energy_numerator(&u.values).unwrap();
        assert!((e - 2.0 * PI * PI).abs() < 0.01 * 2.0 * PI * PI, "{e}");
        let ones = vec![1.0; d.n_dofs];
        assert!((d.mass_norm_sq(&ones) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn riemannian_energy_is_quadratic_form() {
        let a = dmatrix![2.0, 0.3; 0.3, 0.5];
        let spec = MetricSpec::constant(MinkowskiNorm::riemannian(a).unwrap(), Symmetrization::None).unwrap();
        let d = Discretization::new(&Mesh::torus(8, 8).unwrap(), &spec, &MeasureDensity::HolmesThompson).unwrap();
        let k = d.stiffness().unwrap();
        let u = d.interpolate(|x| (2.0 * PI * x[0]).sin() + (4.0 * PI * x[1]).cos() * x[0]);
        let e = d.energy_numerator(&u.values).unwrap();
        assert!((e - k.quadratic(&u.values)).abs() < 1e-10 * (1.0 + e));
        let g = d.energy_gradient(&u.values).unwrap();
        let ku = k.mul_vec(&u.values);
        assert!(g.iter().zip(&ku).all(|(p, q)| (p - 2.0 * q).abs() < 1e-8));
        // constants lie in the kernel
        assert!(k.row_sums().iter().all(|s| s.abs() < 1e-10));
    }

    #[test]
    fn linearized_stiffness_reproduces_half_gradient() {
        let spec = MetricSpec::constant(
            MinkowskiNorm::randers(DMatrix::identity(2, 2), dvector![0.3, 0.1]).unwrap(),
            Symmetrization::QuarticMean,
        )
        .unwrap();
        let d = Discretization::new(&Mesh::torus(6, 6).unwrap(), &spec, &MeasureDensity::BusemannHausdorff).unwrap();
        let u = d.interpolate(|x| (2.0 * PI * x[0]).sin() + 0.3 * (2.0 * PI * x[1]).cos());
        let a = d.linearized_stiffness(&u.values).unwrap();
        let g = d.energy_gradient(&u.values).unwrap();
        let au = a.mul_vec(&u.values);
        for (p, q) in g.iter().zip(&au) {
            assert!((0.5 * p - q).abs() < 1e-9, "{p} {q}");
        }
        let e = d.energy_numerator(&u.values).unwrap();
        assert!((a.quadratic(&u.values) - e).abs() < 1e-9 * e);
    }

    #[test]
    fn dirichlet_interval_fixes_endpoints() {
        let d = Discretization::new(
            &Mesh::interval(10).unwrap(),
            &MetricSpec::euclidean(1),
            &MeasureDensity::BusemannHausdorff,
        )
        .unwrap();
        assert_eq!(d.n_dofs, 9);
        assert!(d.constant().is_none());
        let vals = d.vertex_values(&[1.0; 9]);
        assert_eq!((vals[0], vals[10]), (0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = Discretization::new(
            &Mesh::circle(8).unwrap(),
            &MetricSpec::euclidean(2),
            &MeasureDensity::BusemannHausdorff,
        );
        assert!(r.is_err());
    }
}
