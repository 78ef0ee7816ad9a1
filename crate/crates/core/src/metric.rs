//! Pointwise Minkowski-norm algebra for Riemannian and Randers metrics.
//!
//! A [`MetricSpec`] assigns a [`MinkowskiNorm`] to every chart point. The
//! manifold-level norm is the pointwise norm after its
//! [`Symmetrization`]; raw (irreversible) Randers norms are kept available
//! for the pointwise algebra.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Riemannian,
    Randers,
}

/// How an irreversible norm is made reversible.
///
/// `Mean` is `(F(y) + F(-y)) / 2`. For a Randers norm the drift cancels and
/// the result is the Riemannian norm of the quadratic part. `QuarticMean`
/// is `((F(y)^4 + F(-y)^4) / 2)^(1/4)`, which stays non-Riemannian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetrization {
    #[default]
    None,
    Mean,
    QuarticMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinkowskiNorm {
    pub kind: NormKind,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl MinkowskiNorm {
    pub fn riemannian(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let norm = Self {
            kind: NormKind::Riemannian,
            a,
            b: DVector::zeros(n),
        };
        norm.validate()?;
        Ok(norm)
    }

    pub fn euclidean(n: usize) -> Self {
        Self {
            kind: NormKind::Riemannian,
            a: DMatrix::identity(n, n),
            b: DVector::zeros(n),
        }
    }

    pub fn randers(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let norm = Self {
            kind: NormKind::Randers,
            a,
            b,
        };
        norm.validate()?;
        Ok(norm)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if n == 0 || self.a.ncols() != n || self.b.len() != n {
            return Err(Error::invalid("norm matrix must be square and match the drift"));
        }
        if self.a.iter().chain(self.b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("norm data must be finite"));
        }
        if (&self.a - self.a.transpose()).amax() > 1e-12 * (1.0 + self.a.amax()) {
            return Err(Error::invalid("quadratic part is not symmetric"));
        }
        let eig = self.a.clone().symmetric_eigenvalues();
        if eig.iter().any(|&l| l <= 0.0) {
            return Err(Error::invalid("quadratic part is not positive definite"));
        }
        if self.kind == NormKind::Randers && self.drift_norm() >= 1.0 {
            return Err(Error::invalid(
                "Randers drift must satisfy |b| < 1 in the dual norm of a",
            ));
        }
        Ok(())
    }

    /// `|b|` measured with `a⁻¹`.
    pub fn drift_norm(&self) -> f64 {
        let ainv = self.a.clone().try_inverse().expect("validated SPD");
        (self.b.transpose() * ainv * &self.b)[(0, 0)].max(0.0).sqrt()
    }

    fn alpha(&self, y: &DVector<f64>) -> f64 {
        (y.transpose() * &self.a * y)[(0, 0)].max(0.0).sqrt()
    }

    fn value(&self, y: &DVector<f64>) -> f64 {
        self.alpha(y) + self.b.dot(y)
    }

    fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        let alpha = self.alpha(y);
        &self.a * y / alpha + &self.b
    }

    fn hessian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let alpha = self.alpha(y);
        let ay = &self.a * y;
        &self.a / alpha - &ay * ay.transpose() / (alpha * alpha * alpha)
    }
}

/// The norm at one chart point together with the symmetrization in force.
#[derive(Debug, Clone)]
pub struct PointNorm {
    pub norm: MinkowskiNorm,
    pub symmetrization: Symmetrization,
    quadratic: Option<DMatrix<f64>>,
    a_inv: DMatrix<f64>,
}

/// Golden ratio conjugate used by the section searches.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

impl PointNorm {
    pub fn new(norm: MinkowskiNorm, symmetrization: Symmetrization) -> Self {
        let quadratic = match (norm.kind, symmetrization) {
            (NormKind::Riemannian, _) | (NormKind::Randers, Symmetrization::Mean) => Some(norm.a.clone()),
            _ if norm.b.iter().all(|&v| v == 0.0) => Some(norm.a.clone()),
            _ => None,
        };
        let a_inv = norm.a.clone().try_inverse().expect("validated SPD");
        Self {
            norm,
            symmetrization,
            quadratic,
            a_inv,
        }
    }

    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    /// The quadratic form `a` when this norm is Riemannian, i.e. `F² = yᵀay`.
    pub fn quadratic_form(&self) -> Option<&DMatrix<f64>> {
        self.quadratic.as_ref()
    }

    pub fn is_riemannian(&self) -> bool {
        self.quadratic.is_some()
    }

    pub fn quadratic_part_inverse(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    pub fn is_reversible(&self) -> bool {
        self.symmetrization != Symmetrization::None || self.norm.kind == NormKind::Riemannian
    }

    /// `F(y)`.
    pub fn eval(&self, y: &DVector<f64>) -> f64 {
        if y.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        if let Some(a) = &self.quadratic {
            return (y.transpose() * a * y)[(0, 0)].max(0.0).sqrt();
        }
        let m = &self.norm;
        match self.symmetrization {
            Symmetrization::None => m.value(y),
            Symmetrization::Mean => 0.5 * (m.value(y) + m.value(&-y)),
            Symmetrization::QuarticMean => {
                let (p, q) = (m.value(y), m.value(&-y));
                (0.5 * (p.powi(4) + q.powi(4))).powf(0.25)
            }
        }
    }

    /// `(F, ∇F, ∇²F)` at `y ≠ 0`.
    fn jet(&self, y: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let m = &self.norm;
        if let Some(a) = &self.quadratic {
            let ay = a * y;
            let f = y.dot(&ay).max(0.0).sqrt();
            return (f, &ay / f, a / f - &ay * ay.transpose() / (f * f * f));
        }
        let neg = -y;
        match self.symmetrization {
            Symmetrization::None => (m.value(y), m.gradient(y), m.hessian(y)),
            Symmetrization::Mean => (
                0.5 * (m.value(y) + m.value(&neg)),
                0.5 * (m.gradient(y) - m.gradient(&neg)),
                0.5 * (m.hessian(y) + m.hessian(&neg)),
            ),
            Symmetrization::QuarticMean => {
                let (fp, gp, hp) = (m.value(y), m.gradient(y), m.hessian(y));
                // d/dy F(-y) = -∇F(-y), d²/dy² F(-y) = ∇²F(-y)
                let (fm, gm, hm) = (m.value(&neg), -m.gradient(&neg), m.hessian(&neg));
                let p = 0.5 * (fp.powi(4) + fm.powi(4));
                let dp = &gp * (2.0 * fp.powi(3)) + &gm * (2.0 * fm.powi(3));
                let hpp = (&gp * gp.transpose() * (6.0 * fp * fp) + &hp * (2.0 * fp.powi(3)))
                    + (&gm * gm.transpose() * (6.0 * fm * fm) + &hm * (2.0 * fm.powi(3)));
                let f = p.powf(0.25);
                let df = &dp * (0.25 * p.powf(-0.75));
                let hf = hpp * (0.25 * p.powf(-0.75)) - &dp * dp.transpose() * (3.0 / 16.0 * p.powf(-1.75));
                (f, df, hf)
            }
        }
    }

    /// Closed-form fundamental tensor `g_y = ∇F∇Fᵀ + F∇²F`.
    pub fn tensor(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        if let Some(a) = &self.quadratic {
            return Ok(a.clone());
        }
        if y.iter().all(|&v| v == 0.0) {
            return Err(Error::Singular);
        }
        let (f, df, hf) = self.jet(y);
        Ok(&df * df.transpose() + hf * f)
    }

    /// Fundamental tensor by central differences of `F²/2` with step
    /// `h = 1e-4·|y|`.
    pub fn fundamental_tensor(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite direction"));
        }
        if y.iter().all(|&v| v == 0.0) {
            return match &self.quadratic {
                Some(a) => Ok(a.clone()),
                None => Err(Error::Singular),
            };
        }
        let n = y.len();
        let h = 1e-4 * y.norm();
        let half_sq = |v: &DVector<f64>| 0.5 * self.eval(v).powi(2);
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let shifted = |si: f64, sj: f64| {
                    let mut v = y.clone();
                    v[i] += si * h;
                    v[j] += sj * h;
                    half_sq(&v)
                };
                let value = if i == j {
                    (shifted(1.0, 0.0) + shifted(-1.0, 0.0) - 2.0 * half_sq(y)) / (h * h)
                } else {
                    (shifted(1.0, 1.0) - shifted(1.0, -1.0) - shifted(-1.0, 1.0) + shifted(-1.0, -1.0)) / (4.0 * h * h)
                };
                g[(i, j)] = value;
                g[(j, i)] = value;
            }
        }
        Ok(g)
    }

    /// Legendre transform `X ↦ g_X(X, ·)`, i.e. `∇(F²/2)`.
    pub fn legendre(&self, x: &DVector<f64>) -> DVector<f64> {
        if x.iter().all(|&v| v == 0.0) {
            return DVector::zeros(x.len());
        }
        if let Some(a) = &self.quadratic {
            return a * x;
        }
        let (f, df, _) = self.jet(x);
        df * f
    }

    /// Inverse Legendre transform by damped Newton iteration on the convex
    /// function `F²/2 − η(y)` with the fundamental tensor as Jacobian.
    pub fn legendre_inv(&self, eta: &DVector<f64>) -> Result<DVector<f64>> {
        if eta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite covector"));
        }
        if eta.iter().all(|&v| v == 0.0) {
            return Ok(DVector::zeros(eta.len()));
        }
        if let Some(a) = &self.quadratic {
            return a
                .clone()
                .cholesky()
                .map(|c| c.solve(eta))
                .ok_or_else(|| Error::numeric("quadratic form is singular", f64::NAN));
        }
        let scale = (eta.transpose() * &self.a_inv * eta)[(0, 0)].sqrt();
        let dual_len = |r: &DVector<f64>| (r.transpose() * &self.a_inv * r)[(0, 0)].max(0.0).sqrt();
        let defect = |y: &DVector<f64>| {
            let (f, df, hf) = self.jet(y);
            (&df * f - eta, df, hf, f)
        };
        let objective = |y: &DVector<f64>| 0.5 * self.eval(y).powi(2) - eta.dot(y);

        let mut y = &self.a_inv * eta;
        let (mut r, mut df, mut hf, mut f) = defect(&y);
        let mut residual = dual_len(&r);
        for _ in 0..100 {
            if residual <= 1e-14 * scale {
                break;
            }
            let g = &df * df.transpose() + &hf * f;
            let step = match g.cholesky() {
                Some(c) => c.solve(&r),
                None => &self.a_inv * &r,
            };
            // full Newton steps while the defect shrinks, else Armijo on the objective
            let trial = &y - &step;
            let (tr, tdf, thf, tf) = defect(&trial);
            let tres = dual_len(&tr);
            if tres < residual {
                (y, r, df, hf, f, residual) = (trial, tr, tdf, thf, tf, tres);
                continue;
            }
            let phi0 = objective(&y);
            let slope = -r.dot(&step);
            let mut t = 0.5;
            let mut moved = false;
            while t > 1e-12 {
                let trial = &y - &step * t;
                if objective(&trial) <= phi0 + 1e-4 * t * slope {
                    y = trial;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
            (r, df, hf, f) = defect(&y);
            residual = dual_len(&r);
        }
        if residual <= 1e-10 * scale {
            Ok(y)
        } else {
            Err(Error::numeric("Legendre inversion did not converge", residual))
        }
    }

    /// `F*(η)` through the inverse Legendre transform: `F*(η) = F(𝔏⁻¹η)`.
    pub fn dual(&self, eta: &DVector<f64>) -> Result<f64> {
        if self.quadratic.is_some() {
            return Ok((eta.transpose() * &self.a_inv * eta)[(0, 0)].max(0.0).sqrt());
        }
        Ok(self.eval(&self.legendre_inv(eta)?))
    }

    /// `F*(η) = sup η(y)/F(y)` by an angular grid followed by golden-section
    /// refinement (n = 2), or a sign check (n = 1).
    pub fn dual_norm(&self, eta: &DVector<f64>) -> Result<f64> {
        if eta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite covector"));
        }
        match self.dim() {
            1 => {
                let plus = eta[0] / self.eval(&DVector::from_element(1, 1.0));
                let minus = -eta[0] / self.eval(&DVector::from_element(1, -1.0));
                Ok(plus.max(minus).max(0.0))
            }
            2 => {
                let ratio = |t: f64| {
                    let u = DVector::from_vec(vec![t.cos(), t.sin()]);
                    eta.dot(&u) / self.eval(&u)
                };
                const GRID: usize = 720;
                let step = 2.0 * PI / GRID as f64;
                let best = (0..GRID)
                    .map(|i| i as f64 * step)
                    .max_by(|p, q| ratio(*p).total_cmp(&ratio(*q)))
                    .unwrap();
                let (mut lo, mut hi) = (best - step, best + step);
                let mut last = ratio(best);
                let mut c = hi - INV_PHI * (hi - lo);
                let mut d = lo + INV_PHI * (hi - lo);
                let (mut fc, mut fd) = (ratio(c), ratio(d));
                for _ in 0..200 {
                    if fc > fd {
                        hi = d;
                        d = c;
                        fd = fc;
                        c = hi - INV_PHI * (hi - lo);
                        fc = ratio(c);
                    } else {
                        lo = c;
                        c = d;
                        fc = fd;
                        d = lo + INV_PHI * (hi - lo);
                        fd = ratio(d);
                    }
                    let current = fc.max(fd);
                    if (current - last).abs() <= 1e-12 * current.abs().max(1e-300) && hi - lo < 1e-9 {
                        last = current;
                        break;
                    }
                    last = last.max(current);
                }
                Ok(last.max(0.0))
            }
            n => Err(Error::invalid(format!("dual norm search supports n ≤ 2, got {n}"))),
        }
    }

    /// Sampled unit directions of the chart (Euclidean angles for n = 2).
    fn directions(&self, count: usize) -> Vec<DVector<f64>> {
        match self.dim() {
            1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
            _ => (0..count)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / count as f64;
                    DVector::from_vec(vec![t.cos(), t.sin()])
                })
                .collect(),
        }
    }

    /// `max g_X(Y,Y) / g_Z(Y,Y)` over `resolution` sampled directions.
    pub fn uniformity(&self, resolution: usize) -> f64 {
        if self.is_riemannian() {
            return 1.0;
        }
        let tensors: Vec<DMatrix<f64>> = self
            .directions(resolution)
            .iter()
            .map(|d| self.tensor(d).expect("non-zero direction"))
            .collect();
        let mut worst: f64 = 1.0;
        for y in self.directions(resolution) {
            let (lo, hi) = tensors.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), g| {
                let q = (y.transpose() * g * &y)[(0, 0)];
                (lo.min(q), hi.max(q))
            });
            worst = worst.max(hi / lo);
        }
        worst
    }

    /// Average of `g_y` over the indicatrix with its induced arc-length
    /// measure, using `nodes` quadrature nodes (n = 2) or both unit points
    /// (n = 1).
    pub fn average_metric(&self, nodes: usize) -> DMatrix<f64> {
        if let Some(a) = &self.quadratic {
            return a.clone();
        }
        let n = self.dim();
        let mut acc = DMatrix::zeros(n, n);
        let mut total = 0.0;
        if n == 1 {
            for d in self.directions(2) {
                acc += self.tensor(&d).expect("non-zero direction");
                total += 1.0;
            }
            return acc / total;
        }
        for i in 0..nodes {
            let t = 2.0 * PI * i as f64 / nodes as f64;
            let u = DVector::from_vec(vec![t.cos(), t.sin()]);
            let du = DVector::from_vec(vec![-t.sin(), t.cos()]);
            let (f, df, _) = self.jet(&u);
            // tangent of θ ↦ u/F(u)
            let tangent = &du / f - &u * (df.dot(&du) / (f * f));
            let g = self.tensor(&u).expect("non-zero direction");
            let w = (tangent.transpose() * &g * &tangent)[(0, 0)].max(0.0).sqrt();
            acc += g * w;
            total += w;
        }
        acc / total
    }

    /// Lebesgue volume of the unit ball `{F < 1}` and `∫_{F<1} det g dy`,
    /// by periodic trapezoid rules doubled until successive values agree.
    pub fn unit_ball_integrals(&self) -> Result<(f64, f64)> {
        match self.dim() {
            1 => {
                let mut vol = 0.0;
                let mut det = 0.0;
                for d in self.directions(2) {
                    let f = self.eval(&d);
                    let g = self.tensor(&d)?[(0, 0)];
                    vol += 1.0 / f;
                    det += g / f;
                }
                Ok((vol, det))
            }
            2 => {
                let integrate = |nodes: usize| -> (f64, f64) {
                    let mut vol = 0.0;
                    let mut det = 0.0;
                    for i in 0..nodes {
                        let t = 2.0 * PI * i as f64 / nodes as f64;
                        let u = DVector::from_vec(vec![t.cos(), t.sin()]);
                        let f = self.eval(&u);
                        let g = self.tensor(&u).expect("non-zero direction");
                        vol += 0.5 / (f * f);
                        det += 0.5 * g.determinant() / (f * f);
                    }
                    let h = 2.0 * PI / nodes as f64;
                    (vol * h, det * h)
                };
                let mut nodes = 64;
                let mut prev = integrate(nodes);
                while nodes < 1 << 20 {
                    nodes *= 2;
                    let next = integrate(nodes);
                    if !next.0.is_finite() || !next.1.is_finite() {
                        return Err(Error::numeric("non-finite unit ball integrand", f64::NAN));
                    }
                    let change = ((next.0 - prev.0) / next.0)
                        .abs()
                        .max(((next.1 - prev.1) / next.1).abs());
                    prev = next;
                    if change < 1e-8 {
                        return Ok(prev);
                    }
                }
                Err(Error::numeric("unit ball quadrature did not settle", f64::NAN))
            }
            n => Err(Error::invalid(format!("measures supported for n ≤ 2, got {n}"))),
        }
    }
}

pub type NormField = Arc<dyn Fn(&[f64]) -> MinkowskiNorm + Send + Sync>;

#[derive(Clone)]
pub enum MetricField {
    Constant(MinkowskiNorm),
    Varying(NormField),
}

/// A Finsler metric on a chart: a Minkowski norm at every point.
#[derive(Clone)]
pub struct MetricSpec {
    pub chart_dimension: usize,
    pub field: MetricField,
    pub symmetrization: Symmetrization,
    pub label: String,
}

impl fmt::Debug for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricSpec")
            .field("chart_dimension", &self.chart_dimension)
            .field("symmetrization", &self.symmetrization)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl MetricSpec {
    pub fn constant(norm: MinkowskiNorm, symmetrization: Symmetrization) -> Result<Self> {
        norm.validate()?;
        let n = norm.dim();
        if n > 2 {
            return Err(Error::invalid("chart dimension must be 1 or 2"));
        }
        let label = match norm.kind {
            NormKind::Riemannian => "riemannian".to_string(),
            NormKind::Randers => format!("randers({symmetrization:?})").to_lowercase(),
        };
        Ok(Self {
            chart_dimension: n,
            field: MetricField::Constant(norm),
            symmetrization,
            label,
        })
    }

    pub fn euclidean(n: usize) -> Self {
        Self::constant(MinkowskiNorm::euclidean(n), Symmetrization::None).expect("identity is valid")
    }

    pub fn varying(
        chart_dimension: usize,
        field: NormField,
        symmetrization: Symmetrization,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(1..=2).contains(&chart_dimension) {
            return Err(Error::invalid("chart dimension must be 1 or 2"));
        }
        Ok(Self {
            chart_dimension,
            field: MetricField::Varying(field),
            symmetrization,
            label: label.into(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn norm_at(&self, x: &[f64]) -> MinkowskiNorm {
        match &self.field {
            MetricField::Constant(n) => n.clone(),
            MetricField::Varying(f) => f(x),
        }
    }

    pub fn at(&self, x: &[f64]) -> PointNorm {
        PointNorm::new(self.norm_at(x), self.symmetrization)
    }

    /// True when every sampled point carries a quadratic norm.
    pub fn is_riemannian_at(&self, points: &[Vec<f64>]) -> bool {
        points.iter().all(|x| self.at(x).is_riemannian())
    }

    pub fn eval_norm(&self, x: &[f64], y: &DVector<f64>) -> Result<f64> {
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite input"));
        }
        Ok(self.at(x).eval(y))
    }

    pub fn fundamental_tensor(&self, x: &[f64], y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.at(x).fundamental_tensor(y)
    }

    pub fn dual_norm(&self, x: &[f64], eta: &DVector<f64>) -> Result<f64> {
        self.at(x).dual_norm(eta)
    }

    pub fn legendre(&self, x: &[f64], v: &DVector<f64>) -> DVector<f64> {
        self.at(x).legendre(v)
    }

    pub fn legendre_inv(&self, x: &[f64], eta: &DVector<f64>) -> Result<DVector<f64>> {
        self.at(x).legendre_inv(eta)
    }

    /// Sampled uniformity constant over a set of chart points.
    pub fn uniformity_constant(&self, sample_region: &[Vec<f64>], resolution: usize) -> Result<f64> {
        if resolution < 8 {
            return Err(Error::invalid("resolution must be at least 8 directions"));
        }
        Ok(sample_region
            .iter()
            .map(|x| self.at(x).uniformity(resolution))
            .fold(1.0, f64::max))
    }

    pub fn average_metric(&self, x: &[f64], quadrature_points: usize) -> Result<DMatrix<f64>> {
        if self.chart_dimension == 2 && quadrature_points < 64 {
            return Err(Error::invalid("average metric needs at least 64 nodes"));
        }
        Ok(self.at(x).average_metric(quadrature_points))
    }
}
