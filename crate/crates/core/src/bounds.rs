//! Space-form comparison quantities and the constant-free eigenvalue bounds:
//! Cheng's upper bound through first Dirichlet eigenvalues of model balls,
//! and the Cheeger-type lower expression.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eigen::report::{fmt_real, Method, SpectrumReport};
use crate::error::{Error, Result};

/// `s_K(r)`, the solution of `f'' + K f = 0`, `f(0) = 0`, `f'(0) = 1`.
pub fn s_k(k: f64, r: f64) -> f64 {
    if (k * r * r).abs() < 1e-8 {
        // series keeps the K → 0 limit smooth
        return r - k * r.powi(3) / 6.0 + k * k * r.powi(5) / 120.0;
    }
    if k > 0.0 {
        (k.sqrt() * r).sin() / k.sqrt()
    } else {
        ((-k).sqrt() * r).sinh() / (-k).sqrt()
    }
}

/// `s_K'(r) / s_K(r)`.
fn cot_k(k: f64, r: f64) -> f64 {
    if (k * r * r).abs() < 1e-8 {
        return 1.0 / r - k * r / 3.0;
    }
    if k > 0.0 {
        let q = k.sqrt();
        q / (q * r).tan()
    } else {
        let q = (-k).sqrt();
        q / (q * r).tanh()
    }
}

/// Volume of the unit sphere `𝕊^{n−1}` in `ℝⁿ`, `2π^{n/2} / Γ(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    assert!(n >= 1, "dimension must be positive");
    let half = n as f64 / 2.0;
    let (mut gamma, mut x) = if n.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    while x < half {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(half) / gamma
}

/// `A_{n,K}(r) = vol(𝕊^{n−1}) s_K^{n−1}(r)`.
pub fn a_nk(n: usize, k: f64, r: f64) -> f64 {
    unit_sphere_area(n) * s_k(k, r).powi(n as i32 - 1)
}

/// `V_{n,K}(r) = vol(𝕊^{n−1}) ∫₀^r s_K^{n−1}(t) dt`.
pub fn v_nk(n: usize, k: f64, r: f64) -> f64 {
    let f = |t: f64| s_k(k, t).powi(n as i32 - 1);
    unit_sphere_area(n) * adaptive_simpson(&f, 0.0, r, 1e-14 * (1.0 + r.abs()), 48)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, depth)
}

/// Integrates the radial equation `φ'' + (N−1)(s_K'/s_K)φ' + λφ = 0` from the
/// series start at `ε = 1e-6` to `r` with Dormand-Prince 5(4) steps. Returns
/// `None` when `φ` changes sign before `r`, otherwise `φ(r)`.
fn shoot(n: f64, k: f64, r: f64, lambda: f64) -> Option<f64> {
    const EPS: f64 = 1e-6;
    let rhs = |t: f64, y: [f64; 2]| [y[1], -(n - 1.0) * cot_k(k, t) * y[1] - lambda * y[0]];
    let mut t = EPS;
    let mut y = [1.0 - lambda * EPS * EPS / (2.0 * n), -lambda * EPS / n];
    let mut h = EPS;
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [&[f64]; 6] = [
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
        ],
        &[
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    while t < r {
        h = h.min(r - t);
        let mut ks = [[0.0; 2]; 7];
        ks[0] = rhs(t, y);
        for s in 0..6 {
            let mut ys = y;
            for (j, a) in A[s].iter().enumerate() {
                ys[0] += h * a * ks[j][0];
                ys[1] += h * a * ks[j][1];
            }
            ks[s + 1] = rhs(t + C[s] * h, ys);
        }
        let mut next = y;
        for (j, a) in A[5].iter().enumerate() {
            next[0] += h * a * ks[j][0];
            next[1] += h * a * ks[j][1];
        }
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let e: f64 = (0..7).map(|j| E[j] * ks[j][i]).sum::<f64>() * h;
            let scale = 1e-14 + 1e-12 * y[i].abs().max(next[i].abs());
            err = err.max((e / scale).abs());
        }
        if err <= 1.0 {
            t += h;
            y = next;
            if y[0] < 0.0 && t < r * (1.0 - 1e-12) {
                return None;
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-15 * r {
            return Some(f64::NAN);
        }
    }
    Some(y[0])
}

/// First Dirichlet eigenvalue of the geodesic ball of radius `r` in the
/// `N`-dimensional space form of curvature `K`.
pub fn spaceform_ball_eigen(n: f64, k: f64, r: f64) -> Result<f64> {
    if !(n >= 1.0) || !n.is_finite() || !k.is_finite() {
        return Err(Error::invalid("need N ≥ 1 and finite K"));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("radius must be positive"));
    }
    if k > 0.0 && r >= PI / k.sqrt() {
        return Err(Error::invalid("ball radius must stay below π/√K"));
    }
    // φ stays positive on [0, r] exactly when λ is below the first eigenvalue
    let below = |lambda: f64| -> Result<bool> {
        match shoot(n, k, r, lambda) {
            None => Ok(false),
            Some(v) if v.is_nan() => Err(Error::numeric("radial integration stalled", lambda)),
            Some(v) => Ok(v > 0.0),
        }
    };
    let (mut lo, mut hi) = (0.0, 1.0 / (r * r));
    let mut tries = 0;
    while below(hi)? {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::numeric("no eigenvalue bracket found", hi));
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureAssumption {
    /// Effective dimension `N ≥ n`.
    #[serde(rename = "N")]
    pub n_eff: f64,
    /// `Ric_N ≥ (N−1)K`.
    #[serde(rename = "K")]
    pub k: f64,
    /// Diameter.
    pub d: f64,
    /// Distortion bound, `|τ| ≤ log Θ`.
    #[serde(rename = "Theta", default = "one")]
    pub theta: f64,
    /// Uniformity constant.
    #[serde(rename = "Lambda", default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub injectivity: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl CurvatureAssumption {
    pub fn validate(&self, manifold_dim: usize) -> Result<()> {
        if !(self.n_eff >= manifold_dim as f64) || self.n_eff.fract() != 0.0 {
            return Err(Error::invalid(format!(
                "N must be an integer at least the dimension {manifold_dim}"
            )));
        }
        if !(self.d > 0.0) || !(self.theta >= 1.0) || !(self.lambda >= 1.0) || !self.k.is_finite() {
            return Err(Error::invalid("need d > 0, Theta ≥ 1, Lambda ≥ 1 and finite K"));
        }
        if matches!(self.injectivity, Some(i) if !(i > 0.0)) {
            return Err(Error::invalid("injectivity radius must be positive"));
        }
        Ok(())
    }
}

/// `λ₁(B^N_K(d/2k))`.
pub fn cheng_bound(assumption: &CurvatureAssumption, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k starts at 1"));
    }
    spaceform_ball_eigen(assumption.n_eff, assumption.k, assumption.d / (2.0 * k as f64))
}

/// `h² / (4 Λ^{1+n} Θ²)`.
pub fn cheeger_lower_expression(h: f64, lambda: f64, theta: f64, n: usize) -> Result<f64> {
    if !(h >= 0.0) || !(lambda >= 1.0) || !(theta >= 1.0) {
        return Err(Error::invalid("need h ≥ 0, Lambda ≥ 1, Theta ≥ 1"));
    }
    Ok(h * h / (4.0 * lambda.powi(1 + n as i32) * theta * theta))
}

/// Which eigenvalue the k-th Cheng bound is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChengIndexing {
    /// `λ̄_k`, the k-th positive eigenvalue (k+1 disjoint balls along a
    /// minimizing geodesic); implies the other form.
    #[default]
    Positive,
    /// `λ_k` counted from `λ₁ = 0`.
    Counted,
}

/// Measured geometry feeding the checks.
#[derive(Debug, Clone, Default)]
pub struct GeometryHooks {
    pub closed: bool,
    pub manifold_dim: usize,
    pub measured_diameter: Option<f64>,
    /// Dirichlet-region Cheeger expression and the number of regions `m`.
    pub region_lower: Option<(f64, usize)>,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundOptions {
    /// Multiplicative slack on the upper bound.
    pub slack: f64,
    pub indexing: ChengIndexing,
    /// When set, the region lower value is asserted as `lower ≤ factor·λ̄_m`.
    pub continuum_factor: Option<f64>,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            slack: 0.02,
            indexing: ChengIndexing::Positive,
            continuum_factor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub k: usize,
    pub computed_lambda: f64,
    pub upper_bound: f64,
    pub lower_bound_expression: Option<f64>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub records: Vec<BoundRecord>,
    pub provenance: Vec<String>,
}

impl BoundReport {
    pub fn all_satisfied(&self) -> bool {
        self.records.iter().all(|r| r.satisfied)
    }

    /// Columns `k,computed_lambda,upper_bound,lower_bound_expression,satisfied`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,computed_lambda,upper_bound,lower_bound_expression,satisfied\n");
        for r in &self.records {
            let lower = r.lower_bound_expression.map(fmt_real).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.k,
                fmt_real(r.computed_lambda),
                fmt_real(r.upper_bound),
                lower,
                r.satisfied
            );
        }
        out
    }
}

/// Compares a spectrum with Cheng's bound for every available index and
/// attaches the region lower value. Violations are recorded, never thrown.
pub fn check_bounds(
    report: &SpectrumReport,
    assumption: &CurvatureAssumption,
    hooks: &GeometryHooks,
    options: &BoundOptions,
) -> Result<BoundReport> {
    let mut provenance = vec![format!(
        "cheng: lambda_1(B^N_K(d/2k)) with N={}, K={}, d={}; indexing {:?}; slack {}",
        assumption.n_eff, assumption.k, assumption.d, options.indexing, options.slack
    )];
    if !hooks.closed {
        provenance.push("bounds are checked on closed manifolds only; no records".into());
        return Ok(BoundReport {
            records: vec![],
            provenance,
        });
    }
    assumption.validate(hooks.manifold_dim)?;
    if let Some(dm) = hooks.measured_diameter {
        provenance.push(format!("measured graph diameter {dm}"));
    }
    let values: Vec<f64> = match options.indexing {
        ChengIndexing::Counted => report.values(),
        ChengIndexing::Positive => report
            .entries
            .iter()
            .filter(|e| e.method != Method::ConstantKernel)
            .map(|e| e.lambda)
            .collect(),
    };
    let mut records = Vec::with_capacity(values.len());
    for (i, &lambda) in values.iter().enumerate() {
        let k = i + 1;
        let upper = match cheng_bound(assumption, k) {
            Ok(v) => v,
            Err(e) => {
                provenance.push(format!("k={k}: bound unavailable ({e})"));
                continue;
            }
        };
        let mut satisfied = lambda <= upper * (1.0 + options.slack);
        let mut lower = None;
        if let (Some((value, m)), ChengIndexing::Positive) = (hooks.region_lower, options.indexing) {
            if m == k {
                lower = Some(value);
                if let Some(factor) = options.continuum_factor {
                    satisfied &= value <= factor * lambda;
                }
            }
        }
        records.push(BoundRecord {
            k,
            computed_lambda: lambda,
            upper_bound: upper,
            lower_bound_expression: lower,
            satisfied,
        });
    }
    if let Some((value, m)) = hooks.region_lower {
        provenance.push(format!(
            "region lower value {value} for lambda-bar_{m}, {}",
            match options.continuum_factor {
                Some(f) => format!("asserted with continuum factor {f}"),
                None => "informational".to_string(),
            }
        ));
    }
    Ok(BoundReport { records, provenance })
}
