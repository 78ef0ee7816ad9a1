//! Lowest eigenpairs of a sparse symmetric-definite pencil `K u = λ M u`.
//!
//! Shift-invert block subspace iteration with Rayleigh-Ritz projection.
//! Known kernel vectors (constants on closed meshes) are split off exactly
//! and the iteration runs in their M-orthogonal complement.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::{dot, Cholesky, CsrMatrix};

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    /// `‖K u − λ M u‖ / ‖M u‖` in the Euclidean norm.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LinearOptions {
    /// Iteration stops once every residual is below `tolerance·min(1+λ, 10)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for LinearOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 2000,
            seed: 0x5eed,
        }
    }
}

/// Subtracts the M-projections onto the (M-orthonormal) `basis`.
pub(crate) fn project_out(v: &mut [f64], basis: &[Vec<f64>], m: &CsrMatrix) {
    for b in basis {
        let c = m.bilinear(b, v);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

/// M-orthonormalizes `vs` in place against `locked` and each other
/// (two passes of modified Gram-Schmidt). Returns false if a column collapsed.
pub(crate) fn m_orthonormalize(vs: &mut [Vec<f64>], locked: &[Vec<f64>], m: &CsrMatrix) -> bool {
    let mut ok = true;
    for j in 0..vs.len() {
        let before = m.quadratic(&vs[j]).sqrt();
        for _ in 0..2 {
            project_out(&mut vs[j], locked, m);
            let (done, rest) = vs.split_at_mut(j);
            project_out(&mut rest[0], done, m);
        }
        let len = m.quadratic(&vs[j]).sqrt();
        if !(len > 1e-10 * before) || !len.is_finite() {
            ok = false;
            continue;
        }
        vs[j].iter_mut().for_each(|x| *x /= len);
    }
    ok
}

fn relative_residual(k: &CsrMatrix, m: &CsrMatrix, v: &[f64], lambda: f64) -> f64 {
    let kv = k.mul_vec(v);
    let mv = m.mul_vec(v);
    let r: f64 = kv.iter().zip(&mv).map(|(a, b)| (a - lambda * b).powi(2)).sum();
    r.sqrt() / dot(&mv, &mv).sqrt()
}

/// Lowest `count` eigenpairs of `K u = λ M u`, including the supplied kernel
/// vectors (reported first with eigenvalue exactly 0).
pub fn lowest_eigenpairs(
    k: &CsrMatrix,
    m: &CsrMatrix,
    count: usize,
    kernel: &[Vec<f64>],
    opts: &LinearOptions,
) -> Result<Eigenpairs> {
    let n = k.dim();
    if m.dim() != n {
        return Err(Error::invalid("pencil dimensions differ"));
    }
    if count == 0 {
        return Ok(Eigenpairs {
            values: vec![],
            vectors: vec![],
            residuals: vec![],
            iterations: 0,
        });
    }
    if count > n {
        return Err(Error::invalid(format!(
            "requested {count} eigenpairs of a {n}-dimensional pencil"
        )));
    }
    let mut locked: Vec<Vec<f64>> = kernel.to_vec();
    if !m_orthonormalize(&mut locked, &[], m) {
        return Err(Error::invalid("kernel vectors are linearly dependent"));
    }
    let mut values = vec![0.0; locked.len().min(count)];
    let mut vectors: Vec<Vec<f64>> = locked.iter().take(count).cloned().collect();
    let mut residuals: Vec<f64> = vectors.iter().map(|v| relative_residual(k, m, v, 0.0)).collect();
    let wanted = count.saturating_sub(locked.len());
    if wanted == 0 {
        return Ok(Eigenpairs {
            values,
            vectors,
            residuals,
            iterations: 0,
        });
    }
    let free = n - locked.len();
    let block = (wanted + wanted.max(8)).min(free);

    let pairs = if block == free || free <= 64 {
        dense_complement(k, m, &locked, wanted)?
    } else {
        subspace_iteration(k, m, &locked, wanted, block, opts)?
    };
    values.extend(pairs.values);
    residuals.extend(pairs.residuals);
    vectors.extend(pairs.vectors);
    Ok(Eigenpairs {
        values,
        vectors,
        residuals,
        iterations: pairs.iterations,
    })
}

fn rayleigh_ritz(k: &CsrMatrix, y: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = y.len();
    let ky: Vec<Vec<f64>> = y.iter().map(|v| k.mul_vec(v)).collect();
    let h = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &ky[j]) + dot(&y[j], &ky[i])));
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = y[0].len();
    let vectors = order
        .iter()
        .map(|&c| {
            let mut x = vec![0.0; n];
            for (j, yj) in y.iter().enumerate() {
                let w = eig.eigenvectors[(j, c)];
                x.iter_mut().zip(yj).for_each(|(a, b)| *a += w * b);
            }
            x
        })
        .collect();
    (order.iter().map(|&c| eig.eigenvalues[c]).collect(), vectors)
}

fn subspace_iteration(
    k: &CsrMatrix,
    m: &CsrMatrix,
    locked: &[Vec<f64>],
    wanted: usize,
    block: usize,
    opts: &LinearOptions,
) -> Result<Eigenpairs> {
    let n = k.dim();
    let shift = (1e-3 * k.trace() / m.trace()).max(1e-8);
    let factor = Cholesky::factor(&k.combine(1.0, m, shift))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();

    let mut x: Vec<Vec<f64>> = (0..block).map(|_| random(&mut rng)).collect();
    m_orthonormalize(&mut x, locked, m);
    let mut worst = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let mut y: Vec<Vec<f64>> = x.iter().map(|v| factor.solve(&m.mul_vec(v))).collect();
        if !m_orthonormalize(&mut y, locked, m) {
            for v in y.iter_mut() {
                if !v.iter().all(|a| a.is_finite()) || m.quadratic(v) < 0.5 {
                    *v = random(&mut rng);
                }
            }
            m_orthonormalize(&mut y, locked, m);
        }
        let (theta, ritz) = rayleigh_ritz(k, &y);
        let residuals: Vec<f64> = (0..wanted)
            .map(|j| relative_residual(k, m, &ritz[j], theta[j]))
            .collect();
        worst = residuals.iter().fold(0.0, |a: f64, &b| a.max(b));
        x = ritz;
        if worst <= opts.tolerance * (1.0 + theta[wanted - 1].abs()).min(10.0) {
            x.truncate(wanted);
            return Ok(Eigenpairs {
                values: theta[..wanted].to_vec(),
                vectors: x,
                residuals,
                iterations: it,
            });
        }
    }
    Err(Error::numeric("subspace iteration did not converge", worst))
}

/// Dense fallback for small pencils: eigen-decomposition in an M-orthonormal
/// basis of the complement of `locked`.
fn dense_complement(k: &CsrMatrix, m: &CsrMatrix, locked: &[Vec<f64>], wanted: usize) -> Result<Eigenpairs> {
    let n = k.dim();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let mut single = vec![e];
        if m_orthonormalize(&mut single, locked, m) {
            let mut candidate = single.pop().unwrap();
            for _ in 0..2 {
                project_out(&mut candidate, &basis, m);
            }
            let len = m.quadratic(&candidate).sqrt();
            if len > 1e-8 {
                candidate.iter_mut().for_each(|a| *a /= len);
                basis.push(candidate);
            }
        }
        if basis.len() + locked.len() == n {
            break;
        }
    }
    if basis.len() < wanted {
        return Err(Error::numeric("complement basis too small", basis.len() as f64));
    }
    let (theta, ritz) = rayleigh_ritz(k, &basis);
    let residuals = (0..wanted)
        .map(|j| relative_residual(k, m, &ritz[j], theta[j]))
        .collect();
    Ok(Eigenpairs {
        values: theta[..wanted].to_vec(),
        vectors: ritz.into_iter().take(wanted).collect(),
        residuals,
        iterations: 1,
    })
}
