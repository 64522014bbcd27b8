//! Lanczos approximation of `exp(-i H t) v` for real symmetric `H`.
//!
//! Each macro step builds an orthonormal Krylov basis `V_m` of `H` from the
//! current vector and approximates the propagated vector by
//! `|v| V_m exp(-i h T_m) e_1`, with `T_m` the Lanczos tridiagonal matrix. The
//! step `h` is halved until the a-posteriori estimate
//! `|v| beta_m |e_m^T exp(-i h T_m) e_1|` fits the per-time error budget
//! `tol * h / t`; the basis does not depend on `h`, so halving is cheap.
//! The approximation is unitary by construction (orthonormal basis, unitary
//! small exponential), so the norm is never renormalized.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::DynamicsError;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Largest Krylov subspace per step.
    pub max_dim: usize,
    /// Target 2-norm error of the whole propagation.
    pub tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            max_dim: 30,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KrylovStats {
    pub steps: usize,
    pub matvecs: usize,
    /// Sum of the accepted per-step error estimates.
    pub error_estimate: f64,
}

struct LanczosBasis {
    vectors: Vec<Vec<Complex64>>,
    eigenvalues: Vec<f64>,
    /// Eigenvectors of the tridiagonal matrix.
    q: DMatrix<f64>,
    beta_next: f64,
    exhausted: bool,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn lanczos(h: &CsrMatrix, start: &[Complex64], start_norm: f64, max_dim: usize) -> LanczosBasis {
    let dim = start.len();
    let max_dim = max_dim.min(dim).max(1);
    let mut vectors: Vec<Vec<Complex64>> = vec![start.iter().map(|x| x / start_norm).collect()];
    let mut alpha = Vec::with_capacity(max_dim);
    let mut beta = Vec::with_capacity(max_dim);
    let mut u = vec![Complex64::new(0.0, 0.0); dim];
    let mut exhausted = false;
    loop {
        let j = vectors.len() - 1;
        h.apply_into(&vectors[j], &mut u);
        let a = dot(&vectors[j], &u).re;
        alpha.push(a);
        // Full reorthogonalization, two passes.
        for _ in 0..2 {
            for v in &vectors {
                let c = dot(v, &u);
                for (x, y) in u.iter_mut().zip(v) {
                    *x -= c * y;
                }
            }
        }
        let b = norm(&u);
        beta.push(b);
        let scale = alpha.iter().map(|x| x.abs()).fold(b, f64::max).max(1.0);
        if b <= 1e-13 * scale {
            exhausted = true;
            break;
        }
        if vectors.len() == max_dim {
            break;
        }
        vectors.push(u.iter().map(|x| x / b).collect());
    }
    let m = vectors.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    LanczosBasis {
        vectors,
        eigenvalues: eig.eigenvalues.iter().copied().collect(),
        q: eig.eigenvectors,
        beta_next: beta[m - 1],
        exhausted,
    }
}

impl LanczosBasis {
    /// `exp(-i h T) e_1` in the Krylov coordinates.
    fn small_exp(&self, h: f64) -> Vec<Complex64> {
        let m = self.vectors.len();
        let weights: Vec<Complex64> = (0..m)
            .map(|k| Complex64::from_polar(self.q[(0, k)], -h * self.eigenvalues[k]))
            .collect();
        (0..m)
            .map(|r| (0..m).map(|k| weights[k] * self.q[(r, k)]).sum())
            .collect()
    }
}

/// `exp(-i H t) v` within `opts.tol` in the vector 2-norm.
pub fn expm_apply(
    h: &CsrMatrix,
    v: &[Complex64],
    t: f64,
    opts: &KrylovOptions,
) -> Result<(Vec<Complex64>, KrylovStats), DynamicsError> {
    let mut stats = KrylovStats::default();
    let mut w = v.to_vec();
    if t == 0.0 {
        return Ok((w, stats));
    }
    let direction = t.signum();
    let total = t.abs();
    let mut elapsed = 0.0;
    let mut h_try = total;
    while elapsed < total {
        let w_norm = norm(&w);
        if w_norm == 0.0 {
            break;
        }
        let basis = lanczos(h, &w, w_norm, opts.max_dim);
        stats.matvecs += basis.vectors.len();
        let remaining = total - elapsed;
        let mut step = h_try.min(remaining);
        let m = basis.vectors.len();
        let (y, err) = loop {
            let y = basis.small_exp(direction * step);
            let err = if basis.exhausted {
                0.0
            } else {
                w_norm * basis.beta_next * y[m - 1].norm()
            };
            if err <= opts.tol * step / total {
                break (y, err);
            }
            step /= 2.0;
            if step < total * 1e-14 {
                return Err(DynamicsError::ToleranceNotMet {
                    tol: opts.tol,
                    estimate: err,
                });
            }
        };
        let mut next = vec![Complex64::new(0.0, 0.0); w.len()];
        for (coef, vec) in y.iter().zip(&basis.vectors) {
            let c = coef * w_norm;
            for (x, b) in next.iter_mut().zip(vec) {
                *x += c * b;
            }
        }
        w = next;
        // Snap to the end to avoid a sliver step from rounding.
        elapsed = if step >= remaining { total } else { elapsed + step };
        stats.steps += 1;
        stats.error_estimate += err;
        h_try = step * 2.0;
    }
    Ok((w, stats))
}
