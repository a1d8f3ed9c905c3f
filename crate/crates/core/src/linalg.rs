//! Largest singular value of a matrix-free operator, by Lanczos on B*B with full
//! reorthogonalization.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct TopSingular {
    pub sigma: f64,
    /// Right singular vector (unit norm).
    pub vector: Vec<Complex64>,
    pub iterations: usize,
    /// Ritz residual ‖B*Bv − θv‖ relative to θ.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Convergence when the relative Ritz residual drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_iter: 600, seed: 0x5eed_0f_7a11 }
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `active[i] = false` pins coordinate i to zero (e.g. the constant mode).
pub fn top_singular_value(
    active: &[bool],
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    apply_adjoint: impl Fn(&[Complex64]) -> Vec<Complex64>,
    opts: LanczosOptions,
) -> Result<TopSingular> {
    let dim = active.len();
    let free = active.iter().filter(|&&a| a).count();
    if free == 0 {
        return Ok(TopSingular { sigma: 0.0, vector: vec![Complex64::new(0.0, 0.0); dim], iterations: 0, residual: 0.0 });
    }
    let restrict = |v: &mut Vec<Complex64>| {
        for (x, &a) in v.iter_mut().zip(active) {
            if !a {
                *x = Complex64::new(0.0, 0.0);
            }
        }
    };
    let gram = |v: &[Complex64]| {
        let mut w = apply_adjoint(&apply(v));
        restrict(&mut w);
        w
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<Complex64> = (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    restrict(&mut q);
    let nq = norm(&q);
    q.iter_mut().for_each(|x| *x /= nq);

    let mut basis: Vec<Vec<Complex64>> = vec![q];
    let mut alpha: Vec<f64> = vec![];
    let mut beta: Vec<f64> = vec![];
    let limit = opts.max_iter.min(free);
    loop {
        let j = basis.len() - 1;
        let mut w = gram(&basis[j]);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let bnorm = norm(&w);
        let m = alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = t.symmetric_eigen();
        let (top, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let s = eig.eigenvectors.column(top);
        let scale = theta.abs().max(f64::MIN_POSITIVE);
        let residual = bnorm * s[m - 1].abs() / scale;
        let exhausted = bnorm <= 1e-14 * alpha.iter().fold(0.0f64, |x, &y| x.max(y.abs())).max(f64::MIN_POSITIVE);
        if residual <= opts.tol || exhausted || m >= limit {
            if residual > opts.tol && !exhausted && m < free {
                return Err(Error::NoConvergence(format!("Lanczos stopped after {m} steps with relative residual {residual:.3e}")));
            }
            let mut v = vec![Complex64::new(0.0, 0.0); dim];
            for (i, b) in basis.iter().take(m).enumerate() {
                for (x, y) in v.iter_mut().zip(b) {
                    *x += y * s[i];
                }
            }
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            return Ok(TopSingular { sigma: theta.max(0.0).sqrt(), vector: v, iterations: m, residual });
        }
        beta.push(bnorm);
        basis.push(w.into_iter().map(|x| x / bnorm).collect());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator() {
        let d: Vec<f64> = (0..50).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let active: Vec<bool> = (0..50).map(|i| i != 0).collect();
        let ap = |v: &[Complex64]| v.iter().zip(&d).map(|(x, y)| x * y).collect::<Vec<_>>();
        let r = top_singular_value(&active, ap, ap, LanczosOptions::default()).unwrap();
        assert!((r.sigma - 0.5).abs() < 1e-14);
        assert!(r.vector[1].norm() > 0.999);
    }

    #[test]
    fn dense_complex_matrix_against_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DMatrix::<Complex64>::from_fn(30, 30, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let svd_top = m.singular_values().iter().copied().fold(0.0, f64::max);
        let ap = |v: &[Complex64]| (&m * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec();
        let adj = |v: &[Complex64]| (m.adjoint() * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec();
        let r = top_singular_value(&[true; 30], ap, adj, LanczosOptions::default()).unwrap();
        assert!((r.sigma - svd_top).abs() < 1e-12 * svd_top);
    }
}
