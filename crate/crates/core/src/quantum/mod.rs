//! Quantum side: Bloch angles, Weyl matrices, superoperators on the Fourier-coefficient space,
//! exact and dense propagator norms, and Egorov discrepancies.
//!
//! Operators are represented either densely on H_N(θ) (d = 1) or by their coefficients a_k in
//! the orthonormal basis {W_k} of quantum Fourier modes, k in the fold domain (−N/2, N/2]^{2d}.
//! Coefficient vectors are indexed by [`crate::noise::residue_index`].

pub mod dense;
pub mod egorov;
pub mod exact;
pub mod superop;
pub mod weyl;

use crate::error::{Error, Result};
use crate::lattice::{fold, fold_shift, wedge, wedge_real, SymplecticIntMatrix};
use num_integer::Integer;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumSetting {
    pub n: i64,
    pub dim_d: usize,
    pub theta: Vec<f64>,
}

impl QuantumSetting {
    pub fn new(n: i64, dim_d: usize, theta: Vec<f64>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter(format!("N must be positive, got {n}")));
        }
        if theta.len() != 2 * dim_d {
            return Err(Error::DimensionMismatch { expected: 2 * dim_d, got: theta.len() });
        }
        let theta = theta.iter().map(|t| t - t.floor()).collect();
        Ok(Self { n, dim_d, theta })
    }

    /// Setting with the first admissible angle for F.
    pub fn for_map(f: &SymplecticIntMatrix, n: i64) -> Result<Self> {
        let theta = admissible_angles(f, n)?.into_iter().next().ok_or(Error::InadmissibleAngle)?;
        Self::new(n, f.dim_d(), theta)
    }

    pub fn hbar(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.n as f64)
    }

    /// Hilbert space dimension N^d.
    pub fn hilbert_dim(&self) -> usize {
        (self.n as usize).pow(self.dim_d as u32)
    }

    /// Number of Fourier coefficients N^{2d}.
    pub fn coeff_dim(&self) -> usize {
        (self.n as usize).pow(2 * self.dim_d as u32)
    }
}

/// The vector (A·B, C·D) with (X·Y)_i = Σ_j X_ij Y_ij for F = [[A, B], [C, D]].
pub fn checkerboard_vector(f: &SymplecticIntMatrix) -> Vec<i64> {
    let d = f.dim_d();
    let mut v = vec![0i64; 2 * d];
    for i in 0..d {
        for j in 0..d {
            v[i] += f.get(i, j) * f.get(i, d + j);
            v[d + i] += f.get(d + i, j) * f.get(d + i, d + j);
        }
    }
    v
}

/// Whether (N/2)(A·B, C·D) + Fθ − θ ∈ ℤ^{2d}.
pub fn is_admissible(f: &SymplecticIntMatrix, n: i64, theta: &[f64]) -> bool {
    let v = checkerboard_vector(f);
    let s = f.size();
    (0..s).all(|i| {
        let x = n as f64 / 2.0 * v[i] as f64 + (0..s).map(|j| f.get(i, j) as f64 * theta[j]).sum::<f64>() - theta[i];
        (x - x.round()).abs() < 1e-9
    })
}

fn det_i128(m: &[i128], n: usize) -> i128 {
    // Bareiss fraction-free elimination
    let mut a = m.to_vec();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k * n + k] == 0 {
            match (k + 1..n).find(|&r| a[r * n + k] != 0) {
                Some(r) => {
                    for c in 0..n {
                        a.swap(k * n + c, r * n + c);
                    }
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i * n + j] = (a[i * n + j] * a[k * n + k] - a[i * n + k] * a[k * n + j]) / prev;
            }
        }
        prev = a[k * n + k];
    }
    sign * a[(n - 1) * n + n - 1]
}

fn adjugate(m: &[i128], n: usize) -> Vec<i128> {
    let mut adj = vec![0i128; n * n];
    if n == 1 {
        adj[0] = 1;
        return adj;
    }
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<i128> = (0..n)
                .filter(|&r| r != i)
                .flat_map(|r| (0..n).filter(move |&c| c != j).map(move |c| (r, c)))
                .map(|(r, c)| m[r * n + c])
                .collect();
            let cof = det_i128(&minor, n - 1) * if (i + j) % 2 == 0 { 1 } else { -1 };
            adj[j * n + i] = cof;
        }
    }
    adj
}

/// Largest number of candidate shifts examined when enumerating admissible angles.
const MAX_ANGLE_CANDIDATES: u64 = 1 << 20;

/// All admissible Bloch angles for (F, N), θ = 0 first when it is admissible.
pub fn admissible_angles(f: &SymplecticIntMatrix, n: i64) -> Result<Vec<Vec<f64>>> {
    let s = f.size();
    let v = checkerboard_vector(f);
    let zero_ok = v.iter().all(|&x| (n as i128 * x as i128) % 2 == 0);
    let mut fm: Vec<i128> = f.entries().iter().map(|&x| x as i128).collect();
    for i in 0..s {
        fm[i * s + i] -= 1;
    }
    let det = det_i128(&fm, s);
    if det == 0 {
        return if zero_ok { Ok(vec![vec![0.0; s]]) } else { Err(Error::SingularFixedPoint) };
    }
    let adj = adjugate(&fm, s);
    let dabs = det.abs();
    let den = 2 * dabs;
    let total = (dabs as u64).checked_pow(s as u32).filter(|&t| t <= MAX_ANGLE_CANDIDATES);
    let total = total.ok_or_else(|| Error::Unsupported(format!("|det(F−I)| = {dabs} gives too many angle classes")))?;
    // θ = adj·(N v + 2k) / (2 det) mod 1; k ranges over [0, |det|)^{2d}
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for code in 0..total {
        let mut k = vec![0i128; s];
        let mut c = code;
        for x in k.iter_mut() {
            *x = (c % dabs as u64) as i128;
            c /= dabs as u64;
        }
        let rhs: Vec<i128> = (0..s).map(|i| n as i128 * v[i] as i128 + 2 * k[i]).collect();
        let num: Vec<i128> = (0..s)
            .map(|i| {
                let t: i128 = (0..s).map(|j| adj[i * s + j] * rhs[j]).sum();
                (t * det.signum()).mod_floor(&den)
            })
            .collect();
        if seen.insert(num.clone()) {
            out.push(num);
        }
    }
    out.sort_by_key(|num| num.iter().any(|&x| x != 0));
    Ok(out.into_iter().map(|num| num.iter().map(|&x| x as f64 / den as f64).collect()).collect())
}

/// α(k, m, θ) = ½k∧m + (N/2)m_q·m_p + m∧θ, reduced to [0, 1).
pub fn fold_phase(k: &[i64], m: &[i64], theta: &[f64], n: i64) -> f64 {
    let d = k.len() / 2;
    let mqmp: i64 = (0..d).map(|i| m[i] * m[d + i]).sum();
    let int_part = (wedge(k, m).unwrap() as i128 + n as i128 * mqmp as i128).rem_euclid(2) as f64 / 2.0;
    let a = int_part + wedge_real(m, theta);
    a - a.floor()
}

/// Folded representative of k and the phase α with W_k = e^{2πiα} W_{fold(k)}.
pub fn fold_with_phase(k: &[i64], setting: &QuantumSetting) -> (Vec<i64>, f64) {
    let kf = fold(k, setting.n);
    let m = fold_shift(k, setting.n);
    let a = fold_phase(&kf, &m, &setting.theta, setting.n);
    (kf, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_map_angles() {
        let f = SymplecticIntMatrix::cat();
        assert_eq!(checkerboard_vector(&f), vec![2, 1]);
        for n in [2, 4, 10, 64] {
            let a = admissible_angles(&f, n).unwrap();
            assert_eq!(a, vec![vec![0.0, 0.0]]);
        }
        for n in [3, 5, 7, 101] {
            let a = admissible_angles(&f, n).unwrap();
            assert_eq!(a, vec![vec![0.5, 0.5]]);
            assert!(is_admissible(&f, n, &a[0]));
            assert!(!is_admissible(&f, n, &[0.0, 0.0]));
        }
    }

    #[test]
    fn identity_angles() {
        let id = SymplecticIntMatrix::identity(1);
        assert_eq!(admissible_angles(&id, 5).unwrap(), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn singular_without_zero_is_error() {
        // [[1,1],[0,1]]: F−I singular, v = (1, 0) so θ = 0 fails for odd N
        let f = SymplecticIntMatrix::from_2x2(1, 1, 0, 1).unwrap();
        assert_eq!(admissible_angles(&f, 3), Err(Error::SingularFixedPoint));
        assert_eq!(admissible_angles(&f, 4).unwrap(), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn larger_determinant_gives_several_angles() {
        // [[3,1],[5,2]]: det(F−I) = 2·1 − 5 = −3
        let f = SymplecticIntMatrix::from_2x2(3, 1, 5, 2).unwrap();
        for n in [3, 4, 7] {
            let a = admissible_angles(&f, n).unwrap();
            assert_eq!(a.len(), 3, "N = {n}");
            for t in &a {
                assert!(is_admissible(&f, n, t));
            }
        }
    }

    #[test]
    fn fold_phase_examples() {
        assert_eq!(fold_phase(&[3, 1], &[0, 0], &[0.3, 0.2], 7), 0.0);
        assert_eq!(fold_phase(&[1, 0], &[1, 0], &[0.0, 0.0], 2), 0.0);
    }
}
