//! Finite Fourier series f(x) = Σ f̂(k) w_k(x) with w_k(x) = e^{2πi k∧x}.
//!
//! Under the wedge convention k∧x = k_p·q − k_q·p, so e.g.
//! cos(2πq) = ½(w_{(0,1)} + w_{(0,−1)}) and cos(2πp) = ½(w_{(1,0)} + w_{(−1,0)}).

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub dim_d: usize,
    pub terms: Vec<(Vec<i64>, Complex64)>,
}

impl FourierSeries {
    pub fn new(dim_d: usize, terms: Vec<(Vec<i64>, Complex64)>) -> Result<Self> {
        for (k, _) in &terms {
            if k.len() != 2 * dim_d {
                return Err(Error::DimensionMismatch { expected: 2 * dim_d, got: k.len() });
            }
        }
        Ok(Self { dim_d, terms }.merged())
    }

    pub fn zero(dim_d: usize) -> Self {
        Self { dim_d, terms: vec![] }
    }

    pub fn constant(dim_d: usize, c: f64) -> Self {
        Self { dim_d, terms: vec![(vec![0; 2 * dim_d], Complex64::new(c, 0.0))] }
    }

    /// a·cos(2π k∧x).
    pub fn cosine(k: Vec<i64>, a: f64) -> Self {
        let d = k.len() / 2;
        let neg: Vec<i64> = k.iter().map(|x| -x).collect();
        Self::new(d, vec![(k, Complex64::new(a / 2.0, 0.0)), (neg, Complex64::new(a / 2.0, 0.0))]).unwrap()
    }

    /// cos(2πq) for d = 1.
    pub fn cos_q() -> Self {
        Self::cosine(vec![0, 1], 1.0)
    }

    /// The kicked-map Hamiltonian (κ/(2π)²)·cos(2πq), d = 1.
    pub fn standard_kick(kappa: f64) -> Self {
        Self::cosine(vec![0, 1], kappa / (4.0 * PI * PI))
    }

    pub fn mode(k: Vec<i64>) -> Self {
        let d = k.len() / 2;
        Self::new(d, vec![(k, Complex64::new(1.0, 0.0))]).unwrap()
    }

    fn merged(mut self) -> Self {
        self.terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(Vec<i64>, Complex64)> = Vec::with_capacity(self.terms.len());
        for (k, c) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == k => last.1 += c,
                _ => out.push((k, c)),
            }
        }
        out.retain(|(_, c)| c.norm() != 0.0);
        Self { dim_d: self.dim_d, terms: out }
    }

    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.terms.iter().find(|(m, _)| m == k).map_or(Complex64::new(0.0, 0.0), |t| t.1)
    }

    /// Largest violation of f̂(−k) = conj f̂(k).
    pub fn hermitian_defect(&self) -> f64 {
        self.terms
            .iter()
            .map(|(k, c)| {
                let neg: Vec<i64> = k.iter().map(|x| -x).collect();
                (self.coeff(&neg) - c.conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.hermitian_defect() <= 1e-14 * self.l2_norm().max(1.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_mode(&self) -> i64 {
        self.terms.iter().flat_map(|(k, _)| k.iter().map(|x| x.abs())).max().unwrap_or(0)
    }

    /// Depends on q only (every mode has k_q = 0).
    pub fn is_q_only(&self) -> bool {
        let d = self.dim_d;
        self.terms.iter().all(|(k, _)| k[..d].iter().all(|&x| x == 0))
    }

    /// Depends on p only (every mode has k_p = 0).
    pub fn is_p_only(&self) -> bool {
        let d = self.dim_d;
        self.terms.iter().all(|(k, _)| k[d..].iter().all(|&x| x == 0))
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(k, c)| c * Complex64::from_polar(1.0, 2.0 * PI * crate::lattice::wedge_real(k, x)))
            .sum()
    }

    /// (∂f/∂q, ∂f/∂p) at x; real parts are taken, so f should be real.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim_d;
        let mut g = vec![0.0; 2 * d];
        for (k, c) in &self.terms {
            let w = c * Complex64::from_polar(1.0, 2.0 * PI * crate::lattice::wedge_real(k, x)) * Complex64::new(0.0, 2.0 * PI);
            // ∂(k∧x)/∂q_i = k_{p,i}, ∂(k∧x)/∂p_i = −k_{q,i}
            for i in 0..d {
                g[i] += (w * k[d + i] as f64).re;
                g[d + i] -= (w * k[i] as f64).re;
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cos_q_is_cos_of_q() {
        let f = FourierSeries::cos_q();
        for &(q, p) in &[(0.1, 0.7), (0.33, 0.2), (0.9, 0.5)] {
            let v = f.eval(&[q, p]);
            assert!((v.re - (2.0 * PI * q).cos()).abs() < 1e-14);
            assert!(v.im.abs() < 1e-14);
        }
        assert!(f.is_real() && f.is_q_only() && !f.is_p_only());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let f = FourierSeries::new(1, vec![
            (vec![1, 2], Complex64::new(0.3, 0.1)),
            (vec![-1, -2], Complex64::new(0.3, -0.1)),
            (vec![0, 1], Complex64::new(0.5, 0.0)),
            (vec![0, -1], Complex64::new(0.5, 0.0)),
        ])
        .unwrap();
        let x = [0.21, 0.63];
        let g = f.gradient(&x);
        let h = 1e-6;
        let dq = (f.eval(&[x[0] + h, x[1]]).re - f.eval(&[x[0] - h, x[1]]).re) / (2.0 * h);
        let dp = (f.eval(&[x[0], x[1] + h]).re - f.eval(&[x[0], x[1] - h]).re) / (2.0 * h);
        assert!((g[0] - dq).abs() < 1e-7 && (g[1] - dp).abs() < 1e-7);
    }

    #[test]
    fn merging_and_hermitian_check() {
        let f = FourierSeries::new(1, vec![(vec![1, 0], Complex64::new(1.0, 0.0)), (vec![1, 0], Complex64::new(-1.0, 0.0))]).unwrap();
        assert!(f.terms.is_empty());
        let g = FourierSeries::mode(vec![1, 0]);
        assert!(!g.is_real());
    }
}
