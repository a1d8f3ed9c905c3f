//! Maps Φ = F ∘ t_v ∘ Φ₁ on the torus, with Φ₁ the time-one flow of a kick Hamiltonian.

use crate::error::{Error, Result};
use crate::lattice::SymplecticIntMatrix;
use crate::series::FourierSeries;

/// RK4 steps per unit time for kicks that are neither q-only nor p-only.
pub const FLOW_STEPS: usize = 256;

#[derive(Debug, Clone)]
pub struct ClassicalMapSpec {
    pub linear: SymplecticIntMatrix,
    pub translation: Vec<f64>,
    pub kick: Option<FourierSeries>,
}

impl ClassicalMapSpec {
    pub fn new(linear: SymplecticIntMatrix, translation: Vec<f64>, kick: Option<FourierSeries>) -> Result<Self> {
        let n = linear.size();
        if translation.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: translation.len() });
        }
        if let Some(h) = &kick {
            if h.dim_d != linear.dim_d() {
                return Err(Error::DimensionMismatch { expected: linear.dim_d(), got: h.dim_d });
            }
            if !h.is_real() {
                return Err(Error::InvalidParameter("kick Hamiltonian must be real-valued".into()));
            }
        }
        let translation = translation.iter().map(|x| x - x.floor()).collect();
        Ok(Self { linear, translation, kick })
    }

    pub fn linear(f: SymplecticIntMatrix) -> Self {
        let n = f.size();
        Self { linear: f, translation: vec![0.0; n], kick: None }
    }

    /// Cat map followed by the kick (κ/(2π)²)cos(2πq).
    pub fn kicked_cat(kappa: f64) -> Self {
        Self {
            linear: SymplecticIntMatrix::cat(),
            translation: vec![0.0; 2],
            kick: Some(FourierSeries::standard_kick(kappa)),
        }
    }

    pub fn dim_d(&self) -> usize {
        self.linear.dim_d()
    }

    pub fn is_linear(&self) -> bool {
        self.kick.as_ref().map_or(true, |h| h.terms.is_empty()) && self.translation.iter().all(|&x| x == 0.0)
    }

    pub fn has_kick(&self) -> bool {
        self.kick.as_ref().map_or(false, |h| !h.terms.is_empty())
    }

    /// Φ(x) = F(t_v(Φ₁(x))), not reduced mod 1.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let y = match &self.kick {
            Some(h) if !h.terms.is_empty() => kick_flow(h, x),
            _ => x.to_vec(),
        };
        let y: Vec<f64> = y.iter().zip(&self.translation).map(|(a, b)| a + b).collect();
        let n = y.len();
        (0..n).map(|i| (0..n).map(|j| self.linear.get(i, j) as f64 * y[j]).sum()).collect()
    }
}

/// Time-one flow of q̇ = ∂H/∂p, ṗ = −∂H/∂q. Closed form for q-only and p-only Hamiltonians.
pub fn kick_flow(h: &FourierSeries, x: &[f64]) -> Vec<f64> {
    let d = h.dim_d;
    if h.is_q_only() {
        let g = h.gradient(x);
        let mut y = x.to_vec();
        for i in 0..d {
            y[d + i] -= g[i];
        }
        return y;
    }
    if h.is_p_only() {
        let g = h.gradient(x);
        let mut y = x.to_vec();
        for i in 0..d {
            y[i] += g[d + i];
        }
        return y;
    }
    let field = |z: &[f64]| -> Vec<f64> {
        let g = h.gradient(z);
        let mut v = vec![0.0; 2 * d];
        for i in 0..d {
            v[i] = g[d + i];
            v[d + i] = -g[i];
        }
        v
    };
    let dt = 1.0 / FLOW_STEPS as f64;
    let mut y = x.to_vec();
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(u, w)| u + s * w).collect() };
    for _ in 0..FLOW_STEPS {
        let k1 = field(&y);
        let k2 = field(&axpy(&y, dt / 2.0, &k1));
        let k3 = field(&axpy(&y, dt / 2.0, &k2));
        let k4 = field(&axpy(&y, dt, &k3));
        for i in 0..2 * d {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn standard_kick_is_a_shear() {
        let h = FourierSeries::standard_kick(0.3);
        let y = kick_flow(&h, &[0.2, 0.4]);
        assert!((y[0] - 0.2).abs() < 1e-15);
        assert!((y[1] - (0.4 + 0.3 / (2.0 * PI) * (2.0 * PI * 0.2).sin())).abs() < 1e-15);
    }

    #[test]
    fn rk4_matches_shear_for_mixed_but_separable_check() {
        // H = a cos(2π(q+p)) is neither q- nor p-only; along the flow H is conserved
        let h = FourierSeries::new(1, vec![
            (vec![-1, 1], Complex64::new(0.01, 0.0)),
            (vec![1, -1], Complex64::new(0.01, 0.0)),
        ])
        .unwrap();
        let x = [0.13, 0.71];
        let y = kick_flow(&h, &x);
        assert!((h.eval(&x).re - h.eval(&y).re).abs() < 1e-12);
        // q+p is conserved too: d(q+p)/dt = ∂H/∂p − ∂H/∂q = 0 for H(q+p)
        assert!(((x[0] + x[1]) - (y[0] + y[1])).abs() < 1e-12);
    }

    #[test]
    fn composition_order() {
        let m = ClassicalMapSpec::new(SymplecticIntMatrix::cat(), vec![0.1, 0.0], Some(FourierSeries::standard_kick(0.3))).unwrap();
        let x = [0.2, 0.4];
        let p1 = 0.4 + 0.3 / (2.0 * PI) * (2.0 * PI * 0.2).sin();
        let z = [0.3, p1];
        let y = m.apply(&x);
        assert!((y[0] - (2.0 * z[0] + z[1])).abs() < 1e-15);
        assert!((y[1] - (z[0] + z[1])).abs() < 1e-15);
    }
}
