//! Superoperators acting on coefficient vectors (a_k) of operators A = Σ a_k W_k.

use super::weyl::{CMatrix, Unitary, WeylBasis, translation_vector};
use super::{fold_with_phase, is_admissible, QuantumSetting};
use crate::error::{Error, Result};
use crate::lattice::{wedge, SymplecticIntMatrix};
use crate::map::ClassicalMapSpec;
use crate::noise::{residue_index, residue_point, NoiseKernel};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

pub trait SuperOp: Send + Sync {
    /// Length of the coefficient vectors, N^{2d}.
    fn dim(&self) -> usize;
    fn apply(&self, a: &[Complex64]) -> Vec<Complex64>;
    fn apply_adjoint(&self, a: &[Complex64]) -> Vec<Complex64>;
}

/// a ↦ (slot target[k] receives phase[k]·a_k); the quantized Koopman operator of a linear map.
#[derive(Debug, Clone)]
pub struct PhasedPermutation {
    target: Vec<usize>,
    phase: Vec<Complex64>,
}

impl PhasedPermutation {
    pub fn target(&self) -> &[usize] {
        &self.target
    }

    pub fn phase(&self) -> &[Complex64] {
        &self.phase
    }

    pub fn identity(dim: usize) -> Self {
        Self { target: (0..dim).collect(), phase: vec![Complex64::new(1.0, 0.0); dim] }
    }
}

impl SuperOp for PhasedPermutation {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn apply(&self, a: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); a.len()];
        for (i, &t) in self.target.iter().enumerate() {
            out[t] = self.phase[i] * a[i];
        }
        out
    }

    fn apply_adjoint(&self, a: &[Complex64]) -> Vec<Complex64> {
        self.target.iter().zip(&self.phase).map(|(&t, p)| p.conj() * a[t]).collect()
    }
}

/// W_k ↦ W_{F⁻¹k} = e^{2πiα} W_{fold(F⁻¹k)}. Requires an admissible angle.
pub fn koopman_super_linear(f: &SymplecticIntMatrix, setting: &QuantumSetting) -> Result<PhasedPermutation> {
    if f.dim_d() != setting.dim_d {
        return Err(Error::DimensionMismatch { expected: setting.dim_d, got: f.dim_d() });
    }
    if !is_admissible(f, setting.n, &setting.theta) {
        return Err(Error::InadmissibleAngle);
    }
    let finv = f.inverse();
    let dim = setting.coeff_dim();
    let s = 2 * setting.dim_d;
    let (target, phase): (Vec<usize>, Vec<Complex64>) = (0..dim)
        .into_par_iter()
        .map(|idx| {
            let k = residue_point(idx, setting.n, s);
            let img = finv.apply(&k);
            let (kf, alpha) = fold_with_phase(&img, setting);
            (residue_index(&kf, setting.n), Complex64::from_polar(1.0, 2.0 * PI * alpha))
        })
        .unzip();
    Ok(PhasedPermutation { target, phase })
}

#[derive(Debug, Clone)]
pub struct Diagonal {
    pub entries: Vec<Complex64>,
}

impl SuperOp for Diagonal {
    fn dim(&self) -> usize {
        self.entries.len()
    }

    fn apply(&self, a: &[Complex64]) -> Vec<Complex64> {
        a.iter().zip(&self.entries).map(|(x, d)| x * d).collect()
    }

    fn apply_adjoint(&self, a: &[Complex64]) -> Vec<Complex64> {
        a.iter().zip(&self.entries).map(|(x, d)| x * d.conj()).collect()
    }
}

/// ad(W_m) with m = [Nv]: diagonal e^{2πi k∧m/N}.
pub fn translation_super(v: &[f64], setting: &QuantumSetting) -> Result<Diagonal> {
    let s = 2 * setting.dim_d;
    if v.len() != s {
        return Err(Error::DimensionMismatch { expected: s, got: v.len() });
    }
    let m = translation_vector(v, setting.n);
    let n = setting.n;
    let entries = (0..setting.coeff_dim())
        .map(|idx| {
            let k = residue_point(idx, n, s);
            let w = (wedge(&k, &m).unwrap() as i128).rem_euclid(n as i128) as f64;
            Complex64::from_polar(1.0, 2.0 * PI * w / n as f64)
        })
        .collect();
    Ok(Diagonal { entries })
}

/// The quantum noise operator: diagonal with entries γ_{ε,N}(k).
pub fn noise_super(kernel: &NoiseKernel, eps: f64, setting: &QuantumSetting) -> Result<Diagonal> {
    if kernel.dim_d() != setting.dim_d {
        return Err(Error::DimensionMismatch { expected: setting.dim_d, got: kernel.dim_d() });
    }
    let g = kernel.gamma_table(eps, setting.n)?;
    Ok(Diagonal { entries: g.into_iter().map(|x| Complex64::new(x, 0.0)).collect() })
}

/// A ↦ U*AU on coefficients, through the dense matrix.
#[derive(Debug, Clone)]
pub struct Conjugation {
    basis: WeylBasis,
    u: Unitary,
}

impl Conjugation {
    fn conj_dense(&self, m: CMatrix, adjoint: bool) -> CMatrix {
        match &self.u {
            Unitary::Diagonal(d) => {
                let mut m = m;
                for ((j, c), x) in m.iter_mut().enumerate().map(|(i, x)| ((i % d.len(), i / d.len()), x)) {
                    *x *= if adjoint { d[j] * d[c].conj() } else { d[j].conj() * d[c] };
                }
                m
            }
            Unitary::Full(u) => {
                if adjoint {
                    u * m * u.adjoint()
                } else {
                    u.adjoint() * m * u
                }
            }
        }
    }
}

pub fn super_of_unitary(u: Unitary, setting: &QuantumSetting) -> Result<Conjugation> {
    let basis = WeylBasis::new(setting)?;
    if u.dim() != basis.n() {
        return Err(Error::DimensionMismatch { expected: basis.n(), got: u.dim() });
    }
    Ok(Conjugation { basis, u })
}

impl SuperOp for Conjugation {
    fn dim(&self) -> usize {
        self.basis.n() * self.basis.n()
    }

    fn apply(&self, a: &[Complex64]) -> Vec<Complex64> {
        self.basis.encode(&self.conj_dense(self.basis.decode(a), false))
    }

    fn apply_adjoint(&self, a: &[Complex64]) -> Vec<Complex64> {
        self.basis.encode(&self.conj_dense(self.basis.decode(a), true))
    }
}

/// Applies its factors in order; the adjoint runs them backwards.
pub struct Composite {
    pub ops: Vec<Box<dyn SuperOp>>,
}

impl SuperOp for Composite {
    fn dim(&self) -> usize {
        self.ops.first().map_or(0, |o| o.dim())
    }

    fn apply(&self, a: &[Complex64]) -> Vec<Complex64> {
        let mut x = a.to_vec();
        for op in &self.ops {
            x = op.apply(&x);
        }
        x
    }

    fn apply_adjoint(&self, a: &[Complex64]) -> Vec<Complex64> {
        let mut x = a.to_vec();
        for op in self.ops.iter().rev() {
            x = op.apply_adjoint(&x);
        }
        x
    }
}

/// Quantized Koopman operator of Φ = F ∘ t_v ∘ Φ₁: 𝒰(F) first, then the translation, then the kick.
pub fn map_super(map: &ClassicalMapSpec, setting: &QuantumSetting) -> Result<Composite> {
    let mut ops: Vec<Box<dyn SuperOp>> = vec![Box::new(koopman_super_linear(&map.linear, setting)?)];
    if map.translation.iter().any(|&x| x != 0.0) {
        ops.push(Box::new(translation_super(&map.translation, setting)?));
    }
    if let Some(h) = map.kick.as_ref().filter(|h| !h.terms.is_empty()) {
        let u = super::weyl::kick_propagator(h, setting)?;
        ops.push(Box::new(super_of_unitary(u, setting)?));
    }
    Ok(Composite { ops })
}

/// Dense matrix of a superoperator, column i = op(e_i).
pub fn dense_super(op: &dyn SuperOp) -> CMatrix {
    let dim = op.dim();
    let cols: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|i| {
            let mut e = vec![Complex64::new(0.0, 0.0); dim];
            e[i] = Complex64::new(1.0, 0.0);
            op.apply(&e)
        })
        .collect();
    CMatrix::from_fn(dim, dim, |r, c| cols[c][r])
}

/// Dimension of the eigenvalue-1 eigenspace of a unitary superoperator: the number of singular
/// values of (S − I) below `tol`.
pub fn unit_eigenvalue_multiplicity(op: &dyn SuperOp, tol: f64) -> usize {
    let mut m = dense_super(op);
    for i in 0..m.nrows() {
        m[(i, i)] -= Complex64::new(1.0, 0.0);
    }
    m.singular_values().iter().filter(|&&s| s < tol).count()
}
