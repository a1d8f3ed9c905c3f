//! Dense Weyl matrices on H_N(θ) for d = 1.
//!
//! Basis ψ_j, j = 0..N−1, sits at positions q_j = (j + θ_q)/N with ψ_{j+N} = e^{2πiθ_p}ψ_j.
//! W_{(0,1)} = e^{2πi q̂} is the clock diag(e^{2πi(j+θ_q)/N}); W_{(1,0)} = e^{−2πi p̂} is the shift
//! ψ_j ↦ ψ_{j−1}; W_k = e^{−πi k_q k_p/N} W_{(0,1)}^{k_p} W_{(1,0)}^{k_q}.

use super::{fold_with_phase, QuantumSetting};
use crate::error::{Error, Result};
use crate::lattice::fold_scalar;
use crate::noise::residue_index;
use crate::series::FourierSeries;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

pub type CMatrix = DMatrix<Complex64>;

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

pub(crate) fn require_d1(setting: &QuantumSetting) -> Result<()> {
    if setting.dim_d != 1 {
        return Err(Error::Unsupported(format!("dense operators need d = 1, got d = {}", setting.dim_d)));
    }
    Ok(())
}

/// Row j of W_k holds its only nonzero entry in column (j − k_q) mod N.
fn weyl_entry(k: &[i64], j: i64, setting: &QuantumSetting) -> (usize, Complex64) {
    let n = setting.n;
    let (kq, kp) = (k[0], k[1]);
    let src = j - kq;
    let wraps = src.div_euclid(n);
    let col = src.rem_euclid(n) as usize;
    // reduce integer products before converting to phases
    let chirp = -PI * ((kq as i128 * kp as i128).rem_euclid(2 * n as i128)) as f64 / n as f64;
    let clock = 2.0 * PI * (kp.rem_euclid(n) as f64 * (j as f64 + setting.theta[0]) / n as f64
        + (kp.div_euclid(n) as f64) * setting.theta[0]);
    let wrap = 2.0 * PI * setting.theta[1] * wraps as f64;
    (col, cis(chirp + clock + wrap))
}

/// W_k for any k ∈ ℤ², built entrywise from the definition (no folding).
pub fn weyl_matrix(k: &[i64], setting: &QuantumSetting) -> Result<CMatrix> {
    require_d1(setting)?;
    if k.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: k.len() });
    }
    let n = setting.n as usize;
    let mut m = CMatrix::zeros(n, n);
    for j in 0..n {
        let (c, v) = weyl_entry(k, j as i64, setting);
        m[(j, c)] = v;
    }
    Ok(m)
}

/// Normalized Hilbert–Schmidt product N^{−d} Tr(A*B).
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows() as f64;
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>() / n
}

pub fn hs_norm(a: &CMatrix) -> f64 {
    (a.iter().map(|x| x.norm_sqr()).sum::<f64>() / a.nrows() as f64).sqrt()
}

/// Euclidean norm of a coefficient vector (= HS norm of the operator it represents).
pub fn coeff_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Precomputed phases for converting between coefficient vectors and dense matrices.
#[derive(Debug, Clone)]
pub struct WeylBasis {
    setting: QuantumSetting,
    n: usize,
    /// e^{−πi k_q k_p/N}, folded k, by residue index.
    chirp: Vec<Complex64>,
    /// e^{2πi k_p(j+θ_q)/N}, folded k_p; [kp_res·N + j].
    clock: Vec<Complex64>,
    /// e^{2πiθ_p·wraps(j − k_q)}, folded k_q; [kq_res·N + j].
    wrap: Vec<Complex64>,
}

impl WeylBasis {
    pub fn new(setting: &QuantumSetting) -> Result<Self> {
        require_d1(setting)?;
        let n = setting.n as usize;
        let ni = setting.n;
        let mut chirp = vec![Complex64::new(0.0, 0.0); n * n];
        let mut clock = vec![Complex64::new(0.0, 0.0); n * n];
        let mut wrap = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            let kf = fold_scalar(r as i64, ni);
            for j in 0..n {
                clock[r * n + j] = cis(2.0 * PI * kf as f64 * (j as f64 + setting.theta[0]) / n as f64);
                let wraps = (j as i64 - kf).div_euclid(ni);
                wrap[r * n + j] = cis(2.0 * PI * setting.theta[1] * wraps as f64);
            }
            for s in 0..n {
                let kp = fold_scalar(s as i64, ni);
                chirp[r * n + s] = cis(-PI * (kf * kp) as f64 / n as f64);
            }
        }
        Ok(Self { setting: setting.clone(), n, chirp, clock, wrap })
    }

    pub fn setting(&self) -> &QuantumSetting {
        &self.setting
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn col(&self, kq_res: usize, j: usize) -> usize {
        (j + self.n - kq_res) % self.n
    }

    /// A = Σ_k a_k W_k.
    pub fn decode(&self, a: &[Complex64]) -> CMatrix {
        let n = self.n;
        let mut m = CMatrix::zeros(n, n);
        for r in 0..n {
            let block = &a[r * n..(r + 1) * n];
            if block.iter().all(|x| x.re == 0.0 && x.im == 0.0) {
                continue;
            }
            let w: Vec<Complex64> = (0..n).map(|s| block[s] * self.chirp[r * n + s]).collect();
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, ws) in w.iter().enumerate() {
                    acc += ws * self.clock[s * n + j];
                }
                m[(j, self.col(r, j))] += acc * self.wrap[r * n + j];
            }
        }
        m
    }

    /// a_k = ⟨W_k, A⟩ = N^{−1} Σ_j conj(W_k[j, c_j]) A[j, c_j].
    pub fn encode(&self, m: &CMatrix) -> Vec<Complex64> {
        let n = self.n;
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        let mut diag = vec![Complex64::new(0.0, 0.0); n];
        for r in 0..n {
            for (j, d) in diag.iter_mut().enumerate() {
                *d = m[(j, self.col(r, j))] * self.wrap[r * n + j].conj();
            }
            for s in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, d) in diag.iter().enumerate() {
                    acc += self.clock[s * n + j].conj() * d;
                }
                a[r * n + s] = acc * self.chirp[r * n + s].conj() / n as f64;
            }
        }
        a
    }
}

/// Coefficients of Op_N(f) = Σ_k f̂(k) W_k, with every k folded into the fundamental domain.
/// Works for any d.
pub fn op_coeffs(f: &FourierSeries, setting: &QuantumSetting) -> Result<Vec<Complex64>> {
    if f.dim_d != setting.dim_d {
        return Err(Error::DimensionMismatch { expected: setting.dim_d, got: f.dim_d });
    }
    let mut a = vec![Complex64::new(0.0, 0.0); setting.coeff_dim()];
    for (k, c) in &f.terms {
        let (kf, alpha) = fold_with_phase(k, setting);
        a[residue_index(&kf, setting.n)] += c * cis(2.0 * PI * alpha);
    }
    Ok(a)
}

/// Dense Weyl quantization Op_N(f).
pub fn op_n(f: &FourierSeries, setting: &QuantumSetting) -> Result<CMatrix> {
    let basis = WeylBasis::new(setting)?;
    Ok(basis.decode(&op_coeffs(f, setting)?))
}

/// Nearest lattice point to N·v, halves rounded toward +∞.
pub fn translation_vector(v: &[f64], n: i64) -> Vec<i64> {
    v.iter().map(|x| (x * n as f64 + 0.5).floor() as i64).collect()
}

/// The quantized translation W_{[Nv]}.
pub fn quantize_translation(v: &[f64], setting: &QuantumSetting) -> Result<CMatrix> {
    weyl_matrix(&translation_vector(v, setting.n), setting)
}

/// Dense unitary, kept diagonal when it is.
#[derive(Debug, Clone)]
pub enum Unitary {
    Diagonal(Vec<Complex64>),
    Full(CMatrix),
}

impl Unitary {
    pub fn to_matrix(&self) -> CMatrix {
        match self {
            Unitary::Diagonal(d) => CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone())),
            Unitary::Full(m) => m.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Unitary::Diagonal(d) => d.len(),
            Unitary::Full(m) => m.nrows(),
        }
    }
}

/// e^{−2πiN·Op_N(H)} for a real time-independent kick Hamiltonian H.
pub fn kick_propagator(h: &FourierSeries, setting: &QuantumSetting) -> Result<Unitary> {
    let op = op_n(h, setting)?;
    let n = setting.n as f64;
    let defect = (&op - op.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max);
    let scale = op.iter().map(|x| x.norm()).fold(1.0, f64::max);
    if defect > 1e-12 * scale {
        return Err(Error::NotHermitian(defect));
    }
    if h.is_q_only() {
        return Ok(Unitary::Diagonal((0..op.nrows()).map(|j| cis(-2.0 * PI * n * op[(j, j)].re)).collect()));
    }
    let herm = (&op + op.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = nalgebra::DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| cis(-2.0 * PI * n * l)));
    let mut vd = v.clone();
    for (c, p) in phases.iter().enumerate() {
        for r in 0..vd.nrows() {
            vd[(r, c)] *= p;
        }
    }
    Ok(Unitary::Full(vd * v.adjoint()))
}
