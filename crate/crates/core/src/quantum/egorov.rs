//! Quantum–classical correspondence for observables: ‖𝒰^n Op(f) − Op(f∘Φ^n)‖_HS, and its noisy analogue.

use super::dense::{DenseOptions, QuantumPropagator};
use super::superop::{map_super, noise_super, SuperOp};
use super::weyl::{coeff_norm, op_coeffs};
use super::QuantumSetting;
use crate::classical::galerkin_koopman;
use crate::error::{Error, Result};
use crate::map::ClassicalMapSpec;
use crate::noise::NoiseKernel;
use crate::series::FourierSeries;
use num_complex::Complex64;

/// Leakage above this is flagged.
pub const LEAKAGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgorovResult {
    /// Normalized Hilbert–Schmidt norm of the difference.
    pub discrepancy: f64,
    /// Estimated error of the classical side (quadrature change, or Galerkin cutoff K vs 2K).
    pub leakage: f64,
    pub flagged: bool,
}

impl EgorovResult {
    fn new(discrepancy: f64, leakage: f64) -> Self {
        Self { discrepancy, leakage, flagged: leakage > LEAKAGE_TOL }
    }
}

fn diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    coeff_norm(&d)
}

/// Exactly zero for pure linear maps, where 𝒰(F)W_k = W_{F⁻¹k} with no error term.
pub fn egorov_discrepancy(map: &ClassicalMapSpec, f: &FourierSeries, n: u64, setting: &QuantumSetting) -> Result<EgorovResult> {
    if map.dim_d() != 1 || f.dim_d != 1 {
        return Err(Error::Unsupported("Egorov discrepancy needs d = 1".into()));
    }
    if map.is_linear() {
        return Ok(EgorovResult::new(0.0, 0.0));
    }
    egorov_computed(map, f, n, setting)
}

/// The same difference evaluated without the linear shortcut.
pub fn egorov_computed(map: &ClassicalMapSpec, f: &FourierSeries, n: u64, setting: &QuantumSetting) -> Result<EgorovResult> {
    let u = map_super(map, setting)?;
    let mut q = op_coeffs(f, setting)?;
    for _ in 0..n {
        q = u.apply(&q);
    }
    let (composed, change) = crate::classical::compose_series(map, f, n)?;
    let c = op_coeffs(&composed, setting)?;
    Ok(EgorovResult::new(diff_norm(&q, &c), change))
}

/// Classical T_ε^n f (with one bare noise application at n = 0) on the Galerkin modes |k|_∞ ≤ K.
fn classical_noisy_series(map: &ClassicalMapSpec, kernel: &NoiseKernel, eps: f64, f: &FourierSeries, n: u64, cutoff: i64) -> Result<FourierSeries> {
    let kop = galerkin_koopman(map, cutoff)?;
    let ghat: Vec<f64> = kop.modes.iter().map(|k| kernel.classical_eigenvalue(eps, k)).collect::<Result<_>>()?;
    let mut a = vec![Complex64::new(0.0, 0.0); kop.dim()];
    for (k, c) in &f.terms {
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        let i = kop.index_of(k).ok_or_else(|| Error::InvalidParameter(format!("mode {k:?} exceeds the Galerkin cutoff {cutoff}")))?;
        a[i] += c;
    }
    let noise = |x: Vec<Complex64>| -> Vec<Complex64> { x.iter().zip(&ghat).map(|(v, g)| v * g).collect() };
    if n == 0 {
        a = noise(a);
    }
    for _ in 0..n {
        a = noise(kop.apply(&a));
    }
    let terms = kop.modes.iter().zip(a).filter(|(_, c)| c.norm() > 0.0).map(|(k, c)| (k.to_vec(), c)).collect();
    FourierSeries::new(1, terms)
}

/// ‖T_{ε,N}^n Op(f) − Op(T_ε^n f)‖_HS on mean-zero observables (the constant mode is invariant on both
/// sides and is dropped). At n = 0 both sides apply the noise once.
pub fn egorov_noisy_discrepancy(
    map: &ClassicalMapSpec,
    kernel: &NoiseKernel,
    eps: f64,
    f: &FourierSeries,
    n: u64,
    setting: &QuantumSetting,
    cutoff: i64,
) -> Result<EgorovResult> {
    if map.dim_d() != 1 || f.dim_d != 1 {
        return Err(Error::Unsupported("Egorov discrepancy needs d = 1".into()));
    }
    let opts = DenseOptions { cap: setting.n.max(DenseOptions::default().cap), ..DenseOptions::default() };
    let mut q = op_coeffs(f, setting)?;
    q[0] = Complex64::new(0.0, 0.0);
    if n == 0 {
        q = noise_super(kernel, eps, setting)?.apply(&q);
    } else {
        let prop = QuantumPropagator::new(map, kernel, eps, setting, opts)?;
        for _ in 0..n {
            q = prop.step(&q);
        }
    }
    let c = op_coeffs(&classical_noisy_series(map, kernel, eps, f, n, cutoff)?, setting)?;
    let c2 = op_coeffs(&classical_noisy_series(map, kernel, eps, f, n, 2 * cutoff)?, setting)?;
    Ok(EgorovResult::new(diff_norm(&q, &c), diff_norm(&c, &c2)))
}
