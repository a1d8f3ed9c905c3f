//! Matrix-free norms of noisy and coarse-grained quantum propagators on the trace-zero subspace.

use super::superop::{map_super, noise_super, Composite, Diagonal, SuperOp};
use super::QuantumSetting;
use crate::error::{Error, Result};
use crate::linalg::{top_singular_value, LanczosOptions};
use crate::map::ClassicalMapSpec;
use crate::noise::{residue_point, NoiseKernel, Side};
use crate::norm::{Flavor, PropagatorNorm};
use num_complex::Complex64;

/// Default largest N for the dense path.
pub const DEFAULT_DENSE_CAP: i64 = 128;

#[derive(Debug, Clone, Copy)]
pub struct DenseOptions {
    pub cap: i64,
    pub lanczos: LanczosOptions,
}

impl Default for DenseOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_DENSE_CAP, lanczos: LanczosOptions::default() }
    }
}

/// T = G ∘ 𝒰(Φ) acting on coefficient vectors.
pub struct QuantumPropagator {
    setting: QuantumSetting,
    koopman: Composite,
    noise: Diagonal,
    opts: DenseOptions,
}

fn zero_mean(a: &mut [Complex64]) {
    a[0] = Complex64::new(0.0, 0.0);
}

impl QuantumPropagator {
    pub fn new(map: &ClassicalMapSpec, kernel: &NoiseKernel, eps: f64, setting: &QuantumSetting, opts: DenseOptions) -> Result<Self> {
        if setting.n > opts.cap {
            return Err(Error::InvalidParameter(format!("N = {} exceeds the dense cap {}", setting.n, opts.cap)));
        }
        if map.has_kick() && setting.dim_d != 1 {
            return Err(Error::Unsupported("kicked maps need d = 1 on the dense path".into()));
        }
        Ok(Self {
            setting: setting.clone(),
            koopman: map_super(map, setting)?,
            noise: noise_super(kernel, eps, setting)?,
            opts,
        })
    }

    pub fn dim(&self) -> usize {
        self.setting.coeff_dim()
    }

    /// One noisy step a ↦ G𝒰a, projected to trace zero.
    pub fn step(&self, a: &[Complex64]) -> Vec<Complex64> {
        let mut x = self.noise.apply(&self.koopman.apply(a));
        zero_mean(&mut x);
        x
    }

    pub fn step_adjoint(&self, a: &[Complex64]) -> Vec<Complex64> {
        let mut x = self.koopman.apply_adjoint(&self.noise.apply_adjoint(a));
        zero_mean(&mut x);
        x
    }

    pub fn koopman(&self) -> &Composite {
        &self.koopman
    }

    pub fn noise(&self) -> &Diagonal {
        &self.noise
    }

    fn apply_n(&self, a: &[Complex64], n: u64, flavor: Flavor) -> Vec<Complex64> {
        let mut x = a.to_vec();
        match flavor {
            Flavor::Noisy => {
                for _ in 0..n {
                    x = self.step(&x);
                }
            }
            Flavor::Coarse => {
                x = self.noise.apply(&x);
                for _ in 0..n {
                    x = self.koopman.apply(&x);
                }
                x = self.noise.apply(&x);
                zero_mean(&mut x);
            }
        }
        x
    }

    fn apply_n_adjoint(&self, a: &[Complex64], n: u64, flavor: Flavor) -> Vec<Complex64> {
        let mut x = a.to_vec();
        match flavor {
            Flavor::Noisy => {
                for _ in 0..n {
                    x = self.step_adjoint(&x);
                }
            }
            Flavor::Coarse => {
                x = self.noise.apply_adjoint(&x);
                for _ in 0..n {
                    x = self.koopman.apply_adjoint(&x);
                }
                x = self.noise.apply_adjoint(&x);
                zero_mean(&mut x);
            }
        }
        x
    }

    /// Largest singular value of T^n (noisy) or G𝒰^nG (coarse) on the trace-zero subspace.
    pub fn norm(&self, n: u64, flavor: Flavor) -> Result<PropagatorNorm> {
        let dim = self.dim();
        let s = 2 * self.setting.dim_d;
        if n == 0 && flavor == Flavor::Noisy {
            let mut e = vec![0; s];
            e[0] = 1;
            return Ok(PropagatorNorm::from_log(0.0, 0, e, flavor, Side::Quantum));
        }
        let active: Vec<bool> = (0..dim).map(|i| i != 0).collect();
        let top = top_singular_value(&active, |v| self.apply_n(v, n, flavor), |v| self.apply_n_adjoint(v, n, flavor), self.opts.lanczos)?;
        let arg = top
            .vector
            .iter()
            .enumerate()
            .fold((1usize, -1.0f64), |acc, (i, x)| if x.norm() > acc.1 + 1e-12 { (i, x.norm()) } else { acc })
            .0;
        let value = top.sigma;
        Ok(PropagatorNorm {
            value,
            log_value: value.ln(),
            n,
            maximizer: residue_point(arg, self.setting.n, s),
            flavor,
            side: Side::Quantum,
            certified: true,
        })
    }
}

pub fn noisy_norm_dense(map: &ClassicalMapSpec, kernel: &NoiseKernel, eps: f64, setting: &QuantumSetting, n: u64) -> Result<PropagatorNorm> {
    QuantumPropagator::new(map, kernel, eps, setting, DenseOptions::default())?.norm(n, Flavor::Noisy)
}

pub fn coarse_norm_dense(map: &ClassicalMapSpec, kernel: &NoiseKernel, eps: f64, setting: &QuantumSetting, n: u64) -> Result<PropagatorNorm> {
    QuantumPropagator::new(map, kernel, eps, setting, DenseOptions::default())?.norm(n, Flavor::Coarse)
}
