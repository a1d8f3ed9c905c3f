//! Noise kernels g on ℝ^{2d}, their Fourier transforms ĝ and the quantum noise eigenvalues
//! γ_{ε,N}(k).
//!
//! Fourier convention: ĝ(ξ) = ∫ g(x) e^{−2πi ξ·x} dx, so the Gaussian kernel with ĝ(ξ) = e^{−|ξ|²}
//! is g(x) = π^d e^{−π²|x|²}. Every kernel is radial, so ĝ is too.

use crate::error::{Error, Result};
use crate::lattice::{fold_scalar, wedge};
use crate::quad;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    /// c·exp(−1/(1−|x/r|²)) on |x| < r.
    CompactBump { radius: f64 },
    /// c/(1+|x|)^tail, tail > 2d.
    PowerLaw { tail: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Classical,
    Quantum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Poisson,
    Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEigenvalue {
    pub value: f64,
    pub k: Vec<i64>,
    pub side: Side,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseKernel {
    family: KernelFamily,
    dim_d: usize,
    /// g(x) = c·profile(|x|)
    c: f64,
}

/// Surface area of the unit sphere in ℝ^{2d}.
fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powi(d as i32) / puruspe::gamma(d as f64)
}

impl NoiseKernel {
    pub fn new(family: KernelFamily, dim_d: usize) -> Result<Self> {
        if dim_d == 0 {
            return Err(Error::InvalidParameter("dimension d must be positive".into()));
        }
        let c = match family {
            KernelFamily::Gaussian => PI.powi(dim_d as i32),
            KernelFamily::CompactBump { radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidParameter(format!("bump radius must be positive, got {radius}")));
                }
                let n = 2 * dim_d as i32;
                let (m, _) = quad::integrate(&|rho: f64| bump(rho / radius) * rho.powi(n - 1), 0.0, radius, 1e-15, 0.0);
                1.0 / (sphere_area(dim_d) * m)
            }
            KernelFamily::PowerLaw { tail } => {
                if !(tail > 2.0 * dim_d as f64) || !tail.is_finite() {
                    return Err(Error::InvalidParameter(format!("power-law tail must exceed 2d = {}, got {tail}", 2 * dim_d)));
                }
                let n = 2.0 * dim_d as f64;
                1.0 / (sphere_area(dim_d) * puruspe::beta(n, tail - n))
            }
        };
        Ok(Self { family, dim_d, c })
    }

    pub fn gaussian(dim_d: usize) -> Self {
        Self::new(KernelFamily::Gaussian, dim_d).unwrap()
    }
    pub fn compact_bump(dim_d: usize, radius: f64) -> Result<Self> {
        Self::new(KernelFamily::CompactBump { radius }, dim_d)
    }
    pub fn power_law(dim_d: usize, tail: f64) -> Result<Self> {
        Self::new(KernelFamily::PowerLaw { tail }, dim_d)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }
    pub fn dim_d(&self) -> usize {
        self.dim_d
    }
    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, KernelFamily::Gaussian)
    }

    /// Unnormalized radial profile.
    pub fn profile(&self, rho: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-PI * PI * rho * rho).exp(),
            KernelFamily::CompactBump { radius } => bump(rho / radius),
            KernelFamily::PowerLaw { tail } => (1.0 + rho).powf(-tail),
        }
    }

    /// g(x) at |x| = rho.
    pub fn density(&self, rho: f64) -> f64 {
        self.c * self.profile(rho)
    }

    /// Radial Fourier transform ĝ at |ξ| = s.
    pub fn ghat(&self, s: f64) -> f64 {
        let s = s.abs();
        if s == 0.0 {
            return 1.0;
        }
        match self.family {
            KernelFamily::Gaussian => (-s * s).exp(),
            KernelFamily::CompactBump { radius } => self.hankel_compact(s, radius),
            KernelFamily::PowerLaw { .. } => self.hankel_infinite(s),
        }
    }

    /// ln|ĝ(s)|; exact quadratic form for the Gaussian.
    pub fn ln_abs_ghat_sq(&self, s2: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => -s2,
            _ => self.ghat(s2.sqrt()).abs().ln(),
        }
    }

    /// ĝ(s) = 2π s^{1−d} ∫ g(ρ) J_{d−1}(2πsρ) ρ^d dρ.
    fn hankel_integrand(&self, s: f64) -> impl Fn(f64) -> f64 + '_ {
        let order = (self.dim_d - 1) as u32;
        let pow = self.dim_d as i32;
        move |rho: f64| self.profile(rho) * puruspe::Jn(order, 2.0 * PI * s * rho) * rho.powi(pow)
    }

    fn hankel_prefactor(&self, s: f64) -> f64 {
        2.0 * PI * s.powi(1 - self.dim_d as i32) * self.c
    }

    fn hankel_compact(&self, s: f64, radius: f64) -> f64 {
        let f = self.hankel_integrand(s);
        let half = 0.5 / s;
        let panels = ((radius / half).ceil() as usize).max(1);
        let width = radius / panels as f64;
        let scale = self.hankel_abs_scale(radius);
        let mut total = 0.0;
        for i in 0..panels {
            let (v, _) = quad::integrate(&f, i as f64 * width, (i + 1) as f64 * width, 1e-13, 1e-17 * scale);
            total += v;
        }
        self.hankel_prefactor(s) * total
    }

    /// ∫ |profile| ρ^{2d−1}-ish scale used to set absolute tolerances.
    fn hankel_abs_scale(&self, radius: f64) -> f64 {
        radius.powi(self.dim_d as i32 + 1)
    }

    fn hankel_infinite(&self, s: f64) -> f64 {
        let f = self.hankel_integrand(s);
        let half = 0.5 / s;
        // Head: integrate to a few units where the power law has become a smooth tail.
        let head_end = (8.0f64).max(half).ceil();
        let head_panels = (head_end / half).ceil() as usize;
        let width = head_end / head_panels as f64;
        let mut head = 0.0;
        for i in 0..head_panels {
            let (v, _) = quad::integrate(&f, i as f64 * width, (i + 1) as f64 * width, 1e-14, 1e-18);
            head += v;
        }
        // Tail: alternating half-period panels, accelerated.
        let mut partial = Vec::with_capacity(48);
        let mut acc = head;
        let mut a = head_end;
        let mut prev_est = f64::NAN;
        for i in 0..60 {
            let (v, _) = quad::integrate(&f, a, a + half, 1e-14, 1e-20);
            acc += v;
            a += half;
            partial.push(acc);
            if i >= 12 && i % 4 == 0 {
                let est = quad::wynn_epsilon(&partial[partial.len() - 12..]);
                if (est - prev_est).abs() <= 1e-14 * est.abs().max(1e-300) + 1e-18 {
                    return self.hankel_prefactor(s) * est;
                }
                prev_est = est;
            }
        }
        self.hankel_prefactor(s) * quad::wynn_epsilon(&partial[partial.len() - 16..])
    }

    /// Classical eigenvalue ĝ(εk).
    pub fn classical_eigenvalue(&self, eps: f64, k: &[i64]) -> Result<f64> {
        self.check_dim(k)?;
        if eps <= 0.0 {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
        }
        let k2: f64 = k.iter().map(|&x| (x as f64) * (x as f64)).sum();
        Ok(match self.family {
            KernelFamily::Gaussian => (-eps * eps * k2).exp(),
            _ => self.ghat(eps * k2.sqrt()),
        })
    }

    fn check_dim(&self, k: &[i64]) -> Result<()> {
        if k.len() != 2 * self.dim_d {
            return Err(Error::DimensionMismatch { expected: 2 * self.dim_d, got: k.len() });
        }
        Ok(())
    }

    /// γ_{ε,N}(k). Gaussian: product of theta ratios. Other kernels: direct lattice sum.
    pub fn quantum_eigenvalue(&self, eps: f64, n: i64, k: &[i64]) -> Result<f64> {
        let method = if self.is_gaussian() { Method::Theta } else { Method::Direct };
        Ok(self.quantum_eigenvalue_with(eps, n, k, method)?.value)
    }

    pub fn quantum_eigenvalue_with(&self, eps: f64, n: i64, k: &[i64], method: Method) -> Result<NoiseEigenvalue> {
        self.check_dim(k)?;
        check_eps_n(eps, n)?;
        let value = if k.iter().all(|&x| x.rem_euclid(n) == 0) {
            1.0
        } else {
            match method {
                Method::Theta => {
                    if !self.is_gaussian() {
                        return Err(Error::Unsupported("theta evaluation needs the gaussian kernel".into()));
                    }
                    ln_gamma_gaussian(eps * n as f64, n, k).exp()
                }
                Method::Direct => {
                    let table = PeriodizedKernel::new(self, eps, n)?;
                    table.gamma(k)
                }
                Method::Poisson => self.gamma_poisson(eps, n, k),
            }
        };
        Ok(NoiseEigenvalue { value, k: k.to_vec(), side: Side::Quantum, method })
    }

    /// ln γ_{ε,N}(k) with full relative accuracy of 1 − γ (Gaussian), or ln|γ| (others).
    pub fn ln_quantum_eigenvalue(&self, eps: f64, n: i64, k: &[i64]) -> Result<f64> {
        self.check_dim(k)?;
        check_eps_n(eps, n)?;
        if self.is_gaussian() {
            Ok(ln_gamma_gaussian(eps * n as f64, n, k))
        } else {
            let t = PeriodizedKernel::new(self, eps, n)?;
            Ok(t.ln_abs_gamma(k))
        }
    }

    /// Poisson-resummed form Σ_m ĝ(ε(k + Nm)) / Σ_m ĝ(εNm).
    fn gamma_poisson(&self, eps: f64, n: i64, k: &[i64]) -> f64 {
        let dim = k.len();
        let kf: Vec<i64> = k.iter().map(|&x| fold_scalar(x, n)).collect();
        let mut num = 0.0;
        let mut den = 0.0;
        let mut shell = 0i64;
        // ĝ is radial, so cache by the integer squared length
        let mut cache: std::collections::HashMap<i128, f64> = std::collections::HashMap::new();
        let mut gh = |len2: i128| *cache.entry(len2).or_insert_with(|| self.ghat(eps * (len2 as f64).sqrt()));
        loop {
            let mut shell_max = 0.0f64;
            for_each_shell_point(dim, shell, |m| {
                let mut s2 = 0i128;
                let mut z2 = 0i128;
                for i in 0..dim {
                    let a = (kf[i] + n * m[i]) as i128;
                    s2 += a * a;
                    let b = (n * m[i]) as i128;
                    z2 += b * b;
                }
                let gn = gh(s2);
                let gd = gh(z2);
                shell_max = shell_max.max(gn.abs()).max(gd.abs());
                num += gn;
                den += gd;
            });
            if shell > 0 && shell_max < 1e-15 * den.abs() || shell > 400 {
                break;
            }
            shell += 1;
        }
        num / den
    }

    /// Σ_n g_{εN}(n) with g_σ(x) = σ^{−2d} g(x/σ).
    pub fn normalization(&self, eps: f64, n: i64) -> Result<f64> {
        check_eps_n(eps, n)?;
        let sigma = eps * n as f64;
        let v = if self.is_gaussian() {
            theta(sigma, 0.0)?.powi(2 * self.dim_d as i32)
        } else {
            let t = PeriodizedKernel::new(self, eps, n)?;
            self.c * t.total * sigma.powi(-2 * self.dim_d as i32)
        };
        if v == 0.0 || !v.is_finite() {
            return Err(Error::VanishingNormalization);
        }
        Ok(v)
    }

    /// Table of γ_{ε,N}(k) for every residue k ∈ (ℤ/N)^{2d}, indexed by [`residue_index`].
    /// Returns ln|γ|; the k = 0 entry is exactly 0.
    pub fn ln_gamma_table(&self, eps: f64, n: i64) -> Result<Vec<f64>> {
        check_eps_n(eps, n)?;
        let dim = 2 * self.dim_d;
        let total = (n as usize).pow(dim as u32);
        if self.is_gaussian() {
            let sigma = eps * n as f64;
            let one: Vec<f64> = (0..n).map(|r| ln_theta_ratio(sigma, r as f64 / n as f64)).collect();
            let mut out = vec![0.0; total];
            for (idx, o) in out.iter_mut().enumerate() {
                let mut rem = idx;
                let mut s = 0.0;
                for _ in 0..dim {
                    s += one[rem % n as usize];
                    rem /= n as usize;
                }
                *o = s;
            }
            Ok(out)
        } else {
            let t = PeriodizedKernel::new(self, eps, n)?;
            Ok(t.ln_abs_gamma_table())
        }
    }
}

impl NoiseKernel {
    /// Signed γ_{ε,N}(k) for every residue, indexed by [`residue_index`]; the k = 0 entry is exactly 1.
    pub fn gamma_table(&self, eps: f64, n: i64) -> Result<Vec<f64>> {
        if self.is_gaussian() {
            // theta ratios are positive
            return Ok(self.ln_gamma_table(eps, n)?.into_iter().map(f64::exp).collect());
        }
        let t = PeriodizedKernel::new(self, eps, n)?;
        Ok(t.gamma_table())
    }
}

fn check_eps_n(eps: f64, n: i64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    if n < 1 {
        return Err(Error::InvalidParameter(format!("N must be positive, got {n}")));
    }
    Ok(())
}

fn bump(x: f64) -> f64 {
    let t = 1.0 - x * x;
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Index of a residue class: coordinates reduced to [0, N), first coordinate most significant.
pub fn residue_index(k: &[i64], n: i64) -> usize {
    k.iter().fold(0usize, |acc, &x| acc * n as usize + x.rem_euclid(n) as usize)
}

/// Folded representative of the residue with the given index.
pub fn residue_point(mut idx: usize, n: i64, dim: usize) -> Vec<i64> {
    let mut k = vec![0i64; dim];
    for i in (0..dim).rev() {
        k[i] = fold_scalar((idx % n as usize) as i64, n);
        idx /= n as usize;
    }
    k
}

/// Points with |m|_∞ = shell.
fn for_each_shell_point(dim: usize, shell: i64, mut f: impl FnMut(&[i64])) {
    if shell == 0 {
        f(&vec![0; dim]);
        return;
    }
    let mut m = vec![-shell; dim];
    loop {
        if m.iter().any(|x| x.abs() == shell) {
            f(&m);
        }
        let mut i = dim;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if m[i] < shell {
                m[i] += 1;
                break;
            }
            m[i] = -shell;
        }
    }
}

/// θ_σ(ξ) = Σ_ν e^{−σ²(ξ+ν)²}.
pub fn theta(sigma: f64, xi: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let x = reduce_half(xi);
    if sigma >= PI.sqrt() {
        Ok(theta_direct(sigma, x))
    } else {
        Ok(theta_dual(sigma, x))
    }
}

/// ξ mod 1 mapped to [0, 1/2] using evenness.
fn reduce_half(xi: f64) -> f64 {
    let r = xi - xi.floor();
    if r > 0.5 {
        1.0 - r
    } else {
        r
    }
}

pub fn theta_direct(sigma: f64, x: f64) -> f64 {
    let s2 = sigma * sigma;
    let mut sum = (-s2 * x * x).exp();
    let mut nu = 1.0;
    loop {
        let a = (-s2 * (x + nu) * (x + nu)).exp();
        let b = (-s2 * (x - nu) * (x - nu)).exp();
        sum += a + b;
        if a + b <= 1e-18 * sum {
            break;
        }
        nu += 1.0;
    }
    sum
}

pub fn theta_dual(sigma: f64, x: f64) -> f64 {
    let q = -PI * PI / (sigma * sigma);
    let mut sum = 1.0;
    let mut m = 1.0;
    loop {
        let t = (q * m * m).exp();
        sum += 2.0 * t * (2.0 * PI * m * x).cos();
        if t <= 1e-18 {
            break;
        }
        m += 1.0;
    }
    PI.sqrt() / sigma * sum
}

/// ln(θ_σ(ξ)/θ_σ(0)), accurate in relative terms for 1 − ratio down to the subnormal range.
pub fn ln_theta_ratio(sigma: f64, xi: f64) -> f64 {
    let x = reduce_half(xi);
    if x == 0.0 {
        return 0.0;
    }
    let s2 = sigma * sigma;
    if sigma >= PI.sqrt() {
        // θ(x) = e^{−σ²x²}(1 + A), θ(0) = 1 + B
        let mut a = 0.0;
        let mut b = 0.0;
        let mut nu = 1.0f64;
        loop {
            let ta = (-s2 * (2.0 * x * nu + nu * nu)).exp() + (-s2 * (nu * nu - 2.0 * x * nu)).exp();
            let tb = 2.0 * (-s2 * nu * nu).exp();
            a += ta;
            b += tb;
            if ta <= 1e-18 * (1.0 + a) && tb <= 1e-18 * (1.0 + b) {
                break;
            }
            nu += 1.0;
        }
        -s2 * x * x + a.ln_1p() - b.ln_1p()
    } else {
        // 1 − ratio = 4 Σ q^{m²} sin²(πmx) / (1 + 2 Σ q^{m²})
        let lq = -PI * PI / s2;
        let mut num = 0.0;
        let mut den = 0.0;
        let mut m = 1.0f64;
        loop {
            let t = (lq * m * m).exp();
            let sn = (PI * m * x).sin();
            num += 4.0 * t * sn * sn;
            den += 2.0 * t;
            if t <= 1e-18 * den.max(1e-300) || t == 0.0 {
                break;
            }
            m += 1.0;
        }
        (-num / (1.0 + den)).ln_1p()
    }
}

/// ln γ for the Gaussian kernel: Σ over components of ln θ-ratios at k_i/N.
pub fn ln_gamma_gaussian(sigma: f64, n: i64, k: &[i64]) -> f64 {
    k.iter()
        .map(|&x| {
            let r = fold_scalar(x, n).abs();
            if r == 0 {
                0.0
            } else {
                ln_theta_ratio(sigma, r as f64 / n as f64)
            }
        })
        .sum()
}

/// Lemma-style sandwich for the Gaussian kernel: (e^{−ε²|fold(k)|²}, that + 4d·e^{−(εN)²/4}).
pub fn ges_bounds(eps: f64, n: i64, k: &[i64]) -> (f64, f64) {
    let d = k.len() / 2;
    let f2: f64 = k.iter().map(|&x| (fold_scalar(x, n) as f64).powi(2)).sum();
    let lower = (-eps * eps * f2).exp();
    let sigma = eps * n as f64;
    (lower, lower + 4.0 * d as f64 * (-sigma * sigma / 4.0).exp())
}

/// Upper bound on the number of lattice points summed when periodizing a kernel.
pub const MAX_PERIODIZATION_POINTS: usize = 1 << 18;

/// The kernel g(n/σ) summed over each residue class of ℤ^{2d} mod N (σ = εN).
#[derive(Debug, Clone)]
pub struct PeriodizedKernel {
    pub n: i64,
    pub dim: usize,
    /// Mass per residue class, indexed by [`residue_index`].
    pub mass: Vec<f64>,
    /// Σ over all residues.
    pub total: f64,
    /// True when the lattice sum hit the point cap and the remainder was estimated by an integral.
    pub tail_estimated: bool,
}

impl PeriodizedKernel {
    pub fn new(kernel: &NoiseKernel, eps: f64, n: i64) -> Result<Self> {
        check_eps_n(eps, n)?;
        let dim = 2 * kernel.dim_d;
        let sigma = eps * n as f64;
        let cap_shell = {
            let per_axis = (MAX_PERIODIZATION_POINTS as f64).powf(1.0 / dim as f64);
            (((per_axis - 1.0) / 2.0).floor() as i64).max(1)
        };
        let cells = (n as usize).checked_pow(dim as u32).ok_or_else(|| Error::InvalidParameter("N^{2d} too large".into()))?;
        let mut mass = vec![0.0; cells];
        let mut total = 0.0;
        let (max_shell, tail_estimated) = match kernel.family {
            KernelFamily::CompactBump { radius } => {
                let s = (radius * sigma).floor() as i64;
                if s > cap_shell {
                    return Err(Error::InvalidParameter(format!("bump support of {s} lattice shells exceeds the cap {cap_shell}")));
                }
                (s, false)
            }
            KernelFamily::Gaussian => {
                // e^{−π²s²/σ²} < 1e−18 beyond this shell
                let s = (sigma * 6.5 / PI * 1.0f64).ceil() as i64 + 1;
                if s > cap_shell {
                    return Err(Error::InvalidParameter("gaussian periodization too wide; use the theta form".into()));
                }
                (s, false)
            }
            KernelFamily::PowerLaw { tail } => {
                // tail mass beyond Euclidean radius R ≲ A σ^{2d} (R/σ)^{2d−γ}/(γ−2d); require < 1e−14 of the
                // total ≈ σ^{2d}/c
                let n2 = dim as f64;
                let a = sphere_area(kernel.dim_d) * kernel.c / (tail - n2);
                let r_need = sigma * (1e14 * a).powf(1.0 / (tail - n2)) + 1.0;
                let s = r_need.ceil() as i64;
                if s > cap_shell {
                    (cap_shell, true)
                } else {
                    (s, false)
                }
            }
        };
        for shell in 0..=max_shell {
            for_each_shell_point(dim, shell, |p| {
                let rho = p.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt() / sigma;
                let w = kernel.profile(rho);
                if w != 0.0 {
                    mass[residue_index(p, n)] += w;
                }
            });
        }
        // Shell-wise accumulation above keeps small terms in their own cells; sum cells in order.
        for &m in &mass {
            total += m;
        }
        if tail_estimated {
            if let KernelFamily::PowerLaw { tail } = kernel.family {
                // Σ_{|p|_∞ > S} f(|p|/σ) ≈ σ^{2d} A ∫_{R_eq/σ}^∞ (1+ρ)^{−γ} ρ^{2d−1} dρ, with R_eq the radius of the
                // ball of equal volume to the box.
                let half = max_shell as f64 + 0.5;
                let vol = (2.0 * half).powi(dim as i32);
                let unit_ball = PI.powi(kernel.dim_d as i32) / puruspe::gamma(kernel.dim_d as f64 + 1.0);
                let r_eq = (vol / unit_ball).powf(1.0 / dim as f64) / sigma;
                let f = |rho: f64| (1.0 + rho).powf(-tail) * rho.powi(dim as i32 - 1);
                // substitute ρ = r_eq/t to map to a finite interval
                let g = |t: f64| if t <= 0.0 { 0.0 } else { f(r_eq / t) * r_eq / (t * t) };
                let (integral, _) = quad::integrate(&g, 0.0, 1.0, 1e-12, 0.0);
                let tail_mass = sigma.powi(dim as i32) * sphere_area(kernel.dim_d) * integral;
                let share = tail_mass / cells as f64;
                for m in mass.iter_mut() {
                    *m += share;
                }
                total += tail_mass;
            }
        }
        if !(total > 0.0) {
            return Err(Error::VanishingNormalization);
        }
        Ok(Self { n, dim, mass, total, tail_estimated })
    }

    /// γ(k) = 1 − Σ_r P(r)·2sin²(π k∧r/N) / Σ_r P(r).
    pub fn gamma(&self, k: &[i64]) -> f64 {
        1.0 - self.one_minus_gamma(k)
    }

    pub fn one_minus_gamma(&self, k: &[i64]) -> f64 {
        let mut e = 0.0;
        for (idx, &p) in self.mass.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let r = residue_point(idx, self.n, self.dim);
            let w = wedge(k, &r).unwrap().rem_euclid(self.n);
            if w == 0 {
                continue;
            }
            let s = (PI * w as f64 / self.n as f64).sin();
            e += p * 2.0 * s * s;
        }
        e / self.total
    }

    pub fn ln_abs_gamma(&self, k: &[i64]) -> f64 {
        let om = self.one_minus_gamma(k);
        if om <= 1.0 {
            (-om).ln_1p()
        } else {
            (1.0 - om).abs().ln()
        }
    }

    /// ln|γ| for every residue. Uses an FFT of the mass table with the k-independent mass at the
    /// origin split off, so that 1 − γ keeps its accuracy relative to the off-origin mass.
    pub fn ln_abs_gamma_table(&self) -> Vec<f64> {
        self.one_minus_gamma_table()
            .into_iter()
            .map(|om| if om <= 1.0 { (-om).ln_1p() } else { (1.0 - om).abs().ln() })
            .collect()
    }

    /// Signed γ for every residue.
    pub fn gamma_table(&self) -> Vec<f64> {
        self.one_minus_gamma_table().into_iter().map(|om| 1.0 - om).collect()
    }

    fn one_minus_gamma_table(&self) -> Vec<f64> {
        let cells = self.mass.len();
        let off: f64 = self.total - self.mass[0];
        if off == 0.0 {
            return vec![0.0; cells];
        }
        let mut data: Vec<Complex64> = self.mass.iter().map(|&m| Complex64::new(m, 0.0)).collect();
        data[0] = Complex64::new(0.0, 0.0);
        fft_nd(&mut data, self.n as usize, self.dim);
        // ĝ-table at frequency index j is Σ_r P(r) e^{−2πi j·r/N}; γ(k) uses j·r = k∧r, i.e.
        // j = (k_p, −k_q). P is even so the sign is immaterial.
        let d = self.dim / 2;
        let mut out = vec![0.0; cells];
        for (idx, o) in out.iter_mut().enumerate() {
            if idx == 0 {
                continue;
            }
            let k = residue_point(idx, self.n, self.dim);
            let mut j = vec![0i64; self.dim];
            for i in 0..d {
                j[i] = k[d + i];
                j[d + i] = -k[i];
            }
            let c = data[residue_index(&j, self.n)].re;
            *o = ((off - c) / self.total).max(0.0);
        }
        out
    }
}

/// In-place multidimensional FFT on an N^dim row-major array.
pub fn fft_nd(data: &mut [Complex64], n: usize, dim: usize) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut stride = 1;
    for _ in 0..dim {
        let block = stride * n;
        for start in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = data[start + offset + i * stride];
                }
                fft.process(&mut buf);
                for (i, b) in buf.iter().enumerate() {
                    data[start + offset + i * stride] = *b;
                }
            }
        }
        stride *= n;
    }
}
