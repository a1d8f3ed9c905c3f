//! Relaxation times τ = min{n ≥ 1 : ‖T^n‖ < e^{−1}}, quantum-limit lower bounds and the regime classifier.

use crate::classical::{classical_norm_coarse_linear, classical_norm_linear, TruncatedPropagator, DEFAULT_RADIUS};
use crate::error::{Error, Result};
use crate::lattice::SymplecticIntMatrix;
use crate::map::ClassicalMapSpec;
use crate::noise::{KernelFamily, NoiseKernel, PeriodizedKernel, Side};
use crate::norm::Flavor;
use crate::quantum::dense::{DenseOptions, QuantumPropagator};
use crate::quantum::exact::LinearNormOracle;
use crate::quantum::QuantumSetting;
use serde::{Deserialize, Serialize};

/// Times beyond this are reported as infinite.
pub const MAX_TAU: u64 = 1_000_000_000;
/// Default Galerkin cutoff for nonlinear classical maps.
pub const DEFAULT_CUTOFF: i64 = 32;
/// Entries of the largest admissible γ table for non-Gaussian lower bounds.
const GAMMA_TABLE_LIMIT: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormPath {
    Exact,
    Dense,
}

impl std::fmt::Display for NormPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormPath::Exact => "exact",
            NormPath::Dense => "dense",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Relaxation threshold on the norm, in (0, 1).
    pub threshold: f64,
    /// Coarse-flavor scan limit; None uses 10·ln(ε⁻¹)/ĥ + 100.
    pub coarse_cap: Option<u64>,
    pub max_tau: u64,
    pub cutoff: i64,
    pub dense: DenseOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { threshold: (-1.0f64).exp(), coarse_cap: None, max_tau: MAX_TAU, cutoff: DEFAULT_CUTOFF, dense: DenseOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationResult {
    /// None is the infinity marker.
    pub tau: Option<u64>,
    pub flavor: Flavor,
    pub side: Side,
    /// (‖T^{τ−1}‖, ‖T^τ‖) when τ is finite; for infinite τ the last norm evaluated is repeated.
    pub bracket: (f64, f64),
    pub scan_cap_hit: bool,
}

impl RelaxationResult {
    pub fn is_infinite(&self) -> bool {
        self.tau.is_none()
    }

    /// τ as a real, +∞ for the infinity marker.
    pub fn tau_f64(&self) -> f64 {
        self.tau.map_or(f64::INFINITY, |t| t as f64)
    }

    fn infinite(flavor: Flavor, side: Side, norm: f64, cap_hit: bool) -> Self {
        Self { tau: None, flavor, side, bracket: (norm, norm), scan_cap_hit: cap_hit }
    }
}

/// Evaluates ln‖·‖ at step n; Some(v) when v ≥ floor, None when it is certainly below.
type LogNorm<'a> = dyn FnMut(u64, f64) -> Result<Option<f64>> + 'a;

fn exact_log(f: &mut LogNorm, n: u64) -> Result<f64> {
    Ok(f(n, f64::NEG_INFINITY)?.expect("unbounded floor"))
}

/// ln‖·‖ at n, lowering the floor geometrically from just under the threshold so pruned oracles
/// only ever look at the candidates that matter.
fn value_log(f: &mut LogNorm, n: u64, ln_thr: f64) -> Result<f64> {
    let mut floor = 2.0 * ln_thr - 1.0;
    while floor > -1e6 {
        if let Some(v) = f(n, floor)? {
            return Ok(v);
        }
        floor *= 4.0;
    }
    exact_log(f, n)
}

/// Noisy flavor: the norm is non-increasing in n, so bracket by doubling and bisect.
fn search_monotone(f: &mut LogNorm, ln_thr: f64, max_tau: u64, side: Side) -> Result<RelaxationResult> {
    let below = |f: &mut LogNorm, n: u64| -> Result<bool> { Ok(f(n, ln_thr)?.map_or(true, |v| v < ln_thr)) };
    let mut lo = 0u64;
    let mut hi = 1u64;
    while !below(f, hi)? {
        lo = hi;
        if hi >= max_tau {
            let last = value_log(f, hi, ln_thr)?.exp();
            return Ok(RelaxationResult::infinite(Flavor::Noisy, side, last, false));
        }
        hi = (hi * 2).min(max_tau);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(f, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let before = value_log(f, hi - 1, ln_thr)?.exp();
    let at = value_log(f, hi, ln_thr)?.exp();
    Ok(RelaxationResult { tau: Some(hi), flavor: Flavor::Noisy, side, bracket: (before, at), scan_cap_hit: false })
}

/// Coarse flavor: first n in 1..=cap below the threshold.
fn search_scan(f: &mut LogNorm, ln_thr: f64, cap: u64, side: Side) -> Result<RelaxationResult> {
    for n in 1..=cap {
        if f(n, ln_thr)?.map_or(true, |v| v < ln_thr) {
            let before = value_log(f, n - 1, ln_thr)?.exp();
            let at = value_log(f, n, ln_thr)?.exp();
            return Ok(RelaxationResult { tau: Some(n), flavor: Flavor::Coarse, side, bracket: (before, at), scan_cap_hit: false });
        }
    }
    let last = value_log(f, cap, ln_thr)?.exp();
    Ok(RelaxationResult::infinite(Flavor::Coarse, side, last, true))
}

fn check_threshold(opts: &SearchOptions) -> Result<f64> {
    if !(opts.threshold > 0.0 && opts.threshold < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold must lie in (0, 1), got {}", opts.threshold)));
    }
    Ok(opts.threshold.ln())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be non-negative, got {eps}")));
    }
    Ok(())
}

/// Default coarse scan limit 10·ln(ε⁻¹)/ĥ + 100.
pub fn default_coarse_cap(f: &SymplecticIntMatrix, eps: f64) -> u64 {
    let h = f.ks_entropy().map(|e| e.min_averaged).unwrap_or(0.0);
    let l = (1.0 / eps).ln().max(0.0);
    if h > 0.0 {
        (10.0 * l / h).ceil() as u64 + 100
    } else {
        10_000
    }
}

pub fn tau_classical(map: &ClassicalMapSpec, kernel: &NoiseKernel, eps: f64, flavor: Flavor, opts: &SearchOptions) -> Result<RelaxationResult> {
    check_eps(eps)?;
    let ln_thr = check_threshold(opts)?;
    if eps == 0.0 {
        return Ok(RelaxationResult::infinite(flavor, Side::Classical, 1.0, false));
    }
    let cap = opts.coarse_cap.unwrap_or_else(|| default_coarse_cap(&map.linear, eps));
    // translations only add unit-modulus phases, so the linear formulas cover F∘t_v
    if !map.has_kick() {
        let f = &map.linear;
        let mut eval = |n: u64, _floor: f64| -> Result<Option<f64>> {
            let r = match flavor {
                Flavor::Noisy => classical_norm_linear(f, kernel, eps, n, DEFAULT_RADIUS)?,
                Flavor::Coarse => classical_norm_coarse_linear(f, kernel, eps, n, DEFAULT_RADIUS)?,
            };
            Ok(Some(r.log_value))
        };
        return match flavor {
            Flavor::Noisy => search_monotone(&mut eval, ln_thr, opts.max_tau, Side::Classical),
            Flavor::Coarse => search_scan(&mut eval, ln_thr, cap, Side::Classical),
        };
    }
    let prop = TruncatedPropagator::new(map, kernel, eps, opts.cutoff)?;
    let mut eval = |n: u64, _floor: f64| -> Result<Option<f64>> { Ok(Some(prop.norm(n, flavor)?.log_value)) };
    match flavor {
        Flavor::Noisy => search_monotone(&mut eval, ln_thr, opts.max_tau, Side::Classical),
        Flavor::Coarse => search_scan(&mut eval, ln_thr, cap, Side::Classical),
    }
}

pub fn tau_quantum(
    map: &ClassicalMapSpec,
    kernel: &NoiseKernel,
    eps: f64,
    setting: &QuantumSetting,
    flavor: Flavor,
    path: NormPath,
    opts: &SearchOptions,
) -> Result<RelaxationResult> {
    check_eps(eps)?;
    let ln_thr = check_threshold(opts)?;
    if eps == 0.0 {
        return Ok(RelaxationResult::infinite(flavor, Side::Quantum, 1.0, false));
    }
    let cap = opts.coarse_cap.unwrap_or_else(|| default_coarse_cap(&map.linear, eps));
    match path {
        NormPath::Exact => {
            if map.has_kick() {
                return Err(Error::Unsupported("the exact path needs a linear map (translations allowed)".into()));
            }
            let oracle = LinearNormOracle::new(&map.linear, kernel, eps, setting)?;
            if oracle.max_single_cost() == 0.0 {
                // γ ≡ 1: the propagator is unitary on mean-zero observables
                return Ok(RelaxationResult::infinite(flavor, Side::Quantum, 1.0, false));
            }
            let mut eval = |n: u64, floor: f64| -> Result<Option<f64>> {
                Ok(match flavor {
                    Flavor::Noisy => oracle.noisy_above(n, floor),
                    Flavor::Coarse => oracle.coarse_above(n, floor),
                }
                .map(|p| p.log_value))
            };
            match flavor {
                Flavor::Noisy => {
                    let lb = quantum_lower_bound(kernel, eps, setting.n, setting.dim_d)?;
                    if lb > opts.max_tau as f64 {
                        let last = value_log(&mut eval, opts.max_tau, ln_thr)?.exp();
                        return Ok(RelaxationResult::infinite(flavor, Side::Quantum, last, false));
                    }
                    if oracle.min_single_cost() == 0.0 && exact_log(&mut eval, 1 << 40)? == 0.0 {
                        // a whole F-cycle with γ = 1 never relaxes
                        return Ok(RelaxationResult::infinite(flavor, Side::Quantum, 1.0, false));
                    }
                    search_monotone(&mut eval, ln_thr, opts.max_tau, Side::Quantum)
                }
                Flavor::Coarse => {
                    if oracle.min_single_cost() + oracle.max_single_cost() < -ln_thr {
                        // k = argmax γ gives γ(k)γ(F^n k) ≥ max γ · min γ above the threshold for every n
                        let v = oracle.coarse_above(1, ln_thr).map_or(ln_thr, |p| p.log_value);
                        return Ok(RelaxationResult::infinite(flavor, Side::Quantum, v.exp(), false));
                    }
                    search_scan(&mut eval, ln_thr, cap, Side::Quantum)
                }
            }
        }
        NormPath::Dense => {
            let prop = QuantumPropagator::new(map, kernel, eps, setting, opts.dense)?;
            if prop.noise().entries[1..].iter().all(|g| *g == num_complex::Complex64::new(1.0, 0.0)) {
                return Ok(RelaxationResult::infinite(flavor, Side::Quantum, 1.0, false));
            }
            let lb = quantum_lower_bound(kernel, eps, setting.n, setting.dim_d)?;
            if flavor == Flavor::Noisy && lb > opts.max_tau as f64 {
                return Ok(RelaxationResult::infinite(flavor, Side::Quantum, 1.0, false));
            }
            let gam: Vec<f64> = prop.noise().entries[1..].iter().map(|g| g.norm()).collect();
            let min_gamma = gam.iter().copied().fold(1.0, f64::min);
            let max_gamma = gam.iter().copied().fold(0.0, f64::max);
            if flavor == Flavor::Coarse && (min_gamma * max_gamma).ln() > ln_thr {
                return Ok(RelaxationResult::infinite(flavor, Side::Quantum, 1.0, false));
            }
            let mut eval = |n: u64, _floor: f64| -> Result<Option<f64>> { Ok(Some(prop.norm(n, flavor)?.log_value)) };
            match flavor {
                Flavor::Noisy => search_monotone(&mut eval, ln_thr, opts.max_tau, Side::Quantum),
                Flavor::Coarse => search_scan(&mut eval, ln_thr, cap, Side::Quantum),
            }
        }
    }
}

/// Map-independent lower bound on the noisy quantum relaxation time: ‖T^n‖ ≥ (min_k γ(k))^n gives
/// τ_q ≥ ⌈1/(−ln min_k γ)⌉; +∞ when γ ≡ 1.
pub fn quantum_lower_bound(kernel: &NoiseKernel, eps: f64, n: i64, dim_d: usize) -> Result<f64> {
    if kernel.dim_d() != dim_d {
        return Err(Error::DimensionMismatch { expected: dim_d, got: kernel.dim_d() });
    }
    if eps == 0.0 {
        return Ok(f64::INFINITY);
    }
    let ln_min = if kernel.is_gaussian() {
        // the periodized Gaussian factorizes and each factor is smallest at the fold boundary
        let k = vec![n / 2; 2 * dim_d];
        kernel.ln_quantum_eigenvalue(eps, n, &k)?
    } else {
        let cells = (n as usize).checked_pow(2 * dim_d as u32).filter(|&c| c <= GAMMA_TABLE_LIMIT);
        if cells.is_none() {
            return Err(Error::Unsupported(format!("γ table of size N^{} too large at N = {n}", 2 * dim_d)));
        }
        let t = PeriodizedKernel::new(kernel, eps, n)?.ln_abs_gamma_table();
        t.into_iter().fold(0.0, f64::min)
    };
    if ln_min == 0.0 {
        return Ok(f64::INFINITY);
    }
    if ln_min == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    Ok((1.0 / -ln_min).ceil())
}

/// Constant M(F) of the slope theorem: the least M with C e^{−M²/4} < e^{−2} (C = 4d + 1) and
/// ln(M/(4‖F‖))/ĥ > 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConstant {
    pub from_noise: f64,
    pub from_entropy: f64,
    /// max of the two thresholds
    pub m: f64,
    /// least integer strictly above m
    pub m_prime: u64,
}

pub fn scaling_constant(f: &SymplecticIntMatrix) -> Result<ScalingConstant> {
    let c = (4 * f.dim_d() + 1) as f64;
    let from_noise = 2.0 * (2.0 + c.ln()).sqrt();
    let h = f.ks_entropy()?.min_averaged;
    let from_entropy = 4.0 * f.norm() * (2.0 * h).exp();
    let m = from_noise.max(from_entropy);
    Ok(ScalingConstant { from_noise, from_entropy, m, m_prime: m.floor() as u64 + 1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Semiclassical,
    Crossover,
    Quantum,
    DeeplyQuantum,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Semiclassical => "semiclassical",
            Regime::Crossover => "crossover",
            Regime::Quantum => "quantum",
            Regime::DeeplyQuantum => "deeply_quantum",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeTag {
    pub label: Regime,
    /// τ_E = ln(N)/Γ
    pub ehrenfest: f64,
    /// Γ = ln‖F‖
    pub expansion: f64,
}

/// δ in the deeply-quantum threshold εN ≤ (1−δ)/√(ln ln ε⁻¹).
pub const REGIME_DELTA: f64 = 0.9;
/// εN below this is the quantum regime.
pub const QUANTUM_EN: f64 = 0.5;

pub fn classify_regime(f: &SymplecticIntMatrix, eps: f64, n: i64, exponent: Option<f64>) -> Result<RegimeTag> {
    if !f.is_ergodic() {
        return Err(Error::NotErgodic);
    }
    if !(eps > 0.0) || n < 1 {
        return Err(Error::InvalidParameter("need ε > 0 and N ≥ 1".into()));
    }
    let expansion = f.norm().ln();
    let ehrenfest = (n as f64).ln() / expansion;
    let en = eps * n as f64;
    let lnln = (1.0 / eps).ln().ln();
    let label = if lnln > 0.0 && en <= (1.0 - REGIME_DELTA) / lnln.sqrt() {
        Regime::DeeplyQuantum
    } else if en < QUANTUM_EN {
        Regime::Quantum
    } else {
        let semi = match exponent {
            Some(e) => (n as f64) > eps.powf(-e),
            None => en > scaling_constant(f)?.m,
        };
        if semi {
            Regime::Semiclassical
        } else {
            Regime::Crossover
        }
    };
    Ok(RegimeTag { label, ehrenfest, expansion })
}

/// Support radius of the compact kernel, for callers choosing εN below it.
pub fn compact_support(kernel: &NoiseKernel) -> Option<f64> {
    match kernel.family() {
        KernelFamily::CompactBump { radius } => Some(radius),
        _ => None,
    }
}
