//! Exact quantum norms for linear maps. Orthogonality of the W_k makes every noisy or coarse
//! propagator diagonal up to a phased permutation, so
//!   ‖T^n‖ = max_{k≠0} Π_{l=1}^n |γ(F^l k)|,   ‖T̃^{(n)}‖ = max_{k≠0} |γ(k)γ(F^n k)|.
//! Work is done with costs c = −ln|γ| ≥ 0, minimized.
//!
//! Two backends: for N^{2d} ≤ [`TABLE_LIMIT`] the cost of every residue is tabulated and F is
//! decomposed into cycles mod N; larger N (Gaussian noise only, whose cost is separable) use a
//! certified pruned enumeration ordered by the first factor.

use super::{is_admissible, QuantumSetting};
use crate::error::{Error, Result};
use crate::lattice::{fold_scalar, SymplecticIntMatrix};
use crate::noise::{ln_theta_ratio, residue_index, residue_point, NoiseKernel, Side};
use crate::norm::{Flavor, PropagatorNorm};
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};

/// Largest residue table built, N^{2d}.
pub const TABLE_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone)]
enum Backend {
    Table {
        cost: Vec<f64>,
        next: Vec<u32>,
        /// Cycles of F mod N on nonzero residues, concatenated; x_{i+1} = F x_i.
        order: Vec<u32>,
        starts: Vec<usize>,
        /// Nonzero residues by ascending cost.
        by_cost: Vec<u32>,
    },
    Pruned {
        /// −ln of the one-dimensional theta ratio, by residue.
        cost1: Vec<f64>,
        /// (cost, folded residue), ascending.
        sorted: Vec<(f64, i64)>,
    },
}

/// Exact norm oracle for one (F, kernel, ε, N).
#[derive(Debug, Clone)]
pub struct LinearNormOracle {
    f: SymplecticIntMatrix,
    finv: SymplecticIntMatrix,
    n: i64,
    dim: usize,
    backend: Backend,
}

#[derive(Clone, Debug)]
struct Best {
    cost: f64,
    k: Vec<i64>,
}

impl Best {
    fn none() -> Self {
        Self { cost: f64::INFINITY, k: vec![] }
    }

    fn offer(&mut self, cost: f64, k: impl FnOnce() -> Vec<i64>) {
        if cost < self.cost {
            *self = Self { cost, k: k() };
        } else if cost == self.cost {
            let k = k();
            if self.k.is_empty() || k < self.k {
                self.k = k;
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        if other.cost < self.cost || (other.cost == self.cost && !other.k.is_empty() && (self.k.is_empty() || other.k < self.k)) {
            self = other;
        }
        self
    }
}

fn gaussian_cost1(eps: f64, n: i64) -> Vec<f64> {
    let sigma = eps * n as f64;
    let by_abs: Vec<f64> = (0..=n / 2).map(|r| -ln_theta_ratio(sigma, r as f64 / n as f64)).collect();
    (0..n).map(|r| by_abs[fold_scalar(r, n).unsigned_abs() as usize].max(0.0)).collect()
}

fn apply_mod(f: &SymplecticIntMatrix, k: &[i64], n: i64) -> Vec<i64> {
    let s = k.len();
    (0..s)
        .map(|i| {
            let v: i128 = (0..s).map(|j| f.get(i, j) as i128 * k[j] as i128).sum();
            v.rem_euclid(n as i128) as i64
        })
        .collect()
}

/// Residue index of M·k mod N for the residue with index idx (first coordinate most significant).
fn image_index(idx: usize, m: &[i64], n: i64, dim: usize) -> usize {
    if dim > 16 {
        let k = residue_point(idx, n, dim);
        return residue_index(&apply_rows(m, &k, n), n);
    }
    // table sizes keep N·N·dim far below i64 range
    let n64 = n;
    let mut k = [0i64; 16];
    let mut rem = idx;
    for i in (0..dim).rev() {
        k[i] = (rem % n as usize) as i64;
        rem /= n as usize;
    }
    let mut out = 0usize;
    for i in 0..dim {
        let row = &m[i * dim..(i + 1) * dim];
        let v: i64 = row.iter().zip(&k[..dim]).map(|(a, b)| a * b).sum();
        out = out * n as usize + v.rem_euclid(n64) as usize;
    }
    out
}

fn apply_rows(m: &[i64], k: &[i64], n: i64) -> Vec<i64> {
    let s = k.len();
    (0..s).map(|i| (0..s).map(|j| m[i * s + j] as i128 * k[j] as i128).sum::<i128>().rem_euclid(n as i128) as i64).collect()
}

/// Sums of v over the cyclic windows [i+1, i+1+r) for every i, by binary lifting so each sum only
/// involves its own terms.
fn cyclic_windows(v: &[f64], r: usize) -> Vec<f64> {
    let l = v.len();
    let mut out = vec![0.0; l];
    if r == 0 {
        return out;
    }
    let mut cur = v.to_vec();
    let mut span = 1usize;
    let mut offset = 1usize;
    let mut rem = r;
    loop {
        if rem & 1 == 1 {
            for i in 0..l {
                out[i] += cur[(i + offset) % l];
            }
            offset += span;
        }
        rem >>= 1;
        if rem == 0 {
            break;
        }
        let next: Vec<f64> = (0..l).map(|i| cur[i] + cur[(i + span) % l]).collect();
        cur = next;
        span *= 2;
    }
    out
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

impl LinearNormOracle {
    pub fn new(f: &SymplecticIntMatrix, kernel: &NoiseKernel, eps: f64, setting: &QuantumSetting) -> Result<Self> {
        if f.dim_d() != setting.dim_d || kernel.dim_d() != setting.dim_d {
            return Err(Error::DimensionMismatch { expected: setting.dim_d, got: f.dim_d() });
        }
        if !is_admissible(f, setting.n, &setting.theta) {
            return Err(Error::InadmissibleAngle);
        }
        let n = setting.n;
        let dim = 2 * setting.dim_d;
        let cells = (n as usize).checked_pow(dim as u32).filter(|&c| c <= TABLE_LIMIT);
        let backend = match cells {
            Some(cells) => {
                let cost: Vec<f64> = if kernel.is_gaussian() {
                    let c1 = gaussian_cost1(eps, n);
                    (0..cells)
                        .into_par_iter()
                        .map(|idx| {
                            let mut rem = idx;
                            let mut digits = vec![0usize; dim];
                            for dgt in digits.iter_mut().rev() {
                                *dgt = rem % n as usize;
                                rem /= n as usize;
                            }
                            digits.iter().map(|&r| c1[r]).sum()
                        })
                        .collect()
                } else {
                    kernel.ln_gamma_table(eps, n)?.into_iter().map(|x| (-x).max(0.0)).collect()
                };
                let next: Vec<u32> = (0..cells)
                    .into_par_iter()
                    .map(|idx| residue_index(&apply_mod(f, &residue_point(idx, n, dim), n), n) as u32)
                    .collect();
                let mut seen = vec![false; cells];
                seen[0] = true;
                let mut order = Vec::with_capacity(cells);
                let mut starts = vec![];
                for s in 1..cells {
                    if seen[s] {
                        continue;
                    }
                    starts.push(order.len());
                    let mut x = s;
                    while !seen[x] {
                        seen[x] = true;
                        order.push(x as u32);
                        x = next[x] as usize;
                    }
                }
                starts.push(order.len());
                let mut by_cost: Vec<u32> = (1..cells as u32).collect();
                by_cost.par_sort_unstable_by(|&a, &b| cost[a as usize].total_cmp(&cost[b as usize]).then(a.cmp(&b)));
                Backend::Table { cost, next, order, starts, by_cost }
            }
            None if kernel.is_gaussian() => {
                let cost1 = gaussian_cost1(eps, n);
                let mut sorted: Vec<(f64, i64)> = (0..n).map(|r| (cost1[r as usize], fold_scalar(r, n))).collect();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                Backend::Pruned { cost1, sorted }
            }
            None => {
                return Err(Error::Unsupported(format!(
                    "N^{{2d}} = {n}^{dim} exceeds the table limit and the kernel is not separable"
                )))
            }
        };
        Ok(Self { f: f.clone(), finv: f.inverse(), n, dim, backend })
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn uses_table(&self) -> bool {
        matches!(self.backend, Backend::Table { .. })
    }

    fn cost_of(&self, k: &[i64]) -> f64 {
        match &self.backend {
            Backend::Table { cost, .. } => cost[residue_index(k, self.n)],
            Backend::Pruned { cost1, .. } => k.iter().map(|&x| cost1[x.rem_euclid(self.n) as usize]).sum(),
        }
    }

    /// Largest cost of a single factor, −ln min_k |γ(k)|.
    pub fn max_single_cost(&self) -> f64 {
        match &self.backend {
            Backend::Table { cost, .. } => cost.iter().copied().fold(0.0, f64::max),
            Backend::Pruned { cost1, .. } => self.dim as f64 * cost1.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Smallest cost of a single nonzero factor, −ln max_{k≠0} |γ(k)|.
    pub fn min_single_cost(&self) -> f64 {
        match &self.backend {
            Backend::Table { cost, .. } => cost[1..].iter().copied().fold(f64::INFINITY, f64::min),
            Backend::Pruned { sorted, .. } => sorted.iter().find(|x| x.1 != 0).map_or(0.0, |x| x.0),
        }
    }

    fn folded(&self, idx: usize) -> Vec<i64> {
        residue_point(idx, self.n, self.dim)
    }

    fn result(&self, best: Best, n: u64, flavor: Flavor) -> PropagatorNorm {
        PropagatorNorm::from_log(-best.cost, n, best.k, flavor, Side::Quantum)
    }

    fn unit(&self) -> Vec<i64> {
        let mut e = vec![0; self.dim];
        e[0] = 1;
        e
    }

    /// ‖T^n‖ exactly.
    pub fn noisy(&self, n: u64) -> PropagatorNorm {
        self.noisy_above(n, f64::NEG_INFINITY).expect("no floor")
    }

    /// ‖T^n‖ when ln‖T^n‖ ≥ floor; None when it is certainly below.
    pub fn noisy_above(&self, n: u64, floor: f64) -> Option<PropagatorNorm> {
        if n == 0 {
            return Some(PropagatorNorm::from_log(0.0, 0, self.unit(), Flavor::Noisy, Side::Quantum));
        }
        let limit = -floor;
        let best = match &self.backend {
            Backend::Table { cost, order, starts, .. } => {
                let best = (0..starts.len() - 1)
                    .into_par_iter()
                    .map(|c| {
                        let cyc = &order[starts[c]..starts[c + 1]];
                        let l = cyc.len();
                        let v: Vec<f64> = cyc.iter().map(|&x| cost[x as usize]).collect();
                        let q = n / l as u64;
                        let r = (n % l as u64) as usize;
                        let whole = if q > 0 { q as f64 * pairwise_sum(&v) } else { 0.0 };
                        let w = cyclic_windows(&v, r);
                        let mut b = Best::none();
                        for i in 0..l {
                            b.offer(whole + w[i], || self.folded(cyc[i] as usize));
                        }
                        b
                    })
                    .reduce(Best::none, Best::merge);
                best
            }
            Backend::Pruned { .. } => self.pruned_search(limit, |j, cut| self.orbit_cost(j, n, cut), true),
        };
        (best.cost <= limit).then(|| self.result(best, n, Flavor::Noisy))
    }

    /// ‖T̃^{(n)}‖ exactly.
    pub fn coarse(&self, n: u64) -> PropagatorNorm {
        self.coarse_above(n, f64::NEG_INFINITY).expect("no floor")
    }

    pub fn coarse_above(&self, n: u64, floor: f64) -> Option<PropagatorNorm> {
        let limit = -floor;
        let fn_mod = self.f.pow_mod(n, self.n);
        let image = |k: &[i64]| apply_rows(&fn_mod, k, self.n);
        let best = match &self.backend {
            Backend::Table { cost, next, by_cost, .. } => {
                // both costs are ≥ 0, so only residues with cost(k) ≤ limit can qualify
                let m = by_cost.partition_point(|&i| cost[i as usize] <= limit);
                // small n: follow the successor table instead of multiplying
                let use_next = n <= 4;
                by_cost[..m]
                    .par_iter()
                    .fold(Best::none, |mut b, &idx| {
                        let idx = idx as usize;
                        let j = if use_next {
                            let mut x = idx;
                            for _ in 0..n {
                                x = next[x] as usize;
                            }
                            x
                        } else {
                            image_index(idx, &fn_mod, self.n, self.dim)
                        };
                        b.offer(cost[idx] + cost[j], || self.folded(idx));
                        b
                    })
                    .reduce(Best::none, Best::merge)
            }
            Backend::Pruned { .. } => self.pruned_search(
                limit,
                |k, cut| {
                    let c = self.cost_of(k) + self.cost_of(&image(k));
                    (c <= cut).then_some(c)
                },
                false,
            ),
        };
        (best.cost <= limit).then(|| self.result(best, n, Flavor::Coarse))
    }

    /// Σ_{l=0}^{n−1} cost(F^l j), None once it exceeds cut.
    fn orbit_cost(&self, j: &[i64], n: u64, cut: f64) -> Option<f64> {
        let mut total = 0.0;
        let mut x = j.to_vec();
        let mut l = 0u64;
        while l < n {
            total += self.cost_of(&x);
            if total > cut {
                return None;
            }
            x = apply_mod(&self.f, &x, self.n);
            l += 1;
            if l < n && x.iter().zip(j).all(|(a, b)| (a - b).rem_euclid(self.n) == 0) {
                // cycle of length l shorter than the horizon
                let q = n / l;
                let r = n % l;
                let mut part = 0.0;
                let mut y = j.to_vec();
                for _ in 0..r {
                    part += self.cost_of(&y);
                    y = apply_mod(&self.f, &y, self.n);
                }
                let t = q as f64 * total + part;
                return (t <= cut).then_some(t);
            }
        }
        Some(total)
    }

    /// Minimizes `eval` over nonzero residues j whose single-factor cost bounds eval from below,
    /// visiting j in growing cost shells. With `via_inverse` the reported maximizer is F⁻¹j.
    fn pruned_search(&self, limit: f64, eval: impl Fn(&[i64], f64) -> Option<f64> + Sync, via_inverse: bool) -> Best {
        let Backend::Pruned { sorted, .. } = &self.backend else { unreachable!() };
        let max_total = self.dim as f64 * sorted.last().map_or(0.0, |x| x.0);
        let report = |j: &[i64]| -> Vec<i64> {
            let k = if via_inverse { self.finv.apply(j) } else { j.to_vec() };
            k.iter().map(|&x| fold_scalar(x, self.n)).collect()
        };
        let mut threshold = (4.0 * self.min_single_cost()).max(1e-300);
        loop {
            let t = threshold.min(limit);
            let shared = AtomicU64::new(f64::INFINITY.to_bits());
            let tops: Vec<(f64, i64)> = sorted.iter().take_while(|x| x.0 <= t).copied().collect();
            let best = tops
                .par_iter()
                .fold(Best::none, |mut b, &(c0, r0)| {
                    let mut j = vec![0i64; self.dim];
                    j[0] = r0;
                    self.enumerate(1, c0, t, &mut j, sorted, &shared, &eval, &mut b, &report);
                    b
                })
                .reduce(Best::none, Best::merge);
            if best.cost <= t || t >= limit || t >= max_total {
                return best;
            }
            threshold *= 4.0;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate(
        &self,
        pos: usize,
        partial: f64,
        t: f64,
        j: &mut Vec<i64>,
        sorted: &[(f64, i64)],
        shared: &AtomicU64,
        eval: &(impl Fn(&[i64], f64) -> Option<f64> + Sync),
        best: &mut Best,
        report: &impl Fn(&[i64]) -> Vec<i64>,
    ) {
        if pos == self.dim {
            if j.iter().all(|&x| x == 0) {
                return;
            }
            let cut = f64::from_bits(shared.load(Ordering::Relaxed)).min(best.cost);
            if let Some(c) = eval(j, cut) {
                best.offer(c, || report(j));
                shared.fetch_min(c.to_bits(), Ordering::Relaxed);
            }
            return;
        }
        for &(c, r) in sorted {
            let p = partial + c;
            if p > t {
                break;
            }
            let cut = f64::from_bits(shared.load(Ordering::Relaxed)).min(best.cost);
            if p > cut {
                break;
            }
            j[pos] = r;
            self.enumerate(pos + 1, p, t, j, sorted, shared, eval, best, report);
        }
        j[pos] = 0;
    }
}

/// ‖T^n_{ε,N}‖ for a linear map.
pub fn noisy_norm_linear(f: &SymplecticIntMatrix, kernel: &NoiseKernel, eps: f64, setting: &QuantumSetting, n: u64) -> Result<PropagatorNorm> {
    Ok(LinearNormOracle::new(f, kernel, eps, setting)?.noisy(n))
}

/// ‖G U^n G‖ for a linear map.
pub fn coarse_norm_linear(f: &SymplecticIntMatrix, kernel: &NoiseKernel, eps: f64, setting: &QuantumSetting, n: u64) -> Result<PropagatorNorm> {
    Ok(LinearNormOracle::new(f, kernel, eps, setting)?.coarse(n))
}
