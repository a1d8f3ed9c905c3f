//! Integer symplectic linear algebra on the Fourier lattice ℤ^{2d}.
//!
//! Vectors are stored as (q-block, p-block). The wedge form is
//! k∧m = k_p·m_q − k_q·m_p, i.e. kᵀ J m with J = [[0, −I], [I, 0]].

use crate::error::{Error, Result};
use crate::poly::{self, IntPoly};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type LatticeVector = Vec<i64>;

pub fn wedge(k: &[i64], m: &[i64]) -> Result<i64> {
    if k.len() != m.len() {
        return Err(Error::DimensionMismatch { expected: k.len(), got: m.len() });
    }
    if k.len() % 2 != 0 {
        return Err(Error::OddDimension { rows: k.len(), cols: 1 });
    }
    let d = k.len() / 2;
    Ok((0..d).map(|i| k[d + i] * m[i] - k[i] * m[d + i]).sum())
}

/// Wedge with a real vector, used for phases.
pub fn wedge_real(k: &[i64], x: &[f64]) -> f64 {
    let d = k.len() / 2;
    (0..d).map(|i| k[d + i] as f64 * x[i] - k[i] as f64 * x[d + i]).sum()
}

/// The representative of k mod N in (−N/2, N/2].
#[inline]
pub fn fold_scalar(k: i64, n: i64) -> i64 {
    let mut r = k.rem_euclid(n);
    if 2 * r > n {
        r -= n;
    }
    r
}

pub fn fold(k: &[i64], n: i64) -> LatticeVector {
    k.iter().map(|&x| fold_scalar(x, n)).collect()
}

/// The integer shift m with k = fold(k) + N·m.
pub fn fold_shift(k: &[i64], n: i64) -> Vec<i64> {
    k.iter().map(|&x| (x - fold_scalar(x, n)) / n).collect()
}

pub fn check_symplectic(rows: &[Vec<i64>]) -> Result<bool> {
    let n = rows.len();
    if n % 2 != 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::OddDimension { rows: n, cols: rows.first().map_or(0, |r| r.len()) });
    }
    let flat: Vec<i64> = rows.iter().flatten().copied().collect();
    Ok(is_symplectic_flat(&flat, n))
}

fn j_matrix(n: usize) -> Vec<i128> {
    let d = n / 2;
    let mut j = vec![0i128; n * n];
    for i in 0..d {
        j[i * n + d + i] = -1;
        j[(d + i) * n + i] = 1;
    }
    j
}

fn is_symplectic_flat(f: &[i64], n: usize) -> bool {
    let j = j_matrix(n);
    // Fᵀ J F
    let mut jf = vec![0i128; n * n];
    for i in 0..n {
        for c in 0..n {
            jf[i * n + c] = (0..n).map(|l| j[i * n + l] * f[l * n + c] as i128).sum();
        }
    }
    for r in 0..n {
        for c in 0..n {
            let v: i128 = (0..n).map(|l| f[l * n + r] as i128 * jf[l * n + c]).sum();
            if v != j[r * n + c] {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EntropyData {
    pub block_entropies: Vec<f64>,
    pub averaged: Vec<f64>,
    pub min_averaged: f64,
}

/// An integer symplectic matrix F together with its spectral data.
#[derive(Debug, Clone)]
pub struct SymplecticIntMatrix {
    dim_d: usize,
    entries: Vec<i64>,
    blocks: Option<Vec<Vec<usize>>>,
    charpoly: IntPoly,
    eigenvalues: Vec<Complex64>,
    norm_mu: f64,
    norm_f: f64,
    ergodic: bool,
}

impl SymplecticIntMatrix {
    pub fn new(rows: Vec<Vec<i64>>) -> Result<Self> {
        if !check_symplectic(&rows)? {
            return Err(Error::NotSymplectic);
        }
        let n = rows.len();
        let entries: Vec<i64> = rows.into_iter().flatten().collect();
        let charpoly = poly::charpoly(&entries, n);
        let eigenvalues = poly::roots(&charpoly);
        let ergodic = !poly::cyclotomics_up_to_degree(n)
            .iter()
            .any(|(_, c)| poly::divides_monic(c, &charpoly));
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| entries[i * n + j] as f64);
        let sv = m.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        Ok(Self {
            dim_d: n / 2,
            entries,
            blocks: None,
            charpoly,
            eigenvalues,
            norm_mu: smax.max(1.0 / smin),
            norm_f: smax,
            ergodic,
        })
    }

    pub fn from_2x2(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        Self::new(vec![vec![a, b], vec![c, d]])
    }

    pub fn cat() -> Self {
        Self::from_2x2(2, 1, 1, 1).unwrap()
    }

    pub fn identity(dim_d: usize) -> Self {
        let n = 2 * dim_d;
        Self::new((0..n).map(|i| (0..n).map(|j| (i == j) as i64).collect()).collect()).unwrap()
    }

    /// Attach contiguous diagonal blocks (sizes summing to 2d). The matrix must be block diagonal.
    pub fn with_blocks(self, sizes: Vec<usize>) -> Result<Self> {
        let mut start = 0;
        let sets = sizes
            .iter()
            .map(|&s| {
                let r: Vec<usize> = (start..start + s).collect();
                start += s;
                r
            })
            .collect();
        self.with_block_indices(sets)
    }

    /// Attach invariant coordinate blocks given as index sets partitioning 0..2d, e.g.
    /// [[0, 2], [1, 3]] for the (q1, p1) and (q2, p2) planes when d = 2.
    pub fn with_block_indices(mut self, sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = self.size();
        let mut owner = vec![usize::MAX; n];
        for (bi, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidBlocks("empty block".into()));
            }
            for &i in set {
                if i >= n || owner[i] != usize::MAX {
                    return Err(Error::InvalidBlocks(format!("index {i} out of range or repeated")));
                }
                owner[i] = bi;
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(Error::InvalidBlocks(format!("blocks do not cover all {n} coordinates")));
        }
        for i in 0..n {
            for j in 0..n {
                if owner[i] != owner[j] && self.entries[i * n + j] != 0 {
                    return Err(Error::InvalidBlocks(format!("entry ({i},{j}) couples two blocks")));
                }
            }
        }
        self.blocks = Some(sets);
        Ok(self)
    }

    pub fn dim_d(&self) -> usize {
        self.dim_d
    }
    pub fn size(&self) -> usize {
        2 * self.dim_d
    }
    pub fn entries(&self) -> &[i64] {
        &self.entries
    }
    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.size()).map(|r| r.to_vec()).collect()
    }
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.size() + j]
    }
    /// Block dimensions, when blocks were supplied.
    pub fn blocks(&self) -> Option<Vec<usize>> {
        self.blocks.as_ref().map(|b| b.iter().map(Vec::len).collect())
    }
    pub fn charpoly(&self) -> &IntPoly {
        &self.charpoly
    }
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }
    pub fn is_ergodic(&self) -> bool {
        self.ergodic
    }
    /// μ = max(‖F‖, ‖F⁻¹‖) in the operator 2-norm.
    pub fn norm_mu(&self) -> f64 {
        self.norm_mu
    }
    /// ‖F‖ in the operator 2-norm.
    pub fn norm(&self) -> f64 {
        self.norm_f
    }
    pub fn is_identity(&self) -> bool {
        let n = self.size();
        (0..n).all(|i| (0..n).all(|j| self.get(i, j) == (i == j) as i64))
    }

    /// F⁻¹ = −J Fᵀ J, exact.
    pub fn inverse(&self) -> Self {
        let n = self.size();
        let d = self.dim_d;
        let mut inv = vec![vec![0i64; n]; n];
        // (−J Fᵀ J)_{rc} = −Σ J_{ra} F_{ba} J_{bc}
        let jv = |r: usize, c: usize| -> i64 {
            if r < d && c == r + d {
                -1
            } else if r >= d && c + d == r {
                1
            } else {
                0
            }
        };
        for (r, row) in inv.iter_mut().enumerate() {
            for (c, x) in row.iter_mut().enumerate() {
                let mut s = 0;
                for a in 0..n {
                    let ja = jv(r, a);
                    if ja == 0 {
                        continue;
                    }
                    for b in 0..n {
                        s += ja * self.get(b, a) * jv(b, c);
                    }
                }
                *x = -s;
            }
        }
        let mut out = Self::new(inv).expect("inverse of a symplectic matrix is symplectic");
        out.blocks = self.blocks.clone();
        out
    }

    pub fn apply(&self, k: &[i64]) -> LatticeVector {
        let n = self.size();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j) * k[j]).sum()).collect()
    }

    /// F k reduced into the fold domain modulo N.
    pub fn apply_mod(&self, k: &[i64], modulus: i64) -> LatticeVector {
        let n = self.size();
        (0..n)
            .map(|i| {
                let s: i128 = (0..n).map(|j| self.get(i, j) as i128 * k[j] as i128).sum();
                fold_scalar((s % modulus as i128) as i64, modulus)
            })
            .collect()
    }

    /// F^e with entries reduced to [0, N).
    pub fn pow_mod(&self, e: u64, modulus: i64) -> Vec<i64> {
        let n = self.size();
        let mul = |a: &[i64], b: &[i64]| -> Vec<i64> {
            let mut out = vec![0i64; n * n];
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0i128;
                    for l in 0..n {
                        s += a[i * n + l] as i128 * b[l * n + j] as i128;
                    }
                    out[i * n + j] = s.rem_euclid(modulus as i128) as i64;
                }
            }
            out
        };
        let mut result: Vec<i64> = (0..n * n).map(|i| ((i / n == i % n) as i64).rem_euclid(modulus)).collect();
        let mut base: Vec<i64> = self.entries.iter().map(|x| x.rem_euclid(modulus)).collect();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = mul(&result, &base);
            }
            base = mul(&base, &base);
            e >>= 1;
        }
        result
    }

    /// F^e as exact big integers.
    pub fn pow_big(&self, e: u64) -> Vec<BigInt> {
        let n = self.size();
        let mut m: Vec<BigInt> = (0..n * n).map(|i| BigInt::from((i / n == i % n) as i64)).collect();
        for _ in 0..e {
            let mut next = vec![BigInt::zero(); n * n];
            for i in 0..n {
                for j in 0..n {
                    let mut s = BigInt::zero();
                    for l in 0..n {
                        s += &m[i * n + l] * self.get(l, j);
                    }
                    next[i * n + j] = s;
                }
            }
            m = next;
        }
        m
    }

    pub fn ks_entropy(&self) -> Result<EntropyData> {
        if !self.ergodic {
            return Err(Error::NotErgodic);
        }
        let n = self.size();
        let blocks: Vec<Vec<usize>> = match &self.blocks {
            Some(b) => b.clone(),
            None => {
                if n > 2 && poly::is_reducible(&self.charpoly) {
                    return Err(Error::ReducibleWithoutBlocks);
                }
                vec![(0..n).collect()]
            }
        };
        let mut block_entropies = Vec::new();
        let mut averaged = Vec::new();
        for set in blocks {
            let size = set.len();
            let sub: Vec<i64> = (0..size * size)
                .map(|i| self.get(set[i / size], set[i % size]))
                .collect();
            let h: f64 = poly::roots(&poly::charpoly(&sub, size))
                .iter()
                .map(|z| z.norm())
                .filter(|&r| r > 1.0)
                .map(f64::ln)
                .sum();
            block_entropies.push(h);
            averaged.push(h / size as f64);
        }
        let min_averaged = averaged.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(EntropyData { block_entropies, averaged, min_averaged })
    }
}

pub fn check_ergodic(f: &SymplecticIntMatrix) -> bool {
    f.is_ergodic()
}

pub fn ks_entropy(f: &SymplecticIntMatrix) -> Result<EntropyData> {
    f.ks_entropy()
}

/// The cycle of k under the permutation induced by F on (ℤ/N)^{2d}, in fold coordinates.
pub fn orbit_mod_n(f: &SymplecticIntMatrix, k: &[i64], n: i64) -> Result<Vec<LatticeVector>> {
    if k.len() != f.size() {
        return Err(Error::DimensionMismatch { expected: f.size(), got: k.len() });
    }
    let start = fold(k, n);
    if start.iter().all(|&x| x == 0) {
        return Err(Error::ZeroVector);
    }
    let mut out = vec![start.clone()];
    let mut cur = f.apply_mod(&start, n);
    while cur != start {
        out.push(cur.clone());
        cur = f.apply_mod(&cur, n);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitVariant {
    /// |k|² + |F^n k|²
    Endpoint,
    /// Σ_{l=0}^{n} |F^l k|²
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinOrbit {
    pub value: BigInt,
    pub argmin: LatticeVector,
    pub variant: OrbitVariant,
    /// Final half-width of the searched box.
    pub radius: i64,
    /// True when the certificate |k|² ≥ (R+1)² > value rules out every point outside the box.
    pub confirmed: bool,
}

impl MinOrbit {
    pub fn ln_value(&self) -> f64 {
        big_ln(&self.value)
    }
}

pub fn big_ln(v: &BigInt) -> f64 {
    if let Some(x) = v.to_f64() {
        if x.is_finite() {
            return x.ln();
        }
    }
    let bits = v.bits();
    let shift = bits.saturating_sub(64);
    let top = (v >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Largest box half-width tried before giving up the interior certificate.
pub const MAX_SEARCH_RADIUS: i64 = 1 << 16;

/// min over nonzero k of Σ_M |M k|² for the given matrices. The first matrix must be the identity,
/// which supplies the pruning bound value ≥ |k|².
pub fn min_quadratic_orbit(terms: &[Vec<BigInt>], dim: usize, radius: i64) -> Result<(BigInt, LatticeVector, i64, bool)> {
    if radius < 1 {
        return Err(Error::EmptySearch);
    }
    let mut r = radius;
    loop {
        let (best, arg) = search_box(terms, dim, r);
        let bound = BigInt::from(r + 1) * BigInt::from(r + 1);
        if best < bound {
            return Ok((best, arg, r, true));
        }
        if r >= MAX_SEARCH_RADIUS {
            return Ok((best, arg, r, false));
        }
        r = (r * 2).min(MAX_SEARCH_RADIUS);
    }
}

pub fn min_orbit_extension(f: &SymplecticIntMatrix, n: u64, radius: i64, variant: OrbitVariant) -> Result<MinOrbit> {
    let terms: Vec<Vec<BigInt>> = match variant {
        OrbitVariant::Endpoint => vec![f.pow_big(0), f.pow_big(n)],
        OrbitVariant::Sum => {
            let mut v = vec![f.pow_big(0)];
            let fb = f.pow_big(1);
            let dim = f.size();
            for _ in 0..n {
                let prev = v.last().unwrap();
                let mut next = vec![BigInt::zero(); dim * dim];
                for i in 0..dim {
                    for j in 0..dim {
                        for l in 0..dim {
                            next[i * dim + j] += &fb[i * dim + l] * &prev[l * dim + j];
                        }
                    }
                }
                v.push(next);
            }
            v
        }
    };
    let (value, argmin, radius, confirmed) = min_quadratic_orbit(&terms, f.size(), radius)?;
    Ok(MinOrbit { value, argmin, variant, radius, confirmed })
}

/// Same minimum as [`min_orbit_extension`], exact and certified. For 2×2 maps the quadratic form
/// Σ_M MᵀM is Lagrange–Gauss reduced, which yields every shortest vector directly; larger maps
/// fall back to the box search.
pub fn min_orbit_extension_reduced(f: &SymplecticIntMatrix, n: u64, radius: i64, variant: OrbitVariant) -> Result<MinOrbit> {
    if f.size() != 2 {
        return min_orbit_extension(f, n, radius, variant);
    }
    let mats: Vec<Vec<BigInt>> = match variant {
        OrbitVariant::Endpoint => vec![f.pow_big(0), f.pow_big(n)],
        OrbitVariant::Sum => (0..=n).map(|l| f.pow_big(l)).collect(),
    };
    let mut g = [BigInt::zero(), BigInt::zero(), BigInt::zero()];
    for m in &mats {
        g[0] += &m[0] * &m[0] + &m[2] * &m[2];
        g[1] += &m[0] * &m[1] + &m[2] * &m[3];
        g[2] += &m[1] * &m[1] + &m[3] * &m[3];
    }
    let (value, argmin) = shortest_vector_2d(&g)?;
    Ok(MinOrbit { value, argmin, variant, radius: 0, confirmed: true })
}

/// Minimum of the positive definite form a x² + 2b xy + c y² over nonzero integer (x, y), with the
/// lexicographically smallest minimizer.
pub fn shortest_vector_2d(g: &[BigInt; 3]) -> Result<(BigInt, LatticeVector)> {
    let (mut a, mut b, mut c) = (g[0].clone(), g[1].clone(), g[2].clone());
    if !(a.is_positive() && &a * &c - &b * &b > BigInt::zero()) {
        return Err(Error::InvalidParameter("quadratic form is not positive definite".into()));
    }
    // basis vectors in the original coordinates
    let mut u = [BigInt::from(1), BigInt::zero()];
    let mut v = [BigInt::zero(), BigInt::from(1)];
    loop {
        if c < a {
            std::mem::swap(&mut a, &mut c);
            std::mem::swap(&mut u, &mut v);
        }
        // mu = round(b / a)
        let two_a = &a * 2;
        let num: BigInt = &b * 2 + &a;
        let mu = num.div_floor(&two_a);
        if mu.is_zero() {
            break;
        }
        c = &c - &b * &mu * 2 + &mu * &mu * &a;
        b = &b - &mu * &a;
        v = [&v[0] - &mu * &u[0], &v[1] - &mu * &u[1]];
    }
    // reduced: |2b| ≤ a ≤ c; all shortest vectors lie among ±u, ±v, ±(u ± v)
    let form = |x: &[BigInt; 2]| -> BigInt {
        &x[0] * &x[0] * &a + &x[0] * &x[1] * &b * 2 + &x[1] * &x[1] * &c
    };
    let mut best: Option<(BigInt, LatticeVector)> = None;
    for (s, t) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)] {
        let coef = [BigInt::from(s), BigInt::from(t)];
        let val = form(&coef);
        let k: Option<LatticeVector> = [&coef[0] * &u[0] + &coef[1] * &v[0], &coef[0] * &u[1] + &coef[1] * &v[1]]
            .iter()
            .map(|x| x.to_i64())
            .collect();
        let Some(k) = k else { return Err(Error::InvalidParameter("minimizer exceeds i64".into())) };
        let cand = (val, k);
        if best.as_ref().map_or(true, |b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    Ok(best.unwrap())
}

fn search_box(terms: &[Vec<BigInt>], dim: usize, r: i64) -> (BigInt, LatticeVector) {
    // Worst-case magnitude decides whether i128 arithmetic is safe.
    let mut bound = BigInt::zero();
    for m in terms {
        for i in 0..dim {
            let row: BigInt = (0..dim).map(|j| m[i * dim + j].abs()).sum::<BigInt>() * r;
            bound += &row * &row;
        }
    }
    if bound.bits() < 125 {
        let t: Vec<Vec<i128>> = terms
            .iter()
            .map(|m| m.iter().map(|x| x.to_i128().unwrap()).collect())
            .collect();
        let (v, k) = search_box_i128(&t, dim, r);
        (BigInt::from(v), k)
    } else {
        search_box_big(terms, dim, r)
    }
}

fn better<T: PartialOrd>(a: &(T, LatticeVector), b: &(T, LatticeVector)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Odometer over the remaining coordinates of a row, in lexicographic order.
fn for_each_in_row(first: i64, dim: usize, r: i64, mut f: impl FnMut(&[i64])) {
    let mut k = vec![-r; dim];
    k[0] = first;
    if dim == 1 {
        f(&k);
        return;
    }
    loop {
        f(&k);
        let mut i = dim - 1;
        loop {
            if k[i] < r {
                k[i] += 1;
                break;
            }
            k[i] = -r;
            if i == 1 {
                return;
            }
            i -= 1;
        }
    }
}

fn search_box_i128(terms: &[Vec<i128>], dim: usize, r: i64) -> (i128, LatticeVector) {
    // Seed with unit vectors so pruning bites from the start; ties are kept strictly so the
    // lexicographic winner is independent of the seed.
    let mut seed: Option<(i128, LatticeVector)> = None;
    for i in 0..dim {
        let mut e = vec![0i64; dim];
        e[i] = 1;
        let v = eval_i128(terms, dim, &e, i128::MAX).unwrap();
        let cand = (v, e);
        if seed.as_ref().map_or(true, |s| better(&cand, s)) {
            seed = Some(cand);
        }
    }
    let seed = seed.unwrap();
    let rows: Vec<Option<(i128, LatticeVector)>> = (-r..=r)
        .into_par_iter()
        .map(|first| {
            let mut best: Option<(i128, LatticeVector)> = None;
            let mut cap = seed.0;
            for_each_in_row(first, dim, r, |k| {
                if k.iter().all(|&x| x == 0) {
                    return;
                }
                if let Some(v) = eval_i128(terms, dim, k, cap) {
                    let cand = (v, k.to_vec());
                    if best.as_ref().map_or(true, |b| better(&cand, b)) {
                        cap = v;
                        best = Some(cand);
                    }
                }
            });
            best
        })
        .collect();
    let mut best = seed;
    for c in rows.into_iter().flatten() {
        if better(&c, &best) {
            best = c;
        }
    }
    best
}

/// Σ_M |M k|², abandoned (None) as soon as the partial sum exceeds cap.
#[inline]
fn eval_i128(terms: &[Vec<i128>], dim: usize, k: &[i64], cap: i128) -> Option<i128> {
    let mut s = 0i128;
    for m in terms {
        for i in 0..dim {
            let mut x = 0i128;
            for j in 0..dim {
                x += m[i * dim + j] * k[j] as i128;
            }
            s += x * x;
        }
        if s > cap {
            return None;
        }
    }
    Some(s)
}

fn search_box_big(terms: &[Vec<BigInt>], dim: usize, r: i64) -> (BigInt, LatticeVector) {
    let eval = |k: &[i64], cap: Option<&BigInt>| -> Option<BigInt> {
        let mut s = BigInt::zero();
        for m in terms {
            for i in 0..dim {
                let mut x = BigInt::zero();
                for j in 0..dim {
                    x += &m[i * dim + j] * k[j];
                }
                s += &x * &x;
            }
            if let Some(c) = cap {
                if &s > c {
                    return None;
                }
            }
        }
        Some(s)
    };
    let rows: Vec<Option<(BigInt, LatticeVector)>> = (-r..=r)
        .into_par_iter()
        .map(|first| {
            let mut best: Option<(BigInt, LatticeVector)> = None;
            for_each_in_row(first, dim, r, |k| {
                if k.iter().all(|&x| x == 0) {
                    return;
                }
                let cap = best.as_ref().map(|b| b.0.clone());
                if let Some(v) = eval(k, cap.as_ref()) {
                    let cand = (v, k.to_vec());
                    if best.as_ref().map_or(true, |b| better(&cand, b)) {
                        best = Some(cand);
                    }
                }
            });
            best
        })
        .collect();
    let mut best: Option<(BigInt, LatticeVector)> = None;
    for c in rows.into_iter().flatten() {
        if best.as_ref().map_or(true, |b| better(&c, b)) {
            best = Some(c);
        }
    }
    best.expect("box contains a nonzero point")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_minimizer_matches_box_search() {
        let f = SymplecticIntMatrix::cat();
        let g = SymplecticIntMatrix::from_2x2(3, 1, 5, 2).unwrap();
        for m in [&f, &g] {
            for n in 0..9u64 {
                for variant in [OrbitVariant::Sum, OrbitVariant::Endpoint] {
                    let a = min_orbit_extension(m, n, 4, variant).unwrap();
                    let b = min_orbit_extension_reduced(m, n, 4, variant).unwrap();
                    assert_eq!((a.value.clone(), a.argmin.clone()), (b.value, b.argmin), "n={n} {variant:?}");
                }
            }
        }
    }

    #[test]
    fn shortest_vector_ties_and_errors() {
        let b = |x: i64| BigInt::from(x);
        // identity form: four unit vectors tie; lexicographic winner is (−1, 0)
        assert_eq!(shortest_vector_2d(&[b(1), b(0), b(1)]).unwrap(), (b(1), vec![-1, 0]));
        // hexagonal form x² + xy + y² (b = 1/2 scaled by 2)
        let (v, k) = shortest_vector_2d(&[b(2), b(1), b(2)]).unwrap();
        assert_eq!(v, b(2));
        assert_eq!(k, vec![-1, 0]);
        assert!(shortest_vector_2d(&[b(1), b(1), b(1)]).is_err());
        // skewed form with a long reduction
        let (v, _) = shortest_vector_2d(&[b(1_000_001), b(1_000_000), b(1_000_000)]).unwrap();
        assert_eq!(v, b(1));
    }

    #[test]
    fn wedge_examples() {
        assert_eq!(wedge(&[1, 0], &[0, 1]).unwrap(), -1);
        assert_eq!(wedge(&[2, 3], &[5, 7]).unwrap(), 1);
        assert_eq!(wedge(&[4, -2], &[4, -2]).unwrap(), 0);
        assert!(wedge(&[1, 0], &[1, 0, 0, 0]).is_err());
    }

    #[test]
    fn fold_examples() {
        assert_eq!(fold(&[7, -12], 10), vec![-3, -2]);
        assert_eq!(fold(&[5, 5], 10), vec![5, 5]);
        assert_eq!(fold(&[0, 0], 7), vec![0, 0]);
        // odd N: (−3.5, 3.5]
        assert_eq!(fold(&[4, 3, -3, 10], 7), vec![-3, 3, -3, 3]);
        assert_eq!(fold(&[3], 1), vec![0]);
    }

    #[test]
    fn symplectic_examples() {
        assert!(check_symplectic(&[vec![2, 1], vec![1, 1]]).unwrap());
        assert!(!check_symplectic(&[vec![1, 1], vec![1, 1]]).unwrap());
        let id: Vec<Vec<i64>> = (0..4).map(|i| (0..4).map(|j| (i == j) as i64).collect()).collect();
        assert!(check_symplectic(&id).unwrap());
        assert!(check_symplectic(&[vec![1, 2, 3]]).is_err());
    }

    #[test]
    fn ergodic_examples() {
        assert!(SymplecticIntMatrix::cat().is_ergodic());
        assert!(!SymplecticIntMatrix::from_2x2(0, -1, 1, 0).unwrap().is_ergodic());
        assert!(!SymplecticIntMatrix::from_2x2(1, 1, 0, 1).unwrap().is_ergodic());
        // trace −1 and 0, 1: roots of unity of order 3, 4, 6
        assert!(!SymplecticIntMatrix::from_2x2(0, 1, -1, -1).unwrap().is_ergodic());
        assert!(!SymplecticIntMatrix::from_2x2(1, 1, -1, 0).unwrap().is_ergodic());
        // −cat has eigenvalues −λ: still ergodic
        assert!(SymplecticIntMatrix::from_2x2(-2, -1, -1, -1).unwrap().is_ergodic());
    }

    #[test]
    fn inverse_is_exact() {
        let f = SymplecticIntMatrix::cat();
        assert_eq!(f.inverse().rows(), vec![vec![1, -1], vec![-1, 2]]);
        let k = vec![3, -7];
        assert_eq!(f.inverse().apply(&f.apply(&k)), k);
    }

    #[test]
    fn orbit_mod_2() {
        let f = SymplecticIntMatrix::cat();
        let o = orbit_mod_n(&f, &[1, 0], 2).unwrap();
        assert_eq!(o, vec![vec![1, 0], vec![0, 1], vec![1, 1]]);
        assert!(orbit_mod_n(&f, &[0, 0], 2).is_err());
        assert_eq!(orbit_mod_n(&SymplecticIntMatrix::identity(1), &[2, 1], 5).unwrap().len(), 1);
    }

    #[test]
    fn orbit_mod_5_matches_brute_force() {
        let f = SymplecticIntMatrix::cat();
        // plain iteration with residues in [0,5)
        let mut v = (1i64, 0i64);
        let mut len = 0;
        loop {
            v = ((2 * v.0 + v.1).rem_euclid(5), (v.0 + v.1).rem_euclid(5));
            len += 1;
            if v == (1, 0) {
                break;
            }
        }
        assert_eq!(orbit_mod_n(&f, &[1, 0], 5).unwrap().len(), len);
    }

    #[test]
    fn pow_mod_matches_iteration() {
        let f = SymplecticIntMatrix::cat();
        let p = f.pow_mod(13, 17);
        let big = f.pow_big(13);
        for i in 0..4 {
            let b: BigInt = &big[i] % 17;
            let b: BigInt = (b + 17) % 17;
            let b = b.to_i64().unwrap();
            assert_eq!(p[i], b);
        }
    }

    #[test]
    fn min_orbit_examples() {
        let f = SymplecticIntMatrix::cat();
        let r = min_orbit_extension(&f, 1, 3, OrbitVariant::Endpoint).unwrap();
        assert_eq!(r.value, BigInt::from(3));
        assert!(r.confirmed);
        // |k|²+|Fk|² = 3 at ±(0,1) and ±(1,−1); lexicographic smallest is (−1, 1)
        assert_eq!(r.argmin, vec![-1, 1]);
        let id = SymplecticIntMatrix::identity(1);
        let r = min_orbit_extension(&id, 1, 1, OrbitVariant::Endpoint).unwrap();
        assert_eq!(r.value, BigInt::from(2));
        assert!(min_orbit_extension(&id, 1, 0, OrbitVariant::Endpoint).is_err());
    }

    #[test]
    fn min_orbit_brute_force_oracle() {
        let f = SymplecticIntMatrix::cat();
        for n in 0..6u64 {
            let r = min_orbit_extension(&f, n, 1, OrbitVariant::Sum).unwrap();
            // naive oracle on a big fixed box
            let mut best = i128::MAX;
            for a in -60i64..=60 {
                for b in -60i64..=60 {
                    if a == 0 && b == 0 {
                        continue;
                    }
                    let mut k = vec![a, b];
                    let mut s = 0i128;
                    for _ in 0..=n {
                        s += (k[0] as i128).pow(2) + (k[1] as i128).pow(2);
                        k = f.apply(&k);
                    }
                    best = best.min(s);
                }
            }
            assert_eq!(r.value, BigInt::from(best), "n = {n}");
        }
    }

    #[test]
    fn min_orbit_sum_n10_in_entropy_window() {
        let f = SymplecticIntMatrix::cat();
        let h = f.ks_entropy().unwrap().min_averaged;
        let r = min_orbit_extension(&f, 10, 4, OrbitVariant::Sum).unwrap();
        assert!(r.confirmed);
        let ratio = r.ln_value() / (2.0 * h * 10.0);
        assert!((0.8..=1.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn entropy_examples() {
        let lam = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        let e = SymplecticIntMatrix::cat().ks_entropy().unwrap();
        assert!((e.block_entropies[0] - 0.9624236501192069).abs() < 1e-12);
        assert!((e.block_entropies[0] - lam).abs() < 1e-12);
        // the single block has dimension 2
        assert!((e.min_averaged - lam / 2.0).abs() < 1e-12);
        let e2 = SymplecticIntMatrix::from_2x2(1, 1, 1, 2).unwrap().ks_entropy().unwrap();
        assert!((e2.min_averaged - e.min_averaged).abs() < 1e-14);
        assert_eq!(
            SymplecticIntMatrix::from_2x2(1, 1, 0, 1).unwrap().ks_entropy(),
            Err(Error::NotErgodic)
        );
    }

    #[test]
    fn entropy_with_blocks() {
        // cat map on the (q1, p1) plane and [[3,2],[1,1]] on (q2, p2), coordinates (q1,q2,p1,p2)
        let rows = vec![vec![2, 0, 1, 0], vec![0, 3, 0, 2], vec![1, 0, 1, 0], vec![0, 1, 0, 1]];
        let f = SymplecticIntMatrix::new(rows).unwrap();
        assert!(f.is_ergodic());
        assert_eq!(f.ks_entropy(), Err(Error::ReducibleWithoutBlocks));
        assert!(f.clone().with_blocks(vec![2, 2]).is_err());
        let f = f.with_block_indices(vec![vec![0, 2], vec![1, 3]]).unwrap();
        let h1 = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        let h2 = (2.0 + 3f64.sqrt()).ln();
        let e = f.ks_entropy().unwrap();
        assert!((e.block_entropies[0] - h1).abs() < 1e-12);
        assert!((e.block_entropies[1] - h2).abs() < 1e-12);
        assert!((e.min_averaged - h1 / 2.0).abs() < 1e-12);
        // contiguous form diag(A, A^{-T})
        let a = vec![vec![2, 1, 0, 0], vec![1, 1, 0, 0], vec![0, 0, 1, -1], vec![0, 0, -1, 2]];
        let g = SymplecticIntMatrix::new(a).unwrap().with_blocks(vec![2, 2]).unwrap();
        let e = g.ks_entropy().unwrap();
        assert!((e.block_entropies[1] - h1).abs() < 1e-12);
    }

    #[test]
    fn irreducible_4x4_single_block() {
        // shear product with characteristic polynomial x⁴ − 7x³ + 13x² − 7x + 1 (irreducible)
        let f = SymplecticIntMatrix::new(vec![
            vec![2, 1, 1, 0],
            vec![1, 3, 0, 1],
            vec![1, 1, 1, 0],
            vec![1, 2, 0, 1],
        ])
        .unwrap();
        assert_eq!(f.charpoly(), &vec![1, -7, 13, -7, 1]);
        let e = f.ks_entropy().unwrap();
        // ln(4.39025688 · 1.83785279) / 4
        assert!((e.min_averaged - 0.5219964175450792).abs() < 1e-9);
        let inv = f.inverse().ks_entropy().unwrap();
        assert!((inv.min_averaged - e.min_averaged).abs() < 1e-12);
    }

    #[test]
    fn mu_of_cat_map() {
        let f = SymplecticIntMatrix::cat();
        let l = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((f.norm_mu() - l).abs() < 1e-12);
    }
}
