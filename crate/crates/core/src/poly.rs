//! Dense integer polynomials, coefficients stored low degree first.

use num_complex::Complex64;

pub type IntPoly = Vec<i128>;

pub fn trim(mut p: IntPoly) -> IntPoly {
    while p.len() > 1 && *p.last().unwrap() == 0 {
        p.pop();
    }
    p
}

pub fn degree(p: &IntPoly) -> usize {
    p.len().saturating_sub(1)
}

pub fn mul(a: &IntPoly, b: &IntPoly) -> IntPoly {
    let mut out = vec![0i128; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

/// Division by a monic polynomial. Returns (quotient, remainder).
pub fn divrem_monic(a: &IntPoly, b: &IntPoly) -> (IntPoly, IntPoly) {
    assert_eq!(*b.last().unwrap(), 1, "divisor must be monic");
    let db = degree(b);
    let mut r = a.clone();
    if degree(a) < db {
        return (vec![0], trim(r));
    }
    let mut q = vec![0i128; degree(a) - db + 1];
    for i in (0..q.len()).rev() {
        let c = r[i + db];
        q[i] = c;
        if c != 0 {
            for (j, &bj) in b.iter().enumerate() {
                r[i + j] -= c * bj;
            }
        }
    }
    (trim(q), trim(r))
}

pub fn divides_monic(b: &IntPoly, a: &IntPoly) -> bool {
    let (_, r) = divrem_monic(a, b);
    r.iter().all(|&c| c == 0)
}

/// Characteristic polynomial det(xI - A) via Faddeev–LeVerrier. Every division is exact.
pub fn charpoly(a: &[i64], n: usize) -> IntPoly {
    let a: Vec<i128> = a.iter().map(|&x| x as i128).collect();
    let mut c = vec![0i128; n + 1];
    c[n] = 1;
    let mut m = vec![0i128; n * n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = vec![0i128; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0i128;
                for l in 0..n {
                    s += a[i * n + l] * m[l * n + j];
                }
                next[i * n + j] = s;
            }
            next[i * n + i] += c[n - k + 1];
        }
        m = next;
        let mut tr = 0i128;
        for i in 0..n {
            for l in 0..n {
                tr += a[i * n + l] * m[l * n + i];
            }
        }
        debug_assert_eq!(tr % k as i128, 0);
        c[n - k] = -tr / k as i128;
    }
    c
}

pub fn euler_phi(mut m: u64) -> u64 {
    let mut result = m;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            while m % p == 0 {
                m /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result
}

/// Cyclotomic polynomials Φ_m for every m with φ(m) ≤ max_degree, as (m, Φ_m).
pub fn cyclotomics_up_to_degree(max_degree: usize) -> Vec<(u64, IntPoly)> {
    // φ(m) ≥ sqrt(m/2), so m ≤ 2·max_degree² covers everything.
    let m_max = (2 * max_degree * max_degree).max(2) as u64;
    let mut all: Vec<IntPoly> = vec![vec![]; m_max as usize + 1];
    let mut out = Vec::new();
    for m in 1..=m_max {
        let mut p = vec![0i128; m as usize + 1];
        p[0] = -1;
        p[m as usize] = 1;
        for d in 1..m {
            if m % d == 0 {
                p = divrem_monic(&p, &all[d as usize]).0;
            }
        }
        if euler_phi(m) as usize <= max_degree {
            out.push((m, p.clone()));
        }
        all[m as usize] = p;
    }
    out
}

pub fn eval_complex(p: &IntPoly, z: Complex64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = Complex64::new(0.0, 0.0);
    for &c in p.iter().rev() {
        dv = dv * z + v;
        v = v * z + c as f64;
    }
    (v, dv)
}

/// Roots of a monic integer polynomial: companion-matrix eigenvalues polished by Newton steps.
pub fn roots(p: &IntPoly) -> Vec<Complex64> {
    let n = degree(p);
    if n == 0 {
        return vec![];
    }
    let mut comp = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -(p[i] as f64);
    }
    let mut zs: Vec<Complex64> = comp
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    for z in zs.iter_mut() {
        for _ in 0..50 {
            let (v, dv) = eval_complex(p, *z);
            if dv.norm() == 0.0 {
                break;
            }
            let step = v / dv;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *z -= step;
            if step.norm() <= 1e-16 * z.norm().max(1.0) {
                break;
            }
        }
    }
    zs.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
    zs
}

/// Whether a monic integer polynomial factors over ℚ. Candidate factors are assembled from
/// subsets of the numerical roots, rounded, and confirmed by exact division.
pub fn is_reducible(p: &IntPoly) -> bool {
    let n = degree(p);
    if n <= 1 {
        return false;
    }
    let rs = roots(p);
    for mask in 1u64..(1u64 << n) {
        let size = mask.count_ones() as usize;
        if size > n / 2 {
            continue;
        }
        let mut f = vec![Complex64::new(1.0, 0.0)];
        for (i, r) in rs.iter().enumerate() {
            if mask >> i & 1 == 1 {
                let mut g = vec![Complex64::new(0.0, 0.0); f.len() + 1];
                for (j, c) in f.iter().enumerate() {
                    g[j + 1] += c;
                    g[j] -= c * r;
                }
                f = g;
            }
        }
        if f.iter().any(|c| (c.re - c.re.round()).abs() > 1e-6 || c.im.abs() > 1e-6) {
            continue;
        }
        let cand: IntPoly = f.iter().map(|c| c.re.round() as i128).collect();
        if divides_monic(&cand, p) {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charpoly_of_cat_map() {
        assert_eq!(charpoly(&[2, 1, 1, 1], 2), vec![1, -3, 1]);
    }

    #[test]
    fn charpoly_of_identity4() {
        let mut id = vec![0; 16];
        for i in 0..4 {
            id[i * 5] = 1;
        }
        // (x-1)^4
        assert_eq!(charpoly(&id, 4), vec![1, -4, 6, -4, 1]);
    }

    #[test]
    fn small_cyclotomics() {
        let cs = cyclotomics_up_to_degree(2);
        let ms: Vec<u64> = cs.iter().map(|c| c.0).collect();
        assert_eq!(ms, vec![1, 2, 3, 4, 6]);
        assert_eq!(cs[2].1, vec![1, 1, 1]);
        assert_eq!(cs[3].1, vec![1, 0, 1]);
        assert_eq!(cs[4].1, vec![1, -1, 1]);
    }

    #[test]
    fn cyclotomic_degrees_match_phi() {
        for (m, p) in cyclotomics_up_to_degree(8) {
            assert_eq!(degree(&p) as u64, euler_phi(m));
        }
    }

    #[test]
    fn reducibility() {
        assert!(!is_reducible(&vec![1, -3, 1]));
        // (x²-3x+1)(x²-4x+1)
        let p = mul(&vec![1, -3, 1], &vec![1, -4, 1]);
        assert!(is_reducible(&p));
        // x⁴ - x³ - x² - x + 1 is irreducible (a Salem polynomial)
        assert!(!is_reducible(&vec![1, -1, -1, -1, 1]));
    }

    #[test]
    fn roots_of_golden_poly() {
        let rs = roots(&vec![1, -3, 1]);
        let l = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((rs[0].re - l).abs() < 1e-14);
        assert!((rs[1].re - 1.0 / l).abs() < 1e-14);
    }
}
