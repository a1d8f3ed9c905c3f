//! One-dimensional quadrature: adaptive Gauss–Kronrod and Wynn's epsilon algorithm.

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// 15-point Kronrod estimate and |Kronrod − Gauss| on [a, b].
pub fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive bisection until the local error estimate falls below max(abs_tol, rel_tol·|I|).
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> (f64, f64) {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> (f64, f64) {
        if whole.1 <= tol || depth == 0 {
            return whole;
        }
        let m = 0.5 * (a + b);
        let l = gk15(f, a, m);
        let r = gk15(f, m, b);
        let (lv, le) = rec(f, a, m, l, 0.5 * tol, depth - 1);
        let (rv, re) = rec(f, m, b, r, 0.5 * tol, depth - 1);
        (lv + rv, le + re)
    }
    let whole = gk15(f, a, b);
    let tol = abs_tol.max(rel_tol * whole.0.abs());
    rec(f, a, b, whole, tol, 40)
}

/// Limit of a sequence of partial sums by Wynn's epsilon algorithm.
pub fn wynn_epsilon(partial: &[f64]) -> f64 {
    let n = partial.len();
    if n < 3 {
        return *partial.last().unwrap_or(&0.0);
    }
    // e[k] holds column k of the epsilon table, updated in place along anti-diagonals.
    let mut table: Vec<Vec<f64>> = vec![partial.to_vec()];
    let mut prev: Vec<f64> = vec![0.0; n + 1];
    let mut best = partial[n - 1];
    for col in 1..n {
        let cur_len = n - col;
        let last = table.last().unwrap().clone();
        let mut cur = vec![0.0; cur_len];
        for i in 0..cur_len {
            let diff = last[i + 1] - last[i];
            let base = if col == 1 { 0.0 } else { prev[i + 1] };
            if diff == 0.0 {
                // sequence converged exactly
                return if col % 2 == 1 { last[i] } else { best };
            }
            cur[i] = base + 1.0 / diff;
        }
        prev = last;
        if col % 2 == 0 {
            best = *cur.last().unwrap();
        }
        table.push(cur);
    }
    best
}
