use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use toral_relax::classical::{classical_norm_linear, DEFAULT_RADIUS};
use toral_relax::lattice::{fold, min_orbit_extension, min_orbit_extension_reduced, wedge, OrbitVariant, SymplecticIntMatrix};
use toral_relax::noise::{ges_bounds, residue_index, residue_point, NoiseKernel};
use toral_relax::quantum::exact::{coarse_norm_linear, noisy_norm_linear};
use toral_relax::quantum::superop::{koopman_super_linear, SuperOp};
use toral_relax::quantum::weyl::{coeff_norm, weyl_matrix};
use toral_relax::quantum::{fold_phase, QuantumSetting};

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

fn max_diff(a: &nalgebra::DMatrix<Complex64>, b: &nalgebra::DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A few ergodic SL(2, ℤ) maps with different entropies.
fn maps() -> Vec<SymplecticIntMatrix> {
    vec![
        SymplecticIntMatrix::cat(),
        SymplecticIntMatrix::from_2x2(3, 1, 5, 2).unwrap(),
        SymplecticIntMatrix::from_2x2(2, 3, 1, 2).unwrap(),
        SymplecticIntMatrix::from_2x2(1, 1, 1, 2).unwrap(),
    ]
}

fn theta_strategy() -> impl Strategy<Value = Vec<f64>> {
    (0..2u8, 0..2u8).prop_map(|(a, b)| vec![a as f64 / 2.0, b as f64 / 2.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fold_and_residue_roundtrip(k in prop::collection::vec(-1000i64..1000, 2..=4), n in 1i64..40) {
        let f = fold(&k, n);
        for (&x, &y) in k.iter().zip(&f) {
            prop_assert!((x - y).rem_euclid(n) == 0);
            prop_assert!(2 * y > -n && 2 * y <= n);
        }
        prop_assert_eq!(residue_point(residue_index(&k, n), n, k.len()), f.to_vec());
    }

    #[test]
    fn commutation_relation(n in 3i64..=12, theta in theta_strategy(), k in prop::array::uniform2(-20i64..20), m in prop::array::uniform2(-20i64..20)) {
        let s = QuantumSetting::new(n, 1, theta).unwrap();
        let lhs = weyl_matrix(&k, &s).unwrap() * weyl_matrix(&m, &s).unwrap();
        let rhs = weyl_matrix(&[k[0] + m[0], k[1] + m[1]], &s).unwrap() * cis(PI * wedge(&k, &m).unwrap() as f64 / n as f64);
        prop_assert!(max_diff(&lhs, &rhs) < 1e-13);
    }

    #[test]
    fn quasi_periodicity(n in 3i64..=12, theta in theta_strategy(), k in prop::array::uniform2(-20i64..20), m in prop::array::uniform2(-3i64..3)) {
        let s = QuantumSetting::new(n, 1, theta.clone()).unwrap();
        let shifted = [k[0] + n * m[0], k[1] + n * m[1]];
        let rhs = weyl_matrix(&k, &s).unwrap() * cis(2.0 * PI * fold_phase(&k, &m, &theta, n));
        prop_assert!(max_diff(&weyl_matrix(&shifted, &s).unwrap(), &rhs) < 1e-13);
    }

    #[test]
    fn linear_koopman_is_isometric(which in 0usize..4, n in 2i64..24, seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8)) {
        let f = maps()[which].clone();
        let Ok(s) = QuantumSetting::for_map(&f, n) else { return Ok(()) };
        let u = koopman_super_linear(&f, &s).unwrap();
        let a: Vec<Complex64> = (0..u.dim()).map(|i| { let (x, y) = seed[i % seed.len()]; Complex64::new(x * (i as f64 + 1.0).sin(), y) }).collect();
        let b = u.apply(&a);
        prop_assert!((coeff_norm(&b) - coeff_norm(&a)).abs() < 1e-12 * coeff_norm(&a).max(1.0));
        let back = u.apply_adjoint(&b);
        prop_assert!(a.iter().zip(&back).all(|(x, y)| (x - y).norm() < 1e-12));
    }

    #[test]
    fn noisy_norms_are_monotone_and_dominate_classical(which in 0usize..4, n in 4i64..40, eps in 0.02f64..0.5) {
        let f = maps()[which].clone();
        let Ok(s) = QuantumSetting::for_map(&f, n) else { return Ok(()) };
        let g = NoiseKernel::gaussian(1);
        let mut prev = 1.0;
        for step in 1..8u64 {
            let q = noisy_norm_linear(&f, &g, eps, &s, step).unwrap();
            prop_assert!(q.value <= prev, "step {}: {} > {}", step, q.value, prev);
            prev = q.value;
            let c = classical_norm_linear(&f, &g, eps, step, DEFAULT_RADIUS).unwrap();
            prop_assert!(q.log_value >= c.log_value - 1e-12, "step {}: quantum {} < classical {}", step, q.log_value, c.log_value);
            let cq = coarse_norm_linear(&f, &g, eps, &s, step).unwrap();
            prop_assert!(cq.value <= 1.0 && cq.value > 0.0);
        }
    }

    #[test]
    fn gaussian_sandwich(eps in 0.01f64..2.0, n in 2i64..512, k in prop::array::uniform2(-2000i64..2000)) {
        let g = NoiseKernel::gaussian(1);
        let kn = fold(&k, n);
        let ghat = g.classical_eigenvalue(eps, &k).unwrap();
        let ghat_n = g.classical_eigenvalue(eps, &kn).unwrap();
        let gamma = g.quantum_eigenvalue(eps, n, &k).unwrap();
        let z = g.normalization(eps, n).unwrap();
        let (_, upper) = ges_bounds(eps, n, &k);
        let tail = upper - ghat_n;
        let slack = 1e-14;
        prop_assert!(ghat <= ghat_n + slack);
        prop_assert!(ghat_n <= gamma + slack);
        prop_assert!(gamma <= ghat_n / z + tail + slack);
        prop_assert!(ghat_n / z + tail <= upper + slack);
    }

    #[test]
    fn reduced_orbit_minimum_matches_box_search(which in 0usize..4, n in 0u64..7, sum in any::<bool>()) {
        let f = maps()[which].clone();
        let variant = if sum { OrbitVariant::Sum } else { OrbitVariant::Endpoint };
        let a = min_orbit_extension(&f, n, 4, variant).unwrap();
        let b = min_orbit_extension_reduced(&f, n, 4, variant).unwrap();
        prop_assert!(a.confirmed && b.confirmed);
        prop_assert_eq!(a.value, b.value);
    }
}
