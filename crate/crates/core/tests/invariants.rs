//! Property tests for structural invariants across modules.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use stoloc::analysis::{f_nu_c, frequencies, nu, sigma_t_covariance};
use stoloc::chain_rng;
use stoloc::denoisers::{
    BeliefDenoiser, DiscreteGaussianDenoiser, GaussianDenoiser, HypercubeDenoiser, MagnetizationDenoiser,
    QaryDenoiser,
};
use stoloc::losses::delta;
use stoloc::processes::{binary_flip_rate, qary_jump_rate};
use stoloc::targets::{random_orthogonal, DiscreteTarget, HypercubeTarget, QaryTarget};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f_is_increasing_and_convex_in_nu(c in 0.05f64..0.95) {
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let f: Vec<f64> = grid.iter().map(|&v| f_nu_c(v, c).unwrap()).collect();
        for w in f.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        for w in f.windows(3) {
            prop_assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9);
        }
    }

    #[test]
    fn nu_is_bounded(q in -std::f64::consts::PI..std::f64::consts::PI, r in 0usize..20) {
        prop_assert!(nu(q, r).abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn nu_on_frequency_grid(r in 1usize..8, log_n in 4u32..9) {
        let n = 1usize << log_n;
        prop_assume!(2 * r + 1 <= n);
        for q in frequencies(n) {
            let v = nu(q, r);
            prop_assert!(v.abs() <= 1.0 + 1e-12);
            if q == 0.0 {
                prop_assert_eq!(v, 1.0);
            }
        }
    }

    #[test]
    fn delta_is_nonnegative(r in 0.0f64..20.0, r_hat in 1e-6f64..20.0) {
        let d = delta(r, r_hat);
        prop_assert!(d >= -1e-12);
        prop_assert_eq!(delta(r, r), 0.0);
        if (r - r_hat).abs() > 1e-3 {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn sigma_t_commutes_with_conjugation(seed in 0u64..10_000, t in 0.01f64..100.0) {
        let mut rng = chain_rng(seed, 0);
        let n = 4;
        let v = random_orthogonal(n, &mut rng);
        let lam = DVector::from_fn(n, |i, _| 0.2 + i as f64 + (seed % 7) as f64 * 0.1);
        let sigma = &v * DMatrix::from_diagonal(&lam) * v.transpose();
        let u = random_orthogonal(n, &mut rng);
        let rotated = &u * &sigma * u.transpose();
        let lhs = sigma_t_covariance(&rotated, t).unwrap().cov;
        let rhs = &u * sigma_t_covariance(&sigma, t).unwrap().cov * u.transpose();
        prop_assert!((&lhs - &rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn beliefs_are_normalized(seed in 0u64..10_000, t in 0.0f64..0.999, q in 2usize..5) {
        let mut rng = chain_rng(seed, 1);
        let target = QaryTarget::random(3, q, &mut rng).unwrap();
        let d = QaryDenoiser::new(&target).unwrap();
        let y: Vec<usize> = (0..3).map(|i| (seed as usize + i) % q).collect();
        let b = d.beliefs(&y, t).unwrap();
        for row in b.chunks(q) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            prop_assert!(row.iter().all(|v| *v >= 0.0));
            for (z, bz) in row.iter().enumerate() {
                for by in row {
                    if z < q && t > 0.0 {
                        prop_assert!(qary_jump_rate(q, t, *bz, *by) >= -1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn magnetizations_lie_in_the_cube(seed in 0u64..10_000, t in 0.001f64..0.999) {
        let mut rng = chain_rng(seed, 2);
        let target = HypercubeTarget::random(4, &mut rng).unwrap();
        let d = HypercubeDenoiser::new(&target);
        let y: Vec<i8> = (0..4).map(|i| if (seed >> i) & 1 == 1 { 1 } else { -1 }).collect();
        let m = d.magnetization(&y, t).unwrap();
        for (mi, yi) in m.iter().zip(&y) {
            prop_assert!(mi.abs() <= 1.0);
            prop_assert!(binary_flip_rate(*yi, *mi, t) >= 0.0);
        }
    }

    #[test]
    fn gaussian_channel_mean_is_in_the_hull(seed in 0u64..10_000, t in 0.0f64..50.0, y0 in -20.0f64..20.0, y1 in -20.0f64..20.0) {
        // Atoms on a segment: the mean must stay on it between the end points.
        let a = vec![1.0, 2.0];
        let b = vec![-3.0, 0.5];
        let w = 0.05 + 0.9 * ((seed % 97) as f64 / 97.0);
        let target = DiscreteTarget::new(vec![a.clone(), b.clone()], vec![w, 1.0 - w]).unwrap();
        let m = DiscreteGaussianDenoiser::new(target).posterior_mean(&[y0, y1], t).unwrap();
        let lambda = (m[0] - b[0]) / (a[0] - b[0]);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&lambda));
        prop_assert!((m[1] - (b[1] + lambda * (a[1] - b[1]))).abs() <= 1e-12);
    }
}
