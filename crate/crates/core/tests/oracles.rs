//! Independent oracles for the samplers: exact covariance recursions of the
//! Euler scheme, nested Monte Carlo for the martingale property, and
//! forward-versus-generative laws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use stoloc::analysis::{generated_spectrum, sigma_t_covariance};
use stoloc::chain_rng;
use stoloc::denoisers::{
    ConvDenoiser, DiscreteGaussianDenoiser, GaussianDenoiser, GaussianLinearDenoiser, HypercubeDenoiser,
    ScaledDenoiser,
};
use stoloc::diagnostics::{empirical_tv_between, sample_moments};
use stoloc::grid::TimeGrid;
use stoloc::losses::kl_gaussian_drift;
use stoloc::processes::{
    forward_binary_noise, forward_observation_path, simulate_binary_symmetric, simulate_isotropic, ThinningOptions,
};
use stoloc::rng::{fill_normal, run_chains};
use stoloc::targets::{random_orthogonal, DiscreteTarget, GaussianTarget, HypercubeTarget, Target};

/// Covariance of `m(Y_T; T)` under the Euler scheme with the linear denoiser
/// `A_t = Sigma (I + t Sigma)^{-1}`, propagated exactly.
fn euler_output_covariance(sigma: &DMatrix<f64>, grid: &TimeGrid) -> DMatrix<f64> {
    let n = sigma.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let a = |t: f64| sigma * (&eye + sigma * t).try_inverse().unwrap();
    let mut p = DMatrix::<f64>::zeros(n, n);
    for (_, t, dt) in grid.steps_iter() {
        let b = &eye + a(t) * dt;
        p = &b * p * b.transpose() + &eye * dt;
    }
    let at = a(grid.final_time());
    &at * p * at.transpose()
}

fn random_sigma(n: usize, seed: u64) -> DMatrix<f64> {
    GaussianTarget::random_spectrum(n, 0.5, 2.0, &mut chain_rng(seed, 0)).unwrap().cov().clone()
}

#[test]
fn euler_covariance_converges_monotonically_in_grid_size() {
    let sigma = random_sigma(8, 11);
    let t = 10.0;
    let exact = sigma_t_covariance(&sigma, t).unwrap().cov;
    let gaps: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&k| (euler_output_covariance(&sigma, &TimeGrid::alpha_uniform(k, t).unwrap()) - &exact).norm())
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    // First-order scheme: halving the spacing roughly halves the gap.
    assert!(gaps[1] / gaps[0] < 0.6 && gaps[2] / gaps[1] < 0.6, "{gaps:?}");
}

#[test]
fn simulated_covariance_matches_euler_recursion() {
    let sigma = random_sigma(4, 12);
    let grid = TimeGrid::alpha_uniform(100, 10.0).unwrap();
    let d = GaussianLinearDenoiser::isotropic(vec![0.0; 4], sigma.clone()).unwrap();
    let n_chains = 20_000;
    let samples: Vec<Vec<f64>> = run_chains(n_chains, 3, |_, rng| simulate_isotropic(&d, &grid, rng, &[]).unwrap().sample);
    let (_, cov) = sample_moments(&samples).unwrap();
    let oracle = euler_output_covariance(&sigma, &grid);
    for i in 0..4 {
        let se = (2.0 / n_chains as f64).sqrt() * oracle[(i, i)];
        assert!((cov[(i, i)] - oracle[(i, i)]).abs() < 4.0 * se, "{i}: {} vs {}", cov[(i, i)], oracle[(i, i)]);
    }
}

#[test]
fn forward_observation_has_gaussian_covariance() {
    let sigma = random_sigma(3, 13);
    let target = GaussianTarget::centered(sigma.clone()).unwrap();
    let grid = TimeGrid::uniform(4, 0.0, 2.0).unwrap();
    let n = 40_000;
    let paths: Vec<Vec<Vec<f64>>> = run_chains(n, 4, |_, rng| {
        let x = target.sample(rng);
        forward_observation_path(&x, &grid, rng)
    });
    for (k, &t) in grid.nodes().iter().enumerate().skip(1) {
        let ys: Vec<Vec<f64>> = paths.iter().map(|p| p[k].clone()).collect();
        let (_, cov) = sample_moments(&ys).unwrap();
        let expect = &sigma * (t * t) + DMatrix::<f64>::identity(3, 3) * t;
        for i in 0..3 {
            for j in 0..3 {
                let se = ((expect[(i, i)] * expect[(j, j)] + expect[(i, j)].powi(2)) / n as f64).sqrt();
                assert!((cov[(i, j)] - expect[(i, j)]).abs() < 4.0 * se, "t {t} ({i},{j})");
            }
        }
    }
}

#[test]
fn posterior_mean_is_a_martingale() {
    let atoms = vec![vec![1.0, 0.0], vec![-1.0, 1.0], vec![0.5, -2.0]];
    let weights = vec![0.2, 0.5, 0.3];
    let target = DiscreteTarget::new(atoms.clone(), weights.clone()).unwrap();
    let d = DiscreteGaussianDenoiser::new(target);
    let (t1, t2) = (0.7, 2.5);
    let y1 = vec![0.4, 0.9];
    let m1 = d.posterior_mean(&y1, t1).unwrap();
    // Posterior weights at t1.
    let logw: Vec<f64> = atoms
        .iter()
        .zip(&weights)
        .map(|(a, w)| w.ln() + a[0] * y1[0] + a[1] * y1[1] - 0.5 * t1 * (a[0] * a[0] + a[1] * a[1]))
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let post: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = post.iter().sum();
    let n = 40_000;
    let draws: Vec<Vec<f64>> = run_chains(n, 5, |_, rng| {
        let mut u = rng.random::<f64>() * total;
        let j = post.iter().position(|p| {
            u -= p;
            u < 0.0
        });
        let x = &atoms[j.unwrap_or(atoms.len() - 1)];
        let mut g = [0.0; 2];
        fill_normal(rng, &mut g);
        let dt = t2 - t1;
        let y2: Vec<f64> = (0..2).map(|i| y1[i] + dt * x[i] + dt.sqrt() * g[i]).collect();
        d.posterior_mean(&y2, t2).unwrap()
    });
    let (mean, cov) = sample_moments(&draws).unwrap();
    for i in 0..2 {
        let se = (cov[(i, i)] / n as f64).sqrt();
        assert!((mean[i] - m1[i]).abs() < 4.0 * se, "{i}: {} vs {}", mean[i], m1[i]);
    }
}

#[test]
fn binary_forward_and_generative_laws_agree() {
    let target = HypercubeTarget::random(3, &mut chain_rng(14, 0)).unwrap();
    let d = HypercubeDenoiser::new(&target);
    let grid = TimeGrid::uniform(196, 0.01, 0.99).unwrap();
    let opts = ThinningOptions::default();
    let n = 100_000;
    let generative: Vec<Vec<i8>> = run_chains(n, 6, |_, rng| {
        let r = simulate_binary_symmetric(&d, &grid, rng, &opts, &[0.5]).unwrap();
        r.snapshots[0].state.clone()
    });
    let t = grid.nodes()[grid.snapshot_indices(&[0.5])[0]];
    let forward: Vec<Vec<i8>> = run_chains(n, 7, |_, rng| forward_binary_noise(&target.sample(rng), rng).unwrap().at(t));
    let tv = empirical_tv_between(&generative, &forward).unwrap().value;
    assert!(tv <= 0.02, "tv {tv}");
}

#[test]
fn gaussian_kl_is_rotation_invariant() {
    let sigma = random_sigma(4, 15);
    let u = random_orthogonal(4, &mut chain_rng(15, 1));
    let rotated = &u * &sigma * u.transpose();
    let grid = TimeGrid::alpha_uniform(200, 20.0).unwrap();
    let kl = |s: &DMatrix<f64>, seed: u64| {
        let exact = GaussianLinearDenoiser::isotropic(vec![0.0; 4], s.clone()).unwrap();
        let hat = ScaledDenoiser::new(exact.clone(), 0.7).unwrap();
        let target = Target::Gaussian(GaussianTarget::centered(s.clone()).unwrap());
        kl_gaussian_drift(&exact, &hat, &target, &grid, 4000, seed, false).unwrap()
    };
    let a = kl(&sigma, 8);
    let b = kl(&rotated, 9);
    assert!(a.estimate >= -4.0 * a.stderr && b.estimate >= -4.0 * b.stderr);
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.estimate - b.estimate).abs() < 4.0 * se, "{} vs {}", a.estimate, b.estimate);
}

/// Per-frequency Euler variance of the windowed sampler output.
fn windowed_euler_spectrum(d: &ConvDenoiser, grid: &TimeGrid, q: f64) -> f64 {
    let mut p = 0.0;
    for (_, t, dt) in grid.steps_iter() {
        let b = 1.0 + d.kernel(t).response(q) * dt;
        p = b * b * p + dt;
    }
    let l = d.kernel(grid.final_time()).response(q);
    l * l * p
}

#[test]
fn generated_spectrum_matches_windowed_dynamics() {
    let (n, r, alpha) = (64, 3, 0.25);
    let mut c = vec![alpha; n];
    c[0] += 1.0;
    let d = ConvDenoiser::new(&c, r).unwrap();
    let report = generated_spectrum(n, r, alpha).unwrap();
    let grid = TimeGrid::alpha_uniform(4000, 1e5).unwrap();
    for (q, s) in report.q.iter().zip(&report.sigma_x).step_by(4) {
        let euler = windowed_euler_spectrum(&d, &grid, *q);
        assert!((euler - s).abs() < 0.01 * s, "q {q}: {euler} vs {s}");
    }
}

#[test]
fn windowed_sampler_reproduces_spectrum_recursion() {
    let (n, r, alpha) = (32, 2, 0.5);
    let mut c = vec![alpha; n];
    c[0] += 1.0;
    let d = ConvDenoiser::new(&c, r).unwrap();
    let grid = TimeGrid::alpha_uniform(200, 1e3).unwrap();
    let chains = 4000;
    let samples: Vec<Vec<f64>> = run_chains(chains, 10, |_, rng| simulate_isotropic(&d, &grid, rng, &[]).unwrap().sample);
    for k in [0usize, 1, 5] {
        let q = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let phase = DVector::from_fn(n, |i, _| (q * i as f64).cos());
        let norm = phase.norm_squared();
        let proj: Vec<f64> = samples.iter().map(|x| DVector::from_column_slice(x).dot(&phase) / norm.sqrt()).collect();
        let var = proj.iter().map(|v| v * v).sum::<f64>() / chains as f64;
        let oracle = windowed_euler_spectrum(&d, &grid, q);
        let se = (2.0 / chains as f64).sqrt() * oracle;
        assert!((var - oracle).abs() < 4.0 * se, "k {k}: {var} vs {oracle}");
    }
}
