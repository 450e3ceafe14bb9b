//! Gaussian-channel processes: forward paths and Euler-discretized samplers.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::denoisers::{AnisotropicDenoiser, GaussianDenoiser, LinearObsDenoiser, Omega};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{check_psd, left_pseudo_inverse, mat_vec, psd_sqrt};
use crate::rng::fill_normal;

use super::{ChainResult, Snapshot};

/// Path of `Y_t = t x + W_t` at every grid node.
pub fn forward_observation_path<R: Rng + ?Sized>(x: &[f64], grid: &TimeGrid, rng: &mut R) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut path = Vec::with_capacity(grid.nodes().len());
    let t0 = grid.start();
    let mut y: Vec<f64> = x.iter().map(|xi| t0 * xi).collect();
    if t0 > 0.0 {
        fill_normal(rng, &mut g);
        let s = t0.sqrt();
        for (yi, gi) in y.iter_mut().zip(&g) {
            *yi += s * gi;
        }
    }
    path.push(y.clone());
    for (_, _, dt) in grid.steps_iter() {
        fill_normal(rng, &mut g);
        let s = dt.sqrt();
        for i in 0..n {
            y[i] += x[i] * dt + s * g[i];
        }
        path.push(y.clone());
    }
    path
}

fn chain_failure(step: usize, e: Error) -> Error {
    match e {
        Error::ChainFailure { .. } => e,
        other => Error::ChainFailure { step, reason: other.to_string() },
    }
}

fn check_drift(step: usize, m: &[f64]) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::ChainFailure { step, reason: "non-finite drift".into() })
    }
}

fn require_origin(grid: &TimeGrid) -> Result<()> {
    if grid.start() != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sampler starts from Y = 0 at t = 0, grid starts at {}",
            grid.start()
        )));
    }
    Ok(())
}

/// Euler sampler for `dY = m(Y; t) dt + dB` started from `Y_0 = 0`.
pub fn simulate_isotropic<D, R>(denoiser: &D, grid: &TimeGrid, rng: &mut R, snapshot_times: &[f64]) -> Result<ChainResult>
where
    D: GaussianDenoiser + ?Sized,
    R: Rng + ?Sized,
{
    require_origin(grid)?;
    let y0 = vec![0.0; denoiser.dim()];
    simulate_isotropic_from(denoiser, grid, &y0, rng, snapshot_times)
}

/// Euler sampler started from `y0` at the first grid node.
pub fn simulate_isotropic_from<D, R>(
    denoiser: &D,
    grid: &TimeGrid,
    y0: &[f64],
    rng: &mut R,
    snapshot_times: &[f64],
) -> Result<ChainResult>
where
    D: GaussianDenoiser + ?Sized,
    R: Rng + ?Sized,
{
    let n = denoiser.dim();
    check_dim(n, y0.len())?;
    check_finite(y0, "initial observation")?;
    let snaps = grid.snapshot_indices(snapshot_times);
    let mut snapshots = Vec::with_capacity(snaps.len());
    let mut y = y0.to_vec();
    let mut m = vec![0.0; n];
    let mut g = vec![0.0; n];
    for (k, t, dt) in grid.steps_iter() {
        denoiser.posterior_mean_into(&y, t, &mut m).map_err(|e| chain_failure(k, e))?;
        check_drift(k, &m)?;
        if snaps.contains(&k) {
            snapshots.push(Snapshot { t, observation: y.clone(), sample: m.clone() });
        }
        fill_normal(rng, &mut g);
        let sd = dt.sqrt();
        for i in 0..n {
            y[i] += m[i] * dt + sd * g[i];
        }
    }
    let last = grid.steps();
    let t_final = grid.final_time();
    denoiser.posterior_mean_into(&y, t_final, &mut m).map_err(|e| chain_failure(last, e))?;
    check_drift(last, &m)?;
    if snaps.contains(&last) {
        snapshots.push(Snapshot { t: t_final, observation: y.clone(), sample: m.clone() });
    }
    Ok(ChainResult { observation: y, sample: m, decode: None, snapshots, steps: last })
}

/// Noise covariance schedule `Q(t)` of the anisotropic channel.
#[derive(Clone)]
pub enum QSchedule {
    /// `Q = c I`.
    ScaledIdentity(f64),
    Constant(DMatrix<f64>),
    TimeVarying(Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>),
}

impl fmt::Debug for QSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QSchedule::ScaledIdentity(c) => f.debug_tuple("ScaledIdentity").field(c).finish(),
            QSchedule::Constant(q) => f.debug_tuple("Constant").field(q).finish(),
            QSchedule::TimeVarying(_) => f.write_str("TimeVarying(..)"),
        }
    }
}

enum Prepared {
    Scalar { c: f64, sqrt_c: f64 },
    Constant { q: DMatrix<f64>, sqrt_q: DMatrix<f64> },
    Varying { q: Vec<DMatrix<f64>>, sqrt_q: Vec<DMatrix<f64>> },
}

impl QSchedule {
    fn prepare(&self, n: usize, grid: &TimeGrid) -> Result<Prepared> {
        let check_shape = |q: &DMatrix<f64>| -> Result<()> {
            check_dim(n, q.nrows())?;
            check_dim(n, q.ncols())
        };
        match self {
            QSchedule::ScaledIdentity(c) => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::InvalidArgument(format!("Q = {c} I is not PSD")));
                }
                Ok(Prepared::Scalar { c: *c, sqrt_c: c.sqrt() })
            }
            QSchedule::Constant(q) => {
                check_shape(q)?;
                check_psd(q, "Q")?;
                Ok(Prepared::Constant { q: q.clone(), sqrt_q: psd_sqrt(q)? })
            }
            QSchedule::TimeVarying(f) => {
                let mut qs = Vec::with_capacity(grid.steps());
                let mut roots = Vec::with_capacity(grid.steps());
                for (_, t, _) in grid.steps_iter() {
                    let q = f(t);
                    check_shape(&q)?;
                    check_psd(&q, &format!("Q({t})"))?;
                    roots.push(psd_sqrt(&q)?);
                    qs.push(q);
                }
                Ok(Prepared::Varying { q: qs, sqrt_q: roots })
            }
        }
    }
}

/// Euler sampler for `dY = Q m(Y; Omega) dt + Q^{1/2} dB`, `dOmega = Q dt`.
///
/// Every `Q(t_k)` is validated before the first step. With
/// `QSchedule::ScaledIdentity(1.0)` the trajectory is bit-identical to
/// [`simulate_isotropic`] under the same stream.
pub fn simulate_anisotropic<D, R>(
    denoiser: &D,
    q: &QSchedule,
    grid: &TimeGrid,
    rng: &mut R,
    snapshot_times: &[f64],
) -> Result<ChainResult>
where
    D: AnisotropicDenoiser + ?Sized,
    R: Rng + ?Sized,
{
    require_origin(grid)?;
    let n = denoiser.dim();
    let prepared = q.prepare(n, grid)?;
    let snaps = grid.snapshot_indices(snapshot_times);
    let mut snapshots = Vec::with_capacity(snaps.len());
    let mut y = vec![0.0; n];
    let mut m = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut drift = vec![0.0; n];
    let mut noise = vec![0.0; n];
    let mut omega = DMatrix::<f64>::zeros(n, n);

    let eval = |y: &[f64], t: f64, omega: &DMatrix<f64>, m: &mut [f64], k: usize| -> Result<()> {
        let w = match &prepared {
            Prepared::Scalar { c, .. } => Omega::Scalar(c * t),
            _ => Omega::Matrix(omega),
        };
        denoiser.posterior_mean_omega_into(y, w, m).map_err(|e| chain_failure(k, e))?;
        check_drift(k, m)
    };

    for (k, t, dt) in grid.steps_iter() {
        if let Prepared::Constant { q, .. } = &prepared {
            omega = q * t;
        }
        eval(&y, t, &omega, &mut m, k)?;
        if snaps.contains(&k) {
            snapshots.push(Snapshot { t, observation: y.clone(), sample: m.clone() });
        }
        fill_normal(rng, &mut g);
        match &prepared {
            Prepared::Scalar { c, sqrt_c } => {
                for i in 0..n {
                    drift[i] = c * m[i];
                    noise[i] = sqrt_c * g[i];
                }
            }
            Prepared::Constant { q, sqrt_q } => {
                drift.copy_from_slice(&mat_vec(q, &m));
                noise.copy_from_slice(&mat_vec(sqrt_q, &g));
            }
            Prepared::Varying { q, sqrt_q } => {
                drift.copy_from_slice(&mat_vec(&q[k], &m));
                noise.copy_from_slice(&mat_vec(&sqrt_q[k], &g));
                omega += &q[k] * dt;
            }
        }
        let sd = dt.sqrt();
        for i in 0..n {
            y[i] += drift[i] * dt + sd * noise[i];
        }
    }
    let last = grid.steps();
    let t_final = grid.final_time();
    if let Prepared::Constant { q, .. } = &prepared {
        omega = q * t_final;
    }
    eval(&y, t_final, &omega, &mut m, last)?;
    if snaps.contains(&last) {
        snapshots.push(Snapshot { t: t_final, observation: y.clone(), sample: m.clone() });
    }
    Ok(ChainResult { observation: y, sample: m, decode: None, snapshots, steps: last })
}

/// Euler sampler for `dY = m_A(Y; t) dt + dB` on the observation space.
///
/// `sample` is the denoiser's signal estimate at the final time. When an
/// operator is supplied, `decode` holds `A^+ Y_T / T`; a rank-deficient
/// operator is rejected before stepping.
pub fn simulate_linear_observation<D, R>(
    denoiser: &D,
    operator: Option<&DMatrix<f64>>,
    grid: &TimeGrid,
    rng: &mut R,
    snapshot_times: &[f64],
) -> Result<ChainResult>
where
    D: LinearObsDenoiser + ?Sized,
    R: Rng + ?Sized,
{
    require_origin(grid)?;
    let m_dim = denoiser.obs_dim();
    let n = denoiser.signal_dim();
    let pinv = match operator {
        Some(a) => {
            check_dim(m_dim, a.nrows())?;
            check_dim(n, a.ncols())?;
            Some(left_pseudo_inverse(a)?)
        }
        None => None,
    };
    let snaps = grid.snapshot_indices(snapshot_times);
    let mut snapshots = Vec::with_capacity(snaps.len());
    let mut y = vec![0.0; m_dim];
    let mut m = vec![0.0; m_dim];
    let mut g = vec![0.0; m_dim];
    let mut x = vec![0.0; n];
    for (k, t, dt) in grid.steps_iter() {
        denoiser.observation_mean_into(&y, t, &mut m).map_err(|e| chain_failure(k, e))?;
        check_drift(k, &m)?;
        if snaps.contains(&k) {
            denoiser.signal_mean_into(&y, t, &mut x).map_err(|e| chain_failure(k, e))?;
            snapshots.push(Snapshot { t, observation: y.clone(), sample: x.clone() });
        }
        fill_normal(rng, &mut g);
        let sd = dt.sqrt();
        for i in 0..m_dim {
            y[i] += m[i] * dt + sd * g[i];
        }
    }
    let last = grid.steps();
    let t_final = grid.final_time();
    denoiser.signal_mean_into(&y, t_final, &mut x).map_err(|e| chain_failure(last, e))?;
    check_drift(last, &x)?;
    if snaps.contains(&last) {
        snapshots.push(Snapshot { t: t_final, observation: y.clone(), sample: x.clone() });
    }
    let decode = pinv.map(|p| mat_vec(&p, &y).into_iter().map(|v| v / t_final).collect());
    Ok(ChainResult { observation: y, sample: x, decode, snapshots, steps: last })
}

/// Operator stacking the identity on `n` coordinates with `b` times the
/// average of each of `channels` contiguous coordinate blocks.
pub fn channel_average_operator(n: usize, channels: usize, b: f64) -> Result<DMatrix<f64>> {
    if channels == 0 || n % channels != 0 {
        return Err(Error::InvalidArgument(format!(
            "{n} coordinates cannot be split into {channels} equal channels"
        )));
    }
    let block = n / channels;
    let mut l = DMatrix::<f64>::zeros(n + channels, n);
    for i in 0..n {
        l[(i, i)] = 1.0;
    }
    for c in 0..channels {
        for j in c * block..(c + 1) * block {
            l[(n + c, j)] = b / block as f64;
        }
    }
    Ok(l)
}

/// `sqrt(t (1 + t))`, the scale mapping the reverse OU state to `Y_t`.
pub fn reverse_ou_scale(t: f64) -> f64 {
    (t * (1.0 + t)).sqrt()
}

/// Squared diffusion coefficient `1 / (t (1 + t))` of the reverse OU process.
pub fn reverse_ou_diffusion(t: f64) -> f64 {
    1.0 / (t * (1.0 + t))
}

/// Drift `-(1 + 2t) / (2 t (1 + t)) ybar + m(h ybar; t) / h` with `h = sqrt(t (1 + t))`.
///
/// Writes the drift into `out` and the denoised estimate `m(h ybar; t)` into `m`.
pub fn reverse_ou_drift_into<D>(denoiser: &D, ybar: &[f64], t: f64, m: &mut [f64], out: &mut [f64]) -> Result<()>
where
    D: GaussianDenoiser + ?Sized,
{
    if !(t > 0.0) {
        return Err(Error::ReverseOuAtZero);
    }
    let h = reverse_ou_scale(t);
    let y: Vec<f64> = ybar.iter().map(|v| h * v).collect();
    denoiser.posterior_mean_into(&y, t, m)?;
    let a = (1.0 + 2.0 * t) / (2.0 * t * (1.0 + t));
    for i in 0..ybar.len() {
        out[i] = -a * ybar[i] + m[i] / h;
    }
    Ok(())
}

/// Euler sampler for the time-changed Ornstein-Uhlenbeck form of the
/// isotropic process, started from `N(0, I)` at the first node.
///
/// `observation` is the final reverse state and `sample` is
/// `m(h Ybar_T; T)`.
pub fn simulate_reverse_ou<D, R>(denoiser: &D, grid: &TimeGrid, rng: &mut R, snapshot_times: &[f64]) -> Result<ChainResult>
where
    D: GaussianDenoiser + ?Sized,
    R: Rng + ?Sized,
{
    if grid.start() <= 0.0 {
        return Err(Error::ReverseOuAtZero);
    }
    let n = denoiser.dim();
    let snaps = grid.snapshot_indices(snapshot_times);
    let mut snapshots = Vec::with_capacity(snaps.len());
    let mut ybar = vec![0.0; n];
    fill_normal(rng, &mut ybar);
    let mut m = vec![0.0; n];
    let mut drift = vec![0.0; n];
    let mut g = vec![0.0; n];
    for (k, t, dt) in grid.steps_iter() {
        reverse_ou_drift_into(denoiser, &ybar, t, &mut m, &mut drift).map_err(|e| chain_failure(k, e))?;
        check_drift(k, &drift)?;
        if snaps.contains(&k) {
            snapshots.push(Snapshot { t, observation: ybar.clone(), sample: m.clone() });
        }
        fill_normal(rng, &mut g);
        let sd = (reverse_ou_diffusion(t) * dt).sqrt();
        for i in 0..n {
            ybar[i] += drift[i] * dt + sd * g[i];
        }
    }
    let last = grid.steps();
    let t_final = grid.final_time();
    let h = reverse_ou_scale(t_final);
    let y: Vec<f64> = ybar.iter().map(|v| h * v).collect();
    denoiser.posterior_mean_into(&y, t_final, &mut m).map_err(|e| chain_failure(last, e))?;
    check_drift(last, &m)?;
    if snaps.contains(&last) {
        snapshots.push(Snapshot { t: t_final, observation: ybar.clone(), sample: m.clone() });
    }
    Ok(ChainResult { observation: ybar, sample: m, decode: None, snapshots, steps: last })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoisers::{DiscreteGaussianDenoiser, GaussianLinearDenoiser};
    use crate::rng::chain_rng;
    use crate::targets::DiscreteTarget;

    fn two_atom() -> DiscreteGaussianDenoiser {
        DiscreteGaussianDenoiser::new(
            DiscreteTarget::new(vec![vec![1.0, -1.0], vec![-0.5, 2.0]], vec![0.3, 0.7]).unwrap(),
        )
    }

    #[test]
    fn forward_path_mean_and_variance() {
        let grid = TimeGrid::uniform(10, 0.0, 2.0).unwrap();
        let x = [1.5];
        let runs = 10_000;
        let mut rng = chain_rng(1, 0);
        let finals: Vec<f64> = (0..runs).map(|_| forward_observation_path(&x, &grid, &mut rng)[10][0]).collect();
        let mean = finals.iter().sum::<f64>() / runs as f64;
        let var = finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        assert!((mean - 3.0).abs() < 4.0 * (2.0f64 / runs as f64).sqrt());
        assert!((var - 2.0).abs() < 4.0 * 2.0 * (2.0 / runs as f64).sqrt());
    }

    #[test]
    fn point_mass_is_reproduced_exactly() {
        let d = DiscreteGaussianDenoiser::new(DiscreteTarget::new(vec![vec![0.25, -2.0]], vec![1.0]).unwrap());
        let grid = TimeGrid::alpha_uniform(50, 100.0).unwrap();
        let r = simulate_isotropic(&d, &grid, &mut chain_rng(3, 0), &[0.0, 1.0, 1e9]).unwrap();
        assert_eq!(r.sample, vec![0.25, -2.0]);
        assert_eq!(r.snapshots.len(), 3);
        assert!(r.snapshots.windows(2).all(|w| w[0].t < w[1].t));
        assert!(r.snapshots.iter().all(|s| s.sample == vec![0.25, -2.0]));
    }

    #[test]
    fn isotropic_requires_origin() {
        let grid = TimeGrid::uniform(4, 0.5, 1.0).unwrap();
        assert!(simulate_isotropic(&two_atom(), &grid, &mut chain_rng(0, 0), &[]).is_err());
    }

    #[test]
    fn identity_q_matches_isotropic_bitwise() {
        let d = two_atom();
        let grid = TimeGrid::alpha_uniform(80, 50.0).unwrap();
        for seed in 0..5 {
            let a = simulate_isotropic(&d, &grid, &mut chain_rng(seed, 0), &[1.0]).unwrap();
            let b = simulate_anisotropic(&d, &QSchedule::ScaledIdentity(1.0), &grid, &mut chain_rng(seed, 0), &[1.0]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn non_psd_q_rejected_before_stepping() {
        let d = two_atom();
        let grid = TimeGrid::uniform(4, 0.0, 1.0).unwrap();
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = simulate_anisotropic(&d, &QSchedule::Constant(bad), &grid, &mut chain_rng(0, 0), &[]).unwrap_err();
        assert!(!matches!(err, Error::ChainFailure { .. }));
        let varying = QSchedule::TimeVarying(Arc::new(|t: f64| DMatrix::from_diagonal_element(2, 2, 0.5 - t)));
        assert!(simulate_anisotropic(&d, &varying, &grid, &mut chain_rng(0, 0), &[]).is_err());
    }

    #[test]
    fn blocked_coordinate_learns_only_through_the_other() {
        // Atoms differ in both coordinates; only the first is observed.
        let target = DiscreteTarget::new(vec![vec![1.0, 5.0], vec![-1.0, -5.0]], vec![0.5, 0.5]).unwrap();
        let d = DiscreteGaussianDenoiser::new(target);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let grid = TimeGrid::alpha_uniform(100, 200.0).unwrap();
        for seed in 0..20 {
            let r = simulate_anisotropic(&d, &QSchedule::Constant(q.clone()), &grid, &mut chain_rng(seed, 0), &[]).unwrap();
            assert_eq!(r.observation[1], 0.0);
            // The unobserved coordinate follows the posterior of the observed one.
            assert!((r.sample[1] - 5.0 * r.sample[0]).abs() < 1e-9);
            assert!((r.sample[0].abs() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_observation_with_identity_matches_isotropic() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let d = GaussianLinearDenoiser::isotropic(vec![0.0, 0.0], sigma).unwrap();
        let grid = TimeGrid::alpha_uniform(60, 30.0).unwrap();
        let eye = DMatrix::<f64>::identity(2, 2);
        let a = simulate_isotropic(&d, &grid, &mut chain_rng(4, 1), &[]).unwrap();
        let b = simulate_linear_observation(&d, Some(&eye), &grid, &mut chain_rng(4, 1), &[]).unwrap();
        assert_eq!(a.observation, b.observation);
        for (u, v) in a.sample.iter().zip(&b.sample) {
            assert!((u - v).abs() < 1e-12);
        }
        let decode = b.decode.unwrap();
        for (u, v) in decode.iter().zip(&b.observation) {
            assert!((u - v / 30.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_decode_rejected() {
        let sigma = DMatrix::<f64>::identity(2, 2);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let d = GaussianLinearDenoiser::new(vec![0.0, 0.0], sigma, a.clone()).unwrap();
        let grid = TimeGrid::uniform(4, 0.0, 1.0).unwrap();
        assert!(simulate_linear_observation(&d, Some(&a), &grid, &mut chain_rng(0, 0), &[]).is_err());
        assert!(simulate_linear_observation(&d, None, &grid, &mut chain_rng(0, 0), &[]).is_ok());
    }

    #[test]
    fn channel_operator_shape() {
        let l = channel_average_operator(12, 3, 2.0).unwrap();
        assert_eq!((l.nrows(), l.ncols()), (15, 12));
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let lx = mat_vec(&l, &x);
        assert_eq!(&lx[..12], &x[..]);
        assert!((lx[12] - 2.0 * 1.5).abs() < 1e-12);
        assert!((lx[14] - 2.0 * 9.5).abs() < 1e-12);
        assert!(channel_average_operator(10, 3, 2.0).is_err());
    }

    #[test]
    fn reverse_ou_rejects_zero() {
        let grid = TimeGrid::uniform(4, 0.0, 1.0).unwrap();
        assert!(matches!(
            simulate_reverse_ou(&two_atom(), &grid, &mut chain_rng(0, 0), &[]),
            Err(Error::ReverseOuAtZero)
        ));
    }

    #[test]
    fn reverse_ou_coupled_to_isotropic() {
        let d = two_atom();
        let mut errs = Vec::new();
        for steps in [100usize, 400, 1600] {
            let grid = TimeGrid::alpha_uniform_positive(steps, 20.0).unwrap();
            let mut total = 0.0;
            for seed in 0..20 {
                let mut rng = chain_rng(11, seed);
                let rev = simulate_reverse_ou(&d, &grid, &mut rng.clone(), &[]).unwrap();
                let mut ybar0 = vec![0.0; 2];
                fill_normal(&mut rng, &mut ybar0);
                let h0 = reverse_ou_scale(grid.start());
                let y0: Vec<f64> = ybar0.iter().map(|v| h0 * v).collect();
                let iso = simulate_isotropic_from(&d, &grid, &y0, &mut rng, &[]).unwrap();
                let h = reverse_ou_scale(grid.final_time());
                total += rev
                    .observation
                    .iter()
                    .zip(&iso.observation)
                    .map(|(a, b)| (h * a - b).abs() / h)
                    .fold(0.0, f64::max);
            }
            errs.push(total / 20.0);
        }
        eprintln!("{errs:?}");
        assert!(errs[2] < errs[0], "{errs:?}");
        assert!(errs[2] < 0.01, "{errs:?}");
    }

    #[test]
    fn scalar_gaussian_variance_law() {
        let sigma = DMatrix::from_element(1, 1, 1.0);
        let d = GaussianLinearDenoiser::isotropic(vec![0.0], sigma).unwrap();
        let t = 3.0;
        let grid = TimeGrid::alpha_uniform(400, t).unwrap();
        let runs = 20_000;
        let xs: Vec<f64> = (0..runs)
            .map(|i| simulate_isotropic(&d, &grid, &mut chain_rng(5, i), &[]).unwrap().sample[0])
            .collect();
        let var = xs.iter().map(|v| v * v).sum::<f64>() / runs as f64;
        let target = t / (1.0 + t);
        assert!((var - target).abs() < 0.03, "var {var} target {target}");
    }
}
