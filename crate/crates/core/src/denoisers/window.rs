//! Window-`r` convolutional denoisers for circulant Gaussian targets.
//!
//! A kernel `l(u)`, `|u| <= r`, acts on `R^n` as the circulant convolution
//! `(A y)_i = sum_u l(u) y_{i-u}`. The optimal kernel for covariance
//! `Sigma_ij = c(i-j)` solves `l(u) + t sum_v c(u-v) l(v) = c(u)`, `|u| <= r`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::GaussianDenoiser;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg;

/// Ridge added to degenerate least-squares systems.
pub const RIDGE_EPS: f64 = 1e-8;

/// Symmetric kernel `l(-r..=r)` on `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    n: usize,
    half: Vec<f64>,
}

impl ConvKernel {
    /// Kernel from `l(0), l(1), ..., l(r)`; `l(-u) = l(u)` by construction.
    pub fn from_half(n: usize, half: Vec<f64>) -> Result<Self> {
        if half.is_empty() {
            return Err(Error::InvalidArgument("kernel needs at least l(0)".into()));
        }
        let r = half.len() - 1;
        if 2 * r + 1 > n {
            return Err(Error::InvalidArgument(format!("window 2r+1 = {} exceeds n = {n}", 2 * r + 1)));
        }
        check_finite(&half, "kernel")?;
        Ok(Self { n, half })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.half.len() - 1
    }

    /// `l(u)`, zero outside the window.
    pub fn get(&self, u: i64) -> f64 {
        self.half.get(u.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    pub fn half(&self) -> &[f64] {
        &self.half
    }

    /// `l(-r), ..., l(r)`.
    pub fn full(&self) -> Vec<f64> {
        let r = self.r() as i64;
        (-r..=r).map(|u| self.get(u)).collect()
    }

    pub fn apply_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        check_dim(n, y.len())?;
        check_dim(n, out.len())?;
        let r = self.r();
        for i in 0..n {
            let mut acc = self.half[0] * y[i];
            for u in 1..=r {
                acc += self.half[u] * (y[(i + n - u) % n] + y[(i + u) % n]);
            }
            out[i] = acc;
        }
        Ok(())
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.apply_into(y, &mut out)?;
        Ok(out)
    }

    /// Fourier response `sum_u l(u) cos(q u)`.
    pub fn response(&self, q: f64) -> f64 {
        self.half[0]
            + 2.0
                * self.half[1..]
                    .iter()
                    .enumerate()
                    .map(|(k, l)| l * (q * (k + 1) as f64).cos())
                    .sum::<f64>()
    }

    /// Rows `u,l(u)` for `u = -r..=r`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["u", "l"])?;
        let r = self.r() as i64;
        for u in -r..=r {
            wr.write_record([u.to_string(), format!("{:.16e}", self.get(u))])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn check_window(c: &[f64], r: usize) -> Result<()> {
    if c.is_empty() {
        return Err(Error::InvalidArgument("empty correlation sequence".into()));
    }
    if 2 * r + 1 > c.len() {
        return Err(Error::InvalidArgument(format!(
            "window 2r+1 = {} exceeds n = {}",
            2 * r + 1,
            c.len()
        )));
    }
    check_finite(c, "correlation sequence")
}

fn corr(c: &[f64], d: i64) -> f64 {
    let n = c.len() as i64;
    c[d.rem_euclid(n) as usize]
}

/// Window Toeplitz matrix `T_uv = c(u - v)`, `u, v = -r..=r`.
fn window_toeplitz(c: &[f64], r: usize) -> DMatrix<f64> {
    let w = 2 * r + 1;
    DMatrix::from_fn(w, w, |i, j| corr(c, i as i64 - j as i64))
}

/// Solves the window equation by a dense symmetric solve of size `2r + 1`.
pub fn windowed_denoiser_solve(c: &[f64], r: usize, t: f64) -> Result<ConvKernel> {
    check_window(c, r)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t = {t} must be >= 0")));
    }
    let w = 2 * r + 1;
    let m = DMatrix::identity(w, w) + window_toeplitz(c, r) * t;
    let rhs = DVector::from_fn(w, |i, _| corr(c, i as i64 - r as i64));
    let sol = linalg::spd_solve_vec(&m, &rhs)
        .map_err(|_| Error::Linalg("window system is singular; correlation is not PSD".into()))?;
    let half = (0..=r).map(|u| 0.5 * (sol[r + u] + sol[r - u])).collect();
    ConvKernel::from_half(c.len(), half)
}

/// Max-norm residual of the window equation for a kernel.
pub fn opt_convolution_residual(c: &[f64], kernel: &ConvKernel, t: f64) -> f64 {
    let r = kernel.r() as i64;
    (-r..=r)
        .map(|u| {
            let s: f64 = (-r..=r).map(|v| corr(c, u - v) * kernel.get(v)).sum();
            (kernel.get(u) + t * s - corr(c, u)).abs()
        })
        .fold(0.0, f64::max)
}

/// Even spectral decomposition of the window Toeplitz matrix.
///
/// `T` commutes with the reflection `u -> -u`, so the even kernels form an
/// invariant subspace of dimension `r + 1`. With `T v_k = lambda_k v_k` on
/// that subspace and `c_k = <c_w, v_k>` the window coefficients of `c`, the
/// optimal kernel is `l_t = sum_k c_k / (1 + t lambda_k) v_k`.
#[derive(Clone, Debug)]
pub struct WindowSpectrum {
    n: usize,
    r: usize,
    eigenvalues: Vec<f64>,
    coefficients: Vec<f64>,
    /// Column `k` holds `v_k(0), ..., v_k(r)`.
    vectors: DMatrix<f64>,
}

impl WindowSpectrum {
    pub fn new(c: &[f64], r: usize) -> Result<Self> {
        check_window(c, r)?;
        let k = r + 1;
        // Orthonormal even basis: e_0 = delta_0, e_j = (delta_j + delta_{-j}) / sqrt(2).
        let scale = |j: usize| if j == 0 { 1.0 } else { std::f64::consts::SQRT_2 };
        let s = DMatrix::from_fn(k, k, |i, j| {
            let (i, j) = (i as i64, j as i64);
            let raw = if i == 0 && j == 0 {
                corr(c, 0)
            } else if i == 0 || j == 0 {
                2.0 * corr(c, i.max(j))
            } else {
                2.0 * (corr(c, i - j) + corr(c, i + j))
            };
            raw / (scale(i as usize) * scale(j as usize))
        });
        let eig = linalg::sym_eigen(&s)?;
        let cw = DVector::from_fn(k, |j, _| corr(c, j as i64) * scale(j));
        let coefficients = eig.eigenvectors.tr_mul(&cw).as_slice().to_vec();
        let vectors = DMatrix::from_fn(k, k, |u, col| eig.eigenvectors[(u, col)] / scale(u));
        Ok(Self {
            n: c.len(),
            r,
            eigenvalues: eig.eigenvalues.as_slice().to_vec(),
            coefficients,
            vectors,
        })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `v_k(u)` for `u = 0..=r` (even extension to negative `u`).
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).iter().copied().collect()
    }
}

/// Closed-form kernel `l_t = sum_k c_k / (1 + t lambda_k) v_k`.
pub fn windowed_denoiser_closed_form(spectrum: &WindowSpectrum, t: f64) -> ConvKernel {
    let k = spectrum.r + 1;
    let mut half = vec![0.0; k];
    for j in 0..k {
        let g = spectrum.coefficients[j] / (1.0 + t * spectrum.eigenvalues[j]);
        for (u, h) in half.iter_mut().enumerate() {
            *h += g * spectrum.vectors[(u, j)];
        }
    }
    ConvKernel {
        n: spectrum.n,
        half,
    }
}

/// Explicit kernel for `Sigma = I + alpha 1 1^T`:
/// `l(0) = 1/(1+t) + alpha/((1+t)(1+b t))`, `l(j) = alpha/((1+t)(1+b t))`,
/// with `b = 1 + (2r+1) alpha`.
pub fn rank_one_window_kernel(n: usize, alpha: f64, r: usize, t: f64) -> Result<ConvKernel> {
    let b = 1.0 + (2 * r + 1) as f64 * alpha;
    let off = alpha / ((1.0 + t) * (1.0 + b * t));
    let mut half = vec![off; r + 1];
    half[0] = 1.0 / (1.0 + t) + off;
    ConvKernel::from_half(n, half)
}

/// Least-squares window kernel fitted to samples.
///
/// Minimizes the empirical version of `E|x - A(t x + sqrt(t) g)|^2` over
/// symmetric window kernels; the noise term is integrated analytically, so the
/// objective depends on the samples only through their circular autocorrelation.
pub fn fit_linear_denoiser(samples: &[Vec<f64>], r: usize, t: f64) -> Result<ConvKernel> {
    if samples.len() < 2 * r + 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples, got {}",
            2 * r + 2,
            samples.len()
        )));
    }
    let n = samples[0].len();
    if samples.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidArgument("samples have unequal dimensions".into()));
    }
    if 2 * r + 1 > n {
        return Err(Error::InvalidArgument(format!("window 2r+1 = {} exceeds n = {n}", 2 * r + 1)));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t = {t} must be >= 0")));
    }
    let autocorr = empirical_autocorrelation(samples, 2 * r)?;
    let w = 2 * r + 1;
    let k = r + 1;
    // E maps the half parameters theta_0..theta_r onto l(-r..=r).
    let e = DMatrix::from_fn(w, k, |i, j| f64::from((i as i64 - r as i64).unsigned_abs() as usize == j));
    let toeplitz = DMatrix::from_fn(w, w, |i, j| autocorr[(i as i64 - j as i64).unsigned_abs() as usize]);
    let rw = DVector::from_fn(w, |i, _| autocorr[(i as i64 - r as i64).unsigned_abs() as usize]);
    let gram = e.transpose() * (toeplitz * (t * t) + DMatrix::identity(w, w) * t) * &e;
    let rhs = e.transpose() * rw * t;
    let eig = linalg::sym_eigen(&gram)?;
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let theta = if min > RIDGE_EPS {
        linalg::spd_solve_vec(&gram, &rhs)?
    } else {
        linalg::spd_solve_vec(&(gram + DMatrix::identity(k, k) * RIDGE_EPS), &rhs)?
    };
    ConvKernel::from_half(n, theta.as_slice().to_vec())
}

/// `R(d) = mean over samples and sites of x_i x_{i+d}` (circular), `d = 0..=max_lag`.
pub fn empirical_autocorrelation(samples: &[Vec<f64>], max_lag: usize) -> Result<Vec<f64>> {
    let n = samples.first().map(|s| s.len()).unwrap_or(0);
    if n == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut acc = vec![0.0; max_lag + 1];
    for x in samples {
        check_finite(x, "sample")?;
        for (d, a) in acc.iter_mut().enumerate() {
            *a += (0..n).map(|i| x[i] * x[(i + d) % n]).sum::<f64>();
        }
    }
    let norm = (samples.len() * n) as f64;
    Ok(acc.into_iter().map(|a| a / norm).collect())
}

/// Isotropic-channel denoiser `m(y; t) = l_t * y` with the optimal window kernel.
#[derive(Clone, Debug)]
pub struct ConvDenoiser {
    spectrum: WindowSpectrum,
}

impl ConvDenoiser {
    pub fn new(c: &[f64], r: usize) -> Result<Self> {
        Ok(Self {
            spectrum: WindowSpectrum::new(c, r)?,
        })
    }

    pub fn kernel(&self, t: f64) -> ConvKernel {
        windowed_denoiser_closed_form(&self.spectrum, t)
    }
}

impl GaussianDenoiser for ConvDenoiser {
    fn dim(&self) -> usize {
        self.spectrum.n
    }

    fn posterior_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_finite(y, "observation")?;
        self.kernel(t).apply_into(y, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use crate::targets::{circulant_eigenvalues, CirculantGaussian};
    use rand::Rng;

    fn rank_one_c(n: usize, alpha: f64) -> Vec<f64> {
        let mut c = vec![alpha; n];
        c[0] += 1.0;
        c
    }

    /// Random PSD circulant correlation from a nonnegative symmetric spectrum.
    fn random_c<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
        let mut lam = vec![0.0; n];
        for k in 0..=n / 2 {
            let v = rng.random::<f64>() * 3.0;
            lam[k] = v;
            lam[(n - k) % n] = v;
        }
        (0..n)
            .map(|j| {
                lam.iter()
                    .enumerate()
                    .map(|(k, l)| l * (2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64).cos())
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }

    #[test]
    fn r_zero_scalar_solution() {
        let alpha = 0.3;
        for t in [0.0, 0.5, 4.0] {
            let k = windowed_denoiser_solve(&rank_one_c(16, alpha), 0, t).unwrap();
            assert!((k.get(0) - (1.0 + alpha) / (1.0 + (1.0 + alpha) * t)).abs() < 1e-15);
        }
    }

    #[test]
    fn t_zero_reproduces_correlation() {
        let mut rng = chain_rng(1, 0);
        let c = random_c(20, &mut rng);
        let k = windowed_denoiser_solve(&c, 4, 0.0).unwrap();
        for u in -4i64..=4 {
            assert!((k.get(u) - c[u.unsigned_abs() as usize]).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_matches_solve() {
        let mut rng = chain_rng(2, 0);
        for trial in 0..20 {
            let n = 17 + trial;
            let c = random_c(n, &mut rng);
            let r = trial % 9;
            let spec = WindowSpectrum::new(&c, r).unwrap();
            for t in [0.0, 0.1, 1.0, 10.0] {
                let a = windowed_denoiser_solve(&c, r, t).unwrap();
                assert!(opt_convolution_residual(&c, &a, t) <= 1e-10);
                let b = windowed_denoiser_closed_form(&spec, t);
                for u in 0..=r as i64 {
                    assert!((a.get(u) - b.get(u)).abs() <= 1e-10);
                }
            }
            let big = windowed_denoiser_closed_form(&spec, 1e12);
            assert!(big.half().iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn rank_one_explicit_values() {
        for (alpha, r, t) in [(0.25, 3, 1.0), (1.0, 1, 0.1), (10.0, 8, 10.0)] {
            let solved = windowed_denoiser_solve(&rank_one_c(64, alpha), r, t).unwrap();
            let explicit = rank_one_window_kernel(64, alpha, r, t).unwrap();
            for u in 0..=r as i64 {
                assert!((solved.get(u) - explicit.get(u)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn kernel_is_exactly_symmetric_and_csv() {
        let k = windowed_denoiser_solve(&rank_one_c(9, 0.5), 2, 1.0).unwrap();
        let full = k.full();
        assert_eq!(full.len(), 5);
        for u in 0..5 {
            assert_eq!(full[u], full[4 - u]);
        }
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("u,l\n-2,"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn window_too_large_is_rejected() {
        assert!(windowed_denoiser_solve(&rank_one_c(4, 0.1), 2, 1.0).is_err());
    }

    #[test]
    fn conv_denoiser_applies_circulant_kernel() {
        let c = rank_one_c(8, 0.5);
        let d = ConvDenoiser::new(&c, 1).unwrap();
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let m = d.posterior_mean(&y, 2.0).unwrap();
        let k = windowed_denoiser_solve(&c, 1, 2.0).unwrap();
        for i in 0..8 {
            let expect = k.get(0) * y[i] + k.get(1) * (y[(i + 7) % 8] + y[(i + 1) % 8]);
            assert!((m[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn full_window_kernel_is_exact_posterior() {
        // 2r + 1 = n: the window covers every lag, so A_t = (I + t Sigma)^{-1} Sigma.
        let c = rank_one_c(7, 0.4);
        let target = CirculantGaussian::from_correlation(c.clone()).unwrap();
        let k = windowed_denoiser_solve(&c, 3, 1.5).unwrap();
        let y = [1.0, -2.0, 0.5, 0.0, 3.0, -1.0, 0.25];
        let exact = crate::denoisers::gaussian_posterior_mean(&target.covariance(), &y, 1.5).unwrap();
        let got = k.apply(&y).unwrap();
        for i in 0..7 {
            assert!((exact[i] - got[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_converges_to_population_kernel() {
        let n = 64;
        let r = 3;
        let t = 1.0;
        let target = CirculantGaussian::rank_one(n, 0.25).unwrap();
        let mut rng = chain_rng(3, 0);
        let samples: Vec<Vec<f64>> = (0..10_000).map(|_| target.sample(&mut rng)).collect();
        let fitted = fit_linear_denoiser(&samples, r, t).unwrap();
        let exact = windowed_denoiser_solve(target.correlation(), r, t).unwrap();
        for u in 0..=r as i64 {
            assert!((fitted.get(u) - exact.get(u)).abs() <= 0.05);
        }
    }

    #[test]
    fn fit_on_zero_samples_is_zero_kernel() {
        let samples = vec![vec![0.0; 10]; 8];
        for t in [0.0, 1.0] {
            let k = fit_linear_denoiser(&samples, 2, t).unwrap();
            assert!(k.half().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn fit_on_single_frequency_is_scalar_shrinkage() {
        // Samples a cos(q i + phase) have autocorrelation rho cos(q d), rho = a^2/2.
        // The window solution is l(u) = rho (1 - t L) cos(q u) with
        // L = rho W / (1 + t rho W), W = sum_{|v|<=r} cos(q v)^2, and the
        // response at q equals the scalar shrinkage L = s / (1 + t s), s = rho W.
        let n = 32;
        let r = 3;
        let q = 2.0 * std::f64::consts::PI * 3.0 / n as f64;
        let amp = 1.7;
        let samples: Vec<Vec<f64>> = (0..16)
            .map(|s| {
                let phase = s as f64 * 0.37;
                (0..n).map(|i| amp * (q * i as f64 + phase).cos()).collect()
            })
            .collect();
        let t = 0.8;
        let k = fit_linear_denoiser(&samples, r, t).unwrap();
        let rho = amp * amp / 2.0;
        let w: f64 = (-(r as i64)..=r as i64).map(|v| (q * v as f64).cos().powi(2)).sum();
        let s = rho * w;
        assert!((k.response(q) - s / (1.0 + t * s)).abs() < 1e-9);
        let l = s / (1.0 + t * s);
        for u in 0..=r as i64 {
            assert!((k.get(u) - rho * (1.0 - t * l) * (q * u as f64).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn spectrum_eigenvalues_are_window_eigenvalues() {
        let mut rng = chain_rng(4, 0);
        let c = random_c(15, &mut rng);
        let spec = WindowSpectrum::new(&c, 3).unwrap();
        let t = window_toeplitz(&c, 3);
        for k in 0..4 {
            let half = spec.vector(k);
            let v = DVector::from_fn(7, |i, _| half[(i as i64 - 3).unsigned_abs() as usize]);
            let tv = &t * &v;
            assert!((tv - &v * spec.eigenvalues()[k]).norm() < 1e-12);
        }
        assert!(circulant_eigenvalues(&c).iter().all(|v| *v > -1e-12));
    }
}
