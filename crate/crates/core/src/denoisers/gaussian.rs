//! Denoisers for the isotropic, anisotropic and linear-observation Gaussian channels.

use nalgebra::{DMatrix, DVector};

use super::{AnisotropicDenoiser, GaussianDenoiser, LinearObsDenoiser, Omega};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{self, dot, norm_sq};
use crate::targets::{DiscreteTarget, TwoGaussianMixture};

/// Writes `sum_j w_j x_j` with `w_j ∝ exp(logits_j)` into `out`.
fn softmax_average(logits: &[f64], points: &[Vec<f64>], out: &mut [f64]) -> Result<()> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(if max.is_nan() {
            Error::NonFinite("tilt weights")
        } else {
            Error::ZeroPosterior
        });
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut total = 0.0;
    for (l, x) in logits.iter().zip(points) {
        let w = (l - max).exp();
        if w == 0.0 {
            continue;
        }
        total += w;
        for (o, xi) in out.iter_mut().zip(x) {
            *o += w * xi;
        }
    }
    out.iter_mut().for_each(|v| *v /= total);
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time t = {t} must be finite and >= 0")))
    }
}

/// Exact denoiser of a discrete target on the Gaussian channels (tilt of the atoms).
#[derive(Clone, Debug)]
pub struct DiscreteGaussianDenoiser {
    target: DiscreteTarget,
    norms: Vec<f64>,
}

impl DiscreteGaussianDenoiser {
    pub fn new(target: DiscreteTarget) -> Self {
        let norms = target.atoms().iter().map(|a| norm_sq(a)).collect();
        Self { target, norms }
    }

    pub fn target(&self) -> &DiscreteTarget {
        &self.target
    }
}

impl GaussianDenoiser for DiscreteGaussianDenoiser {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn posterior_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_dim(GaussianDenoiser::dim(self), y.len())?;
        check_dim(GaussianDenoiser::dim(self), out.len())?;
        check_finite(y, "observation")?;
        check_time(t)?;
        let logits: Vec<f64> = self
            .target
            .atoms()
            .iter()
            .zip(self.target.log_weights())
            .zip(&self.norms)
            .map(|((x, lw), nx)| lw + dot(y, x) - 0.5 * t * nx)
            .collect();
        softmax_average(&logits, self.target.atoms(), out)
    }
}

impl AnisotropicDenoiser for DiscreteGaussianDenoiser {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn posterior_mean_omega_into(&self, y: &[f64], omega: Omega<'_>, out: &mut [f64]) -> Result<()> {
        match omega {
            Omega::Scalar(s) => self.posterior_mean_into(y, s, out),
            Omega::Matrix(m) => {
                let mean = anisotropic_posterior_mean(&self.target, y, m)?;
                out.copy_from_slice(&mean);
                Ok(())
            }
        }
    }
}

/// Posterior mean of a discrete target on the isotropic Gaussian channel.
pub fn bruteforce_posterior_mean_gaussian(target: &DiscreteTarget, y: &[f64], t: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; target.dim()];
    DiscreteGaussianDenoiser::new(target.clone()).posterior_mean_into(y, t, &mut out)?;
    Ok(out)
}

/// Posterior mean of a discrete target given `y = Omega x + Omega^{1/2} G`.
///
/// The likelihood `exp(<x, P y> - x^T Omega x / 2)` is used, with `P` the
/// projector onto `range(Omega)`; `y` must lie in that range.
pub fn anisotropic_posterior_mean(target: &DiscreteTarget, y: &[f64], omega: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = target.dim();
    check_dim(n, y.len())?;
    check_dim(n, omega.nrows())?;
    check_finite(y, "observation")?;
    linalg::check_psd(omega, "Omega")?;
    let p = linalg::range_projector(omega)?;
    let yv = DVector::from_column_slice(y);
    let py = &p * &yv;
    let residual = (&yv - &py).norm();
    if residual > 1e-8 * (1.0 + yv.norm()) {
        return Err(Error::OutsideRange(residual));
    }
    let logits: Vec<f64> = target
        .atoms()
        .iter()
        .zip(target.log_weights())
        .map(|(x, lw)| {
            let xv = DVector::from_column_slice(x);
            lw + xv.dot(&py) - 0.5 * xv.dot(&(omega * &xv))
        })
        .collect();
    let mut out = vec![0.0; n];
    softmax_average(&logits, target.atoms(), &mut out)?;
    Ok(out)
}

/// `(I + t Sigma)^{-1} Sigma y` by a symmetric solve.
pub fn gaussian_posterior_mean(sigma: &DMatrix<f64>, y: &[f64], t: f64) -> Result<Vec<f64>> {
    check_dim(sigma.nrows(), y.len())?;
    check_finite(y, "observation")?;
    check_time(t)?;
    linalg::check_psd(sigma, "Sigma")?;
    let n = sigma.nrows();
    let m = DMatrix::identity(n, n) + sigma * t;
    let rhs = sigma * DVector::from_column_slice(y);
    Ok(linalg::spd_solve_vec(&m, &rhs)?.as_slice().to_vec())
}

/// `mean + (I + Sigma Omega)^{-1} Sigma (y - Omega mean)` for `x ~ N(mean, Sigma)`.
pub fn gaussian_anisotropic_posterior_mean(
    mean: &[f64],
    sigma: &DMatrix<f64>,
    y: &[f64],
    omega: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let n = mean.len();
    check_dim(n, y.len())?;
    check_dim(n, sigma.nrows())?;
    check_dim(n, omega.nrows())?;
    check_finite(y, "observation")?;
    linalg::check_psd(omega, "Omega")?;
    let m = DVector::from_column_slice(mean);
    let resid = DVector::from_column_slice(y) - omega * &m;
    let lhs = DMatrix::identity(n, n) + sigma * omega;
    let z = linalg::solve(&lhs, &(sigma * resid))?;
    Ok((m + z).as_slice().to_vec())
}

/// Exact denoiser of `N(mean, Sigma)` observed through `Y_t = t A x + B_t`.
///
/// Uses `E[x | y] = mean + Sigma A^T (t A Sigma A^T + I)^{-1} (y - t A mean)`
/// with the eigendecomposition of `A Sigma A^T` precomputed.
#[derive(Clone, Debug)]
pub struct GaussianLinearDenoiser {
    mean: DVector<f64>,
    sigma: DMatrix<f64>,
    a: DMatrix<f64>,
    a_mean: DVector<f64>,
    basis: DMatrix<f64>,
    gain: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    identity: bool,
}

impl GaussianLinearDenoiser {
    pub fn new(mean: Vec<f64>, sigma: DMatrix<f64>, a: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        check_dim(n, sigma.nrows())?;
        check_dim(n, a.ncols())?;
        linalg::check_psd(&sigma, "Sigma")?;
        let identity = a.is_square() && a == DMatrix::identity(n, n);
        let k = &a * &sigma * a.transpose();
        let eig = linalg::sym_eigen(&k)?;
        let basis = eig.eigenvectors;
        let eigenvalues = eig.eigenvalues.map(|v| v.max(0.0));
        let gain = &sigma * a.transpose() * &basis;
        let mean = DVector::from_vec(mean);
        let a_mean = &a * &mean;
        Ok(Self {
            mean,
            sigma,
            a,
            a_mean,
            basis,
            gain,
            eigenvalues,
            identity,
        })
    }

    /// `N(mean, Sigma)` on the isotropic channel.
    pub fn isotropic(mean: Vec<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        Self::new(mean, sigma, DMatrix::identity(n, n))
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    fn signal_mean(&self, y: &[f64], t: f64) -> Result<DVector<f64>> {
        check_dim(self.a.nrows(), y.len())?;
        check_finite(y, "observation")?;
        check_time(t)?;
        let r = DVector::from_column_slice(y) - &self.a_mean * t;
        let mut c = self.basis.tr_mul(&r);
        for (ci, l) in c.iter_mut().zip(self.eigenvalues.iter()) {
            *ci /= 1.0 + t * l;
        }
        Ok(&self.mean + &self.gain * c)
    }
}

impl GaussianDenoiser for GaussianLinearDenoiser {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn posterior_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        if !self.identity {
            return Err(Error::InvalidArgument(
                "isotropic use requires the identity observation operator".into(),
            ));
        }
        check_dim(GaussianDenoiser::dim(self), out.len())?;
        out.copy_from_slice(self.signal_mean(y, t)?.as_slice());
        Ok(())
    }
}

impl AnisotropicDenoiser for GaussianLinearDenoiser {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn posterior_mean_omega_into(&self, y: &[f64], omega: Omega<'_>, out: &mut [f64]) -> Result<()> {
        match omega {
            Omega::Scalar(s) => self.posterior_mean_into(y, s, out),
            Omega::Matrix(m) => {
                if !self.identity {
                    return Err(Error::InvalidArgument(
                        "anisotropic use requires the identity observation operator".into(),
                    ));
                }
                let v = gaussian_anisotropic_posterior_mean(self.mean.as_slice(), &self.sigma, y, m)?;
                out.copy_from_slice(&v);
                Ok(())
            }
        }
    }
}

impl LinearObsDenoiser for GaussianLinearDenoiser {
    fn obs_dim(&self) -> usize {
        self.a.nrows()
    }

    fn signal_dim(&self) -> usize {
        self.mean.len()
    }

    fn observation_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_dim(self.obs_dim(), out.len())?;
        let x = self.signal_mean(y, t)?;
        out.copy_from_slice((&self.a * x).as_slice());
        Ok(())
    }

    fn signal_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_dim(self.signal_dim(), out.len())?;
        out.copy_from_slice(self.signal_mean(y, t)?.as_slice());
        Ok(())
    }
}

/// Exact denoiser of `N(mean, v I)`: `mean + v (y - t mean) / (1 + t v)`.
///
/// For unit variance this is `(y + mean) / (1 + t)`.
#[derive(Clone, Debug)]
pub struct IsotropicComponentDenoiser {
    mean: Vec<f64>,
    variance: f64,
}

impl IsotropicComponentDenoiser {
    pub fn new(mean: Vec<f64>, variance: f64) -> Result<Self> {
        check_finite(&mean, "component mean")?;
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("variance {variance} must be >= 0")));
        }
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
}

impl GaussianDenoiser for IsotropicComponentDenoiser {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn posterior_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), y.len())?;
        check_dim(self.dim(), out.len())?;
        check_time(t)?;
        let v = self.variance;
        let s = v / (1.0 + t * v);
        for ((o, yi), mi) in out.iter_mut().zip(y).zip(&self.mean) {
            *o = mi + s * (yi - t * mi);
        }
        check_finite(out, "posterior mean")
    }
}

/// `c m(y; t)` for an inner denoiser `m`; a deliberately mis-scaled drift.
#[derive(Clone, Debug)]
pub struct ScaledDenoiser<D> {
    inner: D,
    scale: f64,
}

impl<D: GaussianDenoiser> ScaledDenoiser<D> {
    pub fn new(inner: D, scale: f64) -> Result<Self> {
        if !scale.is_finite() {
            return Err(Error::NonFinite("scale"));
        }
        Ok(Self { inner, scale })
    }
}

impl<D: GaussianDenoiser> GaussianDenoiser for ScaledDenoiser<D> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn posterior_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self.inner.posterior_mean_into(y, t, out)?;
        out.iter_mut().for_each(|o| *o *= self.scale);
        Ok(())
    }
}

/// Log-domain `phi(s; t)` of the two-component mixture.
fn mixture_phi(p: f64, norm_a: f64, s: f64, t: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 || norm_a == 0.0 {
        return 0.0;
    }
    let u1 = ((1.0 - p) * s / (1.0 + t) - t * (1.0 - p).powi(2) / (2.0 * (1.0 + t))) * norm_a;
    let u2 = -(p * s / (1.0 + t) + t * p * p / (2.0 * (1.0 + t))) * norm_a;
    // Posterior weight of the first component: logistic(d).
    let d = (p / (1.0 - p)).ln() + u1 - u2;
    let pi1 = if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    };
    (pi1 - p) / (1.0 + t)
}

/// `y / (1 + t) + a phi(<a, y> / |a|^2; t)`.
pub fn mixture_posterior_mean(mix: &TwoGaussianMixture, y: &[f64], t: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; mix.dim()];
    MixtureDenoiser::new(mix.clone()).posterior_mean_into(y, t, &mut out)?;
    Ok(out)
}

/// Value of `<a, y> / |a|^2` at which the two posterior components balance,
/// up to the `O(1/|a|^2)` prior-odds shift: the midpoint `(1 - 2p) / 2` of
/// the projected cluster centers, scaled by `t`.
pub fn mixture_matching_threshold(p: f64, t: f64) -> f64 {
    0.5 * (1.0 - 2.0 * p) * t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixtureSide {
    Upper,
    Lower,
}

/// Large-`|a|` limit of the mixture denoiser away from the matching window.
///
/// Returns `(y + (1-p) a) / (1 + t)` above the window and `(y - p a) / (1 + t)`
/// below it; inputs within `delta` of the threshold are rejected.
pub fn mixture_denoiser_asymptotics(
    mix: &TwoGaussianMixture,
    y: &[f64],
    t: f64,
    delta: f64,
) -> Result<(Vec<f64>, MixtureSide)> {
    check_dim(mix.dim(), y.len())?;
    check_finite(y, "observation")?;
    check_time(t)?;
    let a = mix.a();
    let na = norm_sq(a);
    if na == 0.0 {
        return Err(Error::InvalidArgument("mixture direction a = 0".into()));
    }
    let s = dot(a, y) / na;
    let thr = mixture_matching_threshold(mix.p(), t);
    let p = mix.p();
    let (shift, side) = if s >= thr + delta {
        (1.0 - p, MixtureSide::Upper)
    } else if s <= thr - delta {
        (-p, MixtureSide::Lower)
    } else {
        return Err(Error::InsideWindow {
            distance: (s - thr).abs(),
            window: delta,
        });
    };
    let out = y.iter().zip(a).map(|(yi, ai)| (yi + shift * ai) / (1.0 + t)).collect();
    Ok((out, side))
}

/// Exact denoiser of a two-Gaussian mixture.
#[derive(Clone, Debug)]
pub struct MixtureDenoiser {
    mix: TwoGaussianMixture,
    norm_a: f64,
}

impl MixtureDenoiser {
    pub fn new(mix: TwoGaussianMixture) -> Self {
        let norm_a = norm_sq(mix.a());
        Self { mix, norm_a }
    }

    pub fn mixture(&self) -> &TwoGaussianMixture {
        &self.mix
    }
}

impl GaussianDenoiser for MixtureDenoiser {
    fn dim(&self) -> usize {
        self.mix.dim()
    }

    fn posterior_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), y.len())?;
        check_dim(self.dim(), out.len())?;
        check_finite(y, "observation")?;
        check_time(t)?;
        let a = self.mix.a();
        let phi = if self.norm_a == 0.0 {
            0.0
        } else {
            mixture_phi(self.mix.p(), self.norm_a, dot(a, y) / self.norm_a, t)
        };
        for ((o, yi), ai) in out.iter_mut().zip(y).zip(a) {
            *o = yi / (1.0 + t) + ai * phi;
        }
        check_finite(out, "mixture posterior mean")
    }
}

/// Exact `E[A x | t A x + sqrt(t) G = y]` for a discrete target, by enumeration.
#[derive(Clone, Debug)]
pub struct DiscreteLinearObsDenoiser {
    target: DiscreteTarget,
    a: DMatrix<f64>,
    images: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl DiscreteLinearObsDenoiser {
    pub fn new(target: DiscreteTarget, a: DMatrix<f64>) -> Result<Self> {
        check_dim(target.dim(), a.ncols())?;
        let images: Vec<Vec<f64>> = target.atoms().iter().map(|x| linalg::mat_vec(&a, x)).collect();
        let norms = images.iter().map(|v| norm_sq(v)).collect();
        Ok(Self {
            target,
            a,
            images,
            norms,
        })
    }

    fn logits(&self, y: &[f64], t: f64) -> Result<Vec<f64>> {
        check_dim(self.a.nrows(), y.len())?;
        check_finite(y, "observation")?;
        check_time(t)?;
        Ok(self
            .images
            .iter()
            .zip(self.target.log_weights())
            .zip(&self.norms)
            .map(|((ax, lw), n)| lw + dot(y, ax) - 0.5 * t * n)
            .collect())
    }
}

impl LinearObsDenoiser for DiscreteLinearObsDenoiser {
    fn obs_dim(&self) -> usize {
        self.a.nrows()
    }

    fn signal_dim(&self) -> usize {
        self.target.dim()
    }

    fn observation_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_dim(self.obs_dim(), out.len())?;
        let logits = self.logits(y, t)?;
        softmax_average(&logits, &self.images, out)
    }

    fn signal_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_dim(self.signal_dim(), out.len())?;
        let logits = self.logits(y, t)?;
        softmax_average(&logits, self.target.atoms(), out)
    }
}

/// `m_A(y; t) = E[A x | t A x + sqrt(t) G = y]` for a discrete target.
pub fn linear_obs_bruteforce_mean(target: &DiscreteTarget, a: &DMatrix<f64>, y: &[f64], t: f64) -> Result<Vec<f64>> {
    let d = DiscreteLinearObsDenoiser::new(target.clone(), a.clone())?;
    let mut out = vec![0.0; a.nrows()];
    d.observation_mean_into(y, t, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{chain_rng, normal};
    use crate::targets::GaussianTarget;
    use rand::Rng;

    fn two_atoms() -> DiscreteTarget {
        DiscreteTarget::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn two_atom_tilt_is_tanh() {
        let m = bruteforce_posterior_mean_gaussian(&two_atoms(), &[2.0], 1.0).unwrap();
        assert!((m[0] - 2f64.tanh()).abs() < 1e-15);
        assert!((m[0] - 0.9640).abs() < 1e-4);
    }

    #[test]
    fn no_information_gives_prior_mean() {
        let t = DiscreteTarget::new(vec![vec![0.0, 1.0], vec![3.0, -1.0]], vec![0.25, 0.75]).unwrap();
        let m = bruteforce_posterior_mean_gaussian(&t, &[0.0, 0.0], 0.0).unwrap();
        assert!((m[0] - 2.25).abs() < 1e-15 && (m[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_atom_is_fixed_point() {
        let t = DiscreteTarget::new(vec![vec![0.3, -2.0]], vec![1.0]).unwrap();
        for (y, s) in [([5.0, 1.0], 0.1), ([-100.0, 40.0], 50.0)] {
            assert_eq!(bruteforce_posterior_mean_gaussian(&t, &y, s).unwrap(), vec![0.3, -2.0]);
        }
    }

    #[test]
    fn nan_observation_is_rejected() {
        assert!(bruteforce_posterior_mean_gaussian(&two_atoms(), &[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn large_tilts_do_not_overflow() {
        let m = bruteforce_posterior_mean_gaussian(&two_atoms(), &[1e6], 1e3).unwrap();
        assert_eq!(m[0], 1.0);
    }

    #[test]
    fn anisotropic_reduces_to_isotropic() {
        let t = DiscreteTarget::new(
            vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, -1.0]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let y = [0.7, -0.4];
        let iso = bruteforce_posterior_mean_gaussian(&t, &y, 1.3).unwrap();
        let omega = DMatrix::identity(2, 2) * 1.3;
        let an = anisotropic_posterior_mean(&t, &y, &omega).unwrap();
        for i in 0..2 {
            assert!((iso[i] - an[i]).abs() < 1e-13);
        }
        let prior = anisotropic_posterior_mean(&t, &[0.0, 0.0], &DMatrix::zeros(2, 2)).unwrap();
        assert!((prior[0] - (0.2 - 0.5)).abs() < 1e-15);
        assert!(anisotropic_posterior_mean(&t, &[1.0, 0.0], &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn anisotropic_singular_omega_matches_enumeration() {
        // Only coordinate 0 is observed; coordinate 1 follows through the atom coupling.
        let atoms = vec![vec![1.0, 5.0], vec![-1.0, -3.0]];
        let t = DiscreteTarget::new(atoms, vec![0.4, 0.6]).unwrap();
        let s = 0.8;
        let y0 = 0.3;
        let omega = DMatrix::from_row_slice(2, 2, &[s, 0.0, 0.0, 0.0]);
        let got = anisotropic_posterior_mean(&t, &[y0, 0.0], &omega).unwrap();
        // Oracle: likelihood of y0 = s x0 + sqrt(s) g.
        let lik = |x0: f64| (-(y0 - s * x0).powi(2) / (2.0 * s)).exp();
        let (w1, w2) = (0.4 * lik(1.0), 0.6 * lik(-1.0));
        let z = w1 + w2;
        assert!((got[0] - (w1 - w2) / z).abs() < 1e-14);
        assert!((got[1] - (5.0 * w1 - 3.0 * w2) / z).abs() < 1e-13);
        // Any component of y outside range(Omega) is rejected.
        assert!(matches!(
            anisotropic_posterior_mean(&t, &[y0, 0.5], &omega),
            Err(Error::OutsideRange(_))
        ));
    }

    #[test]
    fn gaussian_shrinkage_examples() {
        let m = gaussian_posterior_mean(&DMatrix::identity(2, 2), &[2.0, -2.0], 1.0).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-15 && (m[1] + 1.0).abs() < 1e-15);
        let lam = [0.5, 2.0, 3.0];
        let sigma = DMatrix::from_diagonal(&DVector::from_column_slice(&lam));
        let y = [1.0, -1.0, 2.0];
        let m = gaussian_posterior_mean(&sigma, &y, 0.7).unwrap();
        for i in 0..3 {
            assert!((m[i] - lam[i] * y[i] / (1.0 + 0.7 * lam[i])).abs() < 1e-14);
        }
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(gaussian_posterior_mean(&bad, &[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn gaussian_posterior_matches_monte_carlo_regression() {
        // Regress x on y = t x + sqrt(t) g without binning: E[x y^T] E[y y^T]^{-1} is the
        // posterior-mean matrix, so predictions on a probe must agree within MC error.
        let mut rng = chain_rng(5, 0);
        let target = GaussianTarget::random_spectrum(3, 0.5, 2.0, &mut rng).unwrap();
        let sigma = target.cov().clone();
        let t = 2.0;
        let n_draws = 1_000_000;
        let mut sxy = DMatrix::<f64>::zeros(3, 3);
        let mut syy = DMatrix::<f64>::zeros(3, 3);
        for _ in 0..n_draws {
            let x = DVector::from_vec(target.sample(&mut rng));
            let g = DVector::from_fn(3, |_, _| normal(&mut rng));
            let y = &x * t + g * t.sqrt();
            sxy += &x * y.transpose();
            syy += &y * y.transpose();
        }
        let a_hat = sxy * syy.try_inverse().unwrap();
        let probe = [0.8, -1.1, 2.0];
        let exact = gaussian_posterior_mean(&sigma, &probe, t).unwrap();
        let est = &a_hat * DVector::from_column_slice(&probe);
        // Residual variance <= 2 and Cov(y) >= t^2/2 + t, so each prediction has a
        // standard error below sqrt(2) |probe| / sqrt(N (t^2/2 + t)).
        let probe_norm = norm_sq(&probe).sqrt();
        let se = 2f64.sqrt() * probe_norm / (n_draws as f64 * (t * t / 2.0 + t)).sqrt();
        for i in 0..3 {
            assert!((est[i] - exact[i]).abs() < 4.0 * se, "{} vs {}", est[i], exact[i]);
        }
    }

    #[test]
    fn linear_denoiser_matches_solve() {
        let mut rng = chain_rng(6, 0);
        let target = GaussianTarget::random_spectrum(4, 0.5, 2.0, &mut rng).unwrap();
        let d = GaussianLinearDenoiser::isotropic(vec![0.0; 4], target.cov().clone()).unwrap();
        for _ in 0..10 {
            let y: Vec<f64> = (0..4).map(|_| 3.0 * normal(&mut rng)).collect();
            let t = rng.random::<f64>() * 10.0;
            let a = d.posterior_mean(&y, t).unwrap();
            let b = gaussian_posterior_mean(target.cov(), &y, t).unwrap();
            for i in 0..4 {
                assert!((a[i] - b[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_anisotropic_matches_isotropic_and_conditioning() {
        let mut rng = chain_rng(7, 0);
        let target = GaussianTarget::random_spectrum(3, 0.5, 2.0, &mut rng).unwrap();
        let sigma = target.cov();
        let mean = [0.5, -1.0, 0.25];
        let y = [0.3, 0.1, -0.7];
        let a = gaussian_anisotropic_posterior_mean(&mean, sigma, &y, &(DMatrix::identity(3, 3) * 2.0)).unwrap();
        let shifted: Vec<f64> = y.iter().zip(&mean).map(|(a, m)| a - 2.0 * m).collect();
        let b = gaussian_posterior_mean(sigma, &shifted, 2.0).unwrap();
        for i in 0..3 {
            assert!((a[i] - mean[i] - b[i]).abs() < 1e-12);
        }
        // Joint-Gaussian conditioning oracle with a general invertible Omega.
        let omega = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 0.5]);
        let got = gaussian_anisotropic_posterior_mean(&mean, sigma, &y, &omega).unwrap();
        let cxy = sigma * &omega;
        let cyy = &omega * sigma * &omega + &omega;
        let m = DVector::from_column_slice(&mean);
        let oracle = &m + cxy * cyy.try_inverse().unwrap() * (DVector::from_column_slice(&y) - &omega * &m);
        for i in 0..3 {
            assert!((got[i] - oracle[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn component_denoiser_is_conjugate_update() {
        let d = IsotropicComponentDenoiser::new(vec![0.3, -0.7], 1.0).unwrap();
        let m = d.posterior_mean(&[1.0, 2.0], 3.0).unwrap();
        assert!((m[0] - (1.0 + 0.3) / 4.0).abs() < 1e-15);
        assert!((m[1] - (2.0 - 0.7) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_examples() {
        let mix = TwoGaussianMixture::new(vec![1.0, 2.0], 0.3).unwrap();
        assert_eq!(mixture_posterior_mean(&mix, &[0.0, 0.0], 0.0).unwrap(), vec![0.0, 0.0]);
        let one = TwoGaussianMixture::new(vec![1.0, 2.0], 1.0).unwrap();
        let y = [0.4, -1.2];
        let m = mixture_posterior_mean(&one, &y, 2.0).unwrap();
        assert_eq!(m, vec![0.4 / 3.0, -1.2 / 3.0]);
        let zero = TwoGaussianMixture::new(vec![0.0, 0.0], 0.4).unwrap();
        assert_eq!(mixture_posterior_mean(&zero, &y, 2.0).unwrap(), vec![0.4 / 3.0, -1.2 / 3.0]);
    }

    /// Gauss-Hermite nodes and weights for `exp(-x^2)` by Golub-Welsch.
    fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
        let mut j = DMatrix::zeros(order, order);
        for k in 1..order {
            let b = (k as f64 / 2.0).sqrt();
            j[(k, k - 1)] = b;
            j[(k - 1, k)] = b;
        }
        let eig = nalgebra::SymmetricEigen::new(j);
        let w = (0..order)
            .map(|k| std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, k)].powi(2))
            .collect();
        (eig.eigenvalues.as_slice().to_vec(), w)
    }

    #[test]
    fn mixture_matches_gauss_hermite_quadrature() {
        // E[x | y] = int x p(y|x) mu(dx) / int p(y|x) mu(dx), each mixture component
        // integrated over R^2 with a tensor Gauss-Hermite rule.
        let (nodes, weights) = gauss_hermite(60);
        let p = 0.3;
        let a = [1.0, 1.0];
        let t = 1.0;
        let y = [1.0, 0.0];
        let centers = [([0.7, 0.7], p), ([-0.3, -0.3], 1.0 - p)];
        let mut num = [0.0; 2];
        let mut den = 0.0;
        for (c, w) in centers {
            for (u, wu) in nodes.iter().zip(&weights) {
                for (v, wv) in nodes.iter().zip(&weights) {
                    let x = [c[0] + std::f64::consts::SQRT_2 * u, c[1] + std::f64::consts::SQRT_2 * v];
                    let ll = -((y[0] - t * x[0]).powi(2) + (y[1] - t * x[1]).powi(2)) / (2.0 * t);
                    let k = w * wu * wv * ll.exp();
                    num[0] += k * x[0];
                    num[1] += k * x[1];
                    den += k;
                }
            }
        }
        let mix = TwoGaussianMixture::new(a.to_vec(), p).unwrap();
        let m = mixture_posterior_mean(&mix, &y, t).unwrap();
        for i in 0..2 {
            assert!((m[i] - num[i] / den).abs() < 1e-6, "{} vs {}", m[i], num[i] / den);
        }
    }

    #[test]
    fn mixture_is_stable_for_large_separation() {
        let n = 10_000;
        let mix = TwoGaussianMixture::new(vec![1.0; n], 0.7).unwrap();
        let d = MixtureDenoiser::new(mix);
        let mut rng = chain_rng(8, 0);
        for _ in 0..20 {
            let y: Vec<f64> = (0..n).map(|_| 50.0 * normal(&mut rng)).collect();
            let m = d.posterior_mean(&y, rng.random::<f64>() * 100.0).unwrap();
            assert!(m.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn mixture_asymptotics_away_from_window() {
        let n = 512;
        let p = 0.7;
        let delta = 0.2;
        let mix = TwoGaussianMixture::new(vec![1.0; n], p).unwrap();
        let d = MixtureDenoiser::new(mix.clone());
        let mut rng = chain_rng(9, 0);
        let mut checked = [0usize; 2];
        while checked.iter().any(|c| *c < 100) {
            let t = rng.random::<f64>() * 5.0;
            let s = mixture_matching_threshold(p, t) + (rng.random::<f64>() * 2.0 - 1.0) * (1.0 + t);
            // y = s a + orthogonal noise scaled like an observation at time t.
            let noise: Vec<f64> = (0..n).map(|_| (t + t * t).sqrt() * normal(&mut rng)).collect();
            let mean_noise = noise.iter().sum::<f64>() / n as f64;
            let y: Vec<f64> = noise.iter().map(|z| s + z - mean_noise).collect();
            match mixture_denoiser_asymptotics(&mix, &y, t, delta) {
                Ok((limit, side)) => {
                    let exact = d.posterior_mean(&y, t).unwrap();
                    let dev = exact
                        .iter()
                        .zip(&limit)
                        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
                    // Mismatch is the minority-component weight, at most e^{-n delta/(1+t)} times odds.
                    let bound = 10.0 * (-(n as f64) * delta / (1.0 + t)).exp() * (p / (1.0 - p)).max((1.0 - p) / p)
                        + 1e-14 * (1.0 + s.abs());
                    assert!(dev <= bound, "dev {dev} bound {bound} t {t} s {s}");
                    checked[(side == MixtureSide::Lower) as usize] += 1;
                }
                Err(Error::InsideWindow { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn mixture_asymptotics_symmetric_threshold() {
        let mix = TwoGaussianMixture::new(vec![1.0; 4], 0.5).unwrap();
        assert_eq!(mixture_matching_threshold(0.5, 7.0), 0.0);
        assert!(matches!(
            mixture_denoiser_asymptotics(&mix, &[0.01, 0.0, 0.0, 0.0], 7.0, 0.1),
            Err(Error::InsideWindow { .. })
        ));
    }

    #[test]
    fn linear_obs_bruteforce_reductions() {
        let t = DiscreteTarget::new(vec![vec![1.0, 2.0], vec![-1.0, 0.5]], vec![0.3, 0.7]).unwrap();
        let y = [0.4, -0.3];
        let a = linear_obs_bruteforce_mean(&t, &DMatrix::identity(2, 2), &y, 0.9).unwrap();
        let b = bruteforce_posterior_mean_gaussian(&t, &y, 0.9).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        let z = linear_obs_bruteforce_mean(&t, &DMatrix::zeros(1, 2), &[0.3], 0.9).unwrap();
        assert_eq!(z, vec![0.0]);
    }

    #[test]
    fn linear_obs_row_vector_uses_scalar_observation() {
        // A = 1^T: atoms project to 3 and -0.5; a 1-D tilt on the projections.
        let t = DiscreteTarget::new(vec![vec![1.0, 2.0], vec![-1.0, 0.5]], vec![0.3, 0.7]).unwrap();
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let (y, s) = (0.8, 1.5);
        let got = linear_obs_bruteforce_mean(&t, &a, &[y], s).unwrap();
        let w1 = 0.3 * (y * 3.0 - s * 9.0 / 2.0).exp();
        let w2 = 0.7 * (y * -0.5 - s * 0.25 / 2.0).exp();
        assert!((got[0] - (3.0 * w1 - 0.5 * w2) / (w1 + w2)).abs() < 1e-14);
    }
}
