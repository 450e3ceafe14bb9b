//! Closed-form analytics for Gaussian targets and shift-invariant denoisers.
//!
//! `F(nu; c) = int_0^inf (1 + s)^{-2(1 - nu)} (c + s)^{-2 nu} ds` drives the
//! generated spectrum of the window-`r` convolutional sampler on the target
//! `N(0, I + alpha 11^T)`.

pub mod quadrature;

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::denoisers::GaussianDenoiser;
use crate::error::{Error, Result};
use crate::linalg::{check_psd, sym_eigen};
use crate::processes::gaussian::{reverse_ou_diffusion, reverse_ou_drift_into, reverse_ou_scale};

pub use quadrature::{composite_gauss_legendre, gauss_legendre, integrate, integrate_half_line};

/// Absolute tolerance of every improper integral.
pub const QUAD_TOL: f64 = 1e-10;

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::Domain(format!("c = {c} must lie in (0, 1]")));
    }
    Ok(())
}

/// `F(nu; c)` by adaptive quadrature; `nu` in `[-1, 1]`.
pub fn f_nu_c(nu: f64, c: f64) -> Result<f64> {
    check_c(c)?;
    if !(-1.0..=1.0).contains(&nu) {
        return Err(Error::Domain(format!("nu = {nu} must lie in [-1, 1]")));
    }
    integrate_half_line(
        |s| (-2.0 * (1.0 - nu) * (1.0 + s).ln() - 2.0 * nu * (c + s).ln()).exp(),
        QUAD_TOL,
    )
}

/// `F'(1; c) = int_0^inf 2 (c + s)^{-2} ln((1 + s) / (c + s)) ds` by quadrature.
pub fn f_prime_1(c: f64) -> Result<f64> {
    check_c(c)?;
    integrate_half_line(|s| 2.0 * ((1.0 + s) / (c + s)).ln() / ((c + s) * (c + s)), QUAD_TOL)
}

/// Closed form `2 ln(1/c) / (c (1 - c)) - 2 / c` of `F'(1; c)`, `c < 1`.
pub fn f_prime_1_closed_form(c: f64) -> Result<f64> {
    check_c(c)?;
    if c == 1.0 {
        return Ok(0.0);
    }
    Ok(2.0 * (1.0 / c).ln() / (c * (1.0 - c)) - 2.0 / c)
}

/// `F'(1; c)` against the sandwich `2/c <= F'(1; c) <= (2/c) ln(1/c)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

impl BoundCheck {
    fn new(value: f64, lower: f64, upper: f64) -> Self {
        Self { value, lower, upper, lower_holds: value >= lower, upper_holds: value <= upper }
    }

    pub fn holds(&self) -> bool {
        self.lower_holds && self.upper_holds
    }

    fn into_checked(self, what: &str) -> Result<Self> {
        if self.holds() {
            Ok(self)
        } else {
            Err(Error::Consistency(format!(
                "{what} = {} outside [{}, {}]",
                self.value, self.lower, self.upper
            )))
        }
    }
}

/// Quadrature value of `F'(1; c)` with its bound check, never failing on
/// a violated bound.
pub fn fprime1_report(c: f64) -> Result<BoundCheck> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Domain(format!("c = {c} must lie in (0, 1)")));
    }
    let value = f_prime_1(c)?;
    Ok(BoundCheck::new(value, 2.0 / c, 2.0 / c * (1.0 / c).ln()))
}

/// As [`fprime1_report`], returning a consistency error when a bound fails.
pub fn fprime1(c: f64) -> Result<BoundCheck> {
    fprime1_report(c)?.into_checked("F'(1; c)")
}

/// `nu(q) = sin(q (r + 1/2)) / ((2r + 1) sin(q / 2))`, with `nu(0) = 1`.
pub fn nu(q: f64, r: usize) -> f64 {
    let w = (2 * r + 1) as f64;
    let half = 0.5 * q;
    if half.sin().abs() < 1e-300 {
        return 1.0;
    }
    (q * (r as f64 + 0.5)).sin() / (w * half.sin())
}

/// `c_0 = 1 / (1 + (2r + 1) alpha)`.
pub fn c0(r: usize, alpha: f64) -> f64 {
    1.0 / (1.0 + (2 * r + 1) as f64 * alpha)
}

/// Frequencies `2 pi k / n` for `k = -n/2 + 1, ..., n/2`.
pub fn frequencies(n: usize) -> Vec<f64> {
    let lo = -(n as i64 / 2) + 1;
    let hi = n as i64 / 2;
    (lo..=hi).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub r: usize,
    pub alpha: f64,
    pub q: Vec<f64>,
    pub nu: Vec<f64>,
    /// Long-time generated spectrum `F(nu(q); c_0)`.
    pub sigma_x: Vec<f64>,
    /// Spectrum of `I + alpha 11^T`.
    pub sigma_target: Vec<f64>,
    pub c0: f64,
    /// `<1, Sigma^gen 1> = n sigma_x(0) = n / c_0`.
    pub one_sigma_one: f64,
}

impl SpectrumReport {
    /// CSV rows `(q, nu, sigma_x, sigma_target)`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["q", "nu", "sigma_x", "sigma_target"])?;
        for i in 0..self.q.len() {
            wr.write_record([
                format!("{:.16e}", self.q[i]),
                format!("{:.16e}", self.nu[i]),
                format!("{:.16e}", self.sigma_x[i]),
                format!("{:.16e}", self.sigma_target[i]),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Circular autocorrelation `C(u)`, `u = 0..n`, of the generated covariance.
    pub fn generated_correlation(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|u| {
                self.q
                    .iter()
                    .zip(&self.sigma_x)
                    .map(|(q, s)| s * (q * u as f64).cos())
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }
}

/// Generated spectrum of the window-`r` sampler on `N(0, I + alpha 11^T)`.
pub fn generated_spectrum(n: usize, r: usize, alpha: f64) -> Result<SpectrumReport> {
    if 2 * r + 1 > n {
        return Err(Error::InvalidArgument(format!("window 2r+1 = {} exceeds n = {n}", 2 * r + 1)));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be >= 0")));
    }
    let c = c0(r, alpha);
    let zero_mode = 1.0 + (2 * r + 1) as f64 * alpha;
    let q = frequencies(n);
    let nus: Vec<f64> = q.iter().map(|&qi| nu(qi, r)).collect();
    let sigma_x = q
        .iter()
        .zip(&nus)
        .map(|(&qi, &v)| if qi == 0.0 { Ok(zero_mode) } else { f_nu_c(v, c) })
        .collect::<Result<Vec<f64>>>()?;
    let sigma_target = q.iter().map(|&qi| if qi == 0.0 { 1.0 + n as f64 * alpha } else { 1.0 }).collect();
    Ok(SpectrumReport { n, r, alpha, q, nu: nus, sigma_x, sigma_target, c0: c, one_sigma_one: n as f64 * zero_mode })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationLength {
    pub r: usize,
    pub alpha: f64,
    pub xi2: f64,
    pub bounds: BoundCheck,
}

/// `xi_2 = sqrt(r (r + 1) F'(1; c_0) / (3 F(1; c_0)))`, the second-moment
/// correlation length `sqrt(sum_u d(u)^2 C(u) / sum_u C(u))`, with the sandwich
/// `sqrt(r (r + 1) / 3) <= xi_2 <= sqrt(r (r + 1) ln(1 + (2r + 1) alpha) / 3)`.
pub fn correlation_length_report(r: usize, alpha: f64) -> Result<CorrelationLength> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be > 0")));
    }
    let c = c0(r, alpha);
    let rr = (r * (r + 1)) as f64;
    let xi2 = (rr * f_prime_1(c)? * c / 3.0).sqrt();
    let lower = (rr / 3.0).sqrt();
    let upper = (rr * (1.0 + (2 * r + 1) as f64 * alpha).ln() / 3.0).sqrt();
    Ok(CorrelationLength { r, alpha, xi2, bounds: BoundCheck::new(xi2, lower, upper) })
}

/// As [`correlation_length_report`], failing when a bound is violated.
pub fn correlation_length(r: usize, alpha: f64) -> Result<CorrelationLength> {
    let report = correlation_length_report(r, alpha)?;
    report.bounds.clone().into_checked("xi_2")?;
    Ok(report)
}

/// Direct second-moment sum over the generated covariance on `n` sites.
pub fn correlation_length_direct(n: usize, r: usize, alpha: f64) -> Result<f64> {
    let report = generated_spectrum(n, r, alpha)?;
    let c = report.generated_correlation();
    let mut num = 0.0;
    let mut den = 0.0;
    for (u, cu) in c.iter().enumerate() {
        let d = u.min(n - u) as f64;
        num += d * d * cu;
        den += cu;
    }
    Ok((num / den).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct W2Separation {
    /// `sqrt(n alpha + 1) - sqrt((2r + 1) alpha + 1)`.
    pub bound: f64,
    /// `sqrt(n alpha) / 2`.
    pub threshold: f64,
    /// `(2r + 1) <= n / 8` and `n alpha >= 4`.
    pub preconditions_hold: bool,
    /// The bound exceeds the threshold whenever the preconditions hold.
    pub implication_holds: bool,
}

pub fn w2_separation(n: usize, alpha: f64, r: usize) -> W2Separation {
    let w = (2 * r + 1) as f64;
    let bound = (n as f64 * alpha + 1.0).sqrt() - (w * alpha + 1.0).sqrt();
    let threshold = 0.5 * (n as f64 * alpha).sqrt();
    let preconditions_hold = w <= n as f64 / 8.0 && n as f64 * alpha >= 4.0;
    W2Separation { bound, threshold, preconditions_hold, implication_holds: !preconditions_hold || bound >= threshold }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaT {
    /// `(I + t Sigma)^{-1} t Sigma^2`.
    pub cov: DMatrix<f64>,
    /// `W_2(N(0, Sigma), N(0, Sigma_t))^2 = sum_i lambda_i f(sqrt(lambda_i t))`,
    /// `f(x) = (1 - x / sqrt(1 + x^2))^2`.
    pub w2_sq: f64,
}

/// Covariance of `E[x | Y_t]` under `N(0, Sigma)` and its W2 gap to the target.
pub fn sigma_t_covariance(sigma: &DMatrix<f64>, t: f64) -> Result<SigmaT> {
    check_psd(sigma, "Sigma")?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t = {t} must be finite and >= 0")));
    }
    let eig = sym_eigen(sigma)?;
    let n = sigma.nrows();
    let mut d = DMatrix::<f64>::zeros(n, n);
    let mut w2_sq = 0.0;
    for i in 0..n {
        let l = eig.eigenvalues[i].max(0.0);
        d[(i, i)] = t * l * l / (1.0 + t * l);
        let x = (l * t).sqrt();
        w2_sq += l * (1.0 - x / (1.0 + x * x).sqrt()).powi(2);
    }
    let v = &eig.eigenvectors;
    let cov = v * d * v.transpose();
    Ok(SigmaT { cov: 0.5 * (&cov + cov.transpose()), w2_sq })
}

/// Maximum residual of the change of variables `Y_t = sqrt(t (1 + t)) Ybar_t`
/// between the reverse OU dynamics and `dY = m(Y; t) dt + dB` at `(t, ybar)`:
/// drift `h' ybar + h Fbar(ybar) - m(h ybar; t)` and diffusion `h^2 gbar - 1`.
pub fn reverse_equivalence_check<D>(denoiser: &D, t: f64, ybar: &[f64]) -> Result<f64>
where
    D: GaussianDenoiser + ?Sized,
{
    if !(t > 0.0) {
        return Err(Error::ReverseOuAtZero);
    }
    let n = denoiser.dim();
    let h = reverse_ou_scale(t);
    let dh = (1.0 + 2.0 * t) / (2.0 * h);
    let mut m_rev = vec![0.0; n];
    let mut drift_rev = vec![0.0; n];
    reverse_ou_drift_into(denoiser, ybar, t, &mut m_rev, &mut drift_rev)?;
    let y: Vec<f64> = ybar.iter().map(|v| h * v).collect();
    let m = denoiser.posterior_mean(&y, t)?;
    let drift_residual = (0..n)
        .map(|i| (dh * ybar[i] + h * drift_rev[i] - m[i]).abs())
        .fold(0.0, f64::max);
    let diffusion_residual = (h * h * reverse_ou_diffusion(t) - 1.0).abs();
    Ok(drift_residual.max(diffusion_residual))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prop2Limits {
    /// `alpha b^2 / (1 + alpha b^2 t)`, the shared-component drift coefficient.
    pub coefficient: f64,
    /// `coefficient * t`, tending to 1.
    pub coefficient_times_t: f64,
    /// `Var(Y_{0,t}) = t (1 + alpha b^2 t)` of the integrated representation.
    pub y0_variance: f64,
    /// `Var(coefficient * Y_{0,t})`, tending to `alpha b^2`.
    pub scaled_y0_variance: f64,
    /// `int_0^inf (1 + s)^{-2} ds`, equal to 1.
    pub unit_integral: f64,
}

pub fn prop2_limits(alpha: f64, b: f64, t: f64) -> Result<Prop2Limits> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be >= 0")));
    }
    let kappa = alpha * b * b;
    let coefficient = kappa / (1.0 + kappa * t);
    let y0_variance = t * (1.0 + kappa * t);
    let unit_integral = integrate_half_line(|s| (1.0 + s).powi(-2), QUAD_TOL)?;
    let limits = Prop2Limits {
        coefficient,
        coefficient_times_t: coefficient * t,
        y0_variance,
        scaled_y0_variance: coefficient * coefficient * y0_variance,
        unit_integral,
    };
    if (unit_integral - 1.0).abs() > 10.0 * QUAD_TOL {
        return Err(Error::Consistency(format!("unit integral evaluated to {unit_integral}")));
    }
    Ok(limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoisers::MixtureDenoiser;
    use crate::linalg::psd_sqrt;
    use crate::rng::{chain_rng, normal};
    use crate::targets::{random_orthogonal, TwoGaussianMixture};
    use rand::Rng;

    /// Independent fixed-order rule on the substitution `s = tan(theta)`.
    fn f_oracle(nu: f64, c: f64) -> f64 {
        composite_gauss_legendre(
            |th: f64| {
                let s = th.tan();
                let sec2 = 1.0 + s * s;
                (1.0 + s).powf(-2.0 * (1.0 - nu)) * (c + s).powf(-2.0 * nu) * sec2
            },
            0.0,
            PI / 2.0,
            400,
            20,
        )
    }

    #[test]
    fn f_endpoints() {
        for c in [0.1, 0.25, 0.5, 0.9] {
            assert!((f_nu_c(0.0, c).unwrap() - 1.0).abs() < 1e-10);
            assert!((f_nu_c(1.0, c).unwrap() - 1.0 / c).abs() < 1e-10);
        }
        assert!((f_nu_c(1.0, 0.25).unwrap() - 4.0).abs() < 1e-10);
        assert!(f_nu_c(0.5, 0.0).is_err());
        assert!(f_nu_c(0.5, 1.5).is_err());
    }

    #[test]
    fn f_matches_independent_rule() {
        let a = f_nu_c(0.5, 0.25).unwrap();
        let b = f_oracle(0.5, 0.25);
        assert!((a - b).abs() < 1e-8, "{a} {b}");
        let a = f_nu_c(-0.2, 0.4).unwrap();
        let b = f_oracle(-0.2, 0.4);
        assert!((a - b).abs() < 1e-8, "{a} {b}");
    }

    #[test]
    fn f_prime_quadrature_closed_form_and_finite_difference() {
        for c in [0.1, 0.3, 0.5, 0.8] {
            let q = f_prime_1(c).unwrap();
            let cf = f_prime_1_closed_form(c).unwrap();
            assert!((q - cf).abs() < 1e-9, "c {c}: {q} vs {cf}");
            let f1 = f_nu_c(1.0, c).unwrap();
            let d = |h: f64| (f1 - f_nu_c(1.0 - h, c).unwrap()) / h;
            let rich = 2.0 * d(1e-4) - d(2e-4);
            assert!((rich - q).abs() < 1e-4 * q.abs().max(1.0), "c {c}: {rich} vs {q}");
        }
    }

    #[test]
    fn f_prime_continuity_at_one() {
        let v = f_prime_1(1.0 - 1e-6).unwrap();
        assert!(v.abs() < 1e-5);
        assert_eq!(f_prime_1_closed_form(1.0).unwrap(), 0.0);
    }

    #[test]
    fn fprime_bounds_are_reported() {
        let low = fprime1_report(0.1).unwrap();
        assert!(low.holds());
        let mid = fprime1_report(0.5).unwrap();
        assert!(mid.upper_holds);
        assert!(!mid.lower_holds);
        assert!(matches!(fprime1(0.5), Err(Error::Consistency(_))));
    }

    #[test]
    fn nu_limits() {
        assert_eq!(nu(0.0, 3), 1.0);
        assert!((nu(1e-9, 3) - 1.0).abs() < 1e-12);
        for q in frequencies(64) {
            assert!(nu(q, 3).abs() <= 1.0 + 1e-12);
        }
        // Small-q expansion 1 - r (r + 1) q^2 / 6.
        let q = 1e-3;
        assert!((nu(q, 4) - (1.0 - 20.0 * q * q / 6.0)).abs() < 1e-10);
    }

    #[test]
    fn spectrum_total_mass_and_white_limit() {
        let s = generated_spectrum(64, 3, 0.25).unwrap();
        assert_eq!(s.q.len(), 64);
        assert!((s.one_sigma_one - (1.0 + 7.0 * 0.25) * 64.0).abs() < 1e-12);
        let white = generated_spectrum(16, 2, 0.0).unwrap();
        assert!(white.sigma_x.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(generated_spectrum(4, 2, 0.1).is_err());
    }

    #[test]
    fn correlation_length_matches_direct_sum() {
        let xi = correlation_length_report(3, 0.25).unwrap().xi2;
        let direct = correlation_length_direct(512, 3, 0.25).unwrap();
        assert!((xi - direct).abs() / direct < 0.02, "{xi} vs {direct}");
    }

    #[test]
    fn w2_separation_values() {
        let s = w2_separation(64, 0.25, 3);
        assert!((s.bound - (17f64.sqrt() - 2.75f64.sqrt())).abs() < 1e-12);
        assert!(s.bound >= s.threshold);
        assert!(s.preconditions_hold && s.implication_holds);
        assert_eq!(w2_separation(7, 0.3, 3).bound, 0.0);
        assert_eq!(w2_separation(64, 0.0, 3).bound, 0.0);
    }

    #[test]
    fn sigma_t_limits() {
        let mut rng = chain_rng(1, 0);
        let u = random_orthogonal(4, &mut rng);
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 1.0, 1.5, 2.0]));
        let sigma = &u * lam * u.transpose();
        let zero = sigma_t_covariance(&sigma, 0.0).unwrap();
        assert!(zero.cov.norm() < 1e-15);
        let big = sigma_t_covariance(&sigma, 1e6).unwrap();
        assert!((&big.cov - &sigma).norm() / sigma.norm() <= 1e-5);
        let eye = sigma_t_covariance(&DMatrix::identity(3, 3), 1.0).unwrap();
        assert!((&eye.cov - DMatrix::<f64>::identity(3, 3) * 0.5).norm() < 1e-14);
        assert!((eye.w2_sq - 3.0 * (1.0 - 0.5f64.sqrt()).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn w2_gap_matches_matrix_square_roots() {
        let mut rng = chain_rng(2, 0);
        let u = random_orthogonal(5, &mut rng);
        let lam: Vec<f64> = (0..5).map(|_| 0.5 + 1.5 * rng.random::<f64>()).collect();
        let sigma = &u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lam)) * u.transpose();
        for t in [0.1, 1.0, 10.0] {
            let st = sigma_t_covariance(&sigma, t).unwrap();
            let gap = (psd_sqrt(&sigma).unwrap() - psd_sqrt(&st.cov).unwrap()).norm_squared();
            assert!((gap - st.w2_sq).abs() < 1e-10, "t {t}: {gap} vs {}", st.w2_sq);
        }
    }

    #[test]
    fn reverse_equivalence_residual() {
        let mut a = vec![0.0; 4];
        let mut rng = chain_rng(3, 0);
        a.iter_mut().for_each(|v| *v = normal(&mut rng));
        let d = MixtureDenoiser::new(TwoGaussianMixture::new(a, 0.3).unwrap());
        for _ in 0..100 {
            let t = 10f64.powf(-2.0 + 5.0 * rng.random::<f64>());
            let y: Vec<f64> = (0..4).map(|_| normal(&mut rng)).collect();
            assert!(reverse_equivalence_check(&d, t, &y).unwrap() <= 1e-12);
        }
        assert!(reverse_equivalence_check(&d, 0.0, &[0.0; 4]).is_err());
        assert_eq!(reverse_ou_diffusion(1.0), 0.5);
    }

    #[test]
    fn prop2_values() {
        let l = prop2_limits(0.2, 2.0, 1e6).unwrap();
        assert!((l.coefficient_times_t - 1.0).abs() < 1e-5);
        assert!((l.scaled_y0_variance - 0.8).abs() < 1e-5);
        assert!((l.unit_integral - 1.0).abs() < 1e-10);
        let z = prop2_limits(0.0, 2.0, 10.0).unwrap();
        assert_eq!(z.coefficient, 0.0);
    }
}
