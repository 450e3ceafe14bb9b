//! Posterior-mean denoisers for every observation channel.
//!
//! All Bayes computations run in the log domain with log-sum-exp
//! normalization. Denoisers are immutable and safe to share across chains.

pub mod discrete;
pub mod gaussian;
pub mod guess;
pub mod window;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use discrete::{
    binary_posterior_magnetization, poisson_posterior_mean, qary_posterior_belief,
    HypercubeDenoiser, PoissonAtomDenoiser, QaryDenoiser,
};
pub use gaussian::{
    anisotropic_posterior_mean, bruteforce_posterior_mean_gaussian, gaussian_anisotropic_posterior_mean,
    gaussian_posterior_mean, linear_obs_bruteforce_mean, mixture_denoiser_asymptotics,
    mixture_matching_threshold, mixture_posterior_mean, DiscreteGaussianDenoiser,
    DiscreteLinearObsDenoiser, GaussianLinearDenoiser, IsotropicComponentDenoiser,
    MixtureDenoiser, MixtureSide, ScaledDenoiser,
};
pub use guess::{linear_obs_guess_drift, LinearObsGuess};
pub use window::{
    fit_linear_denoiser, opt_convolution_residual, rank_one_window_kernel,
    windowed_denoiser_closed_form, windowed_denoiser_solve, ConvDenoiser, ConvKernel,
    WindowSpectrum,
};

/// Observation channel a denoiser serves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    IsotropicGaussian,
    AnisotropicGaussian,
    LinearObservation,
    BinarySymmetric,
    Qary,
    Poisson,
}

/// `m(y; t) = E[x | t x + sqrt(t) G = y]`.
pub trait GaussianDenoiser: Send + Sync {
    fn dim(&self) -> usize;

    fn posterior_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()>;

    fn posterior_mean(&self, y: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.posterior_mean_into(y, t, &mut out)?;
        Ok(out)
    }

    fn channel(&self) -> Channel {
        Channel::IsotropicGaussian
    }
}

/// Accumulated precision `Omega` of the anisotropic channel.
#[derive(Clone, Copy, Debug)]
pub enum Omega<'a> {
    /// `Omega = s I`.
    Scalar(f64),
    Matrix(&'a DMatrix<f64>),
}

/// `m(y; Omega) = E[x | Omega x + Omega^{1/2} G = y]`.
///
/// For singular `Omega` the likelihood lives on `range(Omega)`; observations
/// with a component outside the range are rejected.
pub trait AnisotropicDenoiser: Send + Sync {
    fn dim(&self) -> usize;

    fn posterior_mean_omega_into(&self, y: &[f64], omega: Omega<'_>, out: &mut [f64]) -> Result<()>;

    fn channel(&self) -> Channel {
        Channel::AnisotropicGaussian
    }
}

/// Denoiser for `Y_t = t A x + B_t` with `A` of shape `m x n`.
pub trait LinearObsDenoiser: Send + Sync {
    /// `m`, the observation dimension.
    fn obs_dim(&self) -> usize;
    /// `n`, the signal dimension.
    fn signal_dim(&self) -> usize;
    /// Drift `m_A(y; t)`, an estimate of `A x`.
    fn observation_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()>;
    /// Estimate of `x` itself, used as the decode.
    fn signal_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()>;

    fn channel(&self) -> Channel {
        Channel::LinearObservation
    }
}

/// `m_i(t; y) = E[x_i | Y_t = y]` on the binary symmetric channel.
pub trait MagnetizationDenoiser: Send + Sync {
    fn dim(&self) -> usize;

    fn magnetization_into(&self, y: &[i8], t: f64, out: &mut [f64]) -> Result<()>;

    fn magnetization(&self, y: &[i8], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.magnetization_into(y, t, &mut out)?;
        Ok(out)
    }

    fn channel(&self) -> Channel {
        Channel::BinarySymmetric
    }
}

/// `b_i(y, z; t) = P(x_i = z | Y_t = y)`, written row-major into an `n x q` buffer.
pub trait BeliefDenoiser: Send + Sync {
    fn dim(&self) -> usize;
    fn alphabet(&self) -> usize;

    fn beliefs_into(&self, y: &[usize], t: f64, out: &mut [f64]) -> Result<()>;

    fn beliefs(&self, y: &[usize], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim() * self.alphabet()];
        self.beliefs_into(y, t, &mut out)?;
        Ok(out)
    }

    fn channel(&self) -> Channel {
        Channel::Qary
    }
}

/// `m_k(t; y) = E[x_k | Y_t = y]` on the Poisson channel.
pub trait PoissonDenoiser: Send + Sync {
    fn dim(&self) -> usize;

    fn posterior_mean_into(&self, y: &[u64], t: f64, out: &mut [f64]) -> Result<()>;

    fn posterior_mean(&self, y: &[u64], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.posterior_mean_into(y, t, &mut out)?;
        Ok(out)
    }

    fn channel(&self) -> Channel {
        Channel::Poisson
    }
}

impl<D: GaussianDenoiser + ?Sized> GaussianDenoiser for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn posterior_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        (**self).posterior_mean_into(y, t, out)
    }
}

impl<D: GaussianDenoiser + ?Sized> GaussianDenoiser for Box<D> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn posterior_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        (**self).posterior_mean_into(y, t, out)
    }
}
