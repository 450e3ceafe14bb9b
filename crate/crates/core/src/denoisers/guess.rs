//! Closed-form guess drifts for the rank-one linear observation model.
//!
//! Target `x ~ N(0, I + alpha 1 1^T)` in `R^n`, observed through
//! `L x = (b <1, x> / n, x)`, so the observation is `(y_0, y_*)` in `R^{n+1}`.

use nalgebra::DMatrix;

use super::LinearObsDenoiser;
use crate::error::{check_dim, check_finite, Error, Result};

/// Guess drifts `(m_0, m_*)`:
///
/// `m_0 = alpha b^2 y_0 / (1 + alpha b^2 t)`,
/// `m_* = (y_* - alpha b y_0 / (1 + alpha b^2 t) 1) / (1 + t) + alpha b y_0 / (1 + alpha b^2 t) 1`.
///
/// `m_0` is the Bayes estimate of `z_0 = b <1, x> / n` from `y_0` alone, up to
/// `O(1/n)`; `m_*` plugs the implied estimate of the shared component into
/// the per-coordinate shrinkage.
pub fn linear_obs_guess_drift(y0: f64, y_star: &[f64], t: f64, alpha: f64, b: f64) -> (f64, Vec<f64>) {
    let k = 1.0 + alpha * b * b * t;
    let m0 = alpha * b * b * y0 / k;
    let shared = alpha * b * y0 / k;
    let m_star = y_star.iter().map(|y| (y - shared) / (1.0 + t) + shared).collect();
    (m0, m_star)
}

/// The observation operator `L = [b/n 1^T; I_n]`.
pub fn rank_one_observation_operator(n: usize, b: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n + 1, n, |i, j| {
        if i == 0 {
            b / n as f64
        } else if i - 1 == j {
            1.0
        } else {
            0.0
        }
    })
}

/// Linear-observation denoiser given by the guess drifts; the decode is `m_*`.
#[derive(Clone, Debug)]
pub struct LinearObsGuess {
    n: usize,
    alpha: f64,
    b: f64,
}

impl LinearObsGuess {
    pub fn new(n: usize, alpha: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be >= 1".into()));
        }
        if !(alpha >= 0.0 && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid alpha {alpha} or b {b}")));
        }
        Ok(Self { n, alpha, b })
    }
}

impl LinearObsDenoiser for LinearObsGuess {
    fn obs_dim(&self) -> usize {
        self.n + 1
    }

    fn signal_dim(&self) -> usize {
        self.n
    }

    fn observation_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_dim(self.n + 1, y.len())?;
        check_dim(self.n + 1, out.len())?;
        check_finite(y, "observation")?;
        let (m0, ms) = linear_obs_guess_drift(y[0], &y[1..], t, self.alpha, self.b);
        out[0] = m0;
        out[1..].copy_from_slice(&ms);
        Ok(())
    }

    fn signal_mean_into(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_dim(self.n + 1, y.len())?;
        check_dim(self.n, out.len())?;
        check_finite(y, "observation")?;
        let (_, ms) = linear_obs_guess_drift(y[0], &y[1..], t, self.alpha, self.b);
        out.copy_from_slice(&ms);
        Ok(())
    }
}
