//! Joint observation of two processes.
//!
//! Combining two processes observes both histories; the combined denoiser
//! conditions on both. Concrete combinations cover the isotropic Gaussian
//! channel, the erasure process and the trivial process, with brute-force
//! conditioning over an enumerated law.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{dot, log_sum_exp, norm_sq};
use crate::rng::fill_normal;

use super::discrete::EnumeratedLaw;

#[derive(Clone, Debug, PartialEq)]
pub enum ObservationProcess {
    /// Carries no information.
    Trivial,
    /// `Y_t = snr t x + W_{snr t}`.
    IsotropicGaussian { snr: f64 },
    /// Coordinate `i` revealed at `reveal_times[i]`, never when `None`.
    Erasure { reveal_times: Vec<Option<f64>> },
    /// Both of the above observed together.
    GaussianErasure { snr: f64, reveal_times: Vec<Option<f64>> },
}

impl ObservationProcess {
    fn parts(&self) -> (f64, Option<&[Option<f64>]>) {
        match self {
            ObservationProcess::Trivial => (0.0, None),
            ObservationProcess::IsotropicGaussian { snr } => (*snr, None),
            ObservationProcess::Erasure { reveal_times } => (0.0, Some(reveal_times)),
            ObservationProcess::GaussianErasure { snr, reveal_times } => (*snr, Some(reveal_times)),
        }
    }

    fn from_parts(snr: f64, reveal_times: Option<Vec<Option<f64>>>) -> Self {
        match (snr > 0.0, reveal_times) {
            (false, None) => ObservationProcess::Trivial,
            (true, None) => ObservationProcess::IsotropicGaussian { snr },
            (false, Some(reveal_times)) => ObservationProcess::Erasure { reveal_times },
            (true, Some(reveal_times)) => ObservationProcess::GaussianErasure { snr, reveal_times },
        }
    }

    fn validate(&self) -> Result<()> {
        let (snr, times) = self.parts();
        if !(snr.is_finite() && snr >= 0.0) {
            return Err(Error::InvalidArgument(format!("snr = {snr} must be finite and >= 0")));
        }
        if let Some(times) = times {
            if times.iter().flatten().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(Error::InvalidArgument("reveal times must be finite and >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Joint process observing both inputs.
///
/// Independent Gaussian observations add their signal-to-noise rates, since
/// the sum of the two paths is sufficient. Erasures reveal each coordinate
/// at the earlier of the two reveal times.
pub fn combine_processes(a: &ObservationProcess, b: &ObservationProcess) -> Result<ObservationProcess> {
    a.validate()?;
    b.validate()?;
    let (snr_a, times_a) = a.parts();
    let (snr_b, times_b) = b.parts();
    let times = match (times_a, times_b) {
        (None, None) => None,
        (Some(t), None) | (None, Some(t)) => Some(t.to_vec()),
        (Some(ta), Some(tb)) => {
            check_dim(ta.len(), tb.len())?;
            Some(
                ta.iter()
                    .zip(tb)
                    .map(|(x, y)| match (x, y) {
                        (Some(x), Some(y)) => Some(x.min(*y)),
                        (Some(x), None) | (None, Some(x)) => Some(*x),
                        (None, None) => None,
                    })
                    .collect(),
            )
        }
    };
    Ok(ObservationProcess::from_parts(snr_a + snr_b, times))
}

/// Observation of a combined process at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinedObservation {
    pub t: f64,
    /// Gaussian path value; ignored when the process has no Gaussian part.
    pub y: Vec<f64>,
    /// Revealed coordinate values.
    pub revealed: Vec<Option<f64>>,
}

/// `E[x | observation]` by enumeration of the law.
pub fn combined_posterior_mean(
    law: &EnumeratedLaw,
    process: &ObservationProcess,
    obs: &CombinedObservation,
) -> Result<Vec<f64>> {
    let weights = posterior_weights(law, process, obs)?;
    let mut mean = vec![0.0; law.dim()];
    for (p, w) in law.points().iter().zip(&weights) {
        if *w > 0.0 {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += w * v;
            }
        }
    }
    for (i, r) in obs.revealed.iter().enumerate() {
        if let Some(v) = r {
            mean[i] = *v;
        }
    }
    Ok(mean)
}

fn posterior_weights(law: &EnumeratedLaw, process: &ObservationProcess, obs: &CombinedObservation) -> Result<Vec<f64>> {
    process.validate()?;
    let n = law.dim();
    check_dim(n, obs.revealed.len())?;
    let (snr, _) = process.parts();
    if snr > 0.0 {
        check_dim(n, obs.y.len())?;
    }
    let s = snr * obs.t;
    let logits: Vec<f64> = law
        .points()
        .iter()
        .zip(law.weights())
        .map(|(p, w)| {
            let consistent = obs
                .revealed
                .iter()
                .zip(p)
                .all(|(r, v)| r.is_none_or(|r| r == *v));
            if *w <= 0.0 || !consistent {
                f64::NEG_INFINITY
            } else if snr > 0.0 {
                w.ln() + dot(&obs.y, p) - 0.5 * s * norm_sq(p)
            } else {
                w.ln()
            }
        })
        .collect();
    let z = log_sum_exp(&logits);
    if !z.is_finite() {
        return Err(Error::ZeroPosterior);
    }
    Ok(logits.iter().map(|l| (l - z).exp()).collect())
}

fn sample_coordinate<R: Rng + ?Sized>(law: &EnumeratedLaw, weights: &[f64], i: usize, rng: &mut R) -> f64 {
    let mut values: Vec<(f64, f64)> = Vec::new();
    for (p, w) in law.points().iter().zip(weights) {
        if *w > 0.0 {
            match values.iter_mut().find(|(v, _)| *v == p[i]) {
                Some(e) => e.1 += w,
                None => values.push((p[i], *w)),
            }
        }
    }
    let total: f64 = values.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for (v, w) in &values {
        if u < *w {
            return *v;
        }
        u -= w;
    }
    values[values.len() - 1].0
}

/// Generative sampler for a combined process over an enumerated law.
///
/// Runs on the grid clock: at each node, coordinates whose reveal time has
/// passed are drawn from their posterior conditional, then the Gaussian
/// part takes an Euler step with the joint posterior mean as drift.
/// Returns the posterior mean at the final node, with revealed coordinates
/// exact.
pub fn simulate_combined<R: Rng + ?Sized>(
    process: &ObservationProcess,
    law: &EnumeratedLaw,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<Vec<f64>> {
    process.validate()?;
    let n = law.dim();
    let (snr, times) = process.parts();
    if let Some(times) = times {
        check_dim(n, times.len())?;
    }
    if matches!(process, ObservationProcess::Trivial) {
        return Err(Error::InvalidArgument("the trivial process cannot generate samples".into()));
    }
    if snr > 0.0 && grid.start() != 0.0 {
        return Err(Error::InvalidArgument("Gaussian part starts from Y = 0 at t = 0".into()));
    }
    let mut obs = CombinedObservation { t: grid.start(), y: vec![0.0; n], revealed: vec![None; n] };
    let mut order: Vec<(f64, usize)> = times
        .map(|ts| ts.iter().enumerate().filter_map(|(i, t)| t.map(|t| (t, i))).collect())
        .unwrap_or_default();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut next = 0;
    let mut g = vec![0.0; n];

    let reveal_until = |obs: &mut CombinedObservation, t: f64, next: &mut usize, rng: &mut R| -> Result<()> {
        while *next < order.len() && order[*next].0 <= t {
            let i = order[*next].1;
            let w = posterior_weights(law, process, obs)?;
            obs.revealed[i] = Some(sample_coordinate(law, &w, i, rng));
            *next += 1;
        }
        Ok(())
    };

    for (_, t, dt) in grid.steps_iter() {
        obs.t = t;
        reveal_until(&mut obs, t, &mut next, rng)?;
        if snr > 0.0 {
            let m = combined_posterior_mean(law, process, &obs)?;
            fill_normal(rng, &mut g);
            let sd = (snr * dt).sqrt();
            for i in 0..n {
                obs.y[i] += snr * m[i] * dt + sd * g[i];
            }
        }
    }
    let t_final = grid.final_time();
    obs.t = t_final;
    reveal_until(&mut obs, t_final, &mut next, rng)?;
    combined_posterior_mean(law, process, &obs)
}
