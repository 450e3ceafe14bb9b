//! KL divergences between a true observation process and an approximate one.
//!
//! Time integrals use left-endpoint quadrature on the simulation grid.
//! Transitions the approximate process cannot make are reported as flags;
//! the finite part of the estimate is still returned.

use std::fmt::Debug;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::denoisers::{AnisotropicDenoiser, GaussianDenoiser, MagnetizationDenoiser, Omega, PoissonDenoiser};
use crate::error::{check_dim, Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{check_psd, mat_vec, psd_sqrt};
use crate::processes::gaussian::forward_observation_path;
use crate::processes::{binary_flip_rate, forward_binary_noise, EnumeratedLaw, QSchedule};
use crate::rng::{fill_normal, run_chains, ChainRng};
use crate::targets::{HypercubeTarget, NonnegativeTarget, Target};

/// Transition to which the approximate process assigns zero probability or rate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfiniteKlFlag {
    pub path: usize,
    pub t: f64,
    pub coordinate: usize,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KLReport {
    /// Mean over paths, in nats, excluding infinite contributions.
    pub estimate: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// `(t_k, mean integrand at t_k)` when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_time: Option<Vec<(f64, f64)>>,
    pub flags: Vec<InfiniteKlFlag>,
}

impl KLReport {
    pub fn is_infinite(&self) -> bool {
        !self.flags.is_empty()
    }

    /// Exact value with zero standard error.
    pub fn exact(value: f64) -> Self {
        Self { estimate: value, stderr: 0.0, n_paths: 0, per_time: None, flags: Vec::new() }
    }
}

struct PathValue {
    total: f64,
    integrand: Vec<f64>,
    flags: Vec<InfiniteKlFlag>,
}

fn summarize(values: Vec<PathValue>, grid: Option<&TimeGrid>, per_time: bool) -> KLReport {
    let n = values.len();
    let mean = values.iter().map(|v| v.total).sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v.total - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let per_time = match (per_time, grid) {
        (true, Some(grid)) => Some(
            grid.steps_iter()
                .map(|(k, t, _)| (t, values.iter().map(|v| v.integrand[k]).sum::<f64>() / n as f64))
                .collect(),
        ),
        _ => None,
    };
    let flags = values.into_iter().flat_map(|v| v.flags).collect();
    KLReport { estimate: mean, stderr: (var / n as f64).sqrt(), n_paths: n, per_time, flags }
}

fn require_paths(n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be >= 1".into()));
    }
    Ok(())
}

/// `1/2 int_0^T E ||m - m_hat||^2 dt` over forward paths `Y_t = t x + W_t`,
/// `x` drawn exactly from the target.
pub fn kl_gaussian_drift<D1, D2>(
    denoiser: &D1,
    denoiser_hat: &D2,
    target: &Target,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    per_time: bool,
) -> Result<KLReport>
where
    D1: GaussianDenoiser + ?Sized,
    D2: GaussianDenoiser + ?Sized,
{
    require_paths(n_paths)?;
    let n = target.dim();
    check_dim(n, denoiser.dim())?;
    check_dim(n, denoiser_hat.dim())?;
    let values = run_chains(n_paths, seed, |_, rng| -> Result<PathValue> {
        let x = target.sample_exact(rng);
        let path = forward_observation_path(&x, grid, rng);
        let mut m = vec![0.0; n];
        let mut m_hat = vec![0.0; n];
        let mut integrand = Vec::with_capacity(grid.steps());
        let mut total = 0.0;
        for (k, t, dt) in grid.steps_iter() {
            denoiser.posterior_mean_into(&path[k], t, &mut m)?;
            denoiser_hat.posterior_mean_into(&path[k], t, &mut m_hat)?;
            let v = 0.5 * m.iter().zip(&m_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            integrand.push(v);
            total += v * dt;
        }
        Ok(PathValue { total, integrand, flags: Vec::new() })
    });
    Ok(summarize(values.into_iter().collect::<Result<_>>()?, Some(grid), per_time))
}

/// Anisotropic version: `1/2 int E (m - m_hat)^T Q (m - m_hat) dt` with
/// forward paths `dY = Q x dt + Q^{1/2} dB` and `dOmega = Q dt`.
#[allow(clippy::too_many_arguments)]
pub fn kl_gaussian_drift_anisotropic<D1, D2>(
    denoiser: &D1,
    denoiser_hat: &D2,
    q: &QSchedule,
    target: &Target,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    per_time: bool,
) -> Result<KLReport>
where
    D1: AnisotropicDenoiser + ?Sized,
    D2: AnisotropicDenoiser + ?Sized,
{
    require_paths(n_paths)?;
    let n = target.dim();
    check_dim(n, denoiser.dim())?;
    check_dim(n, denoiser_hat.dim())?;
    let mut qs = Vec::with_capacity(grid.steps());
    let mut roots = Vec::with_capacity(grid.steps());
    for (_, t, _) in grid.steps_iter() {
        let qk = match q {
            QSchedule::ScaledIdentity(c) => DMatrix::from_diagonal_element(n, n, *c),
            QSchedule::Constant(m) => m.clone(),
            QSchedule::TimeVarying(f) => f(t),
        };
        check_dim(n, qk.nrows())?;
        check_dim(n, qk.ncols())?;
        check_psd(&qk, "Q")?;
        roots.push(psd_sqrt(&qk)?);
        qs.push(qk);
    }
    let values = run_chains(n_paths, seed, |_, rng| -> Result<PathValue> {
        let x = target.sample_exact(rng);
        let mut y = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut omega = DMatrix::<f64>::zeros(n, n);
        let mut m = vec![0.0; n];
        let mut m_hat = vec![0.0; n];
        let mut integrand = Vec::with_capacity(grid.steps());
        let mut total = 0.0;
        for (k, _, dt) in grid.steps_iter() {
            denoiser.posterior_mean_omega_into(&y, Omega::Matrix(&omega), &mut m)?;
            denoiser_hat.posterior_mean_omega_into(&y, Omega::Matrix(&omega), &mut m_hat)?;
            let diff: Vec<f64> = m.iter().zip(&m_hat).map(|(a, b)| a - b).collect();
            let v = 0.5 * diff.iter().zip(mat_vec(&qs[k], &diff)).map(|(a, b)| a * b).sum::<f64>();
            integrand.push(v);
            total += v * dt;
            fill_normal(rng, &mut g);
            let drift = mat_vec(&qs[k], &x);
            let noise = mat_vec(&roots[k], &g);
            let sd = dt.sqrt();
            for i in 0..n {
                y[i] += drift[i] * dt + sd * noise[i];
            }
            omega += &qs[k] * dt;
        }
        Ok(PathValue { total, integrand, flags: Vec::new() })
    });
    Ok(summarize(values.into_iter().collect::<Result<_>>()?, Some(grid), per_time))
}

/// Discrete-time Markov chain given by its transition kernels.
pub trait ChainKernel: Sync {
    type State: Clone + Debug + Send + Sync;

    /// Number of transitions.
    fn steps(&self) -> usize;

    /// `ln P(to | from)` at transition `step`; `-inf` when impossible.
    fn log_prob(&self, step: usize, from: &Self::State, to: &Self::State) -> f64;
}

/// Erasure chain revealing coordinates in a fixed order. State `k` holds the
/// first `k` revealed values; kernels are the conditionals of `law`.
#[derive(Clone, Debug)]
pub struct ErasureChain {
    law: EnumeratedLaw,
    order: Vec<usize>,
}

impl ErasureChain {
    pub fn new(law: EnumeratedLaw, order: Vec<usize>) -> Result<Self> {
        let n = law.dim();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidArgument(format!("order is not a permutation of 0..{n}")));
        }
        Ok(Self { law, order })
    }

    pub fn law(&self) -> &EnumeratedLaw {
        &self.law
    }

    /// States visited while revealing `x`.
    pub fn path_of(&self, x: &[f64]) -> Vec<Vec<Option<f64>>> {
        let mut state = vec![None; self.law.dim()];
        let mut path = vec![state.clone()];
        for &i in &self.order {
            state[i] = Some(x[i]);
            path.push(state.clone());
        }
        path
    }

    fn mass(&self, state: &[Option<f64>]) -> f64 {
        self.law
            .points()
            .iter()
            .zip(self.law.weights())
            .filter(|(p, _)| state.iter().zip(p.iter()).all(|(s, v)| s.is_none_or(|s| s == *v)))
            .map(|(_, w)| w)
            .sum()
    }
}

impl ChainKernel for ErasureChain {
    type State = Vec<Option<f64>>;

    fn steps(&self) -> usize {
        self.order.len()
    }

    fn log_prob(&self, step: usize, from: &Self::State, to: &Self::State) -> f64 {
        let i = self.order[step];
        let consistent = from.iter().zip(to).enumerate().all(|(j, (a, b))| if j == i { a.is_none() && b.is_some() } else { a == b });
        if !consistent {
            return f64::NEG_INFINITY;
        }
        let denom = self.mass(from);
        let num = self.mass(to);
        if denom <= 0.0 || num <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (num / denom).ln()
    }
}

fn chain_log_ratio<K1, K2>(kernel: &K1, kernel_hat: &K2, path: &[K1::State], index: usize) -> (f64, Vec<f64>, Vec<InfiniteKlFlag>)
where
    K1: ChainKernel + ?Sized,
    K2: ChainKernel<State = K1::State> + ?Sized,
{
    let mut total = 0.0;
    let mut per_step = Vec::with_capacity(kernel.steps());
    let mut flags = Vec::new();
    for step in 0..kernel.steps() {
        let lp = kernel.log_prob(step, &path[step], &path[step + 1]);
        let lq = kernel_hat.log_prob(step, &path[step], &path[step + 1]);
        let v = if lq == f64::NEG_INFINITY && lp > f64::NEG_INFINITY {
            flags.push(InfiniteKlFlag {
                path: index,
                t: step as f64,
                coordinate: step,
                detail: format!("{:?} -> {:?}", path[step], path[step + 1]),
            });
            0.0
        } else {
            lp - lq
        };
        per_step.push(v);
        total += v;
    }
    (total, per_step, flags)
}

/// Monte Carlo `E_P sum_t ln(P_t / P_hat_t)` over paths drawn by `sample_path`.
pub fn kl_discrete_chain<K1, K2, F>(kernel: &K1, kernel_hat: &K2, sample_path: F, n_paths: usize, seed: u64) -> Result<KLReport>
where
    K1: ChainKernel + ?Sized,
    K2: ChainKernel<State = K1::State> + ?Sized,
    F: Fn(&mut ChainRng) -> Vec<K1::State> + Sync + Send,
{
    require_paths(n_paths)?;
    if kernel.steps() != kernel_hat.steps() {
        return Err(Error::Dimension { expected: kernel.steps(), got: kernel_hat.steps() });
    }
    let values = run_chains(n_paths, seed, |i, rng| -> Result<PathValue> {
        let path = sample_path(rng);
        check_dim(kernel.steps() + 1, path.len())?;
        let (total, integrand, flags) = chain_log_ratio(kernel, kernel_hat, &path, i as usize);
        Ok(PathValue { total, integrand, flags })
    });
    Ok(summarize(values.into_iter().collect::<Result<_>>()?, None, false))
}

/// Exact KL between two erasure chains with the same reveal order, by
/// enumerating every path of the true chain.
pub fn kl_erasure_exact(chain: &ErasureChain, chain_hat: &ErasureChain) -> Result<KLReport> {
    if chain.order != chain_hat.order {
        return Err(Error::InvalidArgument("erasure chains must share the reveal order".into()));
    }
    check_dim(chain.law.dim(), chain_hat.law.dim())?;
    let mut total = 0.0;
    let mut flags = Vec::new();
    for (j, (x, w)) in chain.law.points().iter().zip(chain.law.weights()).enumerate() {
        if *w <= 0.0 {
            continue;
        }
        let path = chain.path_of(x);
        let (v, _, f) = chain_log_ratio(chain, chain_hat, &path, j);
        total += w * v;
        flags.extend(f);
    }
    Ok(KLReport { flags, ..KLReport::exact(total) })
}

/// `sum_x mu(x) ln(mu(x) / mu_hat(x))` over a shared support listing.
pub fn kl_enumerated(law: &EnumeratedLaw, law_hat: &EnumeratedLaw) -> Result<f64> {
    if law.points() != law_hat.points() {
        return Err(Error::InvalidArgument("laws must list the same points".into()));
    }
    let mut total = 0.0;
    for (p, q) in law.weights().iter().zip(law_hat.weights()) {
        if *p > 0.0 {
            if *q <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += p * (p / q).ln();
        }
    }
    Ok(total)
}

/// `Delta(r || r_hat) = r ln(r / r_hat) - r + r_hat`, the KL between Poisson
/// counts with means `r` and `r_hat`. Infinite when `r_hat = 0 < r`.
pub fn delta(r: f64, r_hat: f64) -> f64 {
    if r == 0.0 {
        r_hat
    } else if r_hat == 0.0 {
        f64::INFINITY
    } else {
        r * (r / r_hat).ln() - r + r_hat
    }
}

/// `int E sum_i Delta(p_i || p_hat_i) dt` for the binary symmetric channel,
/// over forward noise paths of exact target samples.
pub fn kl_ctmc_binary<D1, D2>(
    denoiser: &D1,
    denoiser_hat: &D2,
    target: &HypercubeTarget,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<KLReport>
where
    D1: MagnetizationDenoiser + ?Sized,
    D2: MagnetizationDenoiser + ?Sized,
{
    require_paths(n_paths)?;
    if !(grid.start() > 0.0 && grid.final_time() < 1.0) {
        return Err(Error::InvalidArgument("binary rates need a grid inside (0, 1)".into()));
    }
    let n = target.dim();
    check_dim(n, denoiser.dim())?;
    check_dim(n, denoiser_hat.dim())?;
    let values = run_chains(n_paths, seed, |i, rng| -> Result<PathValue> {
        let x = target.sample(rng);
        let path = forward_binary_noise(&x, rng)?;
        let mut m = vec![0.0; n];
        let mut m_hat = vec![0.0; n];
        let mut integrand = Vec::with_capacity(grid.steps());
        let mut flags = Vec::new();
        let mut total = 0.0;
        for (_, t, dt) in grid.steps_iter() {
            let y = path.at(t);
            denoiser.magnetization_into(&y, t, &mut m)?;
            denoiser_hat.magnetization_into(&y, t, &mut m_hat)?;
            let mut v = 0.0;
            for c in 0..n {
                let r = binary_flip_rate(y[c], m[c], t).max(0.0);
                let r_hat = binary_flip_rate(y[c], m_hat[c], t).max(0.0);
                let d = delta(r, r_hat);
                if d.is_infinite() {
                    flags.push(InfiniteKlFlag { path: i as usize, t, coordinate: c, detail: format!("rate {r} vs 0") });
                } else {
                    v += d;
                }
            }
            integrand.push(v);
            total += v * dt;
        }
        Ok(PathValue { total, integrand, flags })
    });
    Ok(summarize(values.into_iter().collect::<Result<_>>()?, Some(grid), false))
}

/// `int E sum_k Delta(m_k || m_hat_k) dt` for the Poisson channel with rates
/// held constant between grid nodes.
pub fn kl_ctmc_poisson<D1, D2>(
    denoiser: &D1,
    denoiser_hat: &D2,
    target: &NonnegativeTarget,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<KLReport>
where
    D1: PoissonDenoiser + ?Sized,
    D2: PoissonDenoiser + ?Sized,
{
    require_paths(n_paths)?;
    let n = target.dim();
    check_dim(n, denoiser.dim())?;
    check_dim(n, denoiser_hat.dim())?;
    let values = run_chains(n_paths, seed, |i, rng| -> Result<PathValue> {
        let x = target.inner().sample(rng);
        let mut y: Vec<u64> = x.iter().map(|xk| poisson_draw(xk * grid.start(), rng)).collect::<Result<_>>()?;
        let mut m = vec![0.0; n];
        let mut m_hat = vec![0.0; n];
        let mut integrand = Vec::with_capacity(grid.steps());
        let mut flags = Vec::new();
        let mut total = 0.0;
        for (_, t, dt) in grid.steps_iter() {
            denoiser.posterior_mean_into(&y, t, &mut m)?;
            denoiser_hat.posterior_mean_into(&y, t, &mut m_hat)?;
            let mut v = 0.0;
            for k in 0..n {
                let d = delta(m[k], m_hat[k]);
                if d.is_infinite() {
                    flags.push(InfiniteKlFlag { path: i as usize, t, coordinate: k, detail: format!("rate {} vs 0", m[k]) });
                } else {
                    v += d;
                }
            }
            integrand.push(v);
            total += v * dt;
            for k in 0..n {
                y[k] += poisson_draw(x[k] * dt, rng)?;
            }
        }
        Ok(PathValue { total, integrand, flags })
    });
    Ok(summarize(values.into_iter().collect::<Result<_>>()?, Some(grid), false))
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(d.sample(rng) as u64)
}

/// Two-state chain on `{0, 1}` with constant rates, started in state 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoStateCtmc {
    pub rate_up: f64,
    pub rate_down: f64,
}

impl TwoStateCtmc {
    pub fn new(rate_up: f64, rate_down: f64) -> Result<Self> {
        if !(rate_up >= 0.0 && rate_down >= 0.0 && rate_up.is_finite() && rate_down.is_finite()) {
            return Err(Error::InvalidArgument("rates must be finite and >= 0".into()));
        }
        Ok(Self { rate_up, rate_down })
    }

    fn rate(&self, state: u8) -> f64 {
        if state == 0 {
            self.rate_up
        } else {
            self.rate_down
        }
    }

    /// Exact path on `[0, horizon]` as `(jump time, new state)` pairs.
    pub fn simulate<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Vec<(f64, u8)> {
        let mut t = 0.0;
        let mut state = 0u8;
        let mut jumps = Vec::new();
        loop {
            let r = self.rate(state);
            if r == 0.0 {
                return jumps;
            }
            t += -(1.0 - rng.random::<f64>()).ln() / r;
            if t > horizon {
                return jumps;
            }
            state ^= 1;
            jumps.push((t, state));
        }
    }

    /// `ln dP/dP_hat` of a path on `[0, horizon]`.
    pub fn log_likelihood_ratio(&self, other: &Self, jumps: &[(f64, u8)], horizon: f64) -> f64 {
        let mut state = 0u8;
        let mut last = 0.0;
        let mut value = 0.0;
        for &(t, next) in jumps {
            value += (self.rate(state) / other.rate(state)).ln() - (self.rate(state) - other.rate(state)) * (t - last);
            state = next;
            last = t;
        }
        value - (self.rate(state) - other.rate(state)) * (horizon - last)
    }

    /// `int_0^T sum_s P(Y_t = s) Delta(r_s || r_hat_s) dt` in closed form.
    pub fn kl_formula(&self, other: &Self, horizon: f64) -> f64 {
        let total = self.rate_up + self.rate_down;
        // Time spent in state 1, integrated from P(Y_0 = 1) = 0.
        let time_up = if total == 0.0 {
            0.0
        } else {
            let pi = self.rate_up / total;
            pi * horizon - pi * (1.0 - (-total * horizon).exp()) / total
        };
        (horizon - time_up) * delta(self.rate_up, other.rate_up) + time_up * delta(self.rate_down, other.rate_down)
    }
}

/// Monte Carlo mean of the path log-likelihood ratio.
pub fn kl_two_state_paths(chain: &TwoStateCtmc, chain_hat: &TwoStateCtmc, horizon: f64, n_paths: usize, seed: u64) -> Result<KLReport> {
    require_paths(n_paths)?;
    let values = run_chains(n_paths, seed, |_, rng| {
        let jumps = chain.simulate(horizon, rng);
        PathValue { total: chain.log_likelihood_ratio(chain_hat, &jumps, horizon), integrand: Vec::new(), flags: Vec::new() }
    });
    Ok(summarize(values, None, false))
}
