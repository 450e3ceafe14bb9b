//! Discrete observation processes: erasure, symmetric noise and Poisson.
//!
//! Continuous-time chains are simulated by thinning: within a substep of
//! length `h`, coordinate `i` jumps with probability `rate_i * h`. Substeps
//! are shortened until the largest jump probability is at most
//! `ThinningOptions::max_flip`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::denoisers::{BeliefDenoiser, MagnetizationDenoiser, PoissonDenoiser};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::targets::{HypercubeTarget, QaryTarget, Target};

/// Rates below zero by more than this are reported as errors.
pub const RATE_TOLERANCE: f64 = 1e-9;

/// Finite law listed point by point.
#[derive(Clone, Debug, PartialEq)]
pub struct EnumeratedLaw {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl EnumeratedLaw {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidTarget("points and weights must be non-empty and equal in length".into()));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidTarget("points of unequal dimension".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidTarget("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidTarget("weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { dim, points, weights })
    }

    /// Enumerates a target with finite support.
    pub fn from_target(target: &Target) -> Result<Self> {
        match target {
            Target::Discrete(d) => Self::new(d.atoms().to_vec(), d.weights().to_vec()),
            Target::Nonnegative(d) => Self::new(d.inner().atoms().to_vec(), d.inner().weights().to_vec()),
            Target::Hypercube(h) => Ok(Self::from_hypercube(h)),
            Target::Qary(q) => Ok(Self::from_qary(q)),
            _ => Err(Error::InvalidTarget("target has no finite support to enumerate".into())),
        }
    }

    pub fn from_hypercube(target: &HypercubeTarget) -> Self {
        let n = target.dim();
        let points = (0..target.table().len())
            .map(|idx| HypercubeTarget::config(n, idx).into_iter().map(f64::from).collect())
            .collect();
        Self { dim: n, points, weights: target.table().to_vec() }
    }

    pub fn from_qary(target: &QaryTarget) -> Self {
        let (n, q) = (target.dim(), target.alphabet());
        let points = (0..target.table().len())
            .map(|idx| QaryTarget::config(n, q, idx).into_iter().map(|s| s as f64).collect())
            .collect();
        Self { dim: n, points, weights: target.table().to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Order in which the erasure process reveals coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RevealOrder {
    /// Coordinate `i` is revealed at an independent uniform time `T_i`.
    UniformRandomTimes,
    /// Deterministic permutation of `0..n`.
    Fixed(Vec<usize>),
}

impl RevealOrder {
    /// Reveal time of each coordinate in `[0, 1]`. Fixed orders use
    /// `T_{order[k]} = (k + 1) / (n + 1)`.
    pub fn reveal_times<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            RevealOrder::UniformRandomTimes => Ok((0..n).map(|_| rng.random::<f64>()).collect()),
            RevealOrder::Fixed(order) => {
                validate_permutation(order, n)?;
                let mut times = vec![0.0; n];
                for (k, &i) in order.iter().enumerate() {
                    times[i] = (k + 1) as f64 / (n + 1) as f64;
                }
                Ok(times)
            }
        }
    }

    /// Coordinates sorted by reveal time.
    pub fn resolve<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        match self {
            RevealOrder::Fixed(order) => {
                validate_permutation(order, n)?;
                Ok(order.clone())
            }
            RevealOrder::UniformRandomTimes => {
                let times = self.reveal_times(n, rng)?;
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
                Ok(order)
            }
        }
    }
}

fn validate_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::InvalidArgument(format!("order has {} entries, expected {n}", order.len())));
    }
    for &i in order {
        if i >= n || seen[i] {
            return Err(Error::InvalidArgument(format!("order is not a permutation of 0..{n}")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Draws `x_i` from its conditional law given the already revealed
/// coordinates, one coordinate at a time.
pub fn simulate_erasure<R: Rng + ?Sized>(law: &EnumeratedLaw, order: &RevealOrder, rng: &mut R) -> Result<Vec<f64>> {
    let n = law.dim();
    let order = order.resolve(n, rng)?;
    let mut alive: Vec<usize> = (0..law.points.len()).filter(|&j| law.weights[j] > 0.0).collect();
    let mut x = vec![f64::NAN; n];
    for &i in &order {
        let mut values: Vec<(f64, f64)> = Vec::new();
        for &j in &alive {
            let v = law.points[j][i];
            match values.iter_mut().find(|(u, _)| *u == v) {
                Some(entry) => entry.1 += law.weights[j],
                None => values.push((v, law.weights[j])),
            }
        }
        let total: f64 = values.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::ZeroPosterior);
        }
        let mut u = rng.random::<f64>() * total;
        let mut chosen = values[values.len() - 1].0;
        for (v, w) in &values {
            if u < *w {
                chosen = *v;
                break;
            }
            u -= w;
        }
        x[i] = chosen;
        alive.retain(|&j| law.points[j][i] == chosen);
    }
    Ok(x)
}

/// Forward symmetric-noise path. Coordinate `i` equals `x_i` after its last
/// resampling time and a fresh uniform symbol before it.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath<S> {
    x: Vec<S>,
    /// Per coordinate, decreasing arrival times with the symbol drawn there.
    arrivals: Vec<Vec<(f64, S)>>,
}

/// Arrivals of the Poisson process with intensity `1/t` on `(0, 1]` are
/// simulated down to this level.
pub const ARRIVAL_FLOOR: f64 = 1e-12;

impl<S: Copy> NoisePath<S> {
    fn generate<R: Rng + ?Sized>(x: &[S], rng: &mut R, mut draw: impl FnMut(&mut R) -> S) -> Self {
        let arrivals = x
            .iter()
            .map(|_| {
                let mut times = Vec::new();
                let mut t: f64 = 1.0;
                loop {
                    t *= rng.random::<f64>();
                    if t < ARRIVAL_FLOOR || t == 0.0 {
                        break;
                    }
                    times.push((t, draw(rng)));
                }
                times
            })
            .collect();
        Self { x: x.to_vec(), arrivals }
    }

    pub fn x(&self) -> &[S] {
        &self.x
    }

    pub fn arrivals(&self, i: usize) -> &[(f64, S)] {
        &self.arrivals[i]
    }

    /// State `Y_t`; times below the last simulated arrival use its symbol.
    pub fn at(&self, t: f64) -> Vec<S> {
        self.x
            .iter()
            .zip(&self.arrivals)
            .map(|(&xi, arr)| match arr.first() {
                None => xi,
                Some(&(t1, _)) if t > t1 => xi,
                _ => {
                    let pos = arr.partition_point(|&(s, _)| s >= t);
                    arr[pos.max(1) - 1].1
                }
            })
            .collect()
    }
}

pub fn forward_binary_noise<R: Rng + ?Sized>(x: &[i8], rng: &mut R) -> Result<NoisePath<i8>> {
    if x.iter().any(|v| *v != 1 && *v != -1) {
        return Err(Error::InvalidArgument("binary configuration must be in {-1, +1}".into()));
    }
    Ok(NoisePath::generate(x, rng, |r| if r.random::<bool>() { 1 } else { -1 }))
}

pub fn forward_qary_noise<R: Rng + ?Sized>(x: &[usize], q: usize, rng: &mut R) -> Result<NoisePath<usize>> {
    if q < 2 || x.iter().any(|v| *v >= q) {
        return Err(Error::InvalidArgument(format!("configuration must take values in 0..{q}")));
    }
    Ok(NoisePath::generate(x, rng, |r| r.random_range(0..q)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThinningOptions {
    /// Upper bound on `rate * h` within one substep.
    pub max_flip: f64,
    /// Replace the final state by `sign(m)` (binary) or the belief argmax (q-ary).
    pub final_jump: bool,
    /// Abort once a chain has taken this many substeps.
    pub max_substeps: usize,
}

impl Default for ThinningOptions {
    fn default() -> Self {
        Self { max_flip: 0.1, final_jump: true, max_substeps: 10_000_000 }
    }
}

impl ThinningOptions {
    fn validate(&self) -> Result<()> {
        if !(self.max_flip > 0.0 && self.max_flip <= 1.0) {
            return Err(Error::InvalidArgument(format!("max_flip = {} must be in (0, 1]", self.max_flip)));
        }
        Ok(())
    }
}

/// State of a discrete chain at a grid node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateSnapshot<S> {
    pub t: f64,
    pub state: Vec<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinaryChainResult {
    /// State at the last grid node.
    pub y: Vec<i8>,
    /// Output configuration after the optional final jump.
    pub sample: Vec<i8>,
    pub substeps: usize,
    pub snapshots: Vec<StateSnapshot<i8>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QaryChainResult {
    pub y: Vec<usize>,
    pub sample: Vec<usize>,
    pub substeps: usize,
    pub snapshots: Vec<StateSnapshot<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoissonChainResult {
    pub counts: Vec<u64>,
    /// `m(T; Y_T)`.
    pub decode: Vec<f64>,
    pub substeps: usize,
    pub snapshots: Vec<StateSnapshot<u64>>,
}

fn check_unit_interval(grid: &TimeGrid) -> Result<()> {
    if !(grid.start() > 0.0 && grid.final_time() < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "symmetric-noise grid must lie in (0, 1), got [{}, {}]",
            grid.start(),
            grid.final_time()
        )));
    }
    Ok(())
}

fn clamp_rate(rate: f64, coordinate: usize, t: f64) -> Result<f64> {
    if rate.is_nan() {
        return Err(Error::NonFinite("jump rate"));
    }
    if rate < -RATE_TOLERANCE {
        return Err(Error::NegativeRate { rate, coordinate, t });
    }
    Ok(rate.max(0.0))
}

/// Runs the substeps covering `[t, t + dt]`. `rates` fills per-coordinate
/// total jump rates at the current time and `jump` applies one substep.
fn thinned_interval<S, RT, J>(
    t: f64,
    dt: f64,
    opts: &ThinningOptions,
    substeps: &mut usize,
    state: &mut S,
    mut rates: RT,
    mut jump: J,
) -> Result<()>
where
    RT: FnMut(&S, f64) -> Result<f64>,
    J: FnMut(&mut S, f64),
{
    let end = t + dt;
    let mut cur = t;
    loop {
        let max_rate = rates(state, cur)?;
        let mut h = end - cur;
        let mut last = true;
        if max_rate * h > opts.max_flip {
            h = opts.max_flip / max_rate;
            last = false;
        }
        jump(state, h);
        *substeps += 1;
        if *substeps > opts.max_substeps {
            return Err(Error::ChainFailure { step: *substeps, reason: "substep budget exhausted".into() });
        }
        if last {
            return Ok(());
        }
        cur += h;
        if cur >= end {
            return Ok(());
        }
    }
}

/// Flip rate `(1 + t^2) / (2 t (1 - t^2)) - y m / (1 - t^2)` of a coordinate
/// with current value `y` and magnetization `m`.
pub fn binary_flip_rate(y: i8, m: f64, t: f64) -> f64 {
    (1.0 + t * t) / (2.0 * t * (1.0 - t * t)) - f64::from(y) * m / (1.0 - t * t)
}

/// Rate `1/(q t) + b_z/(1 - t) - b_y/(1 + (q - 1) t)` of a jump from the
/// current symbol (belief `b_y`) to another symbol (belief `b_z`).
pub fn qary_jump_rate(q: usize, t: f64, b_z: f64, b_y: f64) -> f64 {
    1.0 / (q as f64 * t) + b_z / (1.0 - t) - b_y / (1.0 + (q as f64 - 1.0) * t)
}

/// Generative sampler for the binary symmetric channel on `(0, 1)`.
///
/// Starts from a uniform configuration at the first node and flips
/// coordinate `i` at rate
/// `(1 + t^2) / (2 t (1 - t^2)) - y_i m_i(t; y) / (1 - t^2)`.
pub fn simulate_binary_symmetric<D, R>(
    denoiser: &D,
    grid: &TimeGrid,
    rng: &mut R,
    opts: &ThinningOptions,
    snapshot_times: &[f64],
) -> Result<BinaryChainResult>
where
    D: MagnetizationDenoiser + ?Sized,
    R: Rng + ?Sized,
{
    check_unit_interval(grid)?;
    opts.validate()?;
    let n = denoiser.dim();
    let snaps = grid.snapshot_indices(snapshot_times);
    let mut snapshots = Vec::new();
    let mut y: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let mut m = vec![0.0; n];
    let p = std::cell::RefCell::new(vec![0.0; n]);
    let mut substeps = 0;
    for (k, t, dt) in grid.steps_iter() {
        if snaps.contains(&k) {
            snapshots.push(StateSnapshot { t, state: y.clone() });
        }
        thinned_interval(
            t,
            dt,
            opts,
            &mut substeps,
            &mut y,
            |y, s| {
                let mut p = p.borrow_mut();
                denoiser.magnetization_into(y, s, &mut m)?;
                let mut max_rate: f64 = 0.0;
                for i in 0..n {
                    let r = clamp_rate(binary_flip_rate(y[i], m[i], s), i, s)?;
                    p[i] = r;
                    max_rate = max_rate.max(r);
                }
                Ok(max_rate)
            },
            |y, h| {
                let p = p.borrow();
                for i in 0..n {
                    if rng.random::<f64>() < p[i] * h {
                        y[i] = -y[i];
                    }
                }
            },
        )
        .map_err(|e| chain_step_error(k, e))?;
    }
    let t_final = grid.final_time();
    let last = grid.steps();
    if snaps.contains(&last) {
        snapshots.push(StateSnapshot { t: t_final, state: y.clone() });
    }
    let sample = if opts.final_jump {
        denoiser.magnetization_into(&y, t_final, &mut m)?;
        y.iter()
            .zip(&m)
            .map(|(&yi, &mi)| if mi > 0.0 { 1 } else if mi < 0.0 { -1 } else { yi })
            .collect()
    } else {
        y.clone()
    };
    Ok(BinaryChainResult { y, sample, substeps, snapshots })
}

/// Generative sampler for the q-ary symmetric channel on `(0, 1)`.
///
/// Coordinate `i` moves from `y_i` to `z` at rate
/// `1/(q t) + b_i(z)/(1 - t) - b_i(y_i)/(1 + (q - 1) t)`.
pub fn simulate_qary_symmetric<D, R>(
    denoiser: &D,
    grid: &TimeGrid,
    rng: &mut R,
    opts: &ThinningOptions,
    snapshot_times: &[f64],
) -> Result<QaryChainResult>
where
    D: BeliefDenoiser + ?Sized,
    R: Rng + ?Sized,
{
    check_unit_interval(grid)?;
    opts.validate()?;
    let n = denoiser.dim();
    let q = denoiser.alphabet();
    let snaps = grid.snapshot_indices(snapshot_times);
    let mut snapshots = Vec::new();
    let mut y: Vec<usize> = (0..n).map(|_| rng.random_range(0..q)).collect();
    let mut b = vec![0.0; n * q];
    // Row i holds the rates y_i -> z, zero on the diagonal symbol.
    let rates = std::cell::RefCell::new(vec![0.0; n * q]);
    let mut substeps = 0;
    for (k, t, dt) in grid.steps_iter() {
        if snaps.contains(&k) {
            snapshots.push(StateSnapshot { t, state: y.clone() });
        }
        thinned_interval(
            t,
            dt,
            opts,
            &mut substeps,
            &mut y,
            |y, s| {
                denoiser.beliefs_into(y, s, &mut b)?;
                let mut r = rates.borrow_mut();
                let mut max_total: f64 = 0.0;
                for i in 0..n {
                    let row = &b[i * q..(i + 1) * q];
                    let mut total = 0.0;
                    for z in 0..q {
                        let rate = if z == y[i] {
                            0.0
                        } else {
                            clamp_rate(qary_jump_rate(q, s, row[z], row[y[i]]), i, s)?
                        };
                        r[i * q + z] = rate;
                        total += rate;
                    }
                    max_total = max_total.max(total);
                }
                Ok(max_total)
            },
            |y, h| {
                let r = rates.borrow();
                for i in 0..n {
                    let mut u = rng.random::<f64>();
                    for z in 0..q {
                        let pz = r[i * q + z] * h;
                        if u < pz {
                            y[i] = z;
                            break;
                        }
                        u -= pz;
                    }
                }
            },
        )
        .map_err(|e| chain_step_error(k, e))?;
    }
    let t_final = grid.final_time();
    let last = grid.steps();
    if snaps.contains(&last) {
        snapshots.push(StateSnapshot { t: t_final, state: y.clone() });
    }
    let sample = if opts.final_jump {
        denoiser.beliefs_into(&y, t_final, &mut b)?;
        (0..n)
            .map(|i| {
                let row = &b[i * q..(i + 1) * q];
                let mut best = 0;
                for z in 1..q {
                    if row[z] > row[best] {
                        best = z;
                    }
                }
                best
            })
            .collect()
    } else {
        y.clone()
    };
    Ok(QaryChainResult { y, sample, substeps, snapshots })
}

fn chain_step_error(step: usize, e: Error) -> Error {
    match e {
        Error::NegativeRate { .. } | Error::ChainFailure { .. } => e,
        other => Error::ChainFailure { step, reason: other.to_string() },
    }
}

/// Generative sampler for the Poisson channel: count `k` increments at rate
/// `m_k(t; Y)`. Starts from zero counts at the first node.
pub fn simulate_poisson_observation<D, R>(
    denoiser: &D,
    grid: &TimeGrid,
    rng: &mut R,
    opts: &ThinningOptions,
    snapshot_times: &[f64],
) -> Result<PoissonChainResult>
where
    D: PoissonDenoiser + ?Sized,
    R: Rng + ?Sized,
{
    opts.validate()?;
    let n = denoiser.dim();
    let snaps = grid.snapshot_indices(snapshot_times);
    let mut snapshots = Vec::new();
    let mut y = vec![0u64; n];
    let m = std::cell::RefCell::new(vec![0.0; n]);
    let mut substeps = 0;
    for (k, t, dt) in grid.steps_iter() {
        if snaps.contains(&k) {
            snapshots.push(StateSnapshot { t, state: y.clone() });
        }
        thinned_interval(
            t,
            dt,
            opts,
            &mut substeps,
            &mut y,
            |y, s| {
                let mut m = m.borrow_mut();
                denoiser.posterior_mean_into(y, s, &mut m)?;
                let mut max_rate: f64 = 0.0;
                for (i, v) in m.iter_mut().enumerate() {
                    if *v < 0.0 {
                        return Err(Error::NegativeRate { rate: *v, coordinate: i, t: s });
                    }
                    if !v.is_finite() {
                        return Err(Error::NonFinite("Poisson rate"));
                    }
                    max_rate = max_rate.max(*v);
                }
                Ok(max_rate)
            },
            |y, h| {
                let m = m.borrow();
                for i in 0..n {
                    if rng.random::<f64>() < m[i] * h {
                        y[i] += 1;
                    }
                }
            },
        )
        .map_err(|e| chain_step_error(k, e))?;
    }
    let t_final = grid.final_time();
    let last = grid.steps();
    if snaps.contains(&last) {
        snapshots.push(StateSnapshot { t: t_final, state: y.clone() });
    }
    let mut decode = vec![0.0; n];
    denoiser.posterior_mean_into(&y, t_final, &mut decode)?;
    Ok(PoissonChainResult { counts: y, decode, substeps, snapshots })
}
