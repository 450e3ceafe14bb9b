//! Target distributions with exact samplers and exact moments.
//!
//! Tables over `{+1,-1}^n` and `[q]^n` are stored in lexicographic order
//! with coordinate 0 most significant. For sign vectors the digit of `+1`
//! is 0 and the digit of `-1` is 1, so index 0 is the all-plus vector.
//! Alphabet symbols of q-ary targets are the integers `0..q`.
//!
//! "Explicitly given" is taken to mean: exact enumeration for finite
//! supports, closed forms for the Gaussian families.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::linalg;
use crate::rng::{fill_normal, normal};

/// Tolerance on `|sum(weights) - 1|`; inputs farther off are rejected.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Largest hypercube dimension accepted for enumeration.
pub const MAX_HYPERCUBE_DIM: usize = 20;
/// Largest number of configurations accepted for q-ary enumeration.
pub const MAX_TABLE_SIZE: usize = 1 << 22;

fn check_probabilities(w: &[f64], what: &str) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidTarget(format!("{what}: empty weight vector")));
    }
    if let Some(v) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidTarget(format!(
            "{what}: weight {v} is negative or non-finite"
        )));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidTarget(format!(
            "{what}: weights sum to {s:.17}, not 1 within {NORMALIZATION_TOL:e}"
        )));
    }
    Ok(())
}

fn weighted_index(w: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(w.iter().copied())
        .map_err(|e| Error::InvalidTarget(format!("weights: {e}")))
}

/// Dirichlet(1,...,1) draw, used to build random test tables.
pub fn random_simplex<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Mean and covariance of a target.
#[derive(Clone, Debug)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Finitely many atoms in `R^n` with probabilities.
#[derive(Clone, Debug)]
pub struct DiscreteTarget {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl DiscreteTarget {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidTarget("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidTarget(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(Error::InvalidTarget("atoms must have dimension >= 1".into()));
        }
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidTarget("atoms have unequal dimensions".into()));
        }
        for a in &atoms {
            check_finite(a, "atom")?;
        }
        check_probabilities(&weights, "discrete target")?;
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let index = weighted_index(&weights)?;
        Ok(Self {
            dim,
            atoms,
            weights,
            log_weights,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `ln(weight)`, `-inf` for zero-weight atoms.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.atoms[self.sample_index(rng)].clone()
    }

    pub fn moments(&self) -> Moments {
        let n = self.dim;
        let mut mean = DVector::zeros(n);
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            mean += DVector::from_column_slice(a) * *w;
        }
        let mut cov = DMatrix::zeros(n, n);
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            let d = DVector::from_column_slice(a) - &mean;
            cov += &d * d.transpose() * *w;
        }
        Moments { mean, cov }
    }
}

/// Probability table over `{+1,-1}^n`.
#[derive(Clone, Debug)]
pub struct HypercubeTarget {
    n: usize,
    table: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl HypercubeTarget {
    pub fn new(n: usize, table: Vec<f64>) -> Result<Self> {
        if n == 0 || n > MAX_HYPERCUBE_DIM {
            return Err(Error::InvalidTarget(format!(
                "hypercube dimension {n} outside 1..={MAX_HYPERCUBE_DIM}"
            )));
        }
        if table.len() != 1 << n {
            return Err(Error::InvalidTarget(format!(
                "hypercube table has {} entries, expected {}",
                table.len(),
                1usize << n
            )));
        }
        check_probabilities(&table, "hypercube table")?;
        let index = weighted_index(&table)?;
        Ok(Self { n, table, index })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let size = 1usize << n.min(MAX_HYPERCUBE_DIM + 1);
        Self::new(n, vec![1.0 / size as f64; size])
    }

    pub fn point_mass(x: &[i8]) -> Result<Self> {
        let n = x.len();
        if n == 0 || n > MAX_HYPERCUBE_DIM {
            return Err(Error::InvalidTarget(format!("hypercube dimension {n}")));
        }
        let mut table = vec![0.0; 1 << n];
        table[Self::index_of(x)] = 1.0;
        Self::new(n, table)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || n > MAX_HYPERCUBE_DIM {
            return Err(Error::InvalidTarget(format!("hypercube dimension {n}")));
        }
        Self::new(n, random_simplex(1 << n, rng))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.table[index]
    }

    /// Configuration with the given lexicographic index.
    pub fn config(n: usize, index: usize) -> Vec<i8> {
        (0..n)
            .map(|i| if (index >> (n - 1 - i)) & 1 == 0 { 1 } else { -1 })
            .collect()
    }

    /// Lexicographic index of a sign vector; entries other than -1 count as +1.
    pub fn index_of(x: &[i8]) -> usize {
        let n = x.len();
        x.iter()
            .enumerate()
            .fold(0, |acc, (i, &s)| acc | (usize::from(s == -1) << (n - 1 - i)))
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i8> {
        Self::config(self.n, self.sample_index(rng))
    }

    pub fn moments(&self) -> Moments {
        let n = self.n;
        let mut mean = DVector::zeros(n);
        let mut second = DMatrix::zeros(n, n);
        for (idx, &p) in self.table.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let x = DVector::from_iterator(n, Self::config(n, idx).into_iter().map(f64::from));
            mean += &x * p;
            second += &x * x.transpose() * p;
        }
        let cov = second - &mean * mean.transpose();
        Moments { mean, cov }
    }
}

/// Probability table over `[q]^n`, symbols `0..q`.
#[derive(Clone, Debug)]
pub struct QaryTarget {
    n: usize,
    q: usize,
    table: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl QaryTarget {
    pub fn new(n: usize, q: usize, table: Vec<f64>) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidTarget(format!("alphabet size {q} < 2")));
        }
        if n == 0 {
            return Err(Error::InvalidTarget("q-ary dimension must be >= 1".into()));
        }
        let size = Self::table_size(n, q)?;
        if table.len() != size {
            return Err(Error::InvalidTarget(format!(
                "q-ary table has {} entries, expected {size}",
                table.len()
            )));
        }
        check_probabilities(&table, "q-ary table")?;
        let index = weighted_index(&table)?;
        Ok(Self { n, q, table, index })
    }

    fn table_size(n: usize, q: usize) -> Result<usize> {
        let mut size = 1usize;
        for _ in 0..n {
            size = size
                .checked_mul(q)
                .filter(|s| *s <= MAX_TABLE_SIZE)
                .ok_or_else(|| {
                    Error::InvalidTarget(format!("q^n = {q}^{n} exceeds the enumeration bound"))
                })?;
        }
        Ok(size)
    }

    pub fn uniform(n: usize, q: usize) -> Result<Self> {
        let size = Self::table_size(n, q)?;
        Self::new(n, q, vec![1.0 / size as f64; size])
    }

    pub fn random<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Result<Self> {
        let size = Self::table_size(n, q)?;
        Self::new(n, q, random_simplex(size, rng))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> usize {
        self.q
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.table[index]
    }

    pub fn config(n: usize, q: usize, mut index: usize) -> Vec<usize> {
        let mut x = vec![0; n];
        for i in (0..n).rev() {
            x[i] = index % q;
            index /= q;
        }
        x
    }

    pub fn index_of(q: usize, x: &[usize]) -> usize {
        x.iter().fold(0, |acc, &s| acc * q + s)
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        Self::config(self.n, self.q, self.sample_index(rng))
    }

    /// Moments of the symbols viewed as the real numbers `0..q`.
    pub fn moments(&self) -> Moments {
        let n = self.n;
        let mut mean = DVector::zeros(n);
        let mut second = DMatrix::zeros(n, n);
        for (idx, &p) in self.table.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let x = DVector::from_iterator(
                n,
                Self::config(n, self.q, idx).into_iter().map(|s| s as f64),
            );
            mean += &x * p;
            second += &x * x.transpose() * p;
        }
        let cov = second - &mean * mean.transpose();
        Moments { mean, cov }
    }
}

/// `p N((1-p)a, I) + (1-p) N(-p a, I)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoGaussianMixture {
    a: Vec<f64>,
    p: f64,
}

impl TwoGaussianMixture {
    pub fn new(a: Vec<f64>, p: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidTarget("mixture dimension must be >= 1".into()));
        }
        check_finite(&a, "mixture direction")?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidTarget(format!("mixture weight {p} outside [0,1]")));
        }
        Ok(Self { a, p })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn component_means(&self) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        (
            self.a.iter().map(|v| (1.0 - p) * v).collect(),
            self.a.iter().map(|v| -p * v).collect(),
        )
    }

    /// Returns the draw and whether it came from the first component.
    pub fn sample_labeled<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, bool) {
        let first = rng.random::<f64>() < self.p;
        let shift = if first { 1.0 - self.p } else { -self.p };
        let x = self.a.iter().map(|v| shift * v + normal(rng)).collect();
        (x, first)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_labeled(rng).0
    }

    pub fn moments(&self) -> Moments {
        let n = self.dim();
        let a = DVector::from_column_slice(&self.a);
        let cov = DMatrix::identity(n, n) + &a * a.transpose() * (self.p * (1.0 - self.p));
        Moments {
            mean: DVector::zeros(n),
            cov,
        }
    }
}

/// Centered Gaussian with circulant covariance `Sigma_ij = c((i-j) mod n)`.
#[derive(Clone)]
pub struct CirculantGaussian {
    c: Vec<f64>,
    eigenvalues: Vec<f64>,
    sqrt_eigenvalues: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CirculantGaussian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantGaussian")
            .field("c", &self.c)
            .field("eigenvalues", &self.eigenvalues)
            .finish()
    }
}

/// Real DFT of a symmetric sequence: `sum_j c(j) cos(2 pi j k / n)`.
pub fn circulant_eigenvalues(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = c.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

impl CirculantGaussian {
    pub fn from_correlation(c: Vec<f64>) -> Result<Self> {
        let n = c.len();
        if n == 0 {
            return Err(Error::InvalidTarget("empty correlation sequence".into()));
        }
        check_finite(&c, "correlation sequence")?;
        for k in 1..n {
            let scale = 1.0f64.max(c[k].abs());
            if (c[k] - c[n - k]).abs() > 1e-12 * scale {
                return Err(Error::InvalidTarget(format!(
                    "correlation sequence is not symmetric: c({k}) != c({})",
                    n - k
                )));
            }
        }
        let eigenvalues = circulant_eigenvalues(&c);
        let max = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if let Some(v) = eigenvalues.iter().find(|v| **v < -1e-10 * max.max(1.0)) {
            return Err(Error::InvalidTarget(format!(
                "circulant covariance is not PSD (Fourier eigenvalue {v:e})"
            )));
        }
        let sqrt_eigenvalues = eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            c,
            eigenvalues,
            sqrt_eigenvalues,
            forward,
            inverse,
        })
    }

    /// `Sigma = I + alpha 1 1^T`.
    pub fn rank_one(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTarget("dimension must be >= 1".into()));
        }
        if !(alpha >= 0.0) {
            return Err(Error::InvalidTarget(format!("alpha = {alpha} must be >= 0")));
        }
        let mut c = vec![alpha; n];
        c[0] = 1.0 + alpha;
        Self::from_correlation(c)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn correlation(&self) -> &[f64] {
        &self.c
    }

    /// Fourier eigenvalues, entry `k` belongs to frequency `2 pi k / n`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.c[(i + n - j) % n])
    }

    /// Spectral draw `x = IFFT(sqrt(lambda) * FFT(g)) / n`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        let mut g = vec![0.0; n];
        fill_normal(rng, &mut g);
        let mut buf: Vec<Complex<f64>> = g.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (z, s) in buf.iter_mut().zip(&self.sqrt_eigenvalues) {
            *z *= *s;
        }
        self.inverse.process(&mut buf);
        buf.iter().map(|z| z.re / n as f64).collect()
    }

    pub fn moments(&self) -> Moments {
        let n = self.dim();
        Moments {
            mean: DVector::zeros(n),
            cov: self.covariance(),
        }
    }
}

/// General multivariate normal `N(mean, cov)`.
#[derive(Clone, Debug)]
pub struct GaussianTarget {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || !cov.is_square() {
            return Err(Error::InvalidTarget(format!(
                "covariance shape {}x{} does not match mean length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        check_finite(&mean, "gaussian mean")?;
        linalg::check_psd(&cov, "covariance").map_err(|e| Error::InvalidTarget(e.to_string()))?;
        let factor = linalg::psd_sqrt(&cov)?;
        Ok(Self { mean, cov, factor })
    }

    pub fn centered(cov: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![0.0; cov.nrows()], cov)
    }

    /// `U diag(lambda) U^T` with `lambda ~ Unif[lo, hi]` and Haar-random `U`.
    pub fn random_spectrum<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Self> {
        let u = random_orthogonal(n, rng);
        let lambda = DVector::from_fn(n, |_, _| lo + (hi - lo) * rng.random::<f64>());
        let cov = &u * DMatrix::from_diagonal(&lambda) * u.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        Self::centered(cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        let mut g = vec![0.0; n];
        fill_normal(rng, &mut g);
        let x = &self.factor * DVector::from_vec(g);
        x.iter().zip(&self.mean).map(|(a, b)| a + b).collect()
    }

    pub fn moments(&self) -> Moments {
        Moments {
            mean: DVector::from_column_slice(&self.mean),
            cov: self.cov.clone(),
        }
    }
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| normal(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    q
}

/// Discrete target whose atoms lie in the nonnegative orthant.
#[derive(Clone, Debug)]
pub struct NonnegativeTarget(DiscreteTarget);

impl NonnegativeTarget {
    pub fn new(inner: DiscreteTarget) -> Result<Self> {
        if inner.atoms().iter().flatten().any(|v| *v < 0.0) {
            return Err(Error::InvalidTarget("atom with a negative coordinate".into()));
        }
        Ok(Self(inner))
    }

    pub fn from_atoms(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        Self::new(DiscreteTarget::new(atoms, weights)?)
    }

    pub fn inner(&self) -> &DiscreteTarget {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Any supported target distribution.
#[derive(Clone, Debug)]
pub enum Target {
    Discrete(DiscreteTarget),
    Hypercube(HypercubeTarget),
    Qary(QaryTarget),
    Mixture(TwoGaussianMixture),
    Circulant(CirculantGaussian),
    Gaussian(GaussianTarget),
    Nonnegative(NonnegativeTarget),
}

impl Target {
    pub fn dim(&self) -> usize {
        match self {
            Target::Discrete(t) => t.dim(),
            Target::Hypercube(t) => t.dim(),
            Target::Qary(t) => t.dim(),
            Target::Mixture(t) => t.dim(),
            Target::Circulant(t) => t.dim(),
            Target::Gaussian(t) => t.dim(),
            Target::Nonnegative(t) => t.dim(),
        }
    }

    /// Exact draw as a real vector (signs as `+-1.0`, q-ary symbols as `0.0..q`).
    pub fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Target::Discrete(t) => t.sample(rng),
            Target::Hypercube(t) => t.sample(rng).into_iter().map(f64::from).collect(),
            Target::Qary(t) => t.sample(rng).into_iter().map(|s| s as f64).collect(),
            Target::Mixture(t) => t.sample(rng),
            Target::Circulant(t) => t.sample(rng),
            Target::Gaussian(t) => t.sample(rng),
            Target::Nonnegative(t) => t.inner().sample(rng),
        }
    }

    pub fn moments(&self) -> Moments {
        match self {
            Target::Discrete(t) => t.moments(),
            Target::Hypercube(t) => t.moments(),
            Target::Qary(t) => t.moments(),
            Target::Mixture(t) => t.moments(),
            Target::Circulant(t) => t.moments(),
            Target::Gaussian(t) => t.moments(),
            Target::Nonnegative(t) => t.inner().moments(),
        }
    }
}

/// Where a probability table comes from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSource {
    /// Inline probabilities in lexicographic order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
    /// CSV file with rows `index,probability`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_csv: Option<String>,
    /// Dirichlet(1) table drawn from this seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_seed: Option<u64>,
    /// Uniform table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<bool>,
}

impl TableSource {
    pub fn inline(table: Vec<f64>) -> Self {
        Self {
            table: Some(table),
            ..Self::default()
        }
    }

    fn resolve(&self, size: usize, base: Option<&Path>) -> Result<Vec<f64>> {
        let given = [
            self.table.is_some(),
            self.table_csv.is_some(),
            self.random_seed.is_some(),
            self.uniform == Some(true),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if given != 1 {
            return Err(Error::InvalidTarget(
                "exactly one of table, table_csv, random_seed, uniform = true must be given".into(),
            ));
        }
        if let Some(t) = &self.table {
            return Ok(t.clone());
        }
        if let Some(path) = &self.table_csv {
            let path = match base {
                Some(b) if Path::new(path).is_relative() => b.join(path),
                _ => Path::new(path).to_path_buf(),
            };
            return read_table_csv(&path, size);
        }
        if let Some(seed) = self.random_seed {
            let mut rng = crate::rng::chain_rng(seed, 0);
            return Ok(random_simplex(size, &mut rng));
        }
        Ok(vec![1.0 / size as f64; size])
    }
}

/// Reads `index,probability` rows; a non-numeric first row is treated as a header.
pub fn read_table_csv(path: &Path, size: usize) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut table = vec![f64::NAN; size];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::InvalidTarget(format!("{}: row {row} has fewer than 2 fields", path.display())));
        }
        let (Ok(idx), Ok(p)) = (record[0].parse::<usize>(), record[1].parse::<f64>()) else {
            if row == 0 {
                continue;
            }
            return Err(Error::InvalidTarget(format!("{}: cannot parse row {row}", path.display())));
        };
        if idx >= size {
            return Err(Error::InvalidTarget(format!("{}: index {idx} out of range", path.display())));
        }
        table[idx] = p;
    }
    if table.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidTarget(format!("{}: table has missing rows", path.display())));
    }
    Ok(table)
}

/// Mean-difference vector given either explicitly or as `value * 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionSpec {
    Constant(f64),
    Vector(Vec<f64>),
}

/// Serializable description of a target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    Discrete {
        atoms: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    Hypercube {
        n: usize,
        #[serde(flatten)]
        table: TableSource,
    },
    Qary {
        n: usize,
        q: usize,
        #[serde(flatten)]
        table: TableSource,
    },
    Mixture {
        n: usize,
        a: DirectionSpec,
        p: f64,
    },
    Circulant {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<f64>>,
    },
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        /// Row-major covariance rows.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cov: Option<Vec<Vec<f64>>>,
        /// Random covariance `U diag(lambda) U^T` with `lambda ~ Unif[lo,hi]`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        random: Option<RandomCovariance>,
    },
    Nonnegative {
        atoms: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCovariance {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

impl TargetSpec {
    /// Builds the target; relative CSV paths resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<Target> {
        Ok(match self {
            TargetSpec::Discrete { atoms, weights } => {
                Target::Discrete(DiscreteTarget::new(atoms.clone(), weights.clone())?)
            }
            TargetSpec::Hypercube { n, table } => {
                if *n == 0 || *n > MAX_HYPERCUBE_DIM {
                    return Err(Error::InvalidTarget(format!("hypercube dimension {n}")));
                }
                Target::Hypercube(HypercubeTarget::new(*n, table.resolve(1 << n, base)?)?)
            }
            TargetSpec::Qary { n, q, table } => {
                let size = QaryTarget::table_size(*n, (*q).max(2))?;
                Target::Qary(QaryTarget::new(*n, *q, table.resolve(size, base)?)?)
            }
            TargetSpec::Mixture { n, a, p } => {
                let a = match a {
                    DirectionSpec::Constant(v) => vec![*v; *n],
                    DirectionSpec::Vector(v) => {
                        if v.len() != *n {
                            return Err(Error::Dimension { expected: *n, got: v.len() });
                        }
                        v.clone()
                    }
                };
                Target::Mixture(TwoGaussianMixture::new(a, *p)?)
            }
            TargetSpec::Circulant { n, alpha, c } => match (alpha, c) {
                (Some(alpha), None) => Target::Circulant(CirculantGaussian::rank_one(*n, *alpha)?),
                (None, Some(c)) => {
                    if c.len() != *n {
                        return Err(Error::Dimension { expected: *n, got: c.len() });
                    }
                    Target::Circulant(CirculantGaussian::from_correlation(c.clone())?)
                }
                _ => {
                    return Err(Error::InvalidTarget(
                        "circulant target needs exactly one of alpha, c".into(),
                    ))
                }
            },
            TargetSpec::Gaussian { mean, cov, random } => match (cov, random) {
                (Some(rows), None) => {
                    let n = rows.len();
                    if rows.iter().any(|r| r.len() != n) {
                        return Err(Error::InvalidTarget("covariance is not square".into()));
                    }
                    let cov = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                    let mean = mean.clone().unwrap_or_else(|| vec![0.0; n]);
                    Target::Gaussian(GaussianTarget::new(mean, cov)?)
                }
                (None, Some(r)) => {
                    let mut rng = crate::rng::chain_rng(r.seed, 0);
                    let g = GaussianTarget::random_spectrum(r.n, r.lo, r.hi, &mut rng)?;
                    let mean = mean.clone().unwrap_or_else(|| vec![0.0; r.n]);
                    Target::Gaussian(GaussianTarget::new(mean, g.cov().clone())?)
                }
                _ => {
                    return Err(Error::InvalidTarget(
                        "gaussian target needs exactly one of cov, random".into(),
                    ))
                }
            },
            TargetSpec::Nonnegative { atoms, weights } => {
                Target::Nonnegative(NonnegativeTarget::from_atoms(atoms.clone(), weights.clone())?)
            }
        })
    }

    /// Inline description of an existing target.
    pub fn from_target(target: &Target) -> Self {
        match target {
            Target::Discrete(t) => TargetSpec::Discrete {
                atoms: t.atoms().to_vec(),
                weights: t.weights().to_vec(),
            },
            Target::Hypercube(t) => TargetSpec::Hypercube {
                n: t.dim(),
                table: TableSource::inline(t.table().to_vec()),
            },
            Target::Qary(t) => TargetSpec::Qary {
                n: t.dim(),
                q: t.alphabet(),
                table: TableSource::inline(t.table().to_vec()),
            },
            Target::Mixture(t) => TargetSpec::Mixture {
                n: t.dim(),
                a: DirectionSpec::Vector(t.a().to_vec()),
                p: t.p(),
            },
            Target::Circulant(t) => TargetSpec::Circulant {
                n: t.dim(),
                alpha: None,
                c: Some(t.correlation().to_vec()),
            },
            Target::Gaussian(t) => {
                let n = t.dim();
                TargetSpec::Gaussian {
                    mean: Some(t.mean().to_vec()),
                    cov: Some((0..n).map(|i| (0..n).map(|j| t.cov()[(i, j)]).collect()).collect()),
                    random: None,
                }
            }
            Target::Nonnegative(t) => TargetSpec::Nonnegative {
                atoms: t.inner().atoms().to_vec(),
                weights: t.inner().weights().to_vec(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;

    #[test]
    fn degenerate_weight_always_hits_first_atom() {
        let t = DiscreteTarget::new(vec![vec![0.0], vec![1.0]], vec![1.0, 0.0]).unwrap();
        let mut rng = chain_rng(1, 0);
        for _ in 0..1000 {
            assert_eq!(t.sample(&mut rng), vec![0.0]);
        }
    }

    #[test]
    fn normalization_is_strict() {
        assert!(DiscreteTarget::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5 + 1e-11]).is_err());
        assert!(DiscreteTarget::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5 + 1e-13]).is_ok());
        assert!(DiscreteTarget::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
        assert!(HypercubeTarget::new(2, vec![0.25; 3]).is_err());
        assert!(QaryTarget::new(1, 3, vec![0.5, 0.5, 0.1]).is_err());
    }

    #[test]
    fn hypercube_index_roundtrip_and_order() {
        assert_eq!(HypercubeTarget::config(3, 0), vec![1, 1, 1]);
        assert_eq!(HypercubeTarget::config(3, 1), vec![1, 1, -1]);
        assert_eq!(HypercubeTarget::config(3, 4), vec![-1, 1, 1]);
        for idx in 0..16 {
            assert_eq!(HypercubeTarget::index_of(&HypercubeTarget::config(4, idx)), idx);
        }
    }

    #[test]
    fn qary_index_roundtrip_and_order() {
        assert_eq!(QaryTarget::config(2, 3, 5), vec![1, 2]);
        for idx in 0..27 {
            assert_eq!(QaryTarget::index_of(3, &QaryTarget::config(3, 3, idx)), idx);
        }
    }

    #[test]
    fn uniform_hypercube_moments() {
        let m = HypercubeTarget::uniform(3).unwrap().moments();
        assert!(m.mean.norm() < 1e-15);
        assert!((m.cov - DMatrix::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn mixture_is_centered() {
        let t = TwoGaussianMixture::new(vec![1.0, -2.0, 0.5], 0.3).unwrap();
        let m = t.moments();
        assert!(m.mean.norm() == 0.0);
        let (m1, m2) = t.component_means();
        for i in 0..3 {
            assert!((0.3 * m1[i] + 0.7 * m2[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn rank_one_circulant_covariance() {
        let t = CirculantGaussian::rank_one(5, 0.25).unwrap();
        let expected = DMatrix::identity(5, 5) + DMatrix::from_element(5, 5, 0.25);
        assert!((t.covariance() - expected).norm() < 1e-15);
        let ev = t.eigenvalues();
        assert!((ev[0] - (1.0 + 5.0 * 0.25)).abs() < 1e-12);
        for v in &ev[1..] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circulant_rejects_asymmetric_or_indefinite() {
        assert!(CirculantGaussian::from_correlation(vec![1.0, 0.5, 0.0, 0.1]).is_err());
        assert!(CirculantGaussian::from_correlation(vec![1.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn rank_one_circulant_total_variance() {
        // <1, x>^2 / n has mean 1 + n alpha = 17 for n = 64, alpha = 0.25.
        let t = CirculantGaussian::rank_one(64, 0.25).unwrap();
        let mut rng = chain_rng(11, 0);
        let n_draws = 100_000;
        let vals: Vec<f64> = (0..n_draws)
            .map(|_| {
                let s: f64 = t.sample(&mut rng).iter().sum();
                s * s / 64.0
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / n_draws as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_draws - 1) as f64;
        let se = (var / n_draws as f64).sqrt();
        assert!((mean - 17.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn spec_roundtrip_through_toml() {
        let spec = TargetSpec::Hypercube {
            n: 2,
            table: TableSource::inline(vec![0.1, 0.2, 0.3, 0.4]),
        };
        let text = toml::to_string(&spec).unwrap();
        let back: TargetSpec = toml::from_str(&text).unwrap();
        assert_eq!(spec, back);
        let t = back.build(None).unwrap();
        assert_eq!(TargetSpec::from_target(&t), spec);
    }

    #[test]
    fn spec_reads_csv_table() {
        let dir = std::env::temp_dir().join(format!("stoloc-table-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        std::fs::write(&path, "index,probability\n0,0.25\n2,0.25\n1,0.5\n3,0\n").unwrap();
        let spec = TargetSpec::Hypercube {
            n: 2,
            table: TableSource {
                table_csv: Some("t.csv".into()),
                ..TableSource::default()
            },
        };
        match spec.build(Some(&dir)).unwrap() {
            Target::Hypercube(h) => assert_eq!(h.table(), &[0.25, 0.5, 0.25, 0.0]),
            _ => unreachable!(),
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
