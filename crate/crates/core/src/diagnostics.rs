//! Empirical comparisons: total variation on enumerable spaces, 1-D
//! projections with histograms and mode weights, 1-D Wasserstein distances and
//! sample moments.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq};

/// Largest enumerable state space accepted by [`empirical_tv`].
pub const MAX_STATES: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    /// The value involves no sampling error.
    pub exact: bool,
    pub n_samples: usize,
    pub n_reference: Option<usize>,
    pub parameters: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl DiagnosticsReport {
    pub fn new(metric: &str, value: f64, n_samples: usize) -> Self {
        Self {
            metric: metric.to_string(),
            value,
            stderr: None,
            exact: false,
            n_samples,
            n_reference: None,
            parameters: BTreeMap::new(),
            flags: Vec::new(),
        }
    }

    pub fn with_parameter(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }
}

/// Writes a list of reports as a JSON array.
pub fn write_reports_json<W: Write>(reports: &[DiagnosticsReport], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, reports)?;
    Ok(())
}

/// Expected TV of an exact `n`-sample empirical law, `sum_s sqrt(p_s (1 - p_s) / (2 pi n))`.
pub fn tv_noise_floor(table: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    table.iter().map(|p| (p * (1.0 - p) / (2.0 * PI * n as f64)).sqrt()).sum()
}

/// `1/2 sum_s |empirical(s) - table(s)|` over state indices.
///
/// Indices outside the table count toward TV and raise a flag.
pub fn empirical_tv(samples: &[usize], table: &[f64]) -> Result<DiagnosticsReport> {
    if table.len() > MAX_STATES {
        return Err(Error::Domain(format!("{} states exceed the enumeration limit {MAX_STATES}", table.len())));
    }
    let n = samples.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empirical TV needs at least one sample".into()));
    }
    let mut counts = vec![0u64; table.len()];
    let mut outside = 0u64;
    for &s in samples {
        match counts.get_mut(s) {
            Some(c) => *c += 1,
            None => outside += 1,
        }
    }
    let nf = n as f64;
    let inside: f64 = counts.iter().zip(table).map(|(&c, &p)| (c as f64 / nf - p).abs()).sum();
    let value = (0.5 * (inside + outside as f64 / nf)).clamp(0.0, 1.0);
    let mut report = DiagnosticsReport::new("tv", value, n)
        .with_parameter("states", table.len() as f64)
        .with_parameter("noise_floor", tv_noise_floor(table, n));
    report.exact = false;
    if outside > 0 {
        report.flags.push(format!("{outside} samples outside the table support"));
    }
    Ok(report)
}

/// TV between samples and a table keyed by arbitrary states.
pub fn empirical_tv_keyed<K: Ord + Clone>(samples: &[K], table: &[(K, f64)]) -> Result<DiagnosticsReport> {
    let index: BTreeMap<&K, usize> = table.iter().enumerate().map(|(i, (k, _))| (k, i)).collect();
    if index.len() != table.len() {
        return Err(Error::InvalidArgument("duplicate state in TV table".into()));
    }
    let probs: Vec<f64> = table.iter().map(|(_, p)| *p).collect();
    let idx: Vec<usize> = samples.iter().map(|s| index.get(s).copied().unwrap_or(usize::MAX)).collect();
    empirical_tv(&idx, &probs)
}

/// TV between two empirical laws.
pub fn empirical_tv_between<K: Ord + Clone>(a: &[K], b: &[K]) -> Result<DiagnosticsReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empirical TV needs non-empty batches".into()));
    }
    let mut counts: BTreeMap<&K, (u64, u64)> = BTreeMap::new();
    for k in a {
        counts.entry(k).or_default().0 += 1;
    }
    for k in b {
        counts.entry(k).or_default().1 += 1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let value = 0.5 * counts.values().map(|&(x, y)| (x as f64 / na - y as f64 / nb).abs()).sum::<f64>();
    let mut report = DiagnosticsReport::new("tv", value.clamp(0.0, 1.0), a.len());
    report.n_reference = Some(b.len());
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BinRule {
    FreedmanDiaconis,
    Fixed(usize),
}

/// Upper limit on the Freedman-Diaconis bin count.
pub const MAX_BINS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: &[f64], rule: BinRule) -> Result<Self> {
        if values.is_empty() {
            return Ok(Self { edges: vec![0.0, 1.0], counts: vec![0] });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("histogram input"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let lo = sorted[0];
        let hi = sorted[sorted.len() - 1];
        let range = hi - lo;
        let bins = match rule {
            BinRule::Fixed(0) => return Err(Error::InvalidArgument("histogram needs at least one bin".into())),
            BinRule::Fixed(b) => b,
            BinRule::FreedmanDiaconis => {
                let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
                let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
                if width > 0.0 && range > 0.0 {
                    ((range / width).ceil() as usize).clamp(1, MAX_BINS)
                } else {
                    1
                }
            }
        };
        let (lo, hi) = if range > 0.0 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
        let mut counts = vec![0u64; bins];
        for v in values {
            let k = (((v - lo) / width).floor() as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Self { edges, counts })
    }

    /// CSV with columns `bin_left, bin_right, count`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["bin_left", "bin_right", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            wr.write_record([
                format!("{:.16e}", self.edges[i]),
                format!("{:.16e}", self.edges[i + 1]),
                c.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionStats {
    /// `s = <x, a> / |a|^2` per sample.
    pub projections: Vec<f64>,
    pub histogram: Histogram,
    pub midpoint: f64,
    /// Fractions above and at-or-below the midpoint.
    pub mode_weights: [f64; 2],
    pub mode_weight_stderr: f64,
    /// Sample variance of the projections on each side of the midpoint.
    pub mode_variances: [f64; 2],
}

/// Midpoint `(1 - 2p) / 2` between the projected component centers `1 - p` and `-p`.
pub fn mixture_midpoint(p: f64) -> f64 {
    0.5 * (1.0 - 2.0 * p)
}

pub fn projection_stats(samples: &[Vec<f64>], a: &[f64], midpoint: f64, rule: BinRule) -> Result<ProjectionStats> {
    let na = norm_sq(a);
    if !(na > 0.0) {
        return Err(Error::InvalidArgument("projection direction must be nonzero".into()));
    }
    let projections = samples
        .iter()
        .map(|x| {
            if x.len() != a.len() {
                return Err(Error::Dimension { expected: a.len(), got: x.len() });
            }
            Ok(dot(x, a) / na)
        })
        .collect::<Result<Vec<f64>>>()?;
    let histogram = Histogram::new(&projections, rule)?;
    let (upper, lower): (Vec<f64>, Vec<f64>) = projections.iter().partition(|s| **s > midpoint);
    let n = projections.len();
    let w = if n == 0 { 0.0 } else { upper.len() as f64 / n as f64 };
    let mode_weights = if n == 0 { [0.0, 0.0] } else { [w, 1.0 - w] };
    let mode_weight_stderr = if n == 0 { 0.0 } else { (w * (1.0 - w) / n as f64).sqrt() };
    Ok(ProjectionStats {
        projections,
        histogram,
        midpoint,
        mode_weights,
        mode_weight_stderr,
        mode_variances: [sample_variance(&upper), sample_variance(&lower)],
    })
}

/// Unbiased sample variance; NaN for fewer than two values.
pub fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Quantile-coupling `W_2` between two 1-D batches. Equal sizes reduce to the
/// root mean squared difference of the sorted samples.
pub fn empirical_w2_1d(a: &[f64], b: &[f64]) -> Result<DiagnosticsReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("W2 needs non-empty batches".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("W2 input"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let sq = if x.len() == y.len() {
        x.iter().zip(&y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / x.len() as f64
    } else {
        let (nx, ny) = (x.len() as f64, y.len() as f64);
        let (mut i, mut j) = (0usize, 0usize);
        let mut u = 0.0;
        let mut acc = 0.0;
        while i < x.len() && j < y.len() {
            let next = ((i + 1) as f64 / nx).min((j + 1) as f64 / ny);
            acc += (next - u) * (x[i] - y[j]).powi(2);
            u = next;
            if (i + 1) as f64 / nx <= next {
                i += 1;
            }
            if (j + 1) as f64 / ny <= next {
                j += 1;
            }
        }
        acc
    };
    let mut report = DiagnosticsReport::new("w2_1d", sq.max(0.0).sqrt(), a.len());
    report.n_reference = Some(b.len());
    Ok(report)
}

/// `W_2(N(m, s1), N(m, s2)) = |sqrt(s1) - sqrt(s2)|` for variances `s1, s2`.
pub fn gaussian_w2_1d(var_a: f64, var_b: f64) -> f64 {
    (var_a.sqrt() - var_b.sqrt()).abs()
}

/// Sample mean and unbiased covariance.
pub fn sample_moments(samples: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let Some(first) = samples.first() else {
        return Err(Error::InvalidArgument("moments need at least one sample".into()));
    };
    let d = first.len();
    let n = samples.len();
    let mut mean = DVector::<f64>::zeros(d);
    for x in samples {
        if x.len() != d {
            return Err(Error::Dimension { expected: d, got: x.len() });
        }
        mean += DVector::from_column_slice(x);
    }
    mean /= n as f64;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for x in samples {
        let c = DVector::from_column_slice(x) - &mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    if n > 1 {
        cov /= (n - 1) as f64;
    }
    Ok((mean, cov))
}

/// `|A - B|_F / |B|_F`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
