//! Exact denoisers for the binary symmetric, q-ary symmetric and Poisson channels.

use super::{BeliefDenoiser, MagnetizationDenoiser, PoissonDenoiser};
use crate::error::{check_dim, Error, Result};
use crate::targets::{HypercubeTarget, NonnegativeTarget, QaryTarget};

fn check_unit_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time t = {t} outside [0, 1]")))
    }
}

/// Exact magnetization of a hypercube target on the binary symmetric channel.
///
/// The likelihood ratio between configurations depends only on the Hamming
/// distance `d` to the observation: weight `∝ mu(x) ((1-t)/(1+t))^d`.
#[derive(Clone, Debug)]
pub struct HypercubeDenoiser {
    n: usize,
    support: Vec<u32>,
    log_p: Vec<f64>,
}

impl HypercubeDenoiser {
    pub fn new(target: &HypercubeTarget) -> Self {
        let (support, log_p) = target
            .table()
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| (i as u32, p.ln()))
            .unzip();
        Self {
            n: target.dim(),
            support,
            log_p,
        }
    }
}

impl MagnetizationDenoiser for HypercubeDenoiser {
    fn dim(&self) -> usize {
        self.n
    }

    fn magnetization_into(&self, y: &[i8], t: f64, out: &mut [f64]) -> Result<()> {
        check_dim(self.n, y.len())?;
        check_dim(self.n, out.len())?;
        check_unit_time(t)?;
        let yi = HypercubeTarget::index_of(y) as u32;
        let n = self.n;
        let mut minus = [0.0f64; 32];
        let mut total = 0.0;
        if t >= 1.0 {
            // Only the observed configuration survives.
            if let Some(_) = self.support.iter().position(|&c| c == yi) {
                out.iter_mut().zip(y).for_each(|(o, s)| *o = f64::from(*s));
                return Ok(());
            }
            return Err(Error::ZeroPosterior);
        }
        let log_ratio = ((1.0 - t) / (1.0 + t)).ln();
        let mut max = f64::NEG_INFINITY;
        for (&c, lp) in self.support.iter().zip(&self.log_p) {
            let v = lp + (c ^ yi).count_ones() as f64 * log_ratio;
            max = max.max(v);
        }
        for (&c, lp) in self.support.iter().zip(&self.log_p) {
            let w = (lp + (c ^ yi).count_ones() as f64 * log_ratio - max).exp();
            total += w;
            let mut bits = c;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                minus[b] += w;
                bits &= bits - 1;
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = (total - 2.0 * minus[n - 1 - i]) / total;
        }
        Ok(())
    }
}

/// `m_i(t; y) = E[x_i | Y_t = y]` by enumeration of `{+1,-1}^n`.
pub fn binary_posterior_magnetization(target: &HypercubeTarget, y: &[i8], t: f64) -> Result<Vec<f64>> {
    HypercubeDenoiser::new(target).magnetization(y, t)
}

/// Exact beliefs of a q-ary target on the symmetric channel.
#[derive(Clone, Debug)]
pub struct QaryDenoiser {
    n: usize,
    q: usize,
    configs: Vec<Vec<u8>>,
    log_p: Vec<f64>,
}

impl QaryDenoiser {
    pub fn new(target: &QaryTarget) -> Result<Self> {
        let (n, q) = (target.dim(), target.alphabet());
        if q > 256 {
            return Err(Error::InvalidArgument("alphabet larger than 256".into()));
        }
        let mut configs = Vec::new();
        let mut log_p = Vec::new();
        for (idx, &p) in target.table().iter().enumerate() {
            if p > 0.0 {
                configs.push(QaryTarget::config(n, q, idx).into_iter().map(|s| s as u8).collect());
                log_p.push(p.ln());
            }
        }
        Ok(Self { n, q, configs, log_p })
    }
}

impl BeliefDenoiser for QaryDenoiser {
    fn dim(&self) -> usize {
        self.n
    }

    fn alphabet(&self) -> usize {
        self.q
    }

    fn beliefs_into(&self, y: &[usize], t: f64, out: &mut [f64]) -> Result<()> {
        let (n, q) = (self.n, self.q);
        check_dim(n, y.len())?;
        check_dim(n * q, out.len())?;
        check_unit_time(t)?;
        if let Some(s) = y.iter().find(|s| **s >= q) {
            return Err(Error::InvalidArgument(format!("symbol {s} outside alphabet of size {q}")));
        }
        let mismatches = |c: &[u8]| c.iter().zip(y).filter(|(a, b)| **a as usize != **b).count();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut total = 0.0;
        if t >= 1.0 {
            for c in &self.configs {
                if mismatches(c) == 0 {
                    for (i, s) in c.iter().enumerate() {
                        out[i * q + *s as usize] = 1.0;
                    }
                    return Ok(());
                }
            }
            return Err(Error::ZeroPosterior);
        }
        let log_ratio = ((1.0 - t) / (1.0 + (q as f64 - 1.0) * t)).ln();
        let logits: Vec<f64> = self
            .configs
            .iter()
            .zip(&self.log_p)
            .map(|(c, lp)| lp + mismatches(c) as f64 * log_ratio)
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (c, l) in self.configs.iter().zip(&logits) {
            let w = (l - max).exp();
            total += w;
            for (i, s) in c.iter().enumerate() {
                out[i * q + *s as usize] += w;
            }
        }
        out.iter_mut().for_each(|v| *v /= total);
        Ok(())
    }
}

/// `b_i(y, z; t)` as a row-major `n x q` matrix.
pub fn qary_posterior_belief(target: &QaryTarget, y: &[usize], t: f64) -> Result<Vec<f64>> {
    QaryDenoiser::new(target)?.beliefs(y, t)
}

/// Exact denoiser of a nonnegative discrete target on the Poisson channel.
#[derive(Clone, Debug)]
pub struct PoissonAtomDenoiser {
    target: NonnegativeTarget,
}

impl PoissonAtomDenoiser {
    pub fn new(target: NonnegativeTarget) -> Self {
        Self { target }
    }

    pub fn target(&self) -> &NonnegativeTarget {
        &self.target
    }
}

impl PoissonDenoiser for PoissonAtomDenoiser {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn posterior_mean_into(&self, y: &[u64], t: f64, out: &mut [f64]) -> Result<()> {
        let inner = self.target.inner();
        check_dim(inner.dim(), y.len())?;
        check_dim(inner.dim(), out.len())?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("time t = {t} must be >= 0")));
        }
        // log prod_k (t x_k)^{y_k} e^{-t x_k}, with 0^0 = 1.
        let logits: Vec<f64> = inner
            .atoms()
            .iter()
            .zip(inner.log_weights())
            .map(|(x, lw)| {
                let mut l = *lw;
                for (xk, yk) in x.iter().zip(y) {
                    let rate = t * xk;
                    if *yk > 0 {
                        l += if rate > 0.0 { *yk as f64 * rate.ln() } else { f64::NEG_INFINITY };
                    }
                    l -= rate;
                }
                l
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::ZeroPosterior);
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut total = 0.0;
        for (x, l) in inner.atoms().iter().zip(&logits) {
            let w = (l - max).exp();
            total += w;
            for (o, xk) in out.iter_mut().zip(x) {
                *o += w * xk;
            }
        }
        out.iter_mut().for_each(|v| *v /= total);
        Ok(())
    }
}

/// `m_k(t; y) = E[x_k | Y_t = y]` by enumeration over atoms.
pub fn poisson_posterior_mean(target: &NonnegativeTarget, y: &[u64], t: f64) -> Result<Vec<f64>> {
    PoissonAtomDenoiser::new(target.clone()).posterior_mean(y, t)
}
