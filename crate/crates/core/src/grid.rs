//! Time discretizations.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of steps of the alpha-uniform grid.
pub const DEFAULT_STEPS: usize = 300;
/// Default final time of the alpha-uniform grid.
pub const DEFAULT_T_MAX: f64 = 1e3;
/// Default clipping interval of the arcsine clock on `(0, 1)`.
pub const DEFAULT_ARCSIN_RANGE: (f64, f64) = (0.01, 0.99);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridRule {
    /// `t = tan(alpha)^-2` with equispaced `alpha`.
    AlphaUniform,
    /// `t = sin(phi)^2` with equispaced `phi`.
    Arcsin,
    Uniform,
    Explicit,
}

/// Strictly increasing time mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    rule: GridRule,
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn explicit(nodes: Vec<f64>) -> Result<Self> {
        Self::with_rule(GridRule::Explicit, nodes)
    }

    fn with_rule(rule: GridRule, nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("a grid needs at least two nodes".into()));
        }
        if nodes.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidArgument("grid nodes must be finite and >= 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("grid nodes must be strictly increasing".into()));
        }
        Ok(Self { rule, nodes })
    }

    /// `t_k = tan(alpha_k)^-2`, `alpha_k` equispaced from `pi/2` (t = 0) down to
    /// `atan(t_max^-1/2)`; `steps + 1` nodes with `t_0 = 0`.
    pub fn alpha_uniform(steps: usize, t_max: f64) -> Result<Self> {
        let mut nodes = Self::alpha_nodes(steps, t_max)?;
        nodes[0] = 0.0;
        Self::with_rule(GridRule::AlphaUniform, nodes)
    }

    /// As [`TimeGrid::alpha_uniform`] without the node at `t = 0`.
    pub fn alpha_uniform_positive(steps: usize, t_max: f64) -> Result<Self> {
        let nodes = Self::alpha_nodes(steps, t_max)?;
        Self::with_rule(GridRule::AlphaUniform, nodes[1..].to_vec())
    }

    fn alpha_nodes(steps: usize, t_max: f64) -> Result<Vec<f64>> {
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be >= 1".into()));
        }
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_max = {t_max} must be positive")));
        }
        let alpha_min = (1.0 / t_max.sqrt()).atan();
        let h = (FRAC_PI_2 - alpha_min) / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps)
            .map(|k| {
                let a = FRAC_PI_2 - h * k as f64;
                (1.0 / a.tan()).powi(2)
            })
            .collect();
        nodes[steps] = t_max;
        Ok(nodes)
    }

    pub fn default_alpha() -> Self {
        Self::alpha_uniform(DEFAULT_STEPS, DEFAULT_T_MAX).expect("valid default grid")
    }

    /// `t_k = sin(phi_k)^2` with `phi_k` equispaced between `asin(sqrt(lo))` and `asin(sqrt(hi))`.
    pub fn arcsin(steps: usize, lo: f64, hi: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be >= 1".into()));
        }
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidArgument(format!("need 0 <= lo < hi <= 1, got {lo}, {hi}")));
        }
        let (a, b) = (lo.sqrt().asin(), hi.sqrt().asin());
        let h = (b - a) / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps)
            .map(|k| (a + h * k as f64).sin().powi(2))
            .collect();
        nodes[0] = lo;
        nodes[steps] = hi;
        Self::with_rule(GridRule::Arcsin, nodes)
    }

    pub fn uniform(steps: usize, t0: f64, t1: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be >= 1".into()));
        }
        let h = (t1 - t0) / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|k| t0 + h * k as f64).collect();
        nodes[steps] = t1;
        Self::with_rule(GridRule::Uniform, nodes)
    }

    pub fn rule(&self) -> GridRule {
        self.rule
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn final_time(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// `(k, t_k, t_{k+1} - t_k)` for every step.
    pub fn steps_iter(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.nodes.windows(2).enumerate().map(|(k, w)| (k, w[0], w[1] - w[0]))
    }

    /// Node indices of the first nodes at or after each requested time.
    pub fn snapshot_indices(&self, times: &[f64]) -> Vec<usize> {
        let mut idx: Vec<usize> = times
            .iter()
            .map(|&s| {
                self.nodes
                    .iter()
                    .position(|&t| t >= s)
                    .unwrap_or(self.nodes.len() - 1)
            })
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }
}

/// Serializable grid description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    AlphaUniform {
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default = "default_t_max")]
        t_max: f64,
        #[serde(default)]
        exclude_zero: bool,
    },
    Arcsin {
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default = "default_lo")]
        lo: f64,
        #[serde(default = "default_hi")]
        hi: f64,
    },
    Uniform {
        steps: usize,
        #[serde(default)]
        t0: f64,
        t1: f64,
    },
    Explicit {
        nodes: Vec<f64>,
    },
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}
fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}
fn default_lo() -> f64 {
    DEFAULT_ARCSIN_RANGE.0
}
fn default_hi() -> f64 {
    DEFAULT_ARCSIN_RANGE.1
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::AlphaUniform {
            steps: DEFAULT_STEPS,
            t_max: DEFAULT_T_MAX,
            exclude_zero: false,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        match self {
            GridSpec::AlphaUniform {
                steps,
                t_max,
                exclude_zero,
            } => {
                if *exclude_zero {
                    TimeGrid::alpha_uniform_positive(*steps, *t_max)
                } else {
                    TimeGrid::alpha_uniform(*steps, *t_max)
                }
            }
            GridSpec::Arcsin { steps, lo, hi } => TimeGrid::arcsin(*steps, *lo, *hi),
            GridSpec::Uniform { steps, t0, t1 } => TimeGrid::uniform(*steps, *t0, *t1),
            GridSpec::Explicit { nodes } => TimeGrid::explicit(nodes.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_grid_follows_tangent_rule() {
        let g = TimeGrid::alpha_uniform(300, 1e3).unwrap();
        assert_eq!(g.steps(), 300);
        assert_eq!(g.start(), 0.0);
        assert_eq!(g.final_time(), 1e3);
        let alpha_min = (1.0f64 / 1e3f64.sqrt()).atan();
        for (k, &t) in g.nodes().iter().enumerate().skip(1).take(299) {
            let a = FRAC_PI_2 - (FRAC_PI_2 - alpha_min) * k as f64 / 300.0;
            let expected = 1.0 / a.tan().powi(2);
            assert!((t - expected).abs() <= 1e-12 * expected.max(1e-12));
        }
    }

    #[test]
    fn positive_alpha_grid_drops_zero() {
        let g = TimeGrid::alpha_uniform_positive(10, 100.0).unwrap();
        assert_eq!(g.steps(), 9);
        assert!(g.start() > 0.0);
    }

    #[test]
    fn rejects_non_monotone() {
        assert!(TimeGrid::explicit(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::explicit(vec![0.0]).is_err());
        assert!(TimeGrid::explicit(vec![-1.0, 1.0]).is_err());
    }

    #[test]
    fn arcsin_grid_endpoints() {
        let g = TimeGrid::arcsin(100, 0.01, 0.99).unwrap();
        assert_eq!(g.start(), 0.01);
        assert_eq!(g.final_time(), 0.99);
        // Steps shrink towards both ends.
        let d: Vec<f64> = g.steps_iter().map(|(_, _, d)| d).collect();
        assert!(d[0] < d[50] && d[99] < d[50]);
    }

    #[test]
    fn snapshot_indices_sorted() {
        let g = TimeGrid::uniform(10, 0.0, 1.0).unwrap();
        assert_eq!(g.snapshot_indices(&[0.55, 0.0, 2.0]), vec![0, 6, 10]);
    }
}
