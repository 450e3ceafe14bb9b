//! Experiment configuration: one TOML file describes one experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stoloc::grid::GridSpec;
use stoloc::processes::ThinningOptions;
use stoloc::targets::TargetSpec;

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub chains: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessSpec>,
    #[serde(default)]
    pub denoiser: DenoiserSpec,
    /// Time grid; each process has its own default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<DiagnosticKind>,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl: Option<KlSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyze: Option<AnalyzeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProcessSpec {
    Isotropic,
    ReverseOu,
    /// Draws the side of the principal split, then samples that component.
    HalfspaceMixture {
        #[serde(default = "default_reference")]
        reference: usize,
    },
    BinarySymmetric {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_flip: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        final_jump: Option<bool>,
    },
    QarySymmetric {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_flip: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        final_jump: Option<bool>,
    },
    Poisson {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_flip: Option<f64>,
    },
    Erasure {
        /// Fixed reveal order; uniform random reveal times when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<Vec<usize>>,
    },
    Percolation {
        rows: usize,
        cols: usize,
        #[serde(default)]
        anchor: bool,
    },
}

fn default_reference() -> usize {
    20_000
}

impl ProcessSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessSpec::Isotropic => "isotropic",
            ProcessSpec::ReverseOu => "reverse-ou",
            ProcessSpec::HalfspaceMixture { .. } => "halfspace-mixture",
            ProcessSpec::BinarySymmetric { .. } => "binary-symmetric",
            ProcessSpec::QarySymmetric { .. } => "qary-symmetric",
            ProcessSpec::Poisson { .. } => "poisson",
            ProcessSpec::Erasure { .. } => "erasure",
            ProcessSpec::Percolation { .. } => "percolation",
        }
    }

    pub fn thinning(&self) -> ThinningOptions {
        let mut opts = ThinningOptions::default();
        match self {
            ProcessSpec::BinarySymmetric { max_flip, final_jump } | ProcessSpec::QarySymmetric { max_flip, final_jump } => {
                if let Some(m) = max_flip {
                    opts.max_flip = *m;
                }
                if let Some(f) = final_jump {
                    opts.final_jump = *f;
                }
            }
            ProcessSpec::Poisson { max_flip: Some(m) } => opts.max_flip = *m,
            _ => {}
        }
        opts
    }

    /// Grid used when the config gives none.
    pub fn default_grid(&self) -> GridSpec {
        match self {
            ProcessSpec::BinarySymmetric { .. } | ProcessSpec::QarySymmetric { .. } => GridSpec::Arcsin {
                steps: 200,
                lo: 0.01,
                hi: 0.99,
            },
            ProcessSpec::Poisson { .. } => GridSpec::Uniform { steps: 200, t0: 0.0, t1: 20.0 },
            ProcessSpec::ReverseOu => GridSpec::AlphaUniform { steps: 300, t_max: 1e3, exclude_zero: true },
            _ => GridSpec::default(),
        }
    }
}

/// Which denoiser drives the sampler.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DenoiserSpec {
    /// Exact posterior mean of the configured target.
    #[default]
    Exact,
    /// Exact posterior mean multiplied by `scale`.
    Scaled { scale: f64 },
    /// Optimal `(2r+1)`-local convolution for a circulant target.
    Windowed { r: usize },
    /// Exact posterior mean of a different target.
    Model { target: TargetSpec },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    /// Total variation against the enumerated target law.
    Tv,
    /// Mean and covariance against the target moments.
    Moments,
    /// Projection onto the mixture direction: mode weights, variances, histogram.
    Projection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default = "default_samples")]
    pub samples: String,
    #[serde(default = "default_snapshots")]
    pub snapshots: String,
    #[serde(default = "default_diagnostics")]
    pub diagnostics: String,
    #[serde(default = "default_histogram")]
    pub histogram: String,
}

fn default_samples() -> String {
    "samples".into()
}
fn default_snapshots() -> String {
    "snapshots".into()
}
fn default_diagnostics() -> String {
    "diagnostics".into()
}
fn default_histogram() -> String {
    "histogram".into()
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            snapshots: default_snapshots(),
            diagnostics: default_diagnostics(),
            histogram: default_histogram(),
        }
    }
}

/// Path KL between the configured denoiser and `model`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlSpec {
    pub model: DenoiserSpec,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub per_time: bool,
}

fn default_paths() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSpec {
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_r")]
    pub r: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    /// `c` values for the `F'(1; c)` table.
    #[serde(default = "default_c")]
    pub c: Vec<f64>,
    /// Window half-widths for the correlation-length table.
    #[serde(default = "default_xi_r")]
    pub xi_r: Vec<usize>,
    #[serde(default = "default_xi_alpha")]
    pub xi_alpha: Vec<f64>,
}

fn default_n() -> Vec<usize> {
    vec![64]
}
fn default_r() -> Vec<usize> {
    vec![3]
}
fn default_alpha() -> Vec<f64> {
    vec![0.25]
}
fn default_c() -> Vec<f64> {
    (1..10).map(|k| k as f64 / 10.0).collect()
}
fn default_xi_r() -> Vec<usize> {
    (1..=8).collect()
}
fn default_xi_alpha() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}

impl Default for AnalyzeSpec {
    fn default() -> Self {
        Self {
            n: default_n(),
            r: default_r(),
            alpha: default_alpha(),
            c: default_c(),
            xi_r: default_xi_r(),
            xi_alpha: default_xi_alpha(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Also write concatenated little-endian `f64` pixels.
    #[serde(default)]
    pub binary: bool,
}

/// A parsed config plus the directory relative paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let config = Self::parse(&text)?;
        Ok(LoadedConfig { config, base: path.parent().map(Path::to_path_buf) })
    }

    /// SHA-256 of the canonical JSON form, seed excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.seed = 0;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_sampling_config() {
        let cfg = ExperimentConfig::parse(
            r#"
            seed = 5
            chains = 10
            diagnostics = ["tv"]
            [target]
            kind = "hypercube"
            n = 4
            random_seed = 3
            [process]
            kind = "binary-symmetric"
            max_flip = 0.05
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.denoiser, DenoiserSpec::Exact);
        assert_eq!(cfg.process.as_ref().unwrap().thinning().max_flip, 0.05);
        assert_eq!(cfg.diagnostics, vec![DiagnosticKind::Tv]);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ExperimentConfig::parse("seeds = 1").is_err());
        assert!(ExperimentConfig::parse("[process]\nkind = \"teleport\"").is_err());
    }

    #[test]
    fn hash_ignores_seed_only() {
        let a = ExperimentConfig { seed: 1, chains: 3, ..Default::default() };
        let b = ExperimentConfig { seed: 2, ..a.clone() };
        let c = ExperimentConfig { chains: 4, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
