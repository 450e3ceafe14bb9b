//! Turns config specs into targets, denoisers and grids.

use std::path::Path;

use stoloc::denoisers::{
    ConvDenoiser, DiscreteGaussianDenoiser, GaussianDenoiser, GaussianLinearDenoiser, MixtureDenoiser, ScaledDenoiser,
};
use stoloc::grid::{GridSpec, TimeGrid};
use stoloc::targets::{Target, TargetSpec};

use crate::config::{DenoiserSpec, ExperimentConfig, ProcessSpec};
use crate::error::{CliError, CliResult};

pub fn target(cfg: &ExperimentConfig, base: Option<&Path>) -> CliResult<Target> {
    let spec = cfg.target.as_ref().ok_or_else(|| CliError::Config("missing [target] section".into()))?;
    Ok(spec.build(base)?)
}

pub fn grid(cfg: &ExperimentConfig, fallback: GridSpec) -> CliResult<TimeGrid> {
    Ok(cfg.grid.clone().unwrap_or(fallback).build()?)
}

/// Grid default for a process, or for the target's natural channel when no
/// process is configured.
pub fn default_grid(process: Option<&ProcessSpec>, target: &Target) -> GridSpec {
    match (process, target) {
        (Some(p), _) => p.default_grid(),
        (None, Target::Hypercube(_)) => ProcessSpec::BinarySymmetric { max_flip: None, final_jump: None }.default_grid(),
        (None, Target::Qary(_)) => ProcessSpec::QarySymmetric { max_flip: None, final_jump: None }.default_grid(),
        (None, Target::Nonnegative(_)) => ProcessSpec::Poisson { max_flip: None }.default_grid(),
        (None, _) => GridSpec::default(),
    }
}

pub fn kind_name(target: &Target) -> &'static str {
    match target {
        Target::Discrete(_) => "discrete",
        Target::Hypercube(_) => "hypercube",
        Target::Qary(_) => "qary",
        Target::Mixture(_) => "mixture",
        Target::Circulant(_) => "circulant",
        Target::Gaussian(_) => "gaussian",
        Target::Nonnegative(_) => "nonnegative",
    }
}

/// Exact posterior mean on the isotropic Gaussian channel.
pub fn exact_gaussian(target: &Target) -> CliResult<Box<dyn GaussianDenoiser>> {
    Ok(match target {
        Target::Discrete(t) => Box::new(DiscreteGaussianDenoiser::new(t.clone())),
        Target::Gaussian(g) => Box::new(GaussianLinearDenoiser::isotropic(g.mean().to_vec(), g.cov().clone())?),
        Target::Circulant(c) => Box::new(GaussianLinearDenoiser::isotropic(vec![0.0; c.dim()], c.covariance())?),
        Target::Mixture(m) => Box::new(MixtureDenoiser::new(m.clone())),
        other => {
            return Err(CliError::Config(format!(
                "a {} target has no Gaussian-channel denoiser",
                kind_name(other)
            )))
        }
    })
}

pub fn gaussian_denoiser(target: &Target, spec: &DenoiserSpec, base: Option<&Path>) -> CliResult<Box<dyn GaussianDenoiser>> {
    match spec {
        DenoiserSpec::Exact => exact_gaussian(target),
        DenoiserSpec::Scaled { scale } => Ok(Box::new(ScaledDenoiser::new(exact_gaussian(target)?, *scale)?)),
        DenoiserSpec::Windowed { r } => match target {
            Target::Circulant(c) => Ok(Box::new(ConvDenoiser::new(c.correlation(), *r)?)),
            other => Err(CliError::Config(format!(
                "windowed denoiser needs a circulant target, got {}",
                kind_name(other)
            ))),
        },
        DenoiserSpec::Model { target: spec } => exact_gaussian(&model(target, spec, base)?),
    }
}

fn model(target: &Target, spec: &TargetSpec, base: Option<&Path>) -> CliResult<Target> {
    let m = spec.build(base)?;
    if m.dim() != target.dim() {
        return Err(CliError::Config(format!(
            "model target has dimension {}, target has {}",
            m.dim(),
            target.dim()
        )));
    }
    Ok(m)
}

/// Target whose exact posterior defines a discrete-channel denoiser.
pub fn model_target(target: &Target, spec: &DenoiserSpec, base: Option<&Path>) -> CliResult<Target> {
    match spec {
        DenoiserSpec::Exact => Ok(target.clone()),
        DenoiserSpec::Model { target: spec } => {
            let m = model(target, spec, base)?;
            if std::mem::discriminant(&m) != std::mem::discriminant(target) {
                return Err(CliError::Config(format!(
                    "model target is {}, target is {}",
                    kind_name(&m),
                    kind_name(target)
                )));
            }
            Ok(m)
        }
        other => Err(CliError::Config(format!(
            "{other:?} denoisers only apply to Gaussian channels; use exact or model"
        ))),
    }
}
