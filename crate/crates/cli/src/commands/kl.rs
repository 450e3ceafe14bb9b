//! `stoloc kl`: path-space KL between the configured denoiser and a model.

use serde::Serialize;

use stoloc::denoisers::{HypercubeDenoiser, PoissonAtomDenoiser};
use stoloc::losses::{kl_ctmc_binary, kl_ctmc_poisson, kl_erasure_exact, kl_gaussian_drift, ErasureChain, KLReport};
use stoloc::output::write_json;
use stoloc::processes::EnumeratedLaw;
use stoloc::targets::Target;

use crate::config::{KlSpec, ProcessSpec};
use crate::error::{CliError, CliResult};
use crate::resolve;
use crate::Settings;

#[derive(Serialize)]
struct KlOutput<'a> {
    method: &'static str,
    infinite: bool,
    report: &'a KLReport,
}

fn compute(settings: &Settings, spec: &KlSpec) -> CliResult<(&'static str, KLReport)> {
    let cfg = &settings.config;
    let base = settings.base.as_deref();
    let target = resolve::target(cfg, base)?;
    let grid = || resolve::grid(cfg, resolve::default_grid(cfg.process.as_ref(), &target));
    let (paths, seed) = (spec.paths, cfg.seed);
    if let Some(ProcessSpec::Erasure { order }) = &cfg.process {
        let order = order.clone().unwrap_or_else(|| (0..target.dim()).collect());
        let law = EnumeratedLaw::from_target(&resolve::model_target(&target, &cfg.denoiser, base)?)?;
        let law_hat = EnumeratedLaw::from_target(&resolve::model_target(&target, &spec.model, base)?)?;
        let chain = ErasureChain::new(law, order.clone())?;
        let chain_hat = ErasureChain::new(law_hat, order)?;
        return Ok(("erasure-exact", kl_erasure_exact(&chain, &chain_hat)?));
    }
    match &target {
        Target::Hypercube(_) => {
            let (Target::Hypercube(a), Target::Hypercube(b)) = (
                resolve::model_target(&target, &cfg.denoiser, base)?,
                resolve::model_target(&target, &spec.model, base)?,
            ) else {
                unreachable!("model targets share the target kind")
            };
            let Target::Hypercube(t) = &target else { unreachable!() };
            let report = kl_ctmc_binary(&HypercubeDenoiser::new(&a), &HypercubeDenoiser::new(&b), t, &grid()?, paths, seed)?;
            Ok(("ctmc-binary", report))
        }
        Target::Nonnegative(t) => {
            let (Target::Nonnegative(a), Target::Nonnegative(b)) = (
                resolve::model_target(&target, &cfg.denoiser, base)?,
                resolve::model_target(&target, &spec.model, base)?,
            ) else {
                unreachable!("model targets share the target kind")
            };
            let report = kl_ctmc_poisson(&PoissonAtomDenoiser::new(a), &PoissonAtomDenoiser::new(b), t, &grid()?, paths, seed)?;
            Ok(("ctmc-poisson", report))
        }
        Target::Qary(_) => Err(CliError::Config("q-ary targets support KL only through the erasure process".into())),
        _ => {
            let d = resolve::gaussian_denoiser(&target, &cfg.denoiser, base)?;
            let d_hat = resolve::gaussian_denoiser(&target, &spec.model, base)?;
            let report = kl_gaussian_drift(&d, &d_hat, &target, &grid()?, paths, seed, spec.per_time)?;
            Ok(("girsanov", report))
        }
    }
}

pub fn run(settings: &Settings) -> CliResult<()> {
    let spec = settings.config.kl.as_ref().ok_or_else(|| CliError::Config("missing [kl] section".into()))?;
    let (method, report) = compute(settings, spec)?;
    let header = settings.header("kl").with("method", method);
    let out = KlOutput { method, infinite: report.is_infinite(), report: &report };
    write_json(&header, settings.create("kl", "json")?, &out)?;
    println!("{method}: KL = {:.6e} (stderr {:.3e}, {} paths)", report.estimate, report.stderr, report.n_paths);
    if report.is_infinite() {
        println!("KL is infinite: {} flagged transitions", report.flags.len());
    }
    Ok(())
}
