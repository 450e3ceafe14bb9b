//! `stoloc sample`: run the configured sampler for N chains.

use std::collections::BTreeMap;

use serde::Serialize;

use stoloc::denoisers::{HypercubeDenoiser, IsotropicComponentDenoiser, PoissonAtomDenoiser, QaryDenoiser};
use stoloc::diagnostics::{
    empirical_tv, empirical_tv_keyed, mixture_midpoint, projection_stats, relative_frobenius, sample_moments,
    tv_noise_floor, BinRule, DiagnosticsReport, Histogram,
};
use stoloc::output::{fmt_f64, write_json, write_rows_csv};
use stoloc::processes::{
    estimate_split, simulate_binary_symmetric, simulate_erasure, simulate_halfspace_mixture,
    simulate_information_percolation, simulate_isotropic, simulate_poisson_observation, simulate_qary_symmetric,
    simulate_reverse_ou, ChainResult, EdgeSchedule, EnumeratedLaw, RevealOrder, StateSnapshot,
};
use stoloc::rng::run_chains;
use stoloc::targets::{HypercubeTarget, QaryTarget, Target};
use stoloc::{chain_rng, hash64};

use crate::config::{DiagnosticKind, ProcessSpec};
use crate::error::{CliError, CliResult};
use crate::resolve;
use crate::{Format, Settings};

/// Stream index reserved for the reference draws of the half-space split.
const REFERENCE_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, Serialize)]
pub struct SampleRow {
    pub chain: usize,
    pub values: Vec<f64>,
}

/// State at one snapshot time: the observation `y` and, on Gaussian
/// channels, the denoised estimate `x`.
#[derive(Clone, Debug, Serialize)]
pub struct SnapshotRow {
    pub chain: usize,
    pub t: f64,
    pub y: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainFailure {
    pub chain: usize,
    pub error: String,
}

/// Everything a run produced, before diagnostics.
#[derive(Debug, Default)]
pub struct RunRecord {
    pub columns: Vec<String>,
    pub integer: bool,
    pub samples: Vec<SampleRow>,
    pub snapshots: Vec<SnapshotRow>,
    pub failures: Vec<ChainFailure>,
}

impl RunRecord {
    fn new(columns: Vec<String>, integer: bool) -> Self {
        Self { columns, integer, ..Self::default() }
    }

    fn absorb<T>(&mut self, results: Vec<stoloc::Result<T>>, mut take: impl FnMut(&mut Self, usize, T)) {
        for (chain, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => take(self, chain, v),
                Err(e) => self.failures.push(ChainFailure { chain, error: e.to_string() }),
            }
        }
    }

    fn push_gaussian(&mut self, chain: usize, r: ChainResult) {
        for s in r.snapshots {
            self.snapshots.push(SnapshotRow { chain, t: s.t, y: s.observation, x: Some(s.sample) });
        }
        self.samples.push(SampleRow { chain, values: r.sample });
    }

    fn push_states<S: Copy>(&mut self, chain: usize, snaps: Vec<StateSnapshot<S>>, to_f64: impl Fn(S) -> f64) {
        for s in snaps {
            self.snapshots.push(SnapshotRow { chain, t: s.t, y: s.state.into_iter().map(&to_f64).collect(), x: None });
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    process: &'a str,
    target: &'a str,
    dim: usize,
    chains: usize,
    completed: usize,
    failures: &'a [ChainFailure],
    reports: &'a [DiagnosticsReport],
}

fn coords(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn run(settings: &Settings) -> CliResult<()> {
    let cfg = &settings.config;
    let base = settings.base.as_deref();
    let process = cfg.process.clone().ok_or_else(|| CliError::Config("missing [process] section".into()))?;
    let target = resolve::target(cfg, base)?;
    check_diagnostics(&process, &target, &cfg.diagnostics)?;
    let grid = resolve::grid(cfg, process.default_grid())?;
    let snaps = &cfg.snapshot_times;
    if !snaps.is_empty() && matches!(process, ProcessSpec::Erasure { .. } | ProcessSpec::Percolation { .. }) {
        return Err(CliError::Config(format!("{} does not record snapshots", process.name())));
    }
    let (n, seed) = (cfg.chains, cfg.seed);
    let dim = target.dim();
    let opts = process.thinning();
    let wrong_target = || {
        CliError::Config(format!("{} cannot sample a {} target", process.name(), resolve::kind_name(&target)))
    };

    let record = match &process {
        ProcessSpec::Isotropic | ProcessSpec::ReverseOu => {
            let d = resolve::gaussian_denoiser(&target, &cfg.denoiser, base)?;
            let reverse = matches!(process, ProcessSpec::ReverseOu);
            let results = run_chains(n, seed, |_, rng| {
                if reverse {
                    simulate_reverse_ou(&d, &grid, rng, snaps)
                } else {
                    simulate_isotropic(&d, &grid, rng, snaps)
                }
            });
            let mut rec = RunRecord::new(coords("x", dim), false);
            rec.absorb(results, |rec, i, r| rec.push_gaussian(i, r));
            rec
        }
        ProcessSpec::HalfspaceMixture { reference } => {
            let Target::Mixture(mix) = &target else { return Err(wrong_target()) };
            if cfg.denoiser != crate::config::DenoiserSpec::Exact {
                return Err(CliError::Config("halfspace-mixture uses the exact component denoisers".into()));
            }
            let mut rng = chain_rng(hash64(seed, REFERENCE_STREAM), 0);
            let refs: Vec<Vec<f64>> = (0..(*reference).max(1)).map(|_| mix.sample(&mut rng)).collect();
            let split = estimate_split(&refs)?;
            let (mu1, mu2) = mix.component_means();
            let first_is_plus = mu1.iter().zip(&split.direction).map(|(a, b)| a * b).sum::<f64>() >= 0.0;
            let c1 = IsotropicComponentDenoiser::new(mu1, 1.0)?;
            let c2 = IsotropicComponentDenoiser::new(mu2, 1.0)?;
            let (plus, minus) = if first_is_plus { (&c1, &c2) } else { (&c2, &c1) };
            let results = run_chains(n, seed, |_, rng| simulate_halfspace_mixture(split.q_hat, plus, minus, &grid, rng, snaps));
            let mut rec = RunRecord::new(coords("x", dim), false);
            rec.absorb(results, |rec, i, (r, _)| rec.push_gaussian(i, r));
            rec
        }
        ProcessSpec::BinarySymmetric { .. } => {
            let Target::Hypercube(m) = resolve::model_target(&target, &cfg.denoiser, base)? else {
                return Err(wrong_target());
            };
            let d = HypercubeDenoiser::new(&m);
            let results = run_chains(n, seed, |_, rng| simulate_binary_symmetric(&d, &grid, rng, &opts, snaps));
            let mut rec = RunRecord::new(coords("x", dim), true);
            rec.absorb(results, |rec, i, r| {
                rec.push_states(i, r.snapshots, f64::from);
                rec.samples.push(SampleRow { chain: i, values: r.sample.into_iter().map(f64::from).collect() });
            });
            rec
        }
        ProcessSpec::QarySymmetric { .. } => {
            let Target::Qary(m) = resolve::model_target(&target, &cfg.denoiser, base)? else {
                return Err(wrong_target());
            };
            let d = QaryDenoiser::new(&m)?;
            let results = run_chains(n, seed, |_, rng| simulate_qary_symmetric(&d, &grid, rng, &opts, snaps));
            let mut rec = RunRecord::new(coords("x", dim), true);
            rec.absorb(results, |rec, i, r| {
                rec.push_states(i, r.snapshots, |v| v as f64);
                rec.samples.push(SampleRow { chain: i, values: r.sample.into_iter().map(|v| v as f64).collect() });
            });
            rec
        }
        ProcessSpec::Poisson { .. } => {
            let Target::Nonnegative(m) = resolve::model_target(&target, &cfg.denoiser, base)? else {
                return Err(wrong_target());
            };
            let d = PoissonAtomDenoiser::new(m);
            let results = run_chains(n, seed, |_, rng| simulate_poisson_observation(&d, &grid, rng, &opts, snaps));
            let mut rec = RunRecord::new(coords("x", dim), false);
            rec.absorb(results, |rec, i, r| {
                rec.push_states(i, r.snapshots, |v| v as f64);
                rec.samples.push(SampleRow { chain: i, values: r.decode });
            });
            rec
        }
        ProcessSpec::Erasure { order } => {
            let law = EnumeratedLaw::from_target(&resolve::model_target(&target, &cfg.denoiser, base)?)?;
            let order = order.clone().map_or(RevealOrder::UniformRandomTimes, RevealOrder::Fixed);
            let results = run_chains(n, seed, |_, rng| simulate_erasure(&law, &order, rng));
            let mut rec = RunRecord::new(coords("x", dim), matches!(target, Target::Hypercube(_) | Target::Qary(_)));
            rec.absorb(results, |rec, i, x| rec.samples.push(SampleRow { chain: i, values: x }));
            rec
        }
        ProcessSpec::Percolation { rows, cols, anchor } => {
            let Target::Qary(m) = resolve::model_target(&target, &cfg.denoiser, base)? else {
                return Err(wrong_target());
            };
            let schedule = EdgeSchedule::grid(*rows, *cols)?;
            if rows * cols != dim {
                return Err(CliError::Config(format!("{rows}x{cols} grid does not match target dimension {dim}")));
            }
            let mut columns = coords("d", schedule.len());
            if *anchor {
                columns.extend(coords("x", dim));
            }
            let results = run_chains(n, seed, |_, rng| simulate_information_percolation(&m, &schedule, *anchor, rng));
            let mut rec = RunRecord::new(columns, true);
            rec.absorb(results, |rec, i, r| {
                let mut values: Vec<f64> = r.differences.iter().map(|&d| d as f64).collect();
                values.extend(r.anchored.unwrap_or_default().into_iter().map(|v| v as f64));
                rec.samples.push(SampleRow { chain: i, values });
            });
            rec
        }
    };

    let (reports, histogram) = diagnostics(&process, &target, &cfg.diagnostics, &record)?;
    write_outputs(settings, &process, &target, &record, &reports, histogram.as_ref())?;
    for r in &reports {
        let se = r.stderr.map(|s| format!(" (stderr {s:.3e})")).unwrap_or_default();
        println!("{}: {:.6e}{se}", r.metric, r.value);
    }
    println!("{} of {n} chains completed", record.samples.len());
    if record.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} of {n} chains failed; see the diagnostics file", record.failures.len())))
    }
}

fn check_diagnostics(process: &ProcessSpec, target: &Target, kinds: &[DiagnosticKind]) -> CliResult<()> {
    let percolation = matches!(process, ProcessSpec::Percolation { .. });
    for kind in kinds {
        let ok = match kind {
            DiagnosticKind::Tv => {
                percolation || matches!(target, Target::Hypercube(_) | Target::Qary(_) | Target::Discrete(_) | Target::Nonnegative(_))
            }
            DiagnosticKind::Moments => !percolation,
            DiagnosticKind::Projection => matches!(target, Target::Mixture(_)),
        };
        if !ok {
            return Err(CliError::Config(format!(
                "diagnostic {kind:?} does not apply to {} on a {} target",
                process.name(),
                resolve::kind_name(target)
            )));
        }
    }
    Ok(())
}

fn nearest(atoms: &[Vec<f64>], x: &[f64]) -> usize {
    let dist = |a: &[f64]| a.iter().zip(x).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
    (0..atoms.len()).min_by(|&i, &j| dist(&atoms[i]).total_cmp(&dist(&atoms[j]))).unwrap_or(0)
}

fn tv_report(process: &ProcessSpec, target: &Target, rows: &[SampleRow]) -> CliResult<DiagnosticsReport> {
    let n = rows.len();
    let report = match (process, target) {
        (ProcessSpec::Percolation { rows: r, cols: c, .. }, Target::Qary(t)) => {
            let schedule = EdgeSchedule::grid(*r, *c)?;
            let mut oracle: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
            for (i, p) in t.table().iter().enumerate() {
                *oracle.entry(schedule.differences(&QaryTarget::config(t.dim(), t.alphabet(), i))).or_default() += p;
            }
            let table: Vec<(Vec<i64>, f64)> = oracle.into_iter().collect();
            let keys: Vec<Vec<i64>> =
                rows.iter().map(|s| s.values[..schedule.len()].iter().map(|&v| v as i64).collect()).collect();
            let floor = tv_noise_floor(&table.iter().map(|(_, p)| *p).collect::<Vec<_>>(), n);
            empirical_tv_keyed(&keys, &table)?.with_parameter("noise_floor", floor)
        }
        (_, Target::Hypercube(t)) => {
            let idx: Vec<usize> = rows
                .iter()
                .map(|s| HypercubeTarget::index_of(&s.values.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect::<Vec<i8>>()))
                .collect();
            empirical_tv(&idx, t.table())?.with_parameter("noise_floor", tv_noise_floor(t.table(), n))
        }
        (_, Target::Qary(t)) => {
            let idx: Vec<usize> = rows
                .iter()
                .map(|s| QaryTarget::index_of(t.alphabet(), &s.values.iter().map(|&v| v as usize).collect::<Vec<_>>()))
                .collect();
            empirical_tv(&idx, t.table())?.with_parameter("noise_floor", tv_noise_floor(t.table(), n))
        }
        (_, Target::Discrete(_) | Target::Nonnegative(_)) => {
            let law = EnumeratedLaw::from_target(target)?;
            let idx: Vec<usize> = rows.iter().map(|s| nearest(law.points(), &s.values)).collect();
            let mut r = empirical_tv(&idx, law.weights())?.with_parameter("noise_floor", tv_noise_floor(law.weights(), n));
            r.flags.push("samples assigned to the nearest atom".into());
            r
        }
        _ => unreachable!("checked before sampling"),
    };
    Ok(report)
}

fn diagnostics(
    process: &ProcessSpec,
    target: &Target,
    kinds: &[DiagnosticKind],
    record: &RunRecord,
) -> CliResult<(Vec<DiagnosticsReport>, Option<Histogram>)> {
    let mut reports = Vec::new();
    let mut histogram = None;
    let rows = &record.samples;
    if rows.is_empty() {
        return Ok((reports, histogram));
    }
    let values: Vec<Vec<f64>> = rows.iter().map(|s| s.values.clone()).collect();
    for kind in kinds {
        match kind {
            DiagnosticKind::Tv => reports.push(tv_report(process, target, rows)?),
            DiagnosticKind::Moments => {
                if values.len() < 2 {
                    continue;
                }
                let exact = target.moments();
                let (mean, cov) = sample_moments(&values)?;
                reports.push(DiagnosticsReport::new("mean_error_norm", (&mean - &exact.mean).norm(), values.len()));
                reports.push(DiagnosticsReport::new("covariance_relative_frobenius", relative_frobenius(&cov, &exact.cov), values.len()));
            }
            DiagnosticKind::Projection => {
                let Target::Mixture(mix) = target else { unreachable!("checked before sampling") };
                let stats = projection_stats(&values, mix.a(), mixture_midpoint(mix.p()), BinRule::FreedmanDiaconis)?;
                let mut w = DiagnosticsReport::new("mode_weight", stats.mode_weights[0], values.len())
                    .with_parameter("expected", mix.p())
                    .with_parameter("midpoint", stats.midpoint);
                w.stderr = Some(stats.mode_weight_stderr);
                reports.push(w);
                let expected_var = 1.0 / mix.a().iter().map(|v| v * v).sum::<f64>();
                for (k, v) in stats.mode_variances.iter().enumerate() {
                    reports.push(
                        DiagnosticsReport::new(&format!("mode{k}_projection_variance"), *v, values.len())
                            .with_parameter("expected", expected_var),
                    );
                }
                histogram = Some(stats.histogram);
            }
        }
    }
    Ok((reports, histogram))
}

fn format_value(v: f64, integer: bool) -> String {
    if integer {
        format!("{}", v as i64)
    } else {
        fmt_f64(v)
    }
}

#[derive(Serialize)]
struct Table<'a, R> {
    columns: &'a [String],
    rows: &'a [R],
}

fn write_outputs(
    settings: &Settings,
    process: &ProcessSpec,
    target: &Target,
    record: &RunRecord,
    reports: &[DiagnosticsReport],
    histogram: Option<&Histogram>,
) -> CliResult<()> {
    let cfg = &settings.config;
    let header = settings.header("sample").with("process", process.name()).with("chains", cfg.chains);
    let integer = record.integer;
    let out = &cfg.output;
    match settings.format {
        Format::Csv => {
            let mut columns = vec!["chain".to_string()];
            columns.extend(record.columns.iter().cloned());
            let rows = record.samples.iter().map(|s| {
                std::iter::once(s.chain.to_string()).chain(s.values.iter().map(|v| format_value(*v, integer))).collect()
            });
            write_rows_csv(&header, settings.create(&out.samples, "csv")?, &columns, rows)?;
            if !cfg.snapshot_times.is_empty() {
                let gaussian = matches!(process, ProcessSpec::Isotropic | ProcessSpec::ReverseOu | ProcessSpec::HalfspaceMixture { .. });
                let columns: Vec<String> = if gaussian {
                    ["chain_id", "t", "coordinate_index", "y_value", "x_value"].map(String::from).to_vec()
                } else {
                    ["chain_id", "t", "coordinate", "value"].map(String::from).to_vec()
                };
                let rows = record.snapshots.iter().flat_map(|s| {
                    (0..s.y.len()).map(move |k| {
                        let mut row = vec![s.chain.to_string(), fmt_f64(s.t), k.to_string()];
                        match &s.x {
                            Some(x) => row.extend([fmt_f64(s.y[k]), fmt_f64(x[k])]),
                            None => row.push(format_value(s.y[k], true)),
                        }
                        row
                    })
                });
                write_rows_csv(&header, settings.create(&out.snapshots, "csv")?, &columns, rows)?;
            }
        }
        Format::Json => {
            let table = Table { columns: &record.columns, rows: &record.samples };
            write_json(&header, settings.create(&out.samples, "json")?, &table)?;
            if !cfg.snapshot_times.is_empty() {
                write_json(&header, settings.create(&out.snapshots, "json")?, &record.snapshots)?;
            }
        }
    }
    let summary = Summary {
        process: process.name(),
        target: resolve::kind_name(target),
        dim: target.dim(),
        chains: cfg.chains,
        completed: record.samples.len(),
        failures: &record.failures,
        reports,
    };
    write_json(&header, settings.create(&out.diagnostics, "json")?, &summary)?;
    if let Some(h) = histogram {
        let mut w = settings.create(&out.histogram, "csv")?;
        header.write(&mut w)?;
        h.write_csv(w)?;
    }
    Ok(())
}
