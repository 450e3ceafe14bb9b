//! Config-driven experiment runner.
//!
//! `stoloc <subcommand> [--config PATH] [--seed N] [--out DIR] [--chains N] [--format csv|json]`
//! with subcommands `sample`, `analyze`, `kl`, `synth-images` and `selftest`.
//! Exit codes: 0 success, 1 runtime or criterion failure, 2 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use stoloc::criteria::Fault;
use stoloc::output::OutputHeader;

pub mod commands;
pub mod config;
pub mod error;
pub mod resolve;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    /// Perturb the windowed-denoiser closed form by a relative 1e-6.
    Windowed,
}

#[derive(Debug, Parser)]
#[command(name = "stoloc", version, about = "Stochastic-localization sampling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the config chain count.
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured sampler.
    Sample,
    /// Generated spectra, correlation lengths and W2 separation tables.
    Analyze {
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        r: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
    },
    /// Path-space KL between two denoisers.
    Kl,
    /// Synthetic two-class RGB images.
    SynthImages {
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        /// Number of images; defaults to the chain count.
        #[arg(long)]
        count: Option<usize>,
        /// Also write a flat little-endian f64 file.
        #[arg(long)]
        binary: bool,
    },
    /// Fast acceptance subset.
    Selftest {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

/// Resolved config, overrides applied, plus where outputs go.
#[derive(Clone, Debug)]
pub struct Settings {
    pub config: ExperimentConfig,
    pub base: Option<PathBuf>,
    pub out: PathBuf,
    pub format: Format,
}

impl Settings {
    pub fn header(&self, command: &str) -> OutputHeader {
        OutputHeader::new(self.config.hash(), self.config.seed).with("command", command)
    }

    /// Creates `<out>/<stem>.<ext>`.
    pub fn create(&self, stem: &str, ext: &str) -> CliResult<BufWriter<File>> {
        let path = self.out.join(format!("{stem}.{ext}"));
        Ok(BufWriter::new(File::create(path)?))
    }
}

fn settings(cli: &Cli, required: bool) -> CliResult<Settings> {
    let (mut config, base) = match &cli.config {
        Some(path) => {
            let loaded = ExperimentConfig::load(path)?;
            (loaded.config, loaded.base)
        }
        None if required => return Err(CliError::Usage("--config PATH is required".into())),
        None => (ExperimentConfig::default(), None),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(c) = cli.chains {
        config.chains = c;
    }
    std::fs::create_dir_all(&cli.out)?;
    Ok(Settings { config, base, out: cli.out.clone(), format: cli.format })
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Sample => commands::sample::run(&settings(cli, true)?),
        Command::Kl => commands::kl::run(&settings(cli, true)?),
        Command::Analyze { n, r, alpha } => {
            let mut s = settings(cli, false)?;
            let mut spec = s.config.analyze.clone().unwrap_or_default();
            if !n.is_empty() {
                spec.n = n.clone();
            }
            if !r.is_empty() {
                spec.r = r.clone();
            }
            if !alpha.is_empty() {
                spec.alpha = alpha.clone();
            }
            s.config.analyze = Some(spec.clone());
            commands::analyze::run(&s, &spec)
        }
        Command::SynthImages { width, height, count, binary } => {
            let mut s = settings(cli, false)?;
            let from_cfg = s.config.synth.clone();
            let pick = |flag: Option<usize>, cfg: Option<usize>, what: &str| {
                flag.or(cfg).ok_or_else(|| CliError::Usage(format!("--{what} is required without a [synth] section")))
            };
            let args = commands::synth::SynthArgs {
                width: pick(*width, from_cfg.as_ref().map(|c| c.width), "width")?,
                height: pick(*height, from_cfg.as_ref().map(|c| c.height), "height")?,
                count: count.or(from_cfg.as_ref().and_then(|c| c.count)).unwrap_or(s.config.chains),
                binary: *binary || from_cfg.as_ref().is_some_and(|c| c.binary),
            };
            s.config.synth = Some(config::SynthSpec {
                width: args.width,
                height: args.height,
                count: Some(args.count),
                binary: args.binary,
            });
            commands::synth::run(&s, args)
        }
        Command::Selftest { inject_fault } => {
            if let Some(path) = &cli.config {
                ExperimentConfig::load(path)?;
            }
            let fault = match inject_fault {
                Some(FaultArg::Windowed) => Fault::PerturbWindowedFormula,
                None => Fault::None,
            };
            commands::selftest::run(cli.seed, fault)
        }
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
