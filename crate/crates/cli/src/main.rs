use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hk_noise_cli::commands::{self, Overrides, SimulateOptions, Suite};
use hk_noise_cli::{CliError, CliResult, Preset, RunConfigFile};

/// Hegselmann-Krause dynamics with one noisy agent: simulation, stopping
/// time estimates and verification checks.
#[derive(Parser, Debug)]
#[command(name = "hk-noise", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one episode and write its trajectory and stopping times
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// record only t, d_V, d_V^A, the noisy opinion and the draw
        #[arg(long)]
        metrics_only: bool,
        /// keep going after every stopping time has been detected
        #[arg(long)]
        run_to_horizon: bool,
    },
    /// Estimate the mean stopping time over many seeded runs
    Estimate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// worker threads (results do not depend on it)
        #[arg(long, default_value_t = default_threads())]
        parallelism: usize,
    },
    /// Run the verification checks
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = default_threads())]
        parallelism: usize,
        #[arg(long, default_value = "out/verify")]
        out: PathBuf,
    },
    /// Reproduce a figure configuration as CSV plus a plot script stub
    Figure {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long)]
        seed: Option<u64>,
        /// number of steps (default 50000)
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Args, Debug)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            seed: a.seed,
            horizon: a.horizon,
            runs: a.runs,
            out: a.out,
        }
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load(source: Source, overrides: OverrideArgs) -> CliResult<RunConfigFile> {
    let cfg = match (source.config, source.preset) {
        (Some(path), _) => RunConfigFile::load(&path)?,
        (None, Some(p)) => p.config(),
        (None, None) => return Err(CliError::Usage("pass --config or --preset".into())),
    };
    Overrides::from(overrides).apply(cfg)
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Simulate {
            source,
            overrides,
            metrics_only,
            run_to_horizon,
        } => {
            let cfg = load(source, overrides)?;
            let opts = SimulateOptions {
                metrics_only,
                run_to_horizon,
            };
            let (_, summary) = commands::simulate(&cfg, opts)?;
            println!("{summary}");
        }
        Command::Estimate {
            source,
            overrides,
            parallelism,
        } => {
            let cfg = load(source, overrides)?;
            let (_, summary) = commands::estimate(&cfg, parallelism)?;
            println!("{summary}");
        }
        Command::Verify {
            suite,
            seed,
            parallelism,
            out,
        } => {
            let report = commands::verify(suite, seed, parallelism.max(1), &out)?;
            for c in &report.checks {
                println!("{c}");
            }
            println!("wrote verify.json to {}", out.display());
            return Ok(report.passed);
        }
        Command::Figure {
            preset,
            seed,
            horizon,
            out,
        } => {
            let overrides = Overrides {
                seed,
                horizon,
                runs: None,
                out,
            };
            println!("{}", commands::figure(preset, &overrides)?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
