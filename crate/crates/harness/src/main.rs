use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use covapprox::commands;
use covapprox::experiments::{self, EXPERIMENTS};
use covapprox::report::write_report;
use covapprox::{ExperimentConfig, Format, HarnessError, Report};

/// Build, certify and benchmark convex-body approximations of a covariance ellipsoid.
#[derive(Parser)]
#[command(name = "covapprox", version)]
struct Cli {
    /// TOML config; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    directions: Option<usize>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample data and write the constructed body as JSON.
    Build {
        /// Include the two-layer threshold network (slab bodies only).
        #[arg(long)]
        network: bool,
    },
    /// Build a body and measure its radial ratios on the true L2 sphere.
    Certify,
    /// Run a named experiment.
    Experiment {
        /// Experiment name; defaults to the config's `experiment` key.
        name: Option<String>,
        /// Exit with status 3 if the experiment's thresholds are not met.
        #[arg(long)]
        assert: bool,
        /// List registered experiments and exit.
        #[arg(long)]
        list: bool,
    },
    /// Estimate the smallest block size m0(eta).
    EstimateM0,
    /// Empirical covariance deviation and its bound terms.
    Baseline,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut c = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    c.seed = cli.seed.or(c.seed);
    c.output = cli.out.clone().or(c.output);
    c.format = cli.format.or(c.format);
    c.directions = cli.directions.or(c.directions);
    c.trials = cli.trials.or(c.trials);
    Ok(c)
}

fn emit_text(text: &str, c: &ExperimentConfig) -> Result<(), HarnessError> {
    match &c.output {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit(report: &Report, c: &ExperimentConfig, elapsed: f64) -> Result<(), HarnessError> {
    let format = c.format.unwrap_or(Format::Json);
    match &c.output {
        Some(p) => write_report(report, format, p, elapsed),
        None => emit_text(&report.render(format)?, c),
    }
}

fn run(cli: &Cli) -> Result<ExitCode, HarnessError> {
    let c = load_config(cli)?;
    let start = Instant::now();
    let report = match &cli.command {
        Command::Build { network } => {
            let built = commands::build(&c)?;
            emit_text(&commands::build_json(&built, *network)?, &c)?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Certify => commands::certify(&c)?,
        Command::EstimateM0 => commands::estimate_m0(&c)?,
        Command::Baseline => commands::baseline(&c)?,
        Command::Experiment { list: true, .. } => {
            for e in EXPERIMENTS {
                println!("{:<22} {}", e.name, e.summary);
            }
            return Ok(ExitCode::SUCCESS);
        }
        Command::Experiment { name, assert, .. } => {
            let name = name.clone().or_else(|| c.experiment.clone()).ok_or_else(|| {
                HarnessError::config("experiment", "no experiment named on the command line or in the config")
            })?;
            let report = experiments::run_experiment(&name, &c)?;
            emit(&report, &c, start.elapsed().as_secs_f64())?;
            if *assert && report.passed == Some(false) {
                eprintln!("{name}: acceptance thresholds not met");
                return Ok(ExitCode::from(3));
            }
            return Ok(ExitCode::SUCCESS);
        }
    };
    emit(&report, &c, start.elapsed().as_secs_f64())?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
