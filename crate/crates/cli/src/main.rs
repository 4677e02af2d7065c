use std::path::PathBuf;
use std::process::ExitCode;

use attractlab::experiment::{run_experiment, sweep_parameter, verify_attractor_dir, Check, ExperimentConfig, RunManifest};
use attractlab::{fit_exponential_rate, DecayTrace, Error};
use clap::{Parser, Subcommand};

/// Attracting-set construction and decay-rate experiments.
///
/// Exit codes: 0 success, 1 configuration or I/O error, 2 numerical blow-up,
/// 3 acceptance thresholds unmet under --strict, 4 other numerical failure.
#[derive(Parser)]
#[command(name = "attractlab", version)]
struct Cli {
    /// Exit with code 3 when any acceptance check fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Repeat the experiment for each damping value.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// Fit an exponential rate to a trace CSV (`t,value,quantity,m_clusters`).
    Fit {
        trace: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        floor: f64,
    },
    /// Verify a stored attracting set against a fresh held-out sample.
    Verify {
        attractor_dir: PathBuf,
        config: PathBuf,
        /// Where to write the certificate CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Status {
    Done,
    Unsatisfied,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Unsatisfied) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_blow_up() {
        2
    } else if e.is_config() || matches!(e, Error::Io(_) | Error::Csv(_) | Error::Json(_)) {
        1
    } else {
        4
    }
}

fn execute(cli: &Cli) -> Result<Status, Error> {
    let checks = match &cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_path(config)?;
            report(&run_experiment(&cfg)?, &cfg)
        }
        Command::Sweep { config, values } => {
            let cfg = ExperimentConfig::from_path(config)?;
            report(&sweep_parameter(&cfg, values)?, &cfg)
        }
        Command::Fit { trace, floor } => {
            let trace = DecayTrace::read_csv(trace)?;
            let fit = fit_exponential_rate(&trace, *floor)?;
            println!("rate       {}", fit.rate);
            println!("amplitude  {}", fit.amplitude);
            println!("r_squared  {}", fit.r_squared);
            println!("window     [{}, {}]", fit.window.0, fit.window.1);
            println!("samples    {}", fit.samples);
            Vec::new()
        }
        Command::Verify {
            attractor_dir,
            config,
            out,
        } => {
            let cfg = ExperimentConfig::from_path(config)?;
            let (cert, checks) = verify_attractor_dir(attractor_dir, &cfg)?;
            if let Some(path) = out {
                cert.write_csv(path)?;
            }
            println!("times               {}", cert.times.len());
            println!("satisfied_fraction  {}", cert.satisfied_fraction);
            checks
        }
    };
    for c in &checks {
        println!("check {:<32} {}  {}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
    }
    if cli.strict && checks.iter().any(|c| !c.passed) {
        return Ok(Status::Unsatisfied);
    }
    Ok(Status::Done)
}

fn report(m: &RunManifest, cfg: &ExperimentConfig) -> Vec<Check> {
    println!("output     {}", cfg.output_dir.display());
    println!("duration   {:.2}s", m.duration_seconds);
    for (k, v) in &m.headlines {
        println!("{k:<32} {v}");
    }
    m.checks.clone()
}
