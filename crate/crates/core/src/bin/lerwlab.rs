use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lerwlab::lab::{self, CommandReport, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lerwlab", version, about = "LERW and SLE(2) experiments")]
struct Cli {
    /// TOML experiment configuration (defaults are used when absent).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and write the lattice domains.
    Domain,
    /// One-point, length and content exponent regressions.
    Exponents,
    /// Weight martingales, boundary kernel table and harmonic ratios.
    Rn,
    /// Weighted-chordal against direct-radial comparisons.
    Couple,
    /// Fit the time normalization constant.
    CalibrateCstar,
}

fn run(cli: Cli) -> lerwlab::Result<CommandReport> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| lerwlab::Error::Precondition(e.to_string()))?;
    }
    let dir = PathBuf::from(&cfg.out);
    match cli.command {
        Command::Domain => lab::cmd_domain(&cfg, &dir),
        Command::Exponents => lab::cmd_exponents(&cfg, &dir),
        Command::Rn => lab::cmd_rn(&cfg, &dir),
        Command::Couple => lab::cmd_couple(&cfg, &dir),
        Command::CalibrateCstar => lab::cmd_calibrate_cstar(&cfg, &dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            for c in &report.checks {
                println!("{} {} = {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.criterion);
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("config {}", report.config_hash);
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
