use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vdamp_cli::config::{validate_config, ExperimentConfig};
use vdamp_cli::experiment::{list_outputs, run_experiment};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "vdamp-cli", version, about = "Run VDAMP / FISTA / SURE-IT reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (undersampling factor, algorithm) cell and write artifacts.
    Run {
        /// TOML configuration; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for independent cells.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Report configuration violations without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the files of a completed run.
    ListOutputs {
        /// Read the output directory from this configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run directory; takes precedence over the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: Option<&PathBuf>) -> Result<ExperimentConfig, ExitCode> {
    match config {
        None => Ok(ExperimentConfig::default()),
        Some(path) => ExperimentConfig::load(path).map_err(|e| {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }),
    }
}

fn run(config: Option<PathBuf>, seed: Option<u64>, out: Option<PathBuf>, threads: Option<usize>) -> ExitCode {
    let mut cfg = match load(config.as_ref()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(seed) = seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = out {
        cfg.run.output_dir = out;
    }
    if threads.is_some() {
        cfg.run.threads = threads;
    }
    let violations = cfg.violations();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("invalid configuration: {v}");
        }
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Some(n) = cfg.run.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match run_experiment(&cfg) {
        Ok(summary) => {
            for c in &summary.cells {
                let lambda = c.lambda.map(|l| format!("  lambda {l:.3e}")).unwrap_or_default();
                println!(
                    "{:<14} R {:>5.2} (mask {:.2})  {} iterations  NMSE {:>8.2} dB{lambda}",
                    c.run_id, c.undersampling, c.measured_undersampling, c.iterations, c.final_nmse_db
                );
            }
            println!("wrote {}", summary.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, seed, out, threads } => run(config, seed, out, threads),
        Command::Validate { config } => match validate_config(&config) {
            Ok(report) if report.is_empty() => {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Ok(report) => {
                for v in &report.violations {
                    println!("{v}");
                }
                ExitCode::from(EXIT_CONFIG)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::ListOutputs { config, out } => {
            let dir = match out {
                Some(d) => d,
                None => match load(config.as_ref()) {
                    Ok(c) => c.run.output_dir,
                    Err(code) => return code,
                },
            };
            match list_outputs(&dir) {
                Ok(files) => {
                    for f in files {
                        println!("{}", dir.join(f).display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
    }
}
