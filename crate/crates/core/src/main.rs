use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use optcache::experiment::{emit_threshold_curve, run_experiment, ExperimentConfig, Manifest, TraceConfig};
use optcache::traces::{generate_zipf, write_trace, TraceFormat, ZipfSpec};
use optcache::Result;

#[derive(Parser)]
#[command(name = "optcache", version, about = "Optimistic online caching simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid from a TOML config or a previous manifest.
    Run {
        #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
        config: Option<PathBuf>,
        /// Re-run the resolved config stored in a manifest.json.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Replay this trace file (one id per line) instead of the configured trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the relative cache size above which PCOC's expected bound beats OBC's.
    Threshold {
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2")]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        n_files: usize,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write an i.i.d. Zipf trace in the line format.
    Generate {
        #[arg(long)]
        n_files: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        n_requests: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, manifest, trace, out } => {
            let mut cfg = match (config, manifest) {
                (Some(path), _) => ExperimentConfig::load(&path)?,
                (None, Some(path)) => Manifest::load(&path)?.config,
                (None, None) => unreachable!("clap requires one of --config/--manifest"),
            };
            if let Some(path) = trace {
                let max_requests = match &cfg.trace {
                    TraceConfig::File { max_requests, .. } => *max_requests,
                    TraceConfig::Zipf { .. } => None,
                };
                cfg.trace = TraceConfig::File { path, format: TraceFormat::Lines, max_requests };
            }
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            let outcome = run_experiment(&cfg)?;
            println!("{} runs written to {}", outcome.results.len(), outcome.dir.display());
        }
        Command::Threshold { betas, n_files, out } => match out {
            Some(path) => emit_threshold_curve(&betas, n_files, BufWriter::new(File::create(path)?))?,
            None => emit_threshold_curve(&betas, n_files, io::stdout().lock())?,
        },
        Command::Generate { n_files, beta, n_requests, seed, out } => {
            let seq = generate_zipf(&ZipfSpec { n_files, beta, n_requests, seed })?;
            write_trace(&out, &seq)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::FAILURE
        }
    }
}
