//! Config-driven experiment grids and their CSV/JSON outputs.

mod config;
mod runner;

use std::io::Write;

pub use config::{
    BatchConfig, CacheSection, CatalogConfig, ExperimentConfig, InitialState, OutputConfig, PolicyConfig, RunConfig,
    TraceConfig,
};
pub use runner::{
    aggregate, build_policy, execute, mean_ci95, run_experiment, simulate, AggregateRow, ExperimentOutcome, Manifest,
    PolicyRun, RunResult, RunSetup, RunSummary, MANIFEST_FILE,
};

use crate::bounds::alpha_threshold;
use crate::error::Result;

/// Writes `beta,alpha_threshold` rows for Zipf exponents `betas` over `n_files`.
pub fn emit_threshold_curve<W: Write>(betas: &[f64], n_files: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta", "alpha_threshold"])?;
    for &beta in betas {
        w.write_record([beta.to_string(), alpha_threshold(beta, n_files).to_string()])?;
    }
    w.flush()?;
    Ok(())
}
