use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Benchmark;
use crate::model::{CacheConfig, Catalog};
use crate::policies::{OlfuRule, PolicyKind};
use crate::predictors::PredictorSpec;
use crate::traces::TraceFormat;

/// Full description of an experiment grid, read from TOML.
///
/// ```toml
/// [catalog]
/// n_files = 1000
///
/// [cache]
/// capacity = 100
///
/// [trace]
/// source = "zipf"
/// beta = 0.8
/// n_requests = 100000
///
/// [batch]
/// sizes = [1000]
///
/// [[policies]]
/// kind = "obc"
///
/// [[policies]]
/// kind = "pcoc"
///
/// [predictor]
/// kind = "type3"
/// pi = 0.7
///
/// [run]
/// runs = 30
///
/// [output]
/// dir = "results"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub catalog: CatalogConfig,
    pub cache: CacheSection,
    pub trace: TraceConfig,
    #[serde(default)]
    pub batch: BatchConfig,
    pub policies: Vec<PolicyConfig>,
    #[serde(default = "default_predictor")]
    pub predictor: PredictorSpec,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogConfig {
    pub n_files: usize,
    /// Per-file retrieval cost; unit costs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSection {
    pub capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceConfig {
    Zipf {
        beta: f64,
        #[serde(default = "default_requests")]
        n_requests: usize,
        #[serde(default)]
        seed: u64,
        /// Draw a fresh trace for every run (seed + run index) instead of
        /// replaying one trace under different prediction seeds.
        #[serde(default)]
        reseed_per_run: bool,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        format: TraceFormat,
        /// Truncates the trace to its first `max_requests` ids.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_requests: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub sizes: Vec<u64>,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self { sizes: vec![1000] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Regularization scale override for OBC/PCOC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Fixed OGD step size; derived from the trace when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// OLFU reconciliation rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<OlfuRule>,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self { kind, sigma: None, eta: None, rule: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// `x_1 = k/N` on every file; LFU/LRU start empty.
    #[default]
    Uniform,
    /// The `k` files with the largest predicted demand in the first batch.
    PredictedTopK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Run `j` uses prediction seed `base_seed + j`.
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub benchmark: Benchmark,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            runs: default_runs(),
            base_seed: 0,
            initial_state: InitialState::default(),
            benchmark: Benchmark::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// When false, `update_nanos` is written as 0 and runs execute in
    /// parallel; outputs are then byte-reproducible.
    #[serde(default = "default_true")]
    pub record_timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), record_timing: true }
    }
}

fn default_predictor() -> PredictorSpec {
    PredictorSpec::None
}

fn default_requests() -> usize {
    100_000
}

fn default_runs() -> usize {
    30
}

fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_true() -> bool {
    true
}

fn field(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config(msg) => Error::Config(format!("{path}: {msg}")),
        other => Error::Config(format!("{path}: {other}")),
    }
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every field against the ranges accepted by the modules that
    /// consume it. Errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        self.catalog_model()?;
        self.cache_config()?;
        if self.batch.sizes.is_empty() {
            return Err(invalid("batch.sizes", "at least one batch size is required"));
        }
        if let Some(i) = self.batch.sizes.iter().position(|&r| r == 0) {
            return Err(invalid(&format!("batch.sizes[{i}]"), "batch size must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(invalid("policies", "at least one policy is required"));
        }
        for (i, p) in self.policies.iter().enumerate() {
            if let Some(s) = p.sigma {
                if !(s.is_finite() && s >= 0.0) {
                    return Err(invalid(&format!("policies[{i}].sigma"), "must be finite and nonnegative"));
                }
            }
            if let Some(eta) = p.eta {
                if !(eta.is_finite() && eta >= 0.0) {
                    return Err(invalid(&format!("policies[{i}].eta"), "must be finite and nonnegative"));
                }
            }
        }
        self.predictor.validate().map_err(field("predictor"))?;
        if let PredictorSpec::PoissonMean { means } = &self.predictor {
            if means.is_empty() && !matches!(self.trace, TraceConfig::Zipf { .. }) {
                return Err(invalid("predictor.means", "can only be derived for a zipf trace"));
            }
            if !means.is_empty() && means.len() != self.catalog.n_files {
                return Err(invalid(
                    "predictor.means",
                    format!("expected {} values, got {}", self.catalog.n_files, means.len()),
                ));
            }
        }
        match &self.trace {
            TraceConfig::Zipf { beta, n_requests, .. } => {
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(invalid("trace.beta", "Zipf exponent must be >= 0"));
                }
                if *n_requests == 0 {
                    return Err(invalid("trace.n_requests", "must be at least 1"));
                }
            }
            TraceConfig::File { format: TraceFormat::Csv { delimiter, .. }, .. } if !delimiter.is_ascii() => {
                return Err(invalid("trace.format.delimiter", "must be an ASCII character"));
            }
            TraceConfig::File { .. } => {}
        }
        if self.run.runs == 0 {
            return Err(invalid("run.runs", "must be at least 1"));
        }
        Ok(())
    }

    pub fn catalog_model(&self) -> Result<Catalog> {
        match &self.catalog.weights {
            None => Catalog::uniform(self.catalog.n_files).map_err(field("catalog.n_files")),
            Some(w) => {
                if w.len() != self.catalog.n_files {
                    return Err(invalid(
                        "catalog.weights",
                        format!("expected {} values, got {}", self.catalog.n_files, w.len()),
                    ));
                }
                Catalog::with_weights(w.clone()).map_err(field("catalog.weights"))
            }
        }
    }

    pub fn cache_config(&self) -> Result<CacheConfig> {
        CacheConfig::new(self.cache.capacity, self.catalog.n_files).map_err(field("cache.capacity"))
    }
}
