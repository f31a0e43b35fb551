use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::metrics::{amortized_cost, build_records, ExperimentRecord};
use crate::model::{gradient_from_batch, CacheConfig, CacheState, Catalog, RequestBatch};
use crate::policies::{ogd_step_size, CachePolicy, LfuPolicy, LruPolicy, ObcPolicy, OgdPolicy, PcocPolicy, PolicyKind};
use crate::predictors::{Prediction, Predictor, PredictorSpec, Warmup};
use crate::traces::{batch_requests, generate_zipf, load_trace, zipf_pmf, ZipfSpec};

use super::config::{ExperimentConfig, InitialState, PolicyConfig, TraceConfig};

/// Batched trace plus the prediction of every batch, shared by all policies
/// of one run.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub catalog: Catalog,
    pub cache: CacheConfig,
    pub batch_size: u64,
    requests: Vec<usize>,
    pub batches: Vec<RequestBatch>,
    /// `predictions[t]` predicts `batches[t]`.
    pub predictions: Vec<Prediction>,
    pub dropped: usize,
}

impl RunSetup {
    /// Batches `seq` and queries `predictor` in trace order: the first
    /// batch is predicted before anything is revealed, batch `t + 1` after
    /// batch `t` has been observed.
    pub fn new(
        catalog: Catalog,
        cache: CacheConfig,
        seq: &[usize],
        batch_size: u64,
        predictor: &mut Predictor,
    ) -> Result<Self> {
        crate::error::check_len(catalog.n_files(), cache.n_files())?;
        let batching = batch_requests(seq, catalog.n_files(), batch_size as usize)?;
        if batching.batches.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "trace of {} requests does not fill a single batch of {batch_size}",
                seq.len()
            )));
        }
        let mut predictions = Vec::with_capacity(batching.batches.len());
        for (t, batch) in batching.batches.iter().enumerate() {
            if t > 0 {
                predictor.observe(&batching.batches[t - 1]);
            }
            predictions.push(predictor.predict(batch)?);
        }
        let used = seq.len() - batching.dropped;
        Ok(Self {
            catalog,
            cache,
            batch_size,
            requests: seq[..used].to_vec(),
            batches: batching.batches,
            predictions,
            dropped: batching.dropped,
        })
    }

    /// Number of batches `T`.
    pub fn horizon(&self) -> usize {
        self.batches.len()
    }

    /// Requests of batch `t` (0-based) in arrival order.
    pub fn requests_of(&self, t: usize) -> &[usize] {
        let r = self.batch_size as usize;
        &self.requests[t * r..(t + 1) * r]
    }

    /// Realized prediction errors: `||g_t - g~_t||^2` per batch and
    /// `sum_t (g_{t,i} - g~_{t,i})^2` per file.
    pub fn error_series(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut per_t = Vec::with_capacity(self.horizon());
        let mut per_file = vec![0.0; self.catalog.n_files()];
        for (batch, pred) in self.batches.iter().zip(&self.predictions) {
            let g = gradient_from_batch(&self.catalog, batch)?;
            let mut acc = 0.0;
            for ((a, b), f) in g.as_slice().iter().zip(pred.gradient().as_slice()).zip(per_file.iter_mut()) {
                let d = (a - b) * (a - b);
                acc += d;
                *f += d;
            }
            per_t.push(acc);
        }
        Ok((per_t, per_file))
    }

    /// OBC and PCOC regret bounds evaluated on the realized errors.
    pub fn realized_bounds(&self) -> Result<(f64, f64)> {
        let (per_t, per_file) = self.error_series()?;
        Ok((
            bounds::obc_bound(self.cache.capacity(), self.cache.n_files(), &per_t),
            bounds::pcoc_bound_from_totals(&per_file),
        ))
    }

    /// Largest per-file count over all batches.
    pub fn max_count(&self) -> u64 {
        self.batches.iter().map(RequestBatch::max_count).max().unwrap_or(0)
    }

    pub fn initial_state(&self, init: InitialState) -> Result<CacheState> {
        match init {
            InitialState::Uniform => Ok(CacheState::uniform(&self.cache)),
            InitialState::PredictedTopK => {
                let score: Vec<f64> = self.predictions[0].gradient().as_slice().iter().map(|g| -g).collect();
                CacheState::top_k(&score, self.cache.capacity())
            }
        }
    }

    /// OGD step size from the observed gradient bound, falling back to a
    /// bound of one request when the trace never repeats a file.
    pub fn ogd_eta(&self) -> Result<f64> {
        ogd_step_size(
            self.cache.capacity(),
            self.horizon(),
            self.catalog.max_weight(),
            self.batch_size,
            self.max_count().max(1),
        )
    }
}

/// Builds a policy in the state it holds before the first batch. Optimistic
/// LFU/LRU already hold the first prediction.
pub fn build_policy(spec: &PolicyConfig, setup: &RunSetup, x1: &CacheState, seed: u64) -> Result<Box<dyn CachePolicy>> {
    let catalog = setup.catalog.clone();
    let k = setup.cache.capacity();
    let first = &setup.predictions[0];
    let integral = x1.is_integral();
    Ok(match spec.kind {
        PolicyKind::Obc => Box::new(match spec.sigma {
            Some(s) => ObcPolicy::with_sigma(catalog, &setup.cache, x1.clone(), Some(first), s)?,
            None => ObcPolicy::new(catalog, &setup.cache, x1.clone(), Some(first))?,
        }),
        PolicyKind::Pcoc => Box::new(match spec.sigma {
            Some(s) => PcocPolicy::with_sigma(catalog, &setup.cache, x1.clone(), Some(first), s)?,
            None => PcocPolicy::new(catalog, &setup.cache, x1.clone(), Some(first))?,
        }),
        PolicyKind::Ogd => {
            let eta = match spec.eta {
                Some(eta) => eta,
                None => setup.ogd_eta()?,
            };
            Box::new(OgdPolicy::new(catalog, &setup.cache, x1.clone(), eta)?)
        }
        PolicyKind::Lfu | PolicyKind::Olfu => {
            let mut p = if spec.kind == PolicyKind::Olfu {
                LfuPolicy::optimistic(catalog, k, spec.rule.unwrap_or_default(), seed)?
            } else {
                LfuPolicy::new(catalog, k)?
            };
            if integral {
                p = p.with_initial(x1)?;
            }
            if spec.kind == PolicyKind::Olfu {
                p.begin_batch(&first.integer_counts())?;
            }
            Box::new(p)
        }
        PolicyKind::Lru | PolicyKind::Olru => {
            let mut p = if spec.kind == PolicyKind::Olru {
                LruPolicy::optimistic(catalog, k)?
            } else {
                LruPolicy::new(catalog, k)?
            };
            if integral {
                p = p.with_initial(x1)?;
            }
            if spec.kind == PolicyKind::Olru {
                p.begin_batch(&first.integer_counts())?;
            }
            Box::new(p)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub costs: Vec<f64>,
    /// Time spent changing the cache state per batch: the update for
    /// batch policies, serving plus update for per-request ones.
    pub update_nanos: Vec<u64>,
}

/// Replays the run through `policy`: serve batch `t`, then update with the
/// prediction of batch `t + 1`. The last update receives an empty
/// prediction so every batch carries one timed update.
pub fn simulate(policy: &mut dyn CachePolicy, setup: &RunSetup, record_timing: bool) -> Result<PolicyRun> {
    let horizon = setup.horizon();
    let mut costs = Vec::with_capacity(horizon);
    let mut update_nanos = Vec::with_capacity(horizon);
    let empty = Prediction::zero(&setup.catalog);
    let timed_serve = policy.per_request() && record_timing;
    for t in 0..horizon {
        let next = setup.predictions.get(t + 1).unwrap_or(&empty);
        let start = Instant::now();
        costs.push(policy.serve(setup.requests_of(t), &setup.batches[t])?);
        let served = start.elapsed();
        let start = Instant::now();
        policy.update(next)?;
        let updated = start.elapsed();
        update_nanos.push(match (record_timing, timed_serve) {
            (false, _) => 0,
            (true, true) => (served + updated).as_nanos() as u64,
            (true, false) => updated.as_nanos() as u64,
        });
    }
    Ok(PolicyRun { costs, update_nanos })
}

/// Per-run facts written to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub policy: PolicyKind,
    pub batch_size: u64,
    pub run: usize,
    pub prediction_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_seed: Option<u64>,
    pub file: String,
    pub horizon: usize,
    pub dropped: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ogd_eta: Option<f64>,
    /// OBC bound on this run's realized prediction errors.
    pub obc_bound: f64,
    /// PCOC bound on this run's realized prediction errors.
    pub pcoc_bound: f64,
    pub final_cost: f64,
    pub final_regret: f64,
    pub final_miss_ratio: f64,
    pub amortized_nanos: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: RunSummary,
    pub records: Vec<ExperimentRecord>,
}

/// Output names: the policy kind, numbered when a kind repeats, suffixed
/// with the batch size when several sizes are swept.
fn labels(cfg: &ExperimentConfig) -> Vec<String> {
    let mut seen: HashMap<PolicyKind, usize> = HashMap::new();
    for p in &cfg.policies {
        *seen.entry(p.kind).or_default() += 1;
    }
    let mut nth: HashMap<PolicyKind, usize> = HashMap::new();
    cfg.policies
        .iter()
        .map(|p| {
            let i = nth.entry(p.kind).or_default();
            *i += 1;
            if seen[&p.kind] > 1 {
                format!("{}{}", p.kind, i)
            } else {
                p.kind.to_string()
            }
        })
        .collect()
}

fn label_for(base: &str, batch_size: u64, sweep: bool) -> String {
    if sweep {
        format!("{base}_R{batch_size}")
    } else {
        base.to_string()
    }
}

fn load_sequence(cfg: &ExperimentConfig, run: usize) -> Result<(Vec<usize>, Option<u64>)> {
    match &cfg.trace {
        TraceConfig::Zipf { beta, n_requests, seed, reseed_per_run } => {
            let seed = if *reseed_per_run { seed + run as u64 } else { *seed };
            let spec = ZipfSpec { n_files: cfg.catalog.n_files, beta: *beta, n_requests: *n_requests, seed };
            Ok((generate_zipf(&spec)?, Some(seed)))
        }
        TraceConfig::File { path, format, max_requests } => {
            let mut seq = load_trace(path, cfg.catalog.n_files, format)?;
            if let Some(m) = max_requests {
                seq.truncate(*m);
            }
            Ok((seq, None))
        }
    }
}

fn resolve_predictor(cfg: &ExperimentConfig, batch_size: u64) -> PredictorSpec {
    match (&cfg.predictor, &cfg.trace) {
        (PredictorSpec::PoissonMean { means }, TraceConfig::Zipf { beta, .. }) if means.is_empty() => {
            let means = zipf_pmf(cfg.catalog.n_files, *beta).into_iter().map(|p| p * batch_size as f64).collect();
            PredictorSpec::PoissonMean { means }
        }
        (spec, _) => spec.clone(),
    }
}

fn run_job(
    cfg: &ExperimentConfig,
    labels: &[String],
    shared: Option<&Arc<Vec<usize>>>,
    batch_size: u64,
    run: usize,
) -> Result<Vec<RunResult>> {
    let catalog = cfg.catalog_model()?;
    let cache = cfg.cache_config()?;
    let (owned, trace_seed) = match shared {
        Some(_) => (
            None,
            match &cfg.trace {
                TraceConfig::Zipf { seed, .. } => Some(*seed),
                TraceConfig::File { .. } => None,
            },
        ),
        None => {
            let (seq, seed) = load_sequence(cfg, run)?;
            (Some(seq), seed)
        }
    };
    let seq: &[usize] = match (&owned, shared) {
        (Some(s), _) => s,
        (None, Some(s)) => s,
        (None, None) => unreachable!(),
    };
    let seed = cfg.run.base_seed + run as u64;
    let mut predictor = Predictor::new(resolve_predictor(cfg, batch_size), catalog.clone(), seed)?;
    let seq = if let PredictorSpec::PreviousBatch { warmup } = cfg.predictor {
        if warmup >= seq.len() {
            return Err(Error::Config(format!("predictor.warmup: {warmup} requests leave no trace to evaluate")));
        }
        let counts = RequestBatch::from_requests(&seq[..warmup], catalog.n_files())?;
        predictor = predictor.with_warmup(Warmup {
            counts: counts.counts().iter().map(|&c| c as f64).collect(),
            tau0: warmup as f64,
            tau: batch_size as f64,
        })?;
        &seq[warmup..]
    } else {
        seq
    };
    let setup = RunSetup::new(catalog, cache, seq, batch_size, &mut predictor)?;
    let (obc_bound, pcoc_bound) = setup.realized_bounds()?;
    let x1 = setup.initial_state(cfg.run.initial_state)?;
    let sweep = cfg.batch.sizes.len() > 1;

    let mut out = Vec::with_capacity(cfg.policies.len());
    for (spec, base) in cfg.policies.iter().zip(labels) {
        let mut policy = build_policy(spec, &setup, &x1, seed)?;
        let sim = simulate(policy.as_mut(), &setup, cfg.output.record_timing)?;
        let records = build_records(
            &sim.costs,
            &sim.update_nanos,
            &setup.catalog,
            &setup.batches,
            setup.cache.capacity(),
            cfg.run.benchmark,
        )?;
        let last = records.last().expect("at least one batch");
        let label = label_for(base, batch_size, sweep);
        let ogd_eta = match spec.kind {
            PolicyKind::Ogd => Some(match spec.eta {
                Some(e) => e,
                None => setup.ogd_eta()?,
            }),
            _ => None,
        };
        out.push(RunResult {
            summary: RunSummary {
                file: format!("{label}_seed{seed}.csv"),
                label,
                policy: spec.kind,
                batch_size,
                run,
                prediction_seed: seed,
                trace_seed,
                horizon: setup.horizon(),
                dropped: setup.dropped,
                ogd_eta,
                obc_bound,
                pcoc_bound,
                final_cost: last.cum_cost,
                final_regret: last.regret,
                final_miss_ratio: last.miss_ratio,
                amortized_nanos: amortized_cost(&sim.update_nanos, batch_size),
            },
            records,
        });
    }
    Ok(out)
}

/// Runs every (batch size, run) pair of the grid and returns the results
/// ordered by batch size, run, then policy. Runs execute in parallel only
/// when timing is off, so measured update times are not contended.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let labels = labels(cfg);
    let shared = match &cfg.trace {
        TraceConfig::Zipf { reseed_per_run: true, .. } => None,
        _ => Some(Arc::new(load_sequence(cfg, 0)?.0)),
    };
    let jobs: Vec<(u64, usize)> =
        cfg.batch.sizes.iter().flat_map(|&r| (0..cfg.run.runs).map(move |j| (r, j))).collect();
    let job = |&(r, j): &(u64, usize)| run_job(cfg, &labels, shared.as_ref(), r, j);
    let results: Vec<Vec<RunResult>> = if cfg.output.record_timing {
        jobs.iter().map(job).collect::<Result<_>>()?
    } else {
        jobs.par_iter().map(job).collect::<Result<_>>()?
    };
    Ok(results.into_iter().flatten().collect())
}

/// Mean and 0.95 confidence half-width `1.96 s / sqrt(n)` across runs.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub t: usize,
    pub mean_miss: f64,
    pub ci95_miss: f64,
    pub mean_regret: f64,
    pub ci95_regret: f64,
}

/// Per-`t` statistics of one label across its runs.
pub fn aggregate(runs: &[&RunResult]) -> Vec<AggregateRow> {
    let horizon = runs.iter().map(|r| r.records.len()).min().unwrap_or(0);
    (0..horizon)
        .map(|i| {
            let miss: Vec<f64> = runs.iter().map(|r| r.records[i].miss_ratio).collect();
            let regret: Vec<f64> = runs.iter().map(|r| r.records[i].regret).collect();
            let (mean_miss, ci95_miss) = mean_ci95(&miss);
            let (mean_regret, ci95_regret) = mean_ci95(&regret);
            AggregateRow { t: i + 1, mean_miss, ci95_miss, mean_regret, ci95_regret }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub git_describe: String,
    pub started_unix_secs: u64,
    pub wall_clock_secs: f64,
    pub runs: Vec<RunSummary>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub results: Vec<RunResult>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the grid and writes per-run CSVs, `aggregate_<label>.csv` and the
/// manifest into `cfg.output.dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let results = execute(cfg)?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;

    let mut by_label: Vec<(&str, Vec<&RunResult>)> = Vec::new();
    for r in &results {
        write_csv(&dir.join(&r.summary.file), &r.records)?;
        match by_label.iter_mut().find(|(l, _)| *l == r.summary.label) {
            Some((_, v)) => v.push(r),
            None => by_label.push((&r.summary.label, vec![r])),
        }
    }
    for (label, runs) in &by_label {
        write_csv(&dir.join(format!("aggregate_{label}.csv")), &aggregate(runs))?;
    }

    let manifest = Manifest {
        config: cfg.clone(),
        git_describe: env!("GIT_DESCRIBE").to_string(),
        started_unix_secs: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        wall_clock_secs: clock.elapsed().as_secs_f64(),
        runs: results.iter().map(|r| r.summary.clone()).collect(),
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    log::info!("wrote {} runs to {}", results.len(), dir.display());
    Ok(ExperimentOutcome { dir, manifest, results })
}
