//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use optcache::bounds::{batch_error_analysis, PoissonModel, PredictionModel};
use optcache::experiment::{
    emit_threshold_curve, execute, mean_ci95, BatchConfig, CacheSection, CatalogConfig, ExperimentConfig, InitialState,
    OutputConfig, PolicyConfig, RunConfig, RunResult, TraceConfig,
};
use optcache::metrics::Benchmark;
use optcache::model::{Catalog, RequestBatch};
use optcache::policies::{LfuPolicy, OlfuRule, PolicyKind};
use optcache::predictors::{predict_type3, PredictorSpec};
use optcache::simplex::{solve_diag_qp, DiagonalQp};
use optcache::traces::{generate_zipf, write_trace, zipf_pmf, ZipfSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Criterion 1: objective gap to the brute-force oracle.
const ORACLE_TOL: f64 = 1e-6;
const ORACLE_INSTANCES: usize = 1000;
const ORACLE_BUDGET_SECS: f64 = 10.0;
/// Criterion 2: final regret relative to total cost.
const ZERO_REGRET_REL: f64 = 1e-6;
/// Criterion 4: slope of log regret against log t over the last decade.
const MAX_SLOPE: f64 = 0.75;
/// Criterion 6/7: runs per configuration.
const RUNS: usize = 30;
/// Criterion 9: timing repetitions; the minimum per batch size is compared.
const TIMING_REPS: usize = 5;

const N: usize = 1000;
const I: usize = 100_000;

fn zipf_config(beta: f64, k: usize, r: u64, predictor: PredictorSpec, policies: &[PolicyKind]) -> ExperimentConfig {
    ExperimentConfig {
        catalog: CatalogConfig { n_files: N, weights: None },
        cache: CacheSection { capacity: k },
        trace: TraceConfig::Zipf { beta, n_requests: I, seed: 1, reseed_per_run: false },
        batch: BatchConfig { sizes: vec![r] },
        policies: policies.iter().map(|&p| PolicyConfig::new(p)).collect(),
        predictor,
        run: RunConfig {
            runs: 1,
            base_seed: 0,
            initial_state: InitialState::PredictedTopK,
            benchmark: Benchmark::Horizon,
        },
        output: OutputConfig { dir: PathBuf::from("unused"), record_timing: false },
    }
}

fn of(results: &[RunResult], kind: PolicyKind) -> Vec<&RunResult> {
    results.iter().filter(|r| r.summary.policy == kind).collect()
}

type Outcome = Result<(bool, String), optcache::Error>;
type Check = fn() -> Outcome;

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..ORACLE_INSTANCES {
        let (a, b, k) = common::random_instance(&mut rng, 6);
        let x = solve_diag_qp(&DiagonalQp::new(a.clone(), b.clone(), k)?)?;
        let (_, best) = common::oracle(&a, &b, k);
        worst = worst.max((common::objective(&a, &b, x.as_slice()) - best).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= ORACLE_TOL && secs < ORACLE_BUDGET_SECS,
        format!("{ORACLE_INSTANCES} instances, max objective gap {worst:.2e} (tol {ORACLE_TOL:.0e}), {secs:.2}s (budget {ORACLE_BUDGET_SECS}s)"),
    ))
}

fn zero_regret() -> Outcome {
    let cfg = zipf_config(0.8, 100, 1000, PredictorSpec::Type3 { pi: 1.0 }, &[PolicyKind::Obc, PolicyKind::Pcoc]);
    let results = execute(&cfg)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for r in &results {
        let s = &r.summary;
        let limit = ZERO_REGRET_REL * s.final_cost;
        ok &= s.final_regret <= limit;
        parts.push(format!("{} regret {:.3e} <= {:.3e}", s.label, s.final_regret, limit));
    }
    Ok((ok, parts.join(", ")))
}

fn bound_domination() -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut tightest = f64::INFINITY;
    for beta in [0.8, 1.5] {
        for k in [50, 100] {
            for pi in [0.1, 0.7, 1.0] {
                let mut cfg =
                    zipf_config(beta, k, 1000, PredictorSpec::Type3 { pi }, &[PolicyKind::Obc, PolicyKind::Pcoc]);
                cfg.run.runs = 3;
                for r in execute(&cfg)? {
                    let s = &r.summary;
                    let bound = if s.policy == PolicyKind::Obc { s.obc_bound } else { s.pcoc_bound };
                    checked += 1;
                    if bound > 0.0 {
                        tightest = tightest.min((bound - s.final_regret) / bound);
                    }
                    if s.final_regret > bound {
                        failures.push(format!("{} beta={beta} k={k} pi={pi}: {} > {}", s.label, s.final_regret, bound));
                    }
                }
            }
        }
    }
    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            format!("{checked} runs, regret <= realized bound on all (smallest relative slack {tightest:.3})")
        } else {
            failures.join("; ")
        },
    ))
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn sublinearity() -> Outcome {
    let mut cfg = zipf_config(0.8, 100, 100, PredictorSpec::Type1 { xi: 0.4 }, &[PolicyKind::Obc]);
    cfg.run.benchmark = Benchmark::Prefix;
    cfg.run.initial_state = InitialState::Uniform;
    let results = execute(&cfg)?;
    let records = &results[0].records;
    let horizon = records.len();
    let from = horizon / 10;
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        records[from - 1..].iter().map(|r| ((r.t as f64).ln(), r.regret.max(1.0).ln())).unzip();
    let slope = least_squares_slope(&xs, &ys);
    Ok((
        slope < MAX_SLOPE,
        format!(
            "slope {slope:.3} over t in [{from}, {horizon}] (limit {MAX_SLOPE}), final regret {:.1}",
            records[horizon - 1].regret
        ),
    ))
}

fn threshold_curve() -> Outcome {
    let betas = [0.0, 0.5, 1.0, 1.5, 2.0];
    let mut buf = Vec::new();
    emit_threshold_curve(&betas, N, &mut buf)?;
    let text = String::from_utf8(buf).expect("CSV is UTF-8");
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).and_then(|v| v.parse().ok()).expect("numeric threshold"))
        .collect();
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    Ok((values[0] == 0.5 && decreasing, format!("thresholds {values:?}")))
}

fn pcoc_beats_obc() -> Outcome {
    let mut cfg = zipf_config(1.5, 600, 1000, PredictorSpec::Type3 { pi: 0.7 }, &[PolicyKind::Obc, PolicyKind::Pcoc]);
    cfg.run.runs = RUNS;
    cfg.run.initial_state = InitialState::Uniform;
    let results = execute(&cfg)?;
    let final_miss = |k| of(&results, k).iter().map(|r| r.summary.final_miss_ratio).collect::<Vec<_>>();
    let (po, co) = mean_ci95(&final_miss(PolicyKind::Obc));
    let (pp, cp) = mean_ci95(&final_miss(PolicyKind::Pcoc));
    Ok((
        pp < po && pp + cp < po - co,
        format!("PCOC {pp:.5} +- {cp:.5} vs OBC {po:.5} +- {co:.5} over {RUNS} prediction seeds"),
    ))
}

fn pcoc_beats_lfu() -> Outcome {
    let mut cfg = zipf_config(0.9, 50, 100, PredictorSpec::Type1 { xi: 0.9 }, &[PolicyKind::Pcoc, PolicyKind::Lfu]);
    cfg.run.runs = RUNS;
    cfg.run.initial_state = InitialState::Uniform;
    cfg.trace = TraceConfig::Zipf { beta: 0.9, n_requests: I, seed: 1, reseed_per_run: true };
    let results = execute(&cfg)?;
    let final_miss = |k| of(&results, k).iter().map(|r| r.summary.final_miss_ratio).collect::<Vec<_>>();
    let (pl, cl) = mean_ci95(&final_miss(PolicyKind::Lfu));
    let (pp, cp) = mean_ci95(&final_miss(PolicyKind::Pcoc));
    Ok((pp < pl, format!("PCOC {pp:.5} +- {cp:.5} vs LFU {pl:.5} +- {cl:.5} over {RUNS} traces")))
}

fn olfu_equality() -> Outcome {
    let n = 200;
    let catalog = Catalog::uniform(n)?;
    let mut checked = 0usize;
    for (seed, (pi, r, k, beta)) in
        [(0.0, 10, 5, 0.8), (0.3, 50, 20, 1.2), (0.7, 100, 10, 0.5), (1.0, 25, 40, 1.5)].into_iter().enumerate()
    {
        let seq = generate_zipf(&ZipfSpec { n_files: n, beta, n_requests: 10_000, seed: seed as u64 })?;
        let mut lfu = LfuPolicy::new(catalog.clone(), k)?;
        let mut olfu = LfuPolicy::optimistic(catalog.clone(), k, OlfuRule::Credit, seed as u64)?;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed as u64);
        for w in seq.chunks_exact(r) {
            let batch = RequestBatch::from_requests(w, n)?;
            let pred = predict_type3(&batch, pi, &catalog, &mut rng)?;
            olfu.begin_batch(&pred.integer_counts())?;
            for &f in w {
                lfu.serve_one(f);
                olfu.serve_one(f);
            }
            if lfu.frequencies() != olfu.frequencies() {
                return Ok((false, format!("tables differ after batch {} (pi={pi}, R={r})", checked + 1)));
            }
            checked += 1;
        }
    }
    Ok((true, format!("{checked} end-of-batch tables equal over 4 traces of 10^4 requests")))
}

fn amortized_trend() -> Outcome {
    let dir = std::env::temp_dir().join(format!("optcache-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("trace.txt");
    write_trace(&path, &generate_zipf(&ZipfSpec { n_files: N, beta: 0.8, n_requests: 20_000, seed: 7 })?)?;
    let sizes = [50u64, 100, 300, 1000];
    let mut cfg = zipf_config(0.8, 10, 50, PredictorSpec::Type1 { xi: 0.4 }, &[PolicyKind::Pcoc]);
    cfg.trace = TraceConfig::File { path, format: Default::default(), max_requests: None };
    cfg.run.initial_state = InitialState::Uniform;
    cfg.output.record_timing = true;
    let mut best = [f64::INFINITY; 4];
    for _ in 0..TIMING_REPS {
        for (slot, &r) in best.iter_mut().zip(&sizes) {
            cfg.batch.sizes = vec![r];
            let results = execute(&cfg)?;
            *slot = slot.min(results[0].summary.amortized_nanos);
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    let decreasing = best.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = sizes.iter().zip(&best).map(|(r, v)| format!("R={r}: {v:.1}")).collect();
    Ok((decreasing, format!("ns/request {}", shown.join(", "))))
}

fn batch_invariance() -> Outcome {
    let popularity = zipf_pmf(N, 0.8);
    let analysis = |tau| {
        batch_error_analysis(
            &PoissonModel { lambda_total: 50.0, popularity: popularity.clone(), theta: 100.0, tau, tau0: 10.0 },
            100,
            PredictionModel::Mean,
        )
    };
    let values = [analysis(1.0)?, analysis(10.0)?, analysis(100.0)?];
    let equal = values.iter().all(|v| *v == values[0]);
    Ok((equal, format!("regret bound {} for tau in {{1, 10, 100}}", values[0].regret_bound)))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("solver oracle equivalence", oracle_equivalence),
        ("zero regret under perfect predictions", zero_regret),
        ("regret below realized bounds", bound_domination),
        ("sublinear OBC regret", sublinearity),
        ("threshold curve", threshold_curve),
        ("PCOC below OBC at k=600", pcoc_beats_obc),
        ("PCOC below LFU with noisy predictions", pcoc_beats_lfu),
        ("OLFU frequency table equals LFU", olfu_equality),
        ("amortized cost decreasing in R", amortized_trend),
        ("mean-predictor batch invariance", batch_invariance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {name}: {detail} [{:.1}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
