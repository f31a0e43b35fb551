use std::fs;
use std::path::Path;
use std::process::Command;

fn optcache() -> Command {
    Command::new(env!("CARGO_BIN_EXE_optcache"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("experiment.toml");
    fs::write(&path, body).unwrap();
    path
}

const UNIFORM_LFU: &str = r#"
[catalog]
n_files = 100

[cache]
capacity = 10

[trace]
source = "zipf"
beta = 0.0
n_requests = 50000
seed = 9

[batch]
sizes = [100]

[[policies]]
kind = "lfu"

[run]
runs = 1

[output]
record_timing = false
"#;

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn lfu_on_uniform_trace_misses_one_minus_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), UNIFORM_LFU);
    let out = dir.path().join("out");
    let status = optcache().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());

    let header = fs::read_to_string(out.join("lfu_seed0.csv")).unwrap();
    assert!(header.starts_with("t,cost,cum_cost,miss_ratio,regret,avg_regret,update_nanos\n"));
    let rows = read_rows(&out.join("lfu_seed0.csv"));
    let miss: f64 = rows.last().unwrap()[3].parse().unwrap();
    assert!((miss - 0.9).abs() < 0.01, "miss ratio {miss}");

    let agg = fs::read_to_string(out.join("aggregate_lfu.csv")).unwrap();
    assert!(agg.starts_with("t,mean_miss,ci95_miss,mean_regret,ci95_regret\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["git_describe"].is_string());
    assert_eq!(manifest["config"]["cache"]["capacity"], 10);
}

#[test]
fn aggregate_is_the_mean_of_runs_and_manifest_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let body = UNIFORM_LFU
        .replace("beta = 0.0", "beta = 1.1")
        .replace("n_requests = 50000", "n_requests = 4000")
        .replace("kind = \"lfu\"", "kind = \"pcoc\"")
        .replace("runs = 1", "runs = 3")
        + "\n[predictor]\nkind = \"type3\"\npi = 0.6\n";
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("first");
    assert!(optcache().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap().success());

    let runs: Vec<Vec<csv::StringRecord>> = (0..3).map(|s| read_rows(&out.join(format!("pcoc_seed{s}.csv")))).collect();
    let agg = read_rows(&out.join("aggregate_pcoc.csv"));
    for (i, row) in agg.iter().enumerate() {
        let mean: f64 = runs.iter().map(|r| r[i][3].parse::<f64>().unwrap()).sum::<f64>() / 3.0;
        let got: f64 = row[1].parse().unwrap();
        assert!((got - mean).abs() <= 1e-12 * mean.abs().max(1.0));
    }

    let again = dir.path().join("second");
    let status = optcache()
        .args(["run", "--manifest"])
        .arg(out.join("manifest.json"))
        .arg("--out")
        .arg(&again)
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["pcoc_seed0.csv", "pcoc_seed1.csv", "pcoc_seed2.csv", "aggregate_pcoc.csv"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn trace_flag_replays_a_generated_file() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    let status = optcache()
        .args(["generate", "--n-files", "100", "--beta", "0.8", "--n-requests", "1000", "--seed", "1", "--out"])
        .arg(&trace)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 1000);

    let cfg = write_config(dir.path(), UNIFORM_LFU);
    let out = dir.path().join("out");
    let status = optcache()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--trace")
        .arg(&trace)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read_rows(&out.join("lfu_seed0.csv")).len(), 10);
}

#[test]
fn threshold_curve_to_stdout() {
    let out = optcache().args(["threshold", "--betas", "0,1,2", "--n-files", "1000"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta,alpha_threshold"));
    assert_eq!(lines.next(), Some("0,0.5"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn invalid_config_exits_nonzero_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &UNIFORM_LFU.replace("capacity = 10", "capacity = 500"));
    let out = optcache().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cache.capacity"));

    let out = optcache().args(["run", "--config"]).arg(dir.path().join("missing.toml")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}
