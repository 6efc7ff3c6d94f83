//! End-to-end runs of the `rwrl` binary: exit codes, artifacts, reruns and a
//! recount of the report from what was persisted.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rwrl::batch_rl::PolicyFile;
use rwrl::metrics::{cvar, discounted_returns, mean, multi_objective_return};
use rwrl::record::Dataset;
use rwrl::safety::{logged_violations, SafetyReport};
use rwrl::suite::commands::{read_manifest, BEHAVIOR_DATA_FILE, EVAL_EPISODES_FILE, REPORT_CSV, REPORT_JSON, TRAINING_LOG_FILE};
use rwrl::suite::{MetricsReport, SuiteConfig};
use tempfile::TempDir;

use common::config_path;

fn rwrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwrl")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = rwrl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A copy of a shipped config with textual substitutions.
fn config(dir: &Path, name: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = fs::read_to_string(config_path(name)).unwrap();
    for (from, to) in edits {
        assert!(text.contains(from), "{from} not in {name}");
        text = text.replace(from, to);
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn small_grid(dir: &Path) -> PathBuf {
    config(dir, "gridworld.toml", &[("transitions = 2000", "transitions = 1000"), ("prefix_grid = [100, 500, 2000]", "prefix_grid = [100, 1000]")])
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn bad_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "gridworld.toml", &[("slip_prob = 0.1", "slip_prob = 1.5")]);
    let out = rwrl(&["generate-data", "--config", p(&cfg), "--out", p(&dir.path().join("d.rwrl.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    let broken = dir.path().join("broken.toml");
    fs::write(&broken, "master_seed = \n").unwrap();
    assert_eq!(rwrl(&["full", "--config", p(&broken), "--out", p(dir.path())]).status.code(), Some(2));
    let absent = dir.path().join("absent.toml");
    assert_eq!(rwrl(&["full", "--config", p(&absent), "--out", p(dir.path())]).status.code(), Some(2));
}

#[test]
fn mismatched_dataset_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = small_grid(dir.path());
    let data = dir.path().join("d.rwrl.jsonl");
    ok(&["generate-data", "--config", p(&cfg), "--out", p(&data)]);
    let other = config(dir.path(), "gridworld.toml", &[("slip_prob = 0.1", "slip_prob = 0.2")]);
    let out = rwrl(&["train", "--config", p(&other), "--data", p(&data), "--out", p(&dir.path().join("run"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let junk = dir.path().join("junk.rwrl.jsonl");
    fs::write(&junk, "{ not json\n").unwrap();
    let out = rwrl(&["train", "--config", p(&cfg), "--data", p(&junk), "--out", p(&dir.path().join("run"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_artifacts_exit_4() {
    let dir = TempDir::new().unwrap();
    let cfg = small_grid(dir.path());
    let out = rwrl(&["train", "--config", p(&cfg), "--data", p(&dir.path().join("nope.rwrl.jsonl")), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    let out = rwrl(&["evaluate", "--config", p(&cfg), "--policy", p(&dir.path().join("policy_0.json")), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    // a policy without a manifest beside it and without --data
    let data = dir.path().join("d.rwrl.jsonl");
    let run = dir.path().join("run");
    ok(&["generate-data", "--config", p(&cfg), "--out", p(&data)]);
    ok(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&run)]);
    let lone = dir.path().join("lone");
    fs::create_dir(&lone).unwrap();
    fs::copy(run.join("policy_0.json"), lone.join("policy_0.json")).unwrap();
    let out = rwrl(&["evaluate", "--config", p(&cfg), "--policy", p(&lone.join("policy_0.json")), "--out", p(&lone)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--data"));
    // with --data it goes through
    ok(&["evaluate", "--config", p(&cfg), "--policy", p(&lone.join("policy_0.json")), "--data", p(&data), "--out", p(&lone)]);
}

#[test]
fn generate_data_writes_exactly_the_requested_transitions() {
    let dir = TempDir::new().unwrap();
    let cfg = small_grid(dir.path());
    let (a, b) = (dir.path().join("a.rwrl.jsonl"), dir.path().join("b.rwrl.jsonl"));
    ok(&["generate-data", "--config", p(&cfg), "--out", p(&a)]);
    ok(&["generate-data", "--config", p(&cfg), "--out", p(&b)]);
    let data = Dataset::read(&a).unwrap();
    assert_eq!(data.transition_count(), 1000);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    // a different seed gives different data
    let c = dir.path().join("c.rwrl.jsonl");
    ok(&["--seed", "12", "generate-data", "--config", p(&cfg), "--out", p(&c)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    assert_eq!(Dataset::read(&c).unwrap().provenance.master_seed, 12);
}

#[test]
fn zero_iterations_train_once() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "gridworld.toml", &[("iterations = 3", "iterations = 0"), ("transitions = 2000", "transitions = 1000")]);
    let data = dir.path().join("d.rwrl.jsonl");
    ok(&["generate-data", "--config", p(&cfg), "--out", p(&data)]);
    let (r1, r2) = (dir.path().join("r1"), dir.path().join("r2"));
    ok(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&r1)]);
    ok(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&r2)]);
    let manifest = read_manifest(&r1).unwrap();
    assert_eq!(manifest.policies, vec!["policy_0.json"]);
    assert!(manifest.datasets.is_empty());
    let policies: Vec<_> = files(&r1).into_iter().filter(|(n, _)| n.starts_with("policy_")).collect();
    assert_eq!(policies.len(), 1);
    assert_eq!(fs::read(r1.join("policy_0.json")).unwrap(), fs::read(r2.join("policy_0.json")).unwrap());
}

#[test]
fn train_persists_every_iteration() {
    let dir = TempDir::new().unwrap();
    let cfg = small_grid(dir.path());
    let data = dir.path().join("d.rwrl.jsonl");
    let run = dir.path().join("run");
    ok(&["generate-data", "--config", p(&cfg), "--out", p(&data)]);
    ok(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&run)]);
    let m = read_manifest(&run).unwrap();
    assert_eq!(m.policies, (0..=3).map(|i| format!("policy_{i}.json")).collect::<Vec<_>>());
    assert_eq!(m.datasets, (0..3).map(|i| format!("data_{i}.rwrl.jsonl")).collect::<Vec<_>>());
    assert_eq!(m.final_policy, "policy_3.json");
    for d in &m.datasets {
        assert_eq!(Dataset::read(run.join(d)).unwrap().transition_count(), 5000);
    }
    let log: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join(TRAINING_LOG_FILE)).unwrap()).unwrap();
    assert_eq!(log["iterations"].as_array().unwrap().len(), 4);
}

#[test]
fn evaluate_twice_gives_identical_reports_with_every_key() {
    let dir = TempDir::new().unwrap();
    let cfg = small_grid(dir.path());
    let run = dir.path().join("run");
    ok(&["full", "--config", p(&cfg), "--out", p(&run)]);
    let (e1, e2) = (dir.path().join("e1"), dir.path().join("e2"));
    for e in [&e1, &e2] {
        ok(&["evaluate", "--config", p(&cfg), "--policy", p(&run.join("policy_3.json")), "--out", p(e)]);
    }
    assert_eq!(files(&e1), files(&e2));
    // evaluating the final policy again reproduces the full run's report
    assert_eq!(fs::read(e1.join(REPORT_JSON)).unwrap(), fs::read(run.join(REPORT_JSON)).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&fs::read(e1.join(REPORT_JSON)).unwrap()).unwrap();
    for key in [
        "schema_version", "config_hash", "master_seed", "policy_id", "gamma", "warm_start", "data_efficiency", "safety",
        "robust", "worst_case", "per_env", "mean_return", "multi_objective", "cvar", "realtime_misses",
        "realtime_decisions", "ope", "notes",
    ] {
        assert!(report.get(key).is_some(), "report.json lacks {key}");
    }
    for key in ["eval", "train"] {
        assert!(report["safety"].get(key).is_some());
    }
    let csv = fs::read_to_string(e1.join(REPORT_CSV)).unwrap();
    assert!(csv.starts_with("metric,value\n"), "{csv}");
    for key in ["config_hash", "master_seed", "mean_return", "warm_start", "robust"] {
        assert!(csv.lines().any(|l| l.starts_with(&format!("{key},"))), "report.csv lacks {key}");
    }
}

#[test]
fn every_artifact_carries_provenance() {
    let dir = TempDir::new().unwrap();
    let cfg_path = small_grid(dir.path());
    let cfg = SuiteConfig::from_toml(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    let hash = cfg.config_hash().unwrap();
    let run = dir.path().join("run");
    ok(&["full", "--config", p(&cfg_path), "--out", p(&run)]);
    for (name, bytes) in files(&run) {
        let text = String::from_utf8(bytes).unwrap();
        let head = if name.ends_with(".jsonl") { text.lines().next().unwrap().to_string() } else { text };
        if name.ends_with(".csv") {
            assert!(head.contains(&format!("config_hash,{hash}")), "{name}");
            assert!(head.contains("master_seed,11"), "{name}");
        } else {
            let v: serde_json::Value = serde_json::from_str(&head).unwrap();
            assert_eq!(v["config_hash"], hash.as_str(), "{name}");
            assert_eq!(v["master_seed"], 11, "{name}");
        }
    }
}

fn recount_safety(ids: &[String], trajectories: Vec<&rwrl::record::Trajectory>, gamma: f64) -> SafetyReport {
    let mut acc = SafetyReport::empty(ids.to_vec());
    for t in trajectories {
        acc = acc.merge(&logged_violations(t, ids.to_vec(), gamma).unwrap()).unwrap();
    }
    acc
}

/// Recompute the episode metrics of `report.json` from the persisted logs.
fn recount(run: &Path, cfg: &SuiteConfig) {
    let report: MetricsReport = serde_json::from_slice(&fs::read(run.join(REPORT_JSON)).unwrap()).unwrap();
    let eval = Dataset::read(run.join(EVAL_EPISODES_FILE)).unwrap();
    let gamma = cfg.metrics.gamma;
    assert_eq!(eval.trajectories.len(), cfg.metrics.episodes);
    let returns = discounted_returns(&eval.trajectories, gamma).unwrap();
    assert_eq!(report.mean_return, mean(&returns).unwrap());
    assert_eq!(report.multi_objective, multi_objective_return(&eval.trajectories, gamma).unwrap());
    assert_eq!(report.cvar.len(), cfg.metrics.alphas.len());
    for (a, v) in cfg.metrics.alphas.iter().zip(report.cvar.values()) {
        assert_eq!(*v, cvar(&returns, *a).unwrap());
    }
    let ids = eval.env.constraint_ids.clone();
    let safety_gamma = cfg.metrics.safety_gamma;
    assert_eq!(report.safety.eval, recount_safety(&ids, eval.trajectories.iter().collect(), safety_gamma));
    let manifest = read_manifest(run).unwrap();
    let mut train_sets = vec![Dataset::read(run.join(&manifest.behavior_data)).unwrap()];
    for d in &manifest.datasets {
        train_sets.push(Dataset::read(run.join(d)).unwrap());
    }
    let train_trajs = train_sets.iter().flat_map(|d| d.trajectories.iter()).collect();
    assert_eq!(report.safety.train, recount_safety(&ids, train_trajs, safety_gamma));
    let policy = PolicyFile::read(run.join(&manifest.final_policy)).unwrap();
    assert_eq!(report.policy_id, rwrl::batch_rl::Policy::policy_id(&policy.policy));
    assert_eq!(report.realtime_decisions, eval.transition_count());
}

#[test]
fn report_matches_recount_gridworld() {
    let dir = TempDir::new().unwrap();
    let cfg_path = small_grid(dir.path());
    let run = dir.path().join("run");
    ok(&["full", "--config", p(&cfg_path), "--out", p(&run)]);
    assert!(run.join(BEHAVIOR_DATA_FILE).exists());
    recount(&run, &SuiteConfig::from_toml(&fs::read_to_string(&cfg_path).unwrap()).unwrap());
}

#[test]
fn report_matches_recount_cartpole() {
    let dir = TempDir::new().unwrap();
    let cfg_path = config(
        dir.path(),
        "cartpole_balance.toml",
        &[
            ("transitions = 20000", "transitions = 3000"),
            ("prefix_grid = [1000, 5000, 20000]", "prefix_grid = [1000, 3000]"),
            ("rollout_steps = 2000", "rollout_steps = 1000"),
            ("episodes = 20", "episodes = 5"),
            ("k = 5", "k = 2"),
        ],
    );
    let run = dir.path().join("run");
    ok(&["--deterministic-latency", "full", "--config", p(&cfg_path), "--out", p(&run)]);
    let text = fs::read_to_string(&cfg_path).unwrap();
    let mut cfg = SuiteConfig::from_toml(&text).unwrap();
    rwrl::suite::commands::apply_overrides(&mut cfg, rwrl::suite::commands::Overrides { seed: None, deterministic_latency: true });
    recount(&run, &cfg);
    let report: MetricsReport = serde_json::from_slice(&fs::read(run.join(REPORT_JSON)).unwrap()).unwrap();
    // constraints are on, so there is something to count
    assert_eq!(report.safety.eval.constraint_ids.len(), 3);
    assert_eq!(report.per_env.len(), 2);
}
