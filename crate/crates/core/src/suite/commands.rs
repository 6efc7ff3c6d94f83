//! The experiment phases: generate behavior data, train, evaluate, and all
//! three in sequence. Every phase is a pure function of config, seed and the
//! artifacts of earlier phases.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{BehaviorKind, EnvironmentConfig, SuiteConfig};
use super::report::{MetricsReport, PerEnvResult, SafetySection, REPORT_SCHEMA_VERSION};
use crate::batch_rl::{
    brt, gridworld_epsilon_optimal, pd_behavior_policy, policy_name, train, BrtEvent, Discretizer, PolicyArtifact,
    PolicyController, PolicyFile, TrainerKind, UniformPolicy,
};
use crate::challenges::{neutral_action, sampled_perturbations, wrap_realtime_budget, LatencyMode};
use crate::env::{EnvSpec, Environment};
use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::metrics::{
    self, cvar, data_efficiency, evaluate_policy, multi_objective_return, robust_return, TestEnvSet,
};
use crate::ope::evaluate_all;
use crate::record::{Dataset, Provenance, DATASET_SUFFIX};
use crate::rng::{streams, RngStream};
use crate::rollout::{collect_transitions, episode_seed, run_episodes, Controller, SeedPhase};
use crate::safety::{logged_violations, SafetyReport};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAINING_LOG_FILE: &str = "training_log.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const BEHAVIOR_DATA_FILE: &str = "behavior.rwrl.jsonl";
pub const EVAL_EPISODES_FILE: &str = "eval_episodes.rwrl.jsonl";

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub deterministic_latency: bool,
}

pub fn load_config(path: impl AsRef<Path>, overrides: Overrides) -> Result<SuiteConfig> {
    let mut cfg = SuiteConfig::load(path)?;
    apply_overrides(&mut cfg, overrides);
    cfg.validate()?;
    Ok(cfg)
}

pub fn apply_overrides(cfg: &mut SuiteConfig, overrides: Overrides) {
    if let Some(seed) = overrides.seed {
        cfg.master_seed = seed;
    }
    if overrides.deterministic_latency {
        if let Some(rt) = cfg.realtime.as_mut() {
            rt.mode = LatencyMode::Injected;
        }
    }
}

pub fn provenance(cfg: &SuiteConfig) -> Result<Provenance> {
    Ok(Provenance {
        config_hash: cfg.config_hash()?,
        master_seed: cfg.master_seed,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(format!("{what} {} not found", path.display()))
        } else {
            Error::io(path, e)
        }
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::MissingArtifact(format!("dataset {} not found", path.display())));
    }
    Dataset::read(path)
}

/// The configured behavior policy `π_B` for an environment.
pub fn behavior_policy(cfg: &SuiteConfig, spec: &EnvSpec) -> Result<PolicyArtifact> {
    let b = &cfg.behavior;
    Ok(match (b.kind, &cfg.environment) {
        (BehaviorKind::Pd, _) => PolicyArtifact::Pd(pd_behavior_policy(b.kp, b.kd, b.epsilon, spec)?),
        (BehaviorKind::Uniform, _) => PolicyArtifact::Uniform(UniformPolicy {
            policy_id: "pi_B".into(),
            iteration: 0,
            n_actions: spec
                .action
                .discrete_count()
                .ok_or_else(|| Error::Config("uniform behavior needs a discrete action space".into()))?,
        }),
        (BehaviorKind::EpsilonOptimal, EnvironmentConfig::Gridworld(world)) => {
            PolicyArtifact::TabularQ(gridworld_epsilon_optimal(world, cfg.trainer.gamma, b.epsilon, "pi_B")?)
        }
        (BehaviorKind::EpsilonOptimal, _) => {
            return Err(Error::Config("epsilon_optimal behavior is only defined on the gridworld".into()))
        }
    })
}

/// A strong reference controller used to set the default `R_min`.
fn expert_policy(cfg: &SuiteConfig, spec: &EnvSpec) -> Result<PolicyArtifact> {
    match &cfg.environment {
        EnvironmentConfig::Cartpole(_) => {
            Ok(PolicyArtifact::Pd(pd_behavior_policy(cfg.behavior.kp, cfg.behavior.kd, 0.0, spec)?))
        }
        EnvironmentConfig::Gridworld(world) => Ok(PolicyArtifact::TabularQ(gridworld_epsilon_optimal(
            world,
            cfg.metrics.gamma,
            0.0,
            "expert",
        )?)),
    }
}

/// Roll out `π_B` for the configured number of transitions.
pub fn generate_data(cfg: &SuiteConfig) -> Result<Dataset> {
    let mut env = cfg.build_env()?;
    let spec = env.spec();
    let policy = behavior_policy(cfg, &spec)?;
    let mut controller = PolicyController::new(policy, RngStream::new(cfg.master_seed, streams::POLICY).derive(0));
    let mut data = Dataset::new("pi_B", cfg.environment_hash()?, provenance(cfg)?, spec);
    data.trajectories = collect_transitions(env.as_mut(), &mut controller, cfg.behavior.transitions, SeedPhase::Behavior)?;
    data.validate()?;
    Ok(data)
}

pub fn cmd_generate_data(cfg: &SuiteConfig, out: &Path) -> Result<Dataset> {
    let data = generate_data(cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    data.write(out)?;
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    /// Relative to the manifest's directory unless absolute.
    pub behavior_data: String,
    pub policies: Vec<String>,
    pub datasets: Vec<String>,
    pub final_policy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub policy_file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_transitions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rollout_return: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub config_hash: String,
    pub master_seed: u64,
    pub behavior_transitions: usize,
    pub trainer: TrainerKind,
    pub iterations: Vec<IterationLog>,
}

pub fn policy_file_name(i: usize) -> String {
    format!("policy_{i}.json")
}

pub fn dataset_file_name(i: usize) -> String {
    format!("data_{i}{DATASET_SUFFIX}")
}

fn check_dataset(cfg: &SuiteConfig, data: &Dataset) -> Result<()> {
    data.validate()?;
    if data.environment_config_hash != cfg.environment_hash()? {
        return Err(Error::Data(
            "dataset was produced under a different environment configuration".into(),
        ));
    }
    if data.transition_count() == 0 {
        return Err(Error::Data("behavior dataset is empty".into()));
    }
    Ok(())
}

fn relative_to(path: &Path, dir: &Path) -> String {
    let abs = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    match abs(path).strip_prefix(abs(dir)) {
        Ok(rel) => rel.to_string_lossy().into_owned(),
        Err(_) => abs(path).to_string_lossy().into_owned(),
    }
}

/// Run the batch training loop on a behavior dataset, persisting every
/// `π_i` and `D_i` as soon as it exists.
pub fn cmd_train(cfg: &SuiteConfig, data_path: &Path, out_dir: &Path) -> Result<Manifest> {
    let behavior = read_dataset(data_path)?;
    check_dataset(cfg, &behavior)?;
    create_dir(out_dir)?;
    let prov = provenance(cfg)?;
    let mut env = cfg.build_env()?;
    let mut log = TrainingLog {
        config_hash: prov.config_hash.clone(),
        master_seed: prov.master_seed,
        behavior_transitions: behavior.transition_count(),
        trainer: cfg.trainer.trainer,
        iterations: Vec::new(),
    };
    let mut manifest = Manifest {
        schema_version: 1,
        config_hash: prov.config_hash.clone(),
        master_seed: prov.master_seed,
        behavior_data: relative_to(data_path, out_dir),
        policies: Vec::new(),
        datasets: Vec::new(),
        final_policy: String::new(),
    };
    let persist_logs = |manifest: &Manifest, log: &TrainingLog| -> Result<()> {
        write_text(&out_dir.join(TRAINING_LOG_FILE), &(jsonfmt::to_pretty(log)? + "\n"))?;
        write_text(&out_dir.join(MANIFEST_FILE), &(jsonfmt::to_pretty(manifest)? + "\n"))
    };
    let result = brt(
        &behavior,
        &cfg.trainer,
        cfg.brt.iterations,
        cfg.brt.rollout_steps,
        env.as_mut(),
        cfg.master_seed,
        |event| {
            match event {
                BrtEvent::Policy(i, p) => {
                    let name = policy_file_name(i);
                    PolicyFile::new(p.clone(), &prov).write(out_dir.join(&name))?;
                    manifest.policies.push(name.clone());
                    manifest.final_policy = name.clone();
                    log.iterations.push(IterationLog {
                        iteration: i,
                        policy_file: name,
                        dataset_file: None,
                        dataset_transitions: None,
                        rollout_return: None,
                    });
                }
                BrtEvent::Dataset(i, d) => {
                    let name = dataset_file_name(i);
                    d.write(out_dir.join(&name))?;
                    manifest.datasets.push(name.clone());
                    if let Some(entry) = log.iterations.iter_mut().find(|e| e.iteration == i) {
                        entry.dataset_file = Some(name);
                        entry.dataset_transitions = Some(d.transition_count());
                        let returns = metrics::discounted_returns(&d.trajectories, cfg.trainer.gamma)?;
                        entry.rollout_return = Some(metrics::mean(&returns)?);
                    }
                }
            }
            persist_logs(&manifest, &log)
        },
    );
    // partial artifacts are already on disk when this fails
    result?;
    persist_logs(&manifest, &log)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    read_json(&dir.join(MANIFEST_FILE), "training manifest")
}

fn resolve(dir: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Discretizer used by the direct method: the policy's own grid when it has
/// one, otherwise the trainer's.
fn ope_discretizer(cfg: &SuiteConfig, policy: &PolicyArtifact, spec: &EnvSpec) -> Result<Discretizer> {
    match policy {
        PolicyArtifact::TabularQ(p) => Ok(p.discretizer.clone()),
        _ => match cfg.trainer.trainer {
            TrainerKind::TabularQ => Discretizer::lattice(&spec.observation),
            _ => Discretizer::uniform(&spec.observation, cfg.trainer.bins),
        },
    }
}

fn format_alpha(a: f64) -> String {
    let s = format!("{a}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

fn safety_over<'a>(ids: &[String], trajectories: impl IntoIterator<Item = &'a crate::record::Trajectory>, gamma: f64) -> Result<SafetyReport> {
    let mut acc = SafetyReport::empty(ids.to_vec());
    for t in trajectories {
        acc = acc.merge(&logged_violations(t, ids.to_vec(), gamma)?)?;
    }
    Ok(acc)
}

/// Every metric for one policy. `behavior` is `D_B`; `rollouts` are the
/// `D_i` of training, counted towards train-time safety.
pub fn evaluate(cfg: &SuiteConfig, policy: &PolicyArtifact, behavior: &Dataset, rollouts: &[Dataset]) -> Result<(MetricsReport, Dataset)> {
    check_dataset(cfg, behavior)?;
    let m = &cfg.metrics;
    let gamma = m.gamma;
    let seed = cfg.master_seed;
    let mut env = cfg.build_env()?;
    let spec = env.spec();
    let mut notes = Vec::new();

    // evaluation episodes, optionally under a decision deadline
    let tag = episode_seed(SeedPhase::Evaluation, 0);
    let controller = PolicyController::new(policy.clone(), RngStream::new(seed, streams::POLICY).derive(tag));
    let (eval_trajs, misses, decisions) = match &cfg.realtime {
        Some(rt) => {
            let mut c = wrap_realtime_budget(controller, rt.budget(), neutral_action(&spec))?;
            let t = run_episodes(env.as_mut(), &mut c, m.episodes, SeedPhase::Evaluation)?;
            (t, c.misses(), c.latencies_us().len())
        }
        None => {
            let mut c = controller;
            let t = run_episodes(env.as_mut(), &mut c as &mut dyn Controller, m.episodes, SeedPhase::Evaluation)?;
            let n = t.iter().map(|x| x.len()).sum();
            (t, 0, n)
        }
    };
    let mut eval_data = Dataset::new(policy_id(policy), cfg.environment_hash()?, provenance(cfg)?, spec.clone());
    eval_data.trajectories = eval_trajs;
    let returns = metrics::discounted_returns(&eval_data.trajectories, gamma)?;
    let mut cvar_map = BTreeMap::new();
    for a in &m.alphas {
        cvar_map.insert(format_alpha(*a), cvar(&returns, *a)?);
    }

    // warm start: Train(D_B) with no interaction
    let warm = metrics::warm_start(|d| train(d, &cfg.trainer, 0), behavior, env.as_mut(), m.episodes, gamma, seed)?;

    // data efficiency over prefixes of D_B
    let r_min = match m.r_min {
        Some(r) => r,
        None => {
            let expert = expert_policy(cfg, &spec).map_err(|e| {
                Error::Config(format!("no expert available for the default R_min ({e}); set metrics.r_min"))
            })?;
            let t = evaluate_policy(expert, env.as_mut(), m.episodes, SeedPhase::Evaluation, seed)?;
            let expert_return = metrics::mean_return(&t, gamma)?;
            notes.push(format!("r_min = {} x expert return {expert_return:.6}", m.r_min_fraction));
            m.r_min_fraction * expert_return
        }
    };
    let efficiency = data_efficiency(
        |d| train(d, &cfg.trainer, 0),
        behavior,
        r_min,
        env.as_mut(),
        &m.prefix_grid,
        m.episodes,
        gamma,
        seed,
    )?;

    // robustness over a pinned test set
    let specs = sampled_perturbations(&cfg.challenges);
    let base_params = cfg.build_base()?.parameters();
    let set = TestEnvSet::draw(&base_params, &specs, seed, m.k, m.test_episodes)?;
    let (robust, _) = robust_return(policy, |_, p| cfg.build_pinned_env(p), &set, gamma, seed)?;

    // safety
    let ids = spec.constraint_ids.clone();
    let safety = SafetySection {
        eval: safety_over(&ids, &eval_data.trajectories, m.safety_gamma)?,
        train: safety_over(
            &ids,
            std::iter::once(behavior).chain(rollouts).flat_map(|d| d.trajectories.iter()),
            m.safety_gamma,
        )?,
    };

    // off-policy estimates of the evaluated policy from D_B
    let ope = if !m.ope {
        Vec::new()
    } else if behavior.has_propensities() && spec.action.discrete_count().is_some() {
        let disc = ope_discretizer(cfg, policy, &spec)?;
        evaluate_all(behavior, policy, gamma, &disc)?
    } else {
        notes.push("off-policy estimates skipped: behavior data lacks propensities or discrete actions".into());
        Vec::new()
    };

    let report = MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config_hash: cfg.config_hash()?,
        master_seed: seed,
        policy_id: policy_id(policy),
        gamma,
        warm_start: warm,
        data_efficiency: efficiency,
        safety,
        robust: robust.robust,
        worst_case: robust.worst_case,
        per_env: set
            .params
            .iter()
            .zip(&robust.per_env)
            .map(|(p, v)| PerEnvResult {
                params: specs.iter().map(|s| (s.parameter.clone(), p[&s.parameter])).collect(),
                value: *v,
            })
            .collect(),
        mean_return: metrics::mean(&returns)?,
        multi_objective: multi_objective_return(&eval_data.trajectories, gamma)?,
        cvar: cvar_map,
        realtime_misses: misses,
        realtime_decisions: decisions,
        ope,
        notes,
    };
    Ok((report, eval_data))
}

fn policy_id(p: &PolicyArtifact) -> String {
    crate::batch_rl::Policy::policy_id(p).to_string()
}

/// Evaluate a policy file. Without `data`, the behavior dataset (and the
/// training rollouts) are located through the manifest next to the policy.
pub fn cmd_evaluate(cfg: &SuiteConfig, policy_path: &Path, data: Option<&Path>, out_dir: &Path) -> Result<MetricsReport> {
    let policy = PolicyFile::read(policy_path)?;
    let policy_dir = policy_path.parent().unwrap_or(Path::new("."));
    let (behavior_path, rollouts) = match data {
        Some(d) => (d.to_path_buf(), Vec::new()),
        None => {
            let manifest = read_manifest(policy_dir).map_err(|e| match e {
                Error::MissingArtifact(m) => Error::MissingArtifact(format!("{m}; pass --data with the behavior dataset")),
                other => other,
            })?;
            let rollouts = manifest
                .datasets
                .iter()
                .map(|n| read_dataset(&resolve(policy_dir, n)))
                .collect::<Result<Vec<_>>>()?;
            (resolve(policy_dir, &manifest.behavior_data), rollouts)
        }
    };
    let behavior = read_dataset(&behavior_path)?;
    let (report, eval_data) = evaluate(cfg, &policy.policy, &behavior, &rollouts)?;
    create_dir(out_dir)?;
    eval_data.write(out_dir.join(EVAL_EPISODES_FILE))?;
    write_text(&out_dir.join(REPORT_JSON), &report.to_json()?)?;
    write_text(&out_dir.join(REPORT_CSV), &report.to_csv())?;
    Ok(report)
}

/// Generate, train and evaluate the final policy, all inside `out_dir`.
pub fn cmd_full(cfg: &SuiteConfig, out_dir: &Path) -> Result<MetricsReport> {
    create_dir(out_dir)?;
    let data_path = out_dir.join(BEHAVIOR_DATA_FILE);
    cmd_generate_data(cfg, &data_path)?;
    let manifest = cmd_train(cfg, &data_path, out_dir)?;
    cmd_evaluate(cfg, &out_dir.join(&manifest.final_policy), None, out_dir)
}

pub fn final_policy_name(cfg: &SuiteConfig) -> String {
    policy_name(cfg.brt.iterations)
}
