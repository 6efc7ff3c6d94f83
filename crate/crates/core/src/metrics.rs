//! Evaluation metrics: warm start, data efficiency, robustness over a
//! perturbed test set, per-objective returns and CVaR.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::batch_rl::{Policy, PolicyController};
use crate::challenges::{apply_perturbations, PerturbationSpec};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::record::{check_gamma, discounted_return, discounted_sum, Dataset, Trajectory};
use crate::rng::{streams, RngStream};
use crate::rollout::{run_episodes, SeedPhase};

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Data("mean of an empty list".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Seeded evaluation episodes of `policy`. Sampling randomness comes from a
/// policy stream tagged by `phase`, so repeated calls replay exactly.
pub fn evaluate_policy<P: Policy>(
    policy: P,
    env: &mut dyn Environment,
    episodes: usize,
    phase: SeedPhase,
    master_seed: u64,
) -> Result<Vec<Trajectory>> {
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let tag = crate::rollout::episode_seed(phase, 0);
    let mut controller = PolicyController::new(policy, RngStream::new(master_seed, streams::POLICY).derive(tag));
    run_episodes(env, &mut controller, episodes, phase)
}

pub fn discounted_returns(trajectories: &[Trajectory], gamma: f64) -> Result<Vec<f64>> {
    trajectories.iter().map(|t| discounted_return(t, gamma)).collect()
}

pub fn mean_return(trajectories: &[Trajectory], gamma: f64) -> Result<f64> {
    mean(&discounted_returns(trajectories, gamma)?)
}

/// `J^start`: mean discounted evaluation return of `Train(D_B)`.
pub fn warm_start<P: Policy>(
    train: impl FnOnce(&Dataset) -> Result<P>,
    behavior: &Dataset,
    env: &mut dyn Environment,
    episodes: usize,
    gamma: f64,
    master_seed: u64,
) -> Result<f64> {
    check_gamma(gamma)?;
    let policy = train(behavior)?;
    mean_return(&evaluate_policy(policy, env, episodes, SeedPhase::Evaluation, master_seed)?, gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixResult {
    pub size: usize,
    pub mean_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataEfficiency {
    /// Smallest prefix size whose return exceeds `r_min`; `None` if none did.
    pub value: Option<usize>,
    pub r_min: f64,
    pub per_prefix: Vec<PrefixResult>,
    /// Grid sizes larger than the dataset.
    pub skipped: Vec<usize>,
}

/// Scan recorded per-prefix returns for the first one strictly above `r_min`.
pub fn first_exceeding(per_prefix: &[PrefixResult], r_min: f64) -> Option<usize> {
    per_prefix.iter().find(|p| p.mean_return > r_min).map(|p| p.size)
}

pub fn check_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("prefix grid must be non-empty, positive and strictly increasing".into()));
    }
    Ok(())
}

/// `J^eff`: train on leading prefixes of `full` and report the smallest
/// size whose policy's mean evaluation return exceeds `r_min`.
pub fn data_efficiency<P: Policy>(
    mut train: impl FnMut(&Dataset) -> Result<P>,
    full: &Dataset,
    r_min: f64,
    env: &mut dyn Environment,
    grid: &[usize],
    episodes: usize,
    gamma: f64,
    master_seed: u64,
) -> Result<DataEfficiency> {
    check_grid(grid)?;
    check_gamma(gamma)?;
    if !r_min.is_finite() {
        return Err(Error::Config("R_min must be finite".into()));
    }
    let available = full.transition_count();
    let mut per_prefix = Vec::new();
    let mut skipped = Vec::new();
    for &size in grid {
        if size > available {
            skipped.push(size);
            continue;
        }
        let policy = train(&full.prefix(size))?;
        let r = mean_return(&evaluate_policy(policy, env, episodes, SeedPhase::Evaluation, master_seed)?, gamma)?;
        per_prefix.push(PrefixResult { size, mean_return: r });
    }
    Ok(DataEfficiency {
        value: first_exceeding(&per_prefix, r_min),
        r_min,
        per_prefix,
        skipped,
    })
}

/// `K` pinned parameter draws for robustness evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEnvSet {
    pub episodes: usize,
    pub params: Vec<BTreeMap<String, f64>>,
}

impl TestEnvSet {
    pub fn draw(
        base: &BTreeMap<String, f64>,
        specs: &[PerturbationSpec],
        master_seed: u64,
        k: usize,
        episodes: usize,
    ) -> Result<Self> {
        if k == 0 || episodes == 0 {
            return Err(Error::Config("test set needs K ≥ 1 environments and ≥ 1 episode each".into()));
        }
        let stream = RngStream::new(master_seed, streams::TEST_ENVS);
        let params = (0..k as u64)
            .map(|i| apply_perturbations(base, specs, &stream, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { episodes, params })
    }

    pub fn k(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSummary {
    pub robust: f64,
    pub worst_case: f64,
    pub per_env: Vec<f64>,
}

/// Mean and minimum of per-environment values.
pub fn robust_summary(per_env: Vec<f64>) -> Result<RobustSummary> {
    Ok(RobustSummary {
        robust: mean(&per_env)?,
        worst_case: per_env.iter().cloned().fold(f64::INFINITY, f64::min),
        per_env,
    })
}

/// `J^robust` and the worst case over a test set. `make_env(k)` builds the
/// environment pinned to `set.params[k]`.
pub fn robust_return<P: Policy + Clone>(
    policy: &P,
    mut make_env: impl FnMut(usize, &BTreeMap<String, f64>) -> Result<Box<dyn Environment>>,
    set: &TestEnvSet,
    gamma: f64,
    master_seed: u64,
) -> Result<(RobustSummary, Vec<Vec<Trajectory>>)> {
    check_gamma(gamma)?;
    let mut per_env = Vec::new();
    let mut logs = Vec::new();
    for (k, params) in set.params.iter().enumerate() {
        let mut env = make_env(k, params)?;
        let t = evaluate_policy(policy.clone(), env.as_mut(), set.episodes, SeedPhase::TestEnv(k), master_seed)?;
        per_env.push(mean_return(&t, gamma)?);
        logs.push(t);
    }
    Ok((robust_summary(per_env)?, logs))
}

/// `J^multi[j]`: mean over trajectories of the discounted sum of component j.
pub fn multi_objective_return(trajectories: &[Trajectory], gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let first = trajectories
        .iter()
        .flat_map(|t| t.records.first())
        .next()
        .ok_or_else(|| Error::Data("no logged transitions".into()))?;
    let k = first.reward_components.len();
    let mut totals = vec![0.0; k];
    for t in trajectories {
        if t.records.iter().any(|r| r.reward_components.len() != k) {
            return Err(Error::Data("reward component lengths differ across records".into()));
        }
        for (j, total) in totals.iter_mut().enumerate() {
            *total += discounted_sum(t.records.iter().map(|r| r.reward_components[j]), gamma)?;
        }
    }
    Ok(totals.into_iter().map(|v| v / trajectories.len() as f64).collect())
}

/// Mean of the `ceil(α·n)` smallest returns.
pub fn cvar(returns: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("CVaR level must lie in (0, 1], got {alpha}")));
    }
    if returns.is_empty() {
        return Err(Error::Data("CVaR of an empty return list".into()));
    }
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard products like 0.3·10 = 3.0000000000000004 against rounding up
    let m = ((alpha * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    if m == n {
        return mean(returns);
    }
    mean(&sorted[..m])
}
