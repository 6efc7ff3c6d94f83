//! The iterated batch training loop: train on logs, roll out, retrain.

use super::policy::{Policy, PolicyArtifact, PolicyController};
use super::{train, TrainConfig};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::record::{discounted_return, Dataset};
use crate::rng::{streams, RngStream};
use crate::rollout::{collect_transitions, SeedPhase};

/// Artifacts announced as soon as they exist, so callers can persist them
/// before a later iteration fails.
pub enum BrtEvent<'a> {
    Policy(usize, &'a PolicyArtifact),
    Dataset(usize, &'a Dataset),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrtOutput {
    /// `π_0 ..= π_N`.
    pub policies: Vec<PolicyArtifact>,
    /// `D_0 .. D_{N-1}`.
    pub datasets: Vec<Dataset>,
    /// Mean discounted return of the episodes in each `D_i`.
    pub rollout_returns: Vec<f64>,
}

/// `π_0 = Train(D_B)`; then for `i in 0..N`, roll `π_i` out for `L` steps
/// into `D_i` and train `π_{i+1}`.
#[allow(clippy::too_many_arguments)]
pub fn brt(
    behavior: &Dataset,
    config: &TrainConfig,
    iterations: usize,
    rollout_steps: usize,
    env: &mut dyn Environment,
    master_seed: u64,
    mut sink: impl FnMut(BrtEvent<'_>) -> Result<()>,
) -> Result<BrtOutput> {
    if behavior.transition_count() == 0 {
        return Err(Error::Data("behavior dataset is empty".into()));
    }
    if rollout_steps == 0 {
        return Err(Error::Config("rollout length L must be at least 1".into()));
    }
    let mut out = BrtOutput {
        policies: vec![train(behavior, config, 0)?],
        datasets: Vec::new(),
        rollout_returns: Vec::new(),
    };
    sink(BrtEvent::Policy(0, &out.policies[0]))?;
    for i in 0..iterations {
        let explorer = out.policies[i].with_exploration(config.rollout_epsilon)?;
        let id = explorer.policy_id().to_string();
        let stream = RngStream::new(master_seed, streams::POLICY).derive(i as u64 + 1);
        let mut controller = PolicyController::new(explorer, stream);
        let mut data = Dataset::new(
            id,
            behavior.environment_config_hash.clone(),
            behavior.provenance.clone(),
            env.spec(),
        );
        data.trajectories = collect_transitions(env, &mut controller, rollout_steps, SeedPhase::Rollout(i))?;
        let returns = data
            .trajectories
            .iter()
            .map(|t| discounted_return(t, config.gamma))
            .collect::<Result<Vec<_>>>()?;
        out.rollout_returns.push(returns.iter().sum::<f64>() / returns.len() as f64);
        sink(BrtEvent::Dataset(i, &data))?;
        out.datasets.push(data);

        let next = if config.replay_all {
            let parts = std::iter::once(behavior).chain(out.datasets.iter());
            train(&Dataset::union(parts, &format!("replay_{}", i + 1))?, config, i + 1)?
        } else {
            train(&out.datasets[i], config, i + 1)?
        };
        sink(BrtEvent::Policy(i + 1, &next))?;
        out.policies.push(next);
    }
    Ok(out)
}
