//! Offline training: behavior policies, tabular trainers and the iterated
//! batch training loop.

pub mod behavior;
pub mod brt;
pub mod discretize;
pub mod fqi;
pub mod policy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::Dataset;

pub use behavior::{gridworld_epsilon_optimal, gridworld_policy_table, pd_behavior_policy};
pub use brt::{brt, BrtEvent, BrtOutput};
pub use discretize::Discretizer;
pub use fqi::{fqi_train, tabular_q_train, uniform_train};
pub use policy::{
    epsilon_greedy, ActionDistribution, PdPolicy, Policy, PolicyArtifact, PolicyController, PolicyFile, TabularQPolicy,
    UniformPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TrainerKind {
    /// Fitted Q-iteration on a uniform grid.
    #[default]
    Fqi,
    /// Batch Q-learning on exact (lattice) states.
    TabularQ,
    /// Ignores the data and returns the uniform-random policy.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub trainer: TrainerKind,
    pub gamma: f64,
    /// Maximum number of sweeps over the data.
    pub iterations: usize,
    /// Sweeps stop early once no entry moves by more than this.
    pub tolerance: f64,
    pub bins: usize,
    /// Added to each cell's sample count in the FQI average.
    pub regularization: f64,
    /// Fixed multipliers for cost penalties; empty disables shaping.
    pub penalty: Vec<f64>,
    /// Train each `π_{i+1}` on all data so far rather than `D_i` alone.
    pub replay_all: bool,
    /// Exploration mixed into rollouts of `π_i`.
    pub rollout_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            trainer: TrainerKind::Fqi,
            gamma: 0.99,
            iterations: 200,
            tolerance: 1e-10,
            bins: 10,
            regularization: 0.0,
            penalty: Vec::new(),
            replay_all: true,
            rollout_epsilon: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("trainer gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if self.bins < 2 {
            return Err(Error::Config("trainer bins must be at least 2".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("trainer iterations must be at least 1".into()));
        }
        if !(self.regularization >= 0.0 && self.tolerance >= 0.0) {
            return Err(Error::Config("regularization and tolerance must be non-negative".into()));
        }
        if self.penalty.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::Config("penalty multipliers must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.rollout_epsilon) {
            return Err(Error::Config("rollout_epsilon must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// `Train(D)`: fit policy `π_iteration` from a dataset.
pub fn train(dataset: &Dataset, config: &TrainConfig, iteration: usize) -> Result<PolicyArtifact> {
    config.validate()?;
    Ok(match config.trainer {
        TrainerKind::Fqi => PolicyArtifact::TabularQ(fqi_train(dataset, config, iteration)?),
        TrainerKind::TabularQ => PolicyArtifact::TabularQ(tabular_q_train(dataset, config, iteration)?),
        TrainerKind::Uniform => PolicyArtifact::Uniform(uniform_train(dataset, iteration)?),
    })
}

pub fn policy_name(iteration: usize) -> String {
    format!("pi_{iteration}")
}
