//! The episodic environment interface every built-in task and challenge
//! wrapper implements.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth snapshot attached to each step. Keys are stable per
/// environment; wrappers pass it through untouched.
pub type Info = BTreeMap<String, f64>;

/// Info key set to 1.0 when the submitted action was clamped to bounds.
pub const INFO_CLAMPED: &str = "action_clamped";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Discrete(usize),
    Continuous(f64),
}

impl Action {
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(a) => Some(*a),
            Action::Continuous(_) => None,
        }
    }

    pub fn as_continuous(&self) -> Option<f64> {
        match self {
            Action::Continuous(f) => Some(*f),
            Action::Discrete(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ActionSpace {
    /// `n` discrete actions. `forces`, when present, is the plant-level value
    /// each index maps to (set by the action-reshape wrapper).
    Discrete {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        forces: Option<Vec<f64>>,
    },
    /// A scalar bounded control.
    Continuous { low: f64, high: f64 },
}

impl ActionSpace {
    pub fn discrete_count(&self) -> Option<usize> {
        match self {
            ActionSpace::Discrete { n, .. } => Some(*n),
            ActionSpace::Continuous { .. } => None,
        }
    }
}

/// Axis-aligned box describing a flat observation vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpace {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ObservationSpace {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Self {
        debug_assert_eq!(low.len(), high.len());
        Self { low, high }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }
}

/// Static description of an environment after all wrappers are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub observation: ObservationSpace,
    pub action: ActionSpace,
    /// Weights α with `reward == Σ α_j · reward_components[j]`.
    pub reward_weights: Vec<f64>,
    /// One id per entry of `EnvStep::constraint_costs`.
    pub constraint_ids: Vec<String>,
    /// Episode length cap; reaching it truncates rather than terminates.
    pub max_steps: usize,
}

/// Everything one control period produces.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub reward_components: Vec<f64>,
    pub constraint_costs: Vec<f64>,
    pub terminal: bool,
    pub truncated: bool,
    /// True plant state at decision time plus the action the plant applied.
    pub info: Info,
}

impl EnvStep {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// Weighted scalarization shared by every environment.
pub fn scalarize(weights: &[f64], components: &[f64]) -> f64 {
    weights.iter().zip(components).map(|(w, c)| w * c).sum()
}

pub trait Environment {
    fn spec(&self) -> EnvSpec;

    /// Start a new episode whose initial state is a deterministic function of
    /// `episode_seed` and the environment's own configuration.
    fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>>;

    fn step(&mut self, action: &Action) -> Result<EnvStep>;

    /// Current values of the physical parameters that can be perturbed.
    fn parameters(&self) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    fn set_parameter(&mut self, name: &str, _value: f64) -> Result<()> {
        Err(Error::Config(format!(
            "environment has no perturbable parameter `{name}`"
        )))
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn spec(&self) -> EnvSpec {
        (**self).spec()
    }

    fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>> {
        (**self).reset(episode_seed)
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        (**self).step(action)
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        (**self).parameters()
    }

    fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        (**self).set_parameter(name, value)
    }
}

/// Episode bookkeeping shared by the built-in environments.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeClock {
    pub steps: usize,
    pub active: bool,
}

impl EpisodeClock {
    pub fn start(&mut self) {
        self.steps = 0;
        self.active = true;
    }

    pub fn ensure_active(&self) -> Result<()> {
        if self.active {
            Ok(())
        } else {
            Err(Error::Usage(
                "step called before reset or after the episode ended".into(),
            ))
        }
    }

    /// Advance one step; returns whether the step cap truncates the episode.
    pub fn tick(&mut self, terminal: bool, max_steps: usize) -> bool {
        self.steps += 1;
        let truncated = !terminal && self.steps >= max_steps;
        if terminal || truncated {
            self.active = false;
        }
        truncated
    }
}
