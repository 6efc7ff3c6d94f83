//! Discretizing a continuous force into `n` actions, in order or shuffled.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionSpace, EnvSpec, EnvStep, Environment, INFO_CLAMPED};
use crate::error::{Error, Result};
use crate::rng::{streams, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ActionRelation {
    #[default]
    Ordered,
    Permuted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ActionReshapeConfig {
    pub n: usize,
    #[serde(default)]
    pub relation: ActionRelation,
}

pub const INFO_ACTION_INDEX: &str = "action_index";

/// Evenly spaced forces over `[low, high]`, endpoints included.
pub fn ordered_forces(low: f64, high: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| low + (high - low) * i as f64 / (n - 1) as f64)
        .collect()
}

pub struct ActionReshape<E> {
    inner: E,
    forces: Vec<f64>,
}

/// `stream_tag` picks the permutation; it is drawn once here and kept for
/// the life of the wrapper.
pub fn wrap_action_reshape<E: Environment>(
    inner: E,
    config: ActionReshapeConfig,
    master_seed: u64,
    stream_tag: u64,
) -> Result<ActionReshape<E>> {
    if config.n < 2 {
        return Err(Error::Config(format!("action reshaping needs n ≥ 2, got {}", config.n)));
    }
    let (low, high) = match inner.spec().action {
        ActionSpace::Continuous { low, high } => (low, high),
        ActionSpace::Discrete { .. } => {
            return Err(Error::Config("action reshaping needs a continuous inner action space".into()))
        }
    };
    let mut forces = ordered_forces(low, high, config.n);
    if config.relation == ActionRelation::Permuted {
        let mut rng = RngStream::new(master_seed, streams::ACTION_PERMUTATION).derive(stream_tag).rng();
        forces.shuffle(&mut rng);
    }
    Ok(ActionReshape { inner, forces })
}

impl<E> ActionReshape<E> {
    /// Force applied for each discrete action.
    pub fn forces(&self) -> &[f64] {
        &self.forces
    }
}

impl<E: Environment> Environment for ActionReshape<E> {
    fn spec(&self) -> EnvSpec {
        let mut spec = self.inner.spec();
        spec.action = ActionSpace::Discrete {
            n: self.forces.len(),
            forces: Some(self.forces.clone()),
        };
        spec
    }

    fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>> {
        self.inner.reset(episode_seed)
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        let requested = action
            .as_discrete()
            .ok_or_else(|| Error::Usage("reshaped environment expects a discrete action".into()))?;
        let index = requested.min(self.forces.len() - 1);
        let mut step = self.inner.step(&Action::Continuous(self.forces[index]))?;
        step.info.insert(INFO_ACTION_INDEX.into(), index as f64);
        if index != requested {
            step.info.insert(INFO_CLAMPED.into(), 1.0);
        }
        Ok(step)
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        self.inner.parameters()
    }

    fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        self.inner.set_parameter(name, value)
    }
}
