//! Actuator and sensor delays.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionSpace, EnvSpec, EnvStep, Environment};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayConfig {
    /// Steps between submitting an action and the plant applying it.
    pub action_delay: usize,
    /// Steps between the plant producing an observation and its emission.
    pub observation_delay: usize,
    /// Applied while the action queue fills; defaults to the neutral action.
    pub default_action: Option<Action>,
    /// Also shift emitted rewards by `observation_delay`.
    pub delay_reward: bool,
}

/// Zero force (or the bound nearest zero), or the discrete index whose force
/// is nearest zero.
pub fn neutral_action(spec: &EnvSpec) -> Action {
    match &spec.action {
        ActionSpace::Continuous { low, high } => Action::Continuous(0.0f64.clamp(*low, *high)),
        ActionSpace::Discrete { forces: Some(f), .. } => {
            let best = f
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            Action::Discrete(best)
        }
        ActionSpace::Discrete { .. } => Action::Discrete(0),
    }
}

pub struct ActionDelay<E> {
    inner: E,
    delay: usize,
    default_action: Action,
    queue: VecDeque<Action>,
}

pub fn wrap_action_delay<E: Environment>(inner: E, config: &DelayConfig) -> ActionDelay<E> {
    let default_action = config
        .default_action
        .clone()
        .unwrap_or_else(|| neutral_action(&inner.spec()));
    ActionDelay {
        inner,
        delay: config.action_delay,
        default_action,
        queue: VecDeque::new(),
    }
}

impl<E> ActionDelay<E> {
    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Environment> Environment for ActionDelay<E> {
    fn spec(&self) -> EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>> {
        self.queue.clear();
        self.queue.extend(std::iter::repeat_n(self.default_action.clone(), self.delay));
        self.inner.reset(episode_seed)
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        self.queue.push_back(action.clone());
        let applied = self.queue.pop_front().expect("queue holds at least the pushed action");
        self.inner.step(&applied)
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        self.inner.parameters()
    }

    fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        self.inner.set_parameter(name, value)
    }
}

pub struct ObservationDelay<E> {
    inner: E,
    delay: usize,
    delay_reward: bool,
    observations: VecDeque<Vec<f64>>,
    rewards: VecDeque<(f64, Vec<f64>)>,
}

pub fn wrap_observation_delay<E: Environment>(inner: E, config: &DelayConfig) -> ObservationDelay<E> {
    ObservationDelay {
        inner,
        delay: config.observation_delay,
        delay_reward: config.delay_reward,
        observations: VecDeque::new(),
        rewards: VecDeque::new(),
    }
}

impl<E: Environment> Environment for ObservationDelay<E> {
    fn spec(&self) -> EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>> {
        let obs = self.inner.reset(episode_seed)?;
        self.observations.clear();
        self.observations.extend(std::iter::repeat_n(obs.clone(), self.delay));
        self.rewards.clear();
        if self.delay_reward {
            let k = self.inner.spec().reward_weights.len();
            self.rewards.extend(std::iter::repeat_n((0.0, vec![0.0; k]), self.delay));
        }
        Ok(obs)
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        let mut step = self.inner.step(action)?;
        self.observations.push_back(std::mem::take(&mut step.observation));
        step.observation = self.observations.pop_front().expect("queue is non-empty");
        if self.delay_reward {
            self.rewards
                .push_back((step.reward, std::mem::take(&mut step.reward_components)));
            let (r, c) = self.rewards.pop_front().expect("queue is non-empty");
            step.reward = r;
            step.reward_components = c;
            if step.done() {
                // Release rewards still in flight so episode totals are kept.
                for (r, c) in self.rewards.drain(..) {
                    step.reward += r;
                    for (acc, v) in step.reward_components.iter_mut().zip(c) {
                        *acc += v;
                    }
                }
            }
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ConstantEnv;

    #[test]
    fn queue_semantics() {
        let cfg = DelayConfig {
            action_delay: 2,
            default_action: Some(Action::Continuous(-0.5)),
            ..Default::default()
        };
        let mut env = wrap_action_delay(ConstantEnv::new(vec![0.0], 1.0, 10), &cfg);
        env.reset(0).unwrap();
        let applied: Vec<f64> = [0.1, 0.2, 0.3]
            .iter()
            .map(|a| env.step(&Action::Continuous(*a)).unwrap().info["force"])
            .collect();
        assert_eq!(applied, vec![-0.5, -0.5, 0.1]);
        env.reset(1).unwrap();
        assert_eq!(env.step(&Action::Continuous(0.9)).unwrap().info["force"], -0.5);
    }

    #[test]
    fn delayed_rewards_are_released_at_episode_end() {
        let cfg = DelayConfig {
            observation_delay: 2,
            delay_reward: true,
            ..Default::default()
        };
        let mut env = wrap_observation_delay(ConstantEnv::new(vec![0.0], 1.0, 4), &cfg);
        env.reset(0).unwrap();
        let rewards: Vec<f64> = (0..4).map(|_| env.step(&Action::Continuous(0.0)).unwrap().reward).collect();
        assert_eq!(rewards, vec![0.0, 0.0, 1.0, 3.0]);
    }
}
