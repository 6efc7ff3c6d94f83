//! A frozen plant emitting a fixed observation and reward. Useful for
//! checking wrappers and metrics in isolation.

use std::collections::BTreeMap;

use crate::env::{Action, ActionSpace, EnvSpec, EnvStep, Environment, EpisodeClock, Info, ObservationSpace, INFO_CLAMPED};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ConstantEnv {
    observation: Vec<f64>,
    reward: f64,
    max_steps: usize,
    force_bound: f64,
    parameters: BTreeMap<String, f64>,
    clock: EpisodeClock,
}

impl ConstantEnv {
    pub fn new(observation: Vec<f64>, reward: f64, max_steps: usize) -> Self {
        Self {
            observation,
            reward,
            max_steps,
            force_bound: 1.0,
            parameters: BTreeMap::new(),
            clock: EpisodeClock::default(),
        }
    }

    /// Accept perturbations of the named parameters (they have no effect).
    pub fn with_parameters(mut self, params: BTreeMap<String, f64>) -> Self {
        self.parameters = params;
        self
    }

    pub fn with_force_bound(mut self, bound: f64) -> Self {
        self.force_bound = bound;
        self
    }
}

impl Environment for ConstantEnv {
    fn spec(&self) -> EnvSpec {
        let d = self.observation.len();
        EnvSpec {
            observation: ObservationSpace::new(vec![-1e3; d], vec![1e3; d]),
            action: ActionSpace::Continuous {
                low: -self.force_bound,
                high: self.force_bound,
            },
            reward_weights: vec![1.0],
            constraint_ids: Vec::new(),
            max_steps: self.max_steps,
        }
    }

    fn reset(&mut self, _episode_seed: u64) -> Result<Vec<f64>> {
        self.clock.start();
        Ok(self.observation.clone())
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        self.clock.ensure_active()?;
        let mut info = Info::new();
        if let Action::Continuous(f) = action {
            let applied = f.clamp(-self.force_bound, self.force_bound);
            info.insert("force".into(), applied);
            info.insert(INFO_CLAMPED.into(), if applied != *f { 1.0 } else { 0.0 });
        }
        let truncated = self.clock.tick(false, self.max_steps);
        Ok(EnvStep {
            observation: self.observation.clone(),
            reward: self.reward,
            reward_components: vec![self.reward],
            constraint_costs: Vec::new(),
            terminal: false,
            truncated,
            info,
        })
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        self.parameters.clone()
    }

    fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        match self.parameters.get_mut(name) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(Error::Config(format!("unknown parameter `{name}`"))),
        }
    }
}
