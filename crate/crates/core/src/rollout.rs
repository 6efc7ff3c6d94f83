//! Driving environments with controllers and recording trajectories.

use rand::Rng;

use crate::env::{Action, Environment};
use crate::error::{Error, Result};
use crate::record::{Trajectory, TransitionRecord};
use crate::rng::StreamRng;

/// One decision: the action and, when known, the probability the deciding
/// policy assigned to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub propensity: Option<f64>,
}

/// Anything that picks actions online. Episode boundaries are announced so
/// implementations can reseed per-episode randomness.
pub trait Controller {
    fn begin_episode(&mut self, _episode_seed: u64) {}

    fn decide(&mut self, observation: &[f64]) -> Result<Decision>;
}

impl<C: Controller + ?Sized> Controller for &mut C {
    fn begin_episode(&mut self, episode_seed: u64) {
        (**self).begin_episode(episode_seed)
    }

    fn decide(&mut self, observation: &[f64]) -> Result<Decision> {
        (**self).decide(observation)
    }
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn begin_episode(&mut self, episode_seed: u64) {
        (**self).begin_episode(episode_seed)
    }

    fn decide(&mut self, observation: &[f64]) -> Result<Decision> {
        (**self).decide(observation)
    }
}

/// Replays a fixed action sequence (then repeats the last one).
pub struct ScriptedController {
    actions: Vec<Action>,
    cursor: usize,
}

impl ScriptedController {
    pub fn new(actions: Vec<Action>) -> Self {
        assert!(!actions.is_empty(), "scripted controller needs at least one action");
        Self { actions, cursor: 0 }
    }
}

impl Controller for ScriptedController {
    fn begin_episode(&mut self, _episode_seed: u64) {
        self.cursor = 0;
    }

    fn decide(&mut self, _observation: &[f64]) -> Result<Decision> {
        let a = self.actions[self.cursor.min(self.actions.len() - 1)].clone();
        self.cursor += 1;
        Ok(Decision {
            action: a,
            propensity: None,
        })
    }
}

/// Draw an index from a categorical distribution with one uniform draw.
pub fn sample_categorical(probs: &[f64], rng: &mut StreamRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Seed phases keep episode seeds of different experiment stages disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPhase {
    Behavior,
    Rollout(usize),
    Evaluation,
    TestEnv(usize),
}

const PHASE_STRIDE: u64 = 1_000_000_000;

pub fn episode_seed(phase: SeedPhase, index: u64) -> u64 {
    let code = match phase {
        SeedPhase::Behavior => 0,
        SeedPhase::Evaluation => 1,
        SeedPhase::Rollout(i) => 10 + i as u64,
        SeedPhase::TestEnv(k) => 100_000 + k as u64,
    };
    code * PHASE_STRIDE + index
}

/// Run one full episode.
pub fn run_episode<E, C>(env: &mut E, controller: &mut C, episode_seed: u64) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    C: Controller + ?Sized,
{
    run_bounded(env, controller, episode_seed, usize::MAX)
}

/// Run until the episode ends or `limit` steps are taken; a cut episode has
/// its last record marked truncated.
pub fn run_bounded<E, C>(env: &mut E, controller: &mut C, episode_seed: u64, limit: usize) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    C: Controller + ?Sized,
{
    let mut obs = env.reset(episode_seed)?;
    controller.begin_episode(episode_seed);
    let mut t = Trajectory {
        records: Vec::new(),
        episode_seed,
        perturbation_params: env.parameters(),
    };
    while t.records.len() < limit {
        let d = controller.decide(&obs)?;
        let step = env.step(&d.action)?;
        let done = step.done();
        let cut = !done && t.records.len() + 1 == limit;
        t.records.push(TransitionRecord {
            step_index: t.records.len(),
            observation: std::mem::replace(&mut obs, step.observation.clone()),
            action: d.action,
            reward: step.reward,
            reward_components: step.reward_components,
            constraint_costs: step.constraint_costs,
            next_observation: step.observation,
            behavior_propensity: d.propensity,
            terminal: step.terminal,
            truncated: step.truncated || cut,
            info: step.info,
        });
        if done {
            break;
        }
    }
    if t.records.is_empty() {
        return Err(Error::Usage("episode produced no transitions".into()));
    }
    Ok(t)
}

/// Episodic collection of exactly `total_steps` transitions.
pub fn collect_transitions<E, C>(
    env: &mut E,
    controller: &mut C,
    total_steps: usize,
    phase: SeedPhase,
) -> Result<Vec<Trajectory>>
where
    E: Environment + ?Sized,
    C: Controller + ?Sized,
{
    let mut out = Vec::new();
    let mut remaining = total_steps;
    let mut episode = 0u64;
    while remaining > 0 {
        let t = run_bounded(env, controller, episode_seed(phase, episode), remaining)?;
        remaining -= t.len();
        out.push(t);
        episode += 1;
    }
    Ok(out)
}

/// `episodes` full episodes with seeds from `phase`.
pub fn run_episodes<E, C>(env: &mut E, controller: &mut C, episodes: usize, phase: SeedPhase) -> Result<Vec<Trajectory>>
where
    E: Environment + ?Sized,
    C: Controller + ?Sized,
{
    (0..episodes as u64)
        .map(|i| run_episode(env, controller, episode_seed(phase, i)))
        .collect()
}
