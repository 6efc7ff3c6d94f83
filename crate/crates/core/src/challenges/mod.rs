//! Composable wrappers that inject real-world difficulties into an
//! environment, plus the config-level list that builds a wrapper stack.

pub mod delay;
pub mod noise;
pub mod observation;
pub mod perturbation;
pub mod realtime;
pub mod reshape;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::{Action, Environment};
use crate::error::Result;
use crate::rng::{streams, RngStream};

pub use delay::{neutral_action, wrap_action_delay, wrap_observation_delay, ActionDelay, DelayConfig, ObservationDelay};
pub use noise::{wrap_noise, Noise, NoiseConfig};
pub use observation::{wrap_history_stack, wrap_partial_observation, HistoryStack, PartialObservation};
pub use perturbation::{
    apply_perturbations, wrap_perturbation, Distribution, ParameterSource, PerturbationMode, PerturbationSpec, Perturbed,
};
pub use realtime::{wrap_realtime_budget, Fallback, LatencyMode, RealtimeBudget, RealtimeController};
pub use reshape::{wrap_action_reshape, ActionRelation, ActionReshape, ActionReshapeConfig};

/// One entry of the ordered `challenges` list. Entries wrap the environment
/// in list order, so the first entry sits closest to the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum ChallengeSpec {
    ActionDelay {
        steps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default_action: Option<Action>,
    },
    ObservationDelay {
        steps: usize,
        #[serde(default)]
        delay_reward: bool,
    },
    Noise(NoiseConfig),
    PartialObservation {
        mask: Vec<bool>,
    },
    HistoryStack {
        k: usize,
    },
    ActionReshape(ActionReshapeConfig),
    Perturbation {
        specs: Vec<PerturbationSpec>,
    },
}

/// Sample-mode perturbations across the whole list, in order.
pub fn sampled_perturbations(challenges: &[ChallengeSpec]) -> Vec<PerturbationSpec> {
    challenges
        .iter()
        .flat_map(|c| match c {
            ChallengeSpec::Perturbation { specs } => specs.clone(),
            _ => Vec::new(),
        })
        .filter(|s| s.mode == PerturbationMode::Sample)
        .collect()
}

/// Wrap `base` with every challenge in order. With `pinned`, perturbation
/// entries use those values instead of drawing per episode.
pub fn build_challenges<'a>(
    base: Box<dyn Environment + 'a>,
    challenges: &[ChallengeSpec],
    master_seed: u64,
    pinned: Option<&BTreeMap<String, f64>>,
) -> Result<Box<dyn Environment + 'a>> {
    let mut env = base;
    for (position, c) in challenges.iter().enumerate() {
        let tag = position as u64;
        env = match c {
            ChallengeSpec::ActionDelay { steps, default_action } => {
                let cfg = DelayConfig {
                    action_delay: *steps,
                    default_action: default_action.clone(),
                    ..Default::default()
                };
                Box::new(wrap_action_delay(env, &cfg))
            }
            ChallengeSpec::ObservationDelay { steps, delay_reward } => {
                let cfg = DelayConfig {
                    observation_delay: *steps,
                    delay_reward: *delay_reward,
                    ..Default::default()
                };
                Box::new(wrap_observation_delay(env, &cfg))
            }
            ChallengeSpec::Noise(cfg) => Box::new(wrap_noise(env, *cfg, master_seed, tag)?),
            ChallengeSpec::PartialObservation { mask } => Box::new(wrap_partial_observation(env, mask)?),
            ChallengeSpec::HistoryStack { k } => Box::new(wrap_history_stack(env, *k)?),
            ChallengeSpec::ActionReshape(cfg) => Box::new(wrap_action_reshape(env, *cfg, master_seed, tag)?),
            ChallengeSpec::Perturbation { specs } => {
                let source = match pinned {
                    Some(values) => ParameterSource::Fixed(values.clone()),
                    None => ParameterSource::Sampled(RngStream::new(master_seed, streams::PERTURBATION).derive(tag)),
                };
                Box::new(wrap_perturbation(env, specs.clone(), source)?)
            }
        };
    }
    Ok(env)
}
