//! Gaussian sensor and actuator noise.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionSpace, EnvSpec, EnvStep, Environment};
use crate::error::{Error, Result};
use crate::rng::{streams, RngStream, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub sigma_obs: f64,
    pub sigma_act: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_obs >= 0.0 && self.sigma_act >= 0.0) {
            return Err(Error::Config("noise standard deviations must be non-negative".into()));
        }
        Ok(())
    }
}

pub struct Noise<E> {
    inner: E,
    config: NoiseConfig,
    obs_stream: RngStream,
    act_stream: RngStream,
    obs_rng: StreamRng,
    act_rng: StreamRng,
    force_bounds: Option<(f64, f64)>,
}

/// `stream_tag` separates several noise wrappers under one master seed.
pub fn wrap_noise<E: Environment>(inner: E, config: NoiseConfig, master_seed: u64, stream_tag: u64) -> Result<Noise<E>> {
    config.validate()?;
    let force_bounds = match inner.spec().action {
        ActionSpace::Continuous { low, high } => Some((low, high)),
        ActionSpace::Discrete { .. } if config.sigma_act > 0.0 => {
            return Err(Error::Config(
                "action noise needs a continuous action space; place it below action reshaping".into(),
            ))
        }
        ActionSpace::Discrete { .. } => None,
    };
    let obs_stream = RngStream::new(master_seed, streams::OBSERVATION_NOISE).derive(stream_tag);
    let act_stream = RngStream::new(master_seed, streams::ACTION_NOISE).derive(stream_tag);
    Ok(Noise {
        obs_rng: obs_stream.rng(),
        act_rng: act_stream.rng(),
        inner,
        config,
        obs_stream,
        act_stream,
        force_bounds,
    })
}

fn perturb(values: &mut [f64], sigma: f64, rng: &mut StreamRng) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated non-negative");
    for v in values {
        *v += normal.sample(rng);
    }
}

impl<E: Environment> Environment for Noise<E> {
    fn spec(&self) -> EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>> {
        self.obs_rng = self.obs_stream.derive(episode_seed).rng();
        self.act_rng = self.act_stream.derive(episode_seed).rng();
        let mut obs = self.inner.reset(episode_seed)?;
        perturb(&mut obs, self.config.sigma_obs, &mut self.obs_rng);
        Ok(obs)
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        let applied = match (action, self.force_bounds) {
            (Action::Continuous(f), Some((lo, hi))) if self.config.sigma_act > 0.0 => {
                let mut v = [*f];
                perturb(&mut v, self.config.sigma_act, &mut self.act_rng);
                Action::Continuous(v[0].clamp(lo, hi))
            }
            _ => action.clone(),
        };
        let mut step = self.inner.step(&applied)?;
        perturb(&mut step.observation, self.config.sigma_obs, &mut self.obs_rng);
        Ok(step)
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        self.inner.parameters()
    }

    fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        self.inner.set_parameter(name, value)
    }
}
