//! Domain randomization and within-episode parameter drift.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, EnvSpec, EnvStep, Environment};
use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};

const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = match *self {
            Distribution::Uniform { lo, hi } | Distribution::LogUniform { lo, hi } => (lo, hi),
        };
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("distribution needs finite lo < hi, got [{lo}, {hi}]")));
        }
        if matches!(self, Distribution::LogUniform { .. }) && lo <= 0.0 {
            return Err(Error::Config("log-uniform distribution needs lo > 0".into()));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        let u: f64 = rng.random();
        match *self {
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * u,
            Distribution::LogUniform { lo, hi } => (lo.ln() + (hi.ln() - lo.ln()) * u).exp(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::LogUniform { lo, hi } => (hi - lo) / (hi.ln() - lo.ln()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// One draw per episode.
    Sample,
    /// Multiply by `drift_rate` after every step.
    Drift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub parameter: String,
    pub mode: PerturbationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Distribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_rate: Option<f64>,
}

impl PerturbationSpec {
    pub fn sample(parameter: &str, distribution: Distribution) -> Self {
        Self {
            parameter: parameter.into(),
            mode: PerturbationMode::Sample,
            distribution: Some(distribution),
            drift_rate: None,
        }
    }

    pub fn drift(parameter: &str, rate: f64) -> Self {
        Self {
            parameter: parameter.into(),
            mode: PerturbationMode::Drift,
            distribution: None,
            drift_rate: Some(rate),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.mode, &self.distribution, self.drift_rate) {
            (PerturbationMode::Sample, Some(d), None) => d.validate(),
            (PerturbationMode::Drift, None, Some(r)) if r.is_finite() && r > 0.0 => Ok(()),
            (PerturbationMode::Drift, None, Some(r)) => {
                Err(Error::Config(format!("drift_rate must be positive, got {r}")))
            }
            _ => Err(Error::Config(format!(
                "perturbation of `{}`: sample mode takes `distribution`, drift mode takes `drift_rate`",
                self.parameter
            ))),
        }
    }
}

/// Physical admissibility of a parameter value, by name. Unknown names only
/// need to be finite.
pub fn parameter_admissible(name: &str, value: f64) -> bool {
    match name {
        "m_c" | "m_p" | "l" | "f_mag" | "dt" => value.is_finite() && value > 0.0,
        "mu_track" => value.is_finite() && value >= 0.0,
        _ => value.is_finite(),
    }
}

/// Draw the per-episode values of every sample-mode spec. Drift specs leave
/// their parameter at its start value.
pub fn apply_perturbations(
    base: &BTreeMap<String, f64>,
    specs: &[PerturbationSpec],
    stream: &RngStream,
    episode_index: u64,
) -> Result<BTreeMap<String, f64>> {
    for s in specs {
        s.validate()?;
        if !base.contains_key(&s.parameter) {
            return Err(Error::Config(format!("environment has no parameter `{}`", s.parameter)));
        }
    }
    let mut rng = stream.derive(episode_index).rng();
    let mut out = base.clone();
    for s in specs {
        let Some(dist) = s.distribution else { continue };
        let value = (0..MAX_RESAMPLES)
            .map(|_| dist.sample(&mut rng))
            .find(|v| parameter_admissible(&s.parameter, *v))
            .ok_or_else(|| {
                Error::Config(format!(
                    "no admissible value for `{}` after {MAX_RESAMPLES} draws",
                    s.parameter
                ))
            })?;
        out.insert(s.parameter.clone(), value);
    }
    Ok(out)
}

/// Where episode parameters come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ParameterSource {
    /// Fresh draw per episode seed.
    Sampled(RngStream),
    /// Pinned values, e.g. one member of a test-environment set. Keys that no
    /// sample spec targets are ignored.
    Fixed(BTreeMap<String, f64>),
}

pub struct Perturbed<E> {
    inner: E,
    specs: Vec<PerturbationSpec>,
    base: BTreeMap<String, f64>,
    source: ParameterSource,
}

pub fn wrap_perturbation<E: Environment>(inner: E, specs: Vec<PerturbationSpec>, source: ParameterSource) -> Result<Perturbed<E>> {
    let base = inner.parameters();
    // validates names and distributions up front
    apply_perturbations(&base, &specs, &RngStream::new(0, 0), 0)?;
    Ok(Perturbed {
        inner,
        specs,
        base,
        source,
    })
}

impl<E> Perturbed<E> {
    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Environment> Environment for Perturbed<E> {
    fn spec(&self) -> EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>> {
        let values = match &self.source {
            ParameterSource::Sampled(stream) => apply_perturbations(&self.base, &self.specs, stream, episode_seed)?,
            ParameterSource::Fixed(fixed) => {
                let mut v = self.base.clone();
                for s in self.specs.iter().filter(|s| s.mode == PerturbationMode::Sample) {
                    if let Some(x) = fixed.get(&s.parameter) {
                        v.insert(s.parameter.clone(), *x);
                    }
                }
                v
            }
        };
        for s in &self.specs {
            self.inner.set_parameter(&s.parameter, values[&s.parameter])?;
        }
        self.inner.reset(episode_seed)
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        let step = self.inner.step(action)?;
        for s in &self.specs {
            if let Some(rate) = s.drift_rate {
                let current = self.inner.parameters()[&s.parameter];
                self.inner.set_parameter(&s.parameter, current * rate)?;
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
