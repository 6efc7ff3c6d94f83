//! Partial observability: masking dimensions and stacking history.

use std::collections::{BTreeMap, VecDeque};

use crate::env::{Action, EnvSpec, EnvStep, Environment, ObservationSpace};
use crate::error::{Error, Result};

pub struct PartialObservation<E> {
    inner: E,
    keep: Vec<usize>,
}

pub fn wrap_partial_observation<E: Environment>(inner: E, mask: &[bool]) -> Result<PartialObservation<E>> {
    let dim = inner.spec().observation.dim();
    if mask.len() != dim {
        return Err(Error::Config(format!("mask has {} entries for a {dim}-dim observation", mask.len())));
    }
    let keep: Vec<usize> = mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect();
    if keep.is_empty() {
        return Err(Error::Config("observation mask hides every dimension".into()));
    }
    Ok(PartialObservation { inner, keep })
}

impl<E> PartialObservation<E> {
    fn select(&self, v: &[f64]) -> Vec<f64> {
        self.keep.iter().map(|&i| v[i]).collect()
    }
}

impl<E: Environment> Environment for PartialObservation<E> {
    fn spec(&self) -> EnvSpec {
        let mut spec = self.inner.spec();
        spec.observation = ObservationSpace::new(self.select(&spec.observation.low), self.select(&spec.observation.high));
        spec
    }

    fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>> {
        let obs = self.inner.reset(episode_seed)?;
        Ok(self.select(&obs))
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        let mut step = self.inner.step(action)?;
        step.observation = self.select(&step.observation);
        Ok(step)
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        self.inner.parameters()
    }

    fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        self.inner.set_parameter(name, value)
    }
}

/// Emits the last `k` observations concatenated, oldest first.
pub struct HistoryStack<E> {
    inner: E,
    k: usize,
    frames: VecDeque<Vec<f64>>,
}

pub fn wrap_history_stack<E: Environment>(inner: E, k: usize) -> Result<HistoryStack<E>> {
    if k == 0 {
        return Err(Error::Config("history stack needs k ≥ 1".into()));
    }
    Ok(HistoryStack {
        inner,
        k,
        frames: VecDeque::with_capacity(k),
    })
}

impl<E> HistoryStack<E> {
    fn stacked(&self) -> Vec<f64> {
        self.frames.iter().flatten().copied().collect()
    }
}

impl<E: Environment> Environment for HistoryStack<E> {
    fn spec(&self) -> EnvSpec {
        let mut spec = self.inner.spec();
        let repeat = |v: &[f64]| v.repeat(self.k);
        spec.observation = ObservationSpace::new(repeat(&spec.observation.low), repeat(&spec.observation.high));
        spec
    }

    fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>> {
        let obs = self.inner.reset(episode_seed)?;
        self.frames.clear();
        self.frames.extend(std::iter::repeat_n(obs, self.k));
        Ok(self.stacked())
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        let mut step = self.inner.step(action)?;
        self.frames.pop_front();
        self.frames.push_back(std::mem::take(&mut step.observation));
        step.observation = self.stacked();
        Ok(step)
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        self.inner.parameters()
    }

    fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        self.inner.set_parameter(name, value)
    }
}
