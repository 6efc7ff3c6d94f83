//! Per-decision inference deadlines with a fallback action on overrun.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::error::{Error, Result};
use crate::rollout::{Controller, Decision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    #[default]
    RepeatLast,
    DefaultAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum LatencyMode {
    #[default]
    WallClock,
    /// Every decision is charged `injected_latency_us`; the clock is not read.
    Injected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealtimeBudget {
    pub deadline_us: f64,
    #[serde(default)]
    pub fallback: Fallback,
    #[serde(default)]
    pub mode: LatencyMode,
    #[serde(default)]
    pub injected_latency_us: f64,
}

impl RealtimeBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.deadline_us.is_finite() && self.deadline_us > 0.0) {
            return Err(Error::Config(format!("deadline must be positive, got {}", self.deadline_us)));
        }
        if !(self.injected_latency_us.is_finite() && self.injected_latency_us >= 0.0) {
            return Err(Error::Config("injected latency must be non-negative".into()));
        }
        Ok(())
    }
}

/// Wraps a controller, timing each decision against the deadline.
/// Substituted decisions carry no propensity.
pub struct RealtimeController<C> {
    inner: C,
    budget: RealtimeBudget,
    default_action: Action,
    last_action: Option<Action>,
    misses: usize,
    latencies_us: Vec<f64>,
}

pub fn wrap_realtime_budget<C: Controller>(inner: C, budget: RealtimeBudget, default_action: Action) -> Result<RealtimeController<C>> {
    budget.validate()?;
    Ok(RealtimeController {
        inner,
        budget,
        default_action,
        last_action: None,
        misses: 0,
        latencies_us: Vec::new(),
    })
}

impl<C> RealtimeController<C> {
    pub fn misses(&self) -> usize {
        self.misses
    }

    pub fn latencies_us(&self) -> &[f64] {
        &self.latencies_us
    }

    pub fn deadline_us(&self) -> f64 {
        self.budget.deadline_us
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<C: Controller> Controller for RealtimeController<C> {
    fn begin_episode(&mut self, episode_seed: u64) {
        self.last_action = None;
        self.inner.begin_episode(episode_seed);
    }

    fn decide(&mut self, observation: &[f64]) -> Result<Decision> {
        let started = Instant::now();
        let decision = self.inner.decide(observation)?;
        let latency = match self.budget.mode {
            LatencyMode::WallClock => started.elapsed().as_secs_f64() * 1e6,
            LatencyMode::Injected => self.budget.injected_latency_us,
        };
        self.latencies_us.push(latency);
        let action = if latency > self.budget.deadline_us {
            self.misses += 1;
            match (self.budget.fallback, &self.last_action) {
                (Fallback::RepeatLast, Some(a)) => a.clone(),
                _ => self.default_action.clone(),
            }
        } else {
            decision.action
        };
        self.last_action = Some(action.clone());
        Ok(Decision {
            action,
            propensity: None,
        })
    }
}
