//! The experiment config file: parsing, validation, hashing and building
//! the configured environment.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::batch_rl::TrainConfig;
use crate::challenges::{build_challenges, ChallengeSpec, Fallback, LatencyMode, RealtimeBudget};
use crate::env::Environment;
use crate::envs::{CartPole, CartPoleConfig, GridEnv, GridWorld};
use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::safety::{cartpole_constraints, CartPoleBounds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Cartpole(CartPoleConfig),
    Gridworld(GridWorld),
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig::Cartpole(CartPoleConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintsConfig {
    pub enabled: bool,
    pub x_l: f64,
    pub x_r: f64,
    pub theta_c: f64,
    pub theta_l: f64,
    pub theta_dot_v: f64,
    pub a_max: f64,
}

impl Default for ConstraintsConfig {
    fn default() -> Self {
        let b = CartPoleBounds::default();
        Self {
            enabled: true,
            x_l: b.x_l,
            x_r: b.x_r,
            theta_c: b.theta_c,
            theta_l: b.theta_l,
            theta_dot_v: b.theta_dot_v,
            a_max: b.a_max,
        }
    }
}

impl ConstraintsConfig {
    pub fn bounds(&self) -> CartPoleBounds {
        CartPoleBounds {
            x_l: self.x_l,
            x_r: self.x_r,
            theta_c: self.theta_c,
            theta_l: self.theta_l,
            theta_dot_v: self.theta_dot_v,
            a_max: self.a_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    /// PD balance controller over reshaped discrete forces.
    Pd,
    Uniform,
    /// ε-greedy on the exact optimal values (gridworld only).
    EpsilonOptimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct BehaviorConfig {
    pub kind: BehaviorKind,
    pub kp: f64,
    pub kd: f64,
    pub epsilon: f64,
    pub transitions: usize,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            kind: BehaviorKind::Pd,
            kp: 30.0,
            kd: 5.0,
            epsilon: 0.1,
            transitions: 20_000,
        }
    }
}

/// Outer loop of batch training: `N` retraining rounds of `L` steps each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct BrtConfig {
    pub iterations: usize,
    pub rollout_steps: usize,
}

impl Default for BrtConfig {
    fn default() -> Self {
        Self {
            iterations: 0,
            rollout_steps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub gamma: f64,
    pub episodes: usize,
    /// Perturbed test environments and episodes per environment.
    pub k: usize,
    pub test_episodes: usize,
    pub alphas: Vec<f64>,
    /// Fixed threshold for data efficiency; by default a fraction of the
    /// expert's return.
    pub r_min: Option<f64>,
    pub r_min_fraction: f64,
    pub prefix_grid: Vec<usize>,
    /// Discount for the safety cost sums reported next to the plain totals.
    pub safety_gamma: f64,
    pub ope: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            episodes: 20,
            k: 5,
            test_episodes: 5,
            alphas: vec![0.1, 0.25, 0.5, 1.0],
            r_min: None,
            r_min_fraction: 0.75,
            prefix_grid: vec![1000, 5000, 20_000],
            safety_gamma: 1.0,
            ope: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RealtimeConfig {
    pub deadline_us: f64,
    #[serde(default)]
    pub fallback: Fallback,
    #[serde(default)]
    pub mode: LatencyMode,
    #[serde(default)]
    pub injected_latency_us: f64,
}

impl RealtimeConfig {
    pub fn budget(&self) -> RealtimeBudget {
        RealtimeBudget {
            deadline_us: self.deadline_us,
            fallback: self.fallback,
            mode: self.mode,
            injected_latency_us: self.injected_latency_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub master_seed: u64,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub challenges: Vec<ChallengeSpec>,
    #[serde(default)]
    pub constraints: ConstraintsConfig,
    #[serde(default)]
    pub behavior: BehaviorConfig,
    #[serde(default)]
    pub trainer: TrainConfig,
    #[serde(default)]
    pub brt: BrtConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realtime: Option<RealtimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                // a config that cannot be found is an invalid config, not a missing artifact
                Error::Config(format!("config file {} not found", path.display()))
            } else {
                Error::io(path, e)
            }
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.environment {
            EnvironmentConfig::Cartpole(c) => c.validate()?,
            EnvironmentConfig::Gridworld(g) => {
                g.validate()?;
                if self.behavior.kind == BehaviorKind::Pd {
                    return Err(Error::Config("the gridworld has no forces; pick a uniform or epsilon_optimal behavior".into()));
                }
            }
        }
        if matches!(self.environment, EnvironmentConfig::Cartpole(_)) && self.behavior.kind == BehaviorKind::EpsilonOptimal {
            return Err(Error::Config("epsilon_optimal behavior is only defined on the gridworld".into()));
        }
        if !(0.0..=1.0).contains(&self.behavior.epsilon) {
            return Err(Error::Config(format!(
                "behavior epsilon must lie in [0, 1], got {}",
                self.behavior.epsilon
            )));
        }
        if self.behavior.transitions == 0 {
            return Err(Error::Config("behavior.transitions must be at least 1".into()));
        }
        self.trainer.validate()?;
        if self.brt.rollout_steps == 0 {
            return Err(Error::Config("brt.rollout_steps must be at least 1".into()));
        }
        let m = &self.metrics;
        if !(0.0..1.0).contains(&m.gamma) || !(0.0..=1.0).contains(&m.safety_gamma) {
            return Err(Error::Config("metrics.gamma must lie in [0, 1) and safety_gamma in [0, 1]".into()));
        }
        if m.episodes == 0 || m.k == 0 || m.test_episodes == 0 {
            return Err(Error::Config("metrics episodes, k and test_episodes must be at least 1".into()));
        }
        if m.alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(Error::Config("CVaR levels must lie in (0, 1]".into()));
        }
        crate::metrics::check_grid(&m.prefix_grid)?;
        if m.r_min.is_some_and(|r| !r.is_finite()) {
            return Err(Error::Config("metrics.r_min must be finite".into()));
        }
        if let Some(rt) = &self.realtime {
            rt.budget().validate()?;
        }
        if self.constraints.enabled {
            cartpole_constraints(&self.constraints.bounds())?;
        }
        // wrappers validate on construction
        self.build_env()?;
        Ok(())
    }

    /// JSON schema of the config file; the TOML maps onto it one to one.
    pub fn json_schema() -> String {
        let schema = schemars::schema_for!(SuiteConfig);
        serde_json::to_string_pretty(&schema).expect("schema serializes") + "\n"
    }

    /// Hash of the full canonical config.
    pub fn config_hash(&self) -> Result<String> {
        Ok(sha256_hex(&jsonfmt::to_line(self)?))
    }

    /// Hash of the parts that define the environment a dataset came from.
    pub fn environment_hash(&self) -> Result<String> {
        #[derive(Serialize)]
        struct EnvPart<'a> {
            environment: &'a EnvironmentConfig,
            challenges: &'a [ChallengeSpec],
            constraints: &'a ConstraintsConfig,
        }
        Ok(sha256_hex(&jsonfmt::to_line(&EnvPart {
            environment: &self.environment,
            challenges: &self.challenges,
            constraints: &self.constraints,
        })?))
    }

    pub fn constraint_specs(&self) -> Result<Vec<crate::safety::ConstraintSpec>> {
        match (&self.environment, self.constraints.enabled) {
            (EnvironmentConfig::Cartpole(_), true) => cartpole_constraints(&self.constraints.bounds()),
            _ => Ok(Vec::new()),
        }
    }

    /// The bare plant, before any challenge wrapper.
    pub fn build_base(&self) -> Result<Box<dyn Environment>> {
        Ok(match &self.environment {
            EnvironmentConfig::Cartpole(c) => {
                Box::new(CartPole::new(c.clone(), self.master_seed)?.with_constraints(self.constraint_specs()?))
            }
            EnvironmentConfig::Gridworld(g) => Box::new(GridEnv::new(g.clone(), self.master_seed)?),
        })
    }

    pub fn build_env(&self) -> Result<Box<dyn Environment>> {
        build_challenges(self.build_base()?, &self.challenges, self.master_seed, None)
    }

    /// Environment with every perturbation pinned to `params`.
    pub fn build_pinned_env(&self, params: &BTreeMap<String, f64>) -> Result<Box<dyn Environment>> {
        build_challenges(self.build_base()?, &self.challenges, self.master_seed, Some(params))
    }
}
