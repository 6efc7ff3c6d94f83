//! Policies, their action distributions, and the persisted policy format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::discretize::Discretizer;
use crate::env::Action;
use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::mdp::argmax;
use crate::record::Provenance;
use crate::rng::{RngStream, StreamRng};
use crate::rollout::{sample_categorical, Controller, Decision};

pub const POLICY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ActionDistribution {
    /// Probabilities over discrete actions `0..n`.
    Categorical(Vec<f64>),
    Deterministic(Action),
}

pub trait Policy {
    fn policy_id(&self) -> &str;

    /// Training iteration `i` of `π_i`; behavior policies report 0.
    fn iteration(&self) -> usize {
        0
    }

    fn distribution(&self, observation: &[f64]) -> Result<ActionDistribution>;

    fn propensity(&self, observation: &[f64], action: &Action) -> Result<f64> {
        Ok(match self.distribution(observation)? {
            ActionDistribution::Categorical(p) => action.as_discrete().and_then(|i| p.get(i).copied()).unwrap_or(0.0),
            ActionDistribution::Deterministic(a) => {
                if a == *action {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }
}

impl<P: Policy + ?Sized> Policy for &P {
    fn policy_id(&self) -> &str {
        (**self).policy_id()
    }
    fn iteration(&self) -> usize {
        (**self).iteration()
    }
    fn distribution(&self, observation: &[f64]) -> Result<ActionDistribution> {
        (**self).distribution(observation)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn policy_id(&self) -> &str {
        (**self).policy_id()
    }
    fn iteration(&self) -> usize {
        (**self).iteration()
    }
    fn distribution(&self, observation: &[f64]) -> Result<ActionDistribution> {
        (**self).distribution(observation)
    }
}

/// `epsilon` spread uniformly, the rest on `greedy`.
pub fn epsilon_greedy(greedy: usize, n: usize, epsilon: f64) -> Vec<f64> {
    let mut p = vec![epsilon / n as f64; n];
    p[greedy] += 1.0 - epsilon;
    p
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..=1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must lie in [0, 1], got {epsilon}")))
    }
}

/// Samples actions from a policy and logs their probabilities. Randomness is
/// reseeded from the episode seed at every episode start.
pub struct PolicyController<P> {
    policy: P,
    stream: RngStream,
    rng: StreamRng,
}

impl<P: Policy> PolicyController<P> {
    pub fn new(policy: P, stream: RngStream) -> Self {
        Self {
            rng: stream.rng(),
            policy,
            stream,
        }
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }
}

impl<P: Policy> Controller for PolicyController<P> {
    fn begin_episode(&mut self, episode_seed: u64) {
        self.rng = self.stream.derive(episode_seed).rng();
    }

    fn decide(&mut self, observation: &[f64]) -> Result<Decision> {
        Ok(match self.policy.distribution(observation)? {
            ActionDistribution::Categorical(p) => {
                let i = sample_categorical(&p, &mut self.rng);
                Decision {
                    action: Action::Discrete(i),
                    propensity: Some(p[i]),
                }
            }
            ActionDistribution::Deterministic(a) => {
                let propensity = a.as_discrete().map(|_| 1.0);
                Decision { action: a, propensity }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformPolicy {
    pub policy_id: String,
    pub iteration: usize,
    pub n_actions: usize,
}

impl Policy for UniformPolicy {
    fn policy_id(&self) -> &str {
        &self.policy_id
    }
    fn iteration(&self) -> usize {
        self.iteration
    }
    fn distribution(&self, _observation: &[f64]) -> Result<ActionDistribution> {
        Ok(ActionDistribution::Categorical(vec![1.0 / self.n_actions as f64; self.n_actions]))
    }
}

/// Proportional-derivative balance controller snapped to a discrete force
/// set, with ε-uniform exploration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdPolicy {
    pub policy_id: String,
    pub kp: f64,
    pub kd: f64,
    pub epsilon: f64,
    pub forces: Vec<f64>,
    pub theta_index: usize,
    pub theta_dot_index: usize,
}

impl PdPolicy {
    pub fn new(kp: f64, kd: f64, epsilon: f64, forces: Vec<f64>) -> Result<Self> {
        check_epsilon(epsilon)?;
        if forces.is_empty() {
            return Err(Error::Config("PD policy needs a non-empty force set".into()));
        }
        Ok(Self {
            policy_id: "pi_B".into(),
            kp,
            kd,
            epsilon,
            forces,
            theta_index: 2,
            theta_dot_index: 3,
        })
    }

    /// Index of the force nearest to `kp·θ + kd·θ̇`, lowest index on ties.
    pub fn nearest(&self, observation: &[f64]) -> Result<usize> {
        let (Some(theta), Some(theta_dot)) = (observation.get(self.theta_index), observation.get(self.theta_dot_index)) else {
            return Err(Error::Data(format!(
                "PD policy reads observation indices {} and {}, observation has {} dims",
                self.theta_index,
                self.theta_dot_index,
                observation.len()
            )));
        };
        let target = self.kp * theta + self.kd * theta_dot;
        let mut best = 0;
        for (i, f) in self.forces.iter().enumerate() {
            if (f - target).abs() < (self.forces[best] - target).abs() {
                best = i;
            }
        }
        Ok(best)
    }
}

impl Policy for PdPolicy {
    fn policy_id(&self) -> &str {
        &self.policy_id
    }
    fn distribution(&self, observation: &[f64]) -> Result<ActionDistribution> {
        let g = self.nearest(observation)?;
        Ok(ActionDistribution::Categorical(epsilon_greedy(g, self.forces.len(), self.epsilon)))
    }
}

/// Greedy (optionally ε-greedy) policy over a tabular action-value function
/// on a discretized observation space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularQPolicy {
    pub policy_id: String,
    pub iteration: usize,
    pub epsilon: f64,
    pub discretizer: Discretizer,
    /// `q[cell][action]`.
    pub q: Vec<Vec<f64>>,
}

impl TabularQPolicy {
    pub fn new(policy_id: impl Into<String>, iteration: usize, discretizer: Discretizer, q: Vec<Vec<f64>>) -> Result<Self> {
        if q.len() != discretizer.n_cells() || q.is_empty() {
            return Err(Error::Internal("Q table does not match the discretizer".into()));
        }
        let n = q[0].len();
        if n == 0 || q.iter().any(|row| row.len() != n) {
            return Err(Error::Internal("Q table rows differ in length".into()));
        }
        Ok(Self {
            policy_id: policy_id.into(),
            iteration,
            epsilon: 0.0,
            discretizer,
            q,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn n_actions(&self) -> usize {
        self.q[0].len()
    }

    pub fn values(&self, observation: &[f64]) -> Result<&[f64]> {
        Ok(&self.q[self.discretizer.cell(observation)?])
    }

    pub fn greedy(&self, observation: &[f64]) -> Result<usize> {
        Ok(argmax(self.values(observation)?))
    }
}

impl Policy for TabularQPolicy {
    fn policy_id(&self) -> &str {
        &self.policy_id
    }
    fn iteration(&self) -> usize {
        self.iteration
    }
    fn distribution(&self, observation: &[f64]) -> Result<ActionDistribution> {
        let g = self.greedy(observation)?;
        Ok(ActionDistribution::Categorical(epsilon_greedy(g, self.n_actions(), self.epsilon)))
    }
}

/// Every policy kind the harness can persist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyArtifact {
    Uniform(UniformPolicy),
    Pd(PdPolicy),
    TabularQ(TabularQPolicy),
}

impl PolicyArtifact {
    fn inner(&self) -> &dyn Policy {
        match self {
            PolicyArtifact::Uniform(p) => p,
            PolicyArtifact::Pd(p) => p,
            PolicyArtifact::TabularQ(p) => p,
        }
    }

    /// Same policy with exploration rate `epsilon` where the kind has one.
    pub fn with_exploration(&self, epsilon: f64) -> Result<PolicyArtifact> {
        check_epsilon(epsilon)?;
        Ok(match self {
            PolicyArtifact::TabularQ(p) => PolicyArtifact::TabularQ(p.clone().with_epsilon(epsilon)?),
            PolicyArtifact::Pd(p) => PolicyArtifact::Pd(PdPolicy { epsilon, ..p.clone() }),
            PolicyArtifact::Uniform(p) => PolicyArtifact::Uniform(p.clone()),
        })
    }
}

impl Policy for PolicyArtifact {
    fn policy_id(&self) -> &str {
        self.inner().policy_id()
    }
    fn iteration(&self) -> usize {
        self.inner().iteration()
    }
    fn distribution(&self, observation: &[f64]) -> Result<ActionDistribution> {
        self.inner().distribution(observation)
    }
}

/// On-disk policy: artifact plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub schema_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub policy: PolicyArtifact,
}

impl PolicyFile {
    pub fn new(policy: PolicyArtifact, provenance: &Provenance) -> Self {
        Self {
            schema_version: POLICY_SCHEMA_VERSION,
            config_hash: provenance.config_hash.clone(),
            master_seed: provenance.master_seed,
            policy,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = jsonfmt::to_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: PolicyFile = serde_json::from_str(text).map_err(|e| Error::Data(format!("policy file: {e}")))?;
        if f.schema_version != POLICY_SCHEMA_VERSION {
            return Err(Error::Data(format!("unsupported policy schema version {}", f.schema_version)));
        }
        Ok(f)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingArtifact(format!("policy file {} not found", path.display()))
            } else {
                Error::io(path, e)
            }
        })?;
        Self::from_json(&text)
    }
}
