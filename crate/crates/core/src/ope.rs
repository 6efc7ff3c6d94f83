//! Off-policy evaluation: importance sampling (plain and weighted), the
//! direct method on a fitted tabular model, and doubly robust.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::batch_rl::{ActionDistribution, Discretizer, Policy};
use crate::env::Action;
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::record::{check_gamma, discounted_return, Dataset, Trajectory, TransitionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Is,
    Wis,
    Dm,
    Dr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl WeightSummary {
    fn of(w: &[f64]) -> Self {
        Self {
            min: w.iter().cloned().fold(f64::INFINITY, f64::min),
            max: w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean: w.iter().sum::<f64>() / w.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeEstimate {
    pub estimator: Estimator,
    pub value: f64,
    pub effective_sample_size: f64,
    pub weights: WeightSummary,
    pub trajectories: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// `(Σw)² / Σw²`; zero for all-zero weights.
pub fn effective_sample_size(w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

fn behavior_propensity(r: &TransitionRecord) -> Result<f64> {
    match r.behavior_propensity {
        Some(p) if p > 0.0 => Ok(p),
        Some(p) => Err(Error::Data(format!("behavior propensity {p} is not positive"))),
        None => Err(Error::Data("off-policy evaluation needs logged behavior propensities".into())),
    }
}

fn nonempty(dataset: &Dataset) -> Result<()> {
    if dataset.trajectories.is_empty() || dataset.transition_count() == 0 {
        return Err(Error::Data("off-policy evaluation on an empty dataset".into()));
    }
    Ok(())
}

/// Per-step ratios `π_e(a_t|s_t) / π_B(a_t|s_t)`.
pub fn step_ratios<P: Policy + ?Sized>(t: &Trajectory, target: &P) -> Result<Vec<f64>> {
    t.records
        .iter()
        .map(|r| Ok(target.propensity(&r.observation, &r.action)? / behavior_propensity(r)?))
        .collect()
}

/// Whole-trajectory importance weights.
pub fn trajectory_weights<P: Policy + ?Sized>(dataset: &Dataset, target: &P) -> Result<Vec<f64>> {
    dataset
        .trajectories
        .iter()
        .map(|t| Ok(step_ratios(t, target)?.iter().product()))
        .collect()
}

pub fn importance_sampling<P: Policy + ?Sized>(dataset: &Dataset, target: &P, gamma: f64, weighted: bool) -> Result<OpeEstimate> {
    check_gamma(gamma)?;
    nonempty(dataset)?;
    let w = trajectory_weights(dataset, target)?;
    let g = dataset
        .trajectories
        .iter()
        .map(|t| discounted_return(t, gamma))
        .collect::<Result<Vec<_>>>()?;
    let weighted_sum: f64 = w.iter().zip(&g).map(|(w, g)| w * g).sum();
    let total: f64 = w.iter().sum();
    let mut warnings = Vec::new();
    let value = if !weighted {
        weighted_sum / w.len() as f64
    } else if total > 0.0 {
        weighted_sum / total
    } else {
        warnings.push("every importance weight is zero; weighted estimate set to 0".into());
        0.0
    };
    Ok(OpeEstimate {
        estimator: if weighted { Estimator::Wis } else { Estimator::Is },
        value,
        effective_sample_size: effective_sample_size(&w),
        weights: WeightSummary::of(&w),
        trajectories: w.len(),
        warnings,
    })
}

/// Action values over discretized observations.
pub trait QFunction {
    fn q_values(&self, observation: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub discretizer: Discretizer,
    /// `q[cell][action]`.
    pub q: Vec<Vec<f64>>,
}

impl QTable {
    pub fn zeros(discretizer: Discretizer, n_actions: usize) -> Self {
        let n = discretizer.n_cells();
        Self {
            discretizer,
            q: vec![vec![0.0; n_actions]; n],
        }
    }
}

impl QFunction for QTable {
    fn q_values(&self, observation: &[f64]) -> Result<Vec<f64>> {
        Ok(self.q[self.discretizer.cell(observation)?].clone())
    }
}

fn categorical<P: Policy + ?Sized>(target: &P, observation: &[f64], n_actions: usize) -> Result<Vec<f64>> {
    match target.distribution(observation)? {
        ActionDistribution::Categorical(p) if p.len() == n_actions => Ok(p),
        ActionDistribution::Categorical(p) => Err(Error::Data(format!(
            "target policy has {} actions, data has {n_actions}",
            p.len()
        ))),
        ActionDistribution::Deterministic(Action::Discrete(i)) if i < n_actions => {
            let mut p = vec![0.0; n_actions];
            p[i] = 1.0;
            Ok(p)
        }
        ActionDistribution::Deterministic(_) => Err(Error::Data("target policy is not over discrete actions".into())),
    }
}

fn discrete_actions(dataset: &Dataset) -> Result<usize> {
    dataset
        .env
        .action
        .discrete_count()
        .ok_or_else(|| Error::Data("tabular off-policy evaluation needs discrete actions".into()))
}

/// Empirical tabular model fitted from logs.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub discretizer: Discretizer,
    pub mdp: TabularMdp,
    pub visited: Vec<bool>,
}

/// Counts and mean rewards per `(cell, action)`; terminal transitions send
/// their mass to the absorbing zero-value state, as do unvisited pairs.
pub fn fit_model(dataset: &Dataset, discretizer: &Discretizer) -> Result<FittedModel> {
    let n_a = discrete_actions(dataset)?;
    let n = discretizer.n_cells();
    let mut counts = vec![0.0; n * n_a];
    let mut reward_sums = vec![0.0; n * n_a];
    let mut successors: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n * n_a];
    for r in dataset.transitions() {
        let a = r
            .action
            .as_discrete()
            .filter(|a| *a < n_a)
            .ok_or_else(|| Error::Data(format!("logged action {:?} is not discrete", r.action)))?;
        let k = discretizer.cell(&r.observation)? * n_a + a;
        counts[k] += 1.0;
        reward_sums[k] += r.reward;
        if !r.terminal {
            *successors[k].entry(discretizer.cell(&r.next_observation)?).or_default() += 1.0;
        }
    }
    let mut mdp = TabularMdp::new(n, n_a);
    for k in 0..n * n_a {
        if counts[k] > 0.0 {
            mdp.rewards[k] = reward_sums[k] / counts[k];
            mdp.transitions[k] = successors[k].iter().map(|(c, m)| (*c, m / counts[k])).collect();
        }
    }
    Ok(FittedModel {
        discretizer: discretizer.clone(),
        mdp,
        visited: counts.iter().map(|c| *c > 0.0).collect(),
    })
}

/// Direct-method estimate plus the fitted action values, reusable as the
/// baseline of [`doubly_robust`].
pub fn direct_method<P: Policy + ?Sized>(
    dataset: &Dataset,
    target: &P,
    gamma: f64,
    discretizer: &Discretizer,
) -> Result<(OpeEstimate, QTable)> {
    nonempty(dataset)?;
    let model = fit_model(dataset, discretizer)?;
    let n_a = model.mdp.n_actions;
    let table = (0..discretizer.n_cells())
        .map(|c| categorical(target, &discretizer.center(c), n_a))
        .collect::<Result<Vec<_>>>()?;
    let v = model.mdp.policy_evaluation(&table, gamma)?;
    let q = model.mdp.q_from_v(&v, gamma);

    let mut warnings = Vec::new();
    let mut uncovered = 0usize;
    for r in dataset.transitions() {
        let c = discretizer.cell(&r.observation)?;
        if table[c].iter().enumerate().any(|(a, p)| *p > 0.0 && !model.visited[c * n_a + a]) {
            uncovered += 1;
        }
    }
    if uncovered > 0 {
        warnings.push(format!(
            "target policy takes unlogged actions in the cells of {uncovered} logged states; those pairs count as absorbing with reward 0"
        ));
    }
    let starts = dataset
        .trajectories
        .iter()
        .map(|t| Ok(v[discretizer.cell(&t.records[0].observation)?]))
        .collect::<Result<Vec<_>>>()?;
    let ones = vec![1.0; starts.len()];
    Ok((
        OpeEstimate {
            estimator: Estimator::Dm,
            value: starts.iter().sum::<f64>() / starts.len() as f64,
            effective_sample_size: starts.len() as f64,
            weights: WeightSummary::of(&ones),
            trajectories: starts.len(),
            warnings,
        },
        QTable {
            discretizer: discretizer.clone(),
            q,
        },
    ))
}

/// Per-decision doubly robust estimate
/// `V^t = V̂(s_t) + ρ_t (r_t + γ V^{t+1} − Q̂(s_t, a_t))`, averaged over
/// trajectories.
pub fn doubly_robust<P: Policy + ?Sized, Q: QFunction + ?Sized>(
    dataset: &Dataset,
    target: &P,
    q_hat: &Q,
    gamma: f64,
) -> Result<OpeEstimate> {
    check_gamma(gamma)?;
    nonempty(dataset)?;
    let n_a = discrete_actions(dataset)?;
    let mut values = Vec::with_capacity(dataset.trajectories.len());
    let mut weights = Vec::with_capacity(dataset.trajectories.len());
    for t in &dataset.trajectories {
        let rho = step_ratios(t, target)?;
        let mut v_next = 0.0;
        for (r, rho_t) in t.records.iter().zip(&rho).rev() {
            let q = q_hat.q_values(&r.observation)?;
            let pi = categorical(target, &r.observation, n_a)?;
            let v_hat: f64 = pi.iter().zip(&q).map(|(p, q)| p * q).sum();
            let a = r.action.as_discrete().expect("checked by categorical");
            v_next = v_hat + rho_t * (r.reward + gamma * v_next - q[a]);
        }
        values.push(v_next);
        weights.push(rho.iter().product());
    }
    Ok(OpeEstimate {
        estimator: Estimator::Dr,
        value: values.iter().sum::<f64>() / values.len() as f64,
        effective_sample_size: effective_sample_size(&weights),
        weights: WeightSummary::of(&weights),
        trajectories: values.len(),
        warnings: Vec::new(),
    })
}

/// IS, WIS, DM and DR (with the DM model as baseline), in that order.
pub fn evaluate_all<P: Policy + ?Sized>(dataset: &Dataset, target: &P, gamma: f64, discretizer: &Discretizer) -> Result<Vec<OpeEstimate>> {
    let is = importance_sampling(dataset, target, gamma, false)?;
    let wis = importance_sampling(dataset, target, gamma, true)?;
    let (dm, q) = direct_method(dataset, target, gamma, discretizer)?;
    let dr = doubly_robust(dataset, target, &q, gamma)?;
    Ok(vec![is, wis, dm, dr])
}
