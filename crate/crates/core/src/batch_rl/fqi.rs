//! Tabular offline trainers.

use std::collections::BTreeMap;

use super::discretize::Discretizer;
use super::policy::{TabularQPolicy, UniformPolicy};
use super::{policy_name, TrainConfig};
use crate::env::ActionSpace;
use crate::error::{Error, Result};
use crate::record::Dataset;
use crate::safety::penalize_reward;

/// One logged transition mapped onto cells.
#[derive(Debug, Clone, Copy)]
struct Sample {
    pair: usize,
    reward: f64,
    /// `None` when the transition ended in a terminal state.
    next_cell: Option<usize>,
}

fn n_actions(dataset: &Dataset) -> Result<usize> {
    match dataset.env.action {
        ActionSpace::Discrete { n, .. } if n > 0 => Ok(n),
        _ => Err(Error::Data("tabular trainers need a discrete-action dataset".into())),
    }
}

fn samples(dataset: &Dataset, disc: &Discretizer, n_actions: usize, config: &TrainConfig) -> Result<Vec<Sample>> {
    if dataset.transition_count() == 0 {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    dataset
        .transitions()
        .map(|r| {
            let a = r
                .action
                .as_discrete()
                .filter(|a| *a < n_actions)
                .ok_or_else(|| Error::Data(format!("action {:?} is not one of {n_actions} discrete actions", r.action)))?;
            let reward = if config.penalty.is_empty() {
                r.reward
            } else {
                penalize_reward(r.reward, &r.constraint_costs, &config.penalty)?
            };
            Ok(Sample {
                pair: disc.cell(&r.observation)? * n_actions + a,
                reward,
                next_cell: if r.terminal { None } else { Some(disc.cell(&r.next_observation)?) },
            })
        })
        .collect()
}

fn state_max(q: &[f64], cell: usize, n_actions: usize) -> f64 {
    q[cell * n_actions..(cell + 1) * n_actions]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

fn into_policy(disc: Discretizer, q: Vec<f64>, n_actions: usize, iteration: usize) -> Result<TabularQPolicy> {
    let rows = q.chunks(n_actions).map(<[f64]>::to_vec).collect();
    TabularQPolicy::new(policy_name(iteration), iteration, disc, rows)
}

/// Per-pair aggregated statistics for synchronous backups.
struct PairStats {
    count: f64,
    reward_sum: f64,
    successors: Vec<(usize, f64)>,
}

/// Fitted Q-iteration: synchronous sweeps of the sample-averaged Bellman
/// backup on a uniform grid. Unvisited pairs stay at zero.
pub fn fqi_train(dataset: &Dataset, config: &TrainConfig, iteration: usize) -> Result<TabularQPolicy> {
    let n_a = n_actions(dataset)?;
    let disc = Discretizer::uniform(&dataset.env.observation, config.bins)?;
    fit_synchronous(dataset, config, iteration, disc, n_a)
}

fn fit_synchronous(dataset: &Dataset, config: &TrainConfig, iteration: usize, disc: Discretizer, n_a: usize) -> Result<TabularQPolicy> {
    let samples = samples(dataset, &disc, n_a, config)?;
    let mut grouped: BTreeMap<usize, (f64, f64, BTreeMap<usize, f64>)> = BTreeMap::new();
    for s in &samples {
        let e = grouped.entry(s.pair).or_default();
        e.0 += 1.0;
        e.1 += s.reward;
        if let Some(c) = s.next_cell {
            *e.2.entry(c).or_default() += 1.0;
        }
    }
    let stats: Vec<(usize, PairStats)> = grouped
        .into_iter()
        .map(|(pair, (count, reward_sum, succ))| {
            (
                pair,
                PairStats {
                    count,
                    reward_sum,
                    successors: succ.into_iter().collect(),
                },
            )
        })
        .collect();

    let n_cells = disc.n_cells();
    let mut q = vec![0.0; n_cells * n_a];
    let mut v = vec![0.0; n_cells];
    for _ in 0..config.iterations {
        let mut next = q.clone();
        let mut delta: f64 = 0.0;
        for (pair, st) in &stats {
            let boot: f64 = st.successors.iter().map(|(c, n)| n * v[*c]).sum();
            let value = (st.reward_sum + config.gamma * boot) / (st.count + config.regularization);
            delta = delta.max((value - q[*pair]).abs());
            next[*pair] = value;
        }
        q = next;
        for (c, slot) in v.iter_mut().enumerate() {
            *slot = state_max(&q, c, n_a);
        }
        if delta <= config.tolerance {
            break;
        }
    }
    into_policy(disc, q, n_a, iteration)
}

/// Batch Q-learning on exact states: each sweep replays the log in order,
/// setting every visited pair to the running mean of its targets, computed
/// with the freshest estimates (Gauss-Seidel).
pub fn tabular_q_train(dataset: &Dataset, config: &TrainConfig, iteration: usize) -> Result<TabularQPolicy> {
    let n_a = n_actions(dataset)?;
    let disc = Discretizer::lattice(&dataset.env.observation)?;
    let samples = samples(dataset, &disc, n_a, config)?;
    let mut q = vec![0.0; disc.n_cells() * n_a];
    let mut seen = vec![0usize; q.len()];
    for _ in 0..config.iterations {
        let before = q.clone();
        seen.iter_mut().for_each(|n| *n = 0);
        for s in &samples {
            let target = s.reward + s.next_cell.map_or(0.0, |c| config.gamma * state_max(&q, c, n_a));
            seen[s.pair] += 1;
            q[s.pair] += (target - q[s.pair]) / seen[s.pair] as f64;
        }
        let delta = q.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if delta <= config.tolerance {
            break;
        }
    }
    into_policy(disc, q, n_a, iteration)
}

/// Baseline trainer that ignores its data.
pub fn uniform_train(dataset: &Dataset, iteration: usize) -> Result<UniformPolicy> {
    if dataset.transition_count() == 0 {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    Ok(UniformPolicy {
        policy_id: policy_name(iteration),
        iteration,
        n_actions: n_actions(dataset)?,
    })
}
