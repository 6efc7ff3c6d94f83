//! Behavior policies that generate the logged data.

use super::discretize::Discretizer;
use super::policy::{ActionDistribution, PdPolicy, Policy, TabularQPolicy};
use crate::env::{ActionSpace, EnvSpec, ObservationSpace};
use crate::envs::GridWorld;
use crate::error::{Error, Result};

/// PD balance controller over the discrete forces an environment exposes.
pub fn pd_behavior_policy(kp: f64, kd: f64, epsilon: f64, spec: &EnvSpec) -> Result<PdPolicy> {
    match &spec.action {
        ActionSpace::Discrete { forces: Some(f), .. } => PdPolicy::new(kp, kd, epsilon, f.clone()),
        _ => Err(Error::Config(
            "PD behavior policy needs a force-labelled discrete action space (add an action_reshape challenge)".into(),
        )),
    }
}

/// ε-greedy with respect to the exact optimal action values of `world`.
pub fn gridworld_epsilon_optimal(world: &GridWorld, gamma: f64, epsilon: f64, policy_id: &str) -> Result<TabularQPolicy> {
    let mdp = world.to_mdp();
    let q_states = mdp.value_iteration(gamma, 1e-13)?;
    let space = ObservationSpace::new(
        vec![-0.5, -0.5],
        vec![world.width as f64 - 0.5, world.height as f64 - 0.5],
    );
    let disc = Discretizer::lattice(&space)?;
    let mut q = vec![vec![0.0; mdp.n_actions]; disc.n_cells()];
    for (s, row) in q_states.into_iter().enumerate() {
        q[disc.cell(&world.observation(world.cell(s)))?] = row;
    }
    let mut p = TabularQPolicy::new(policy_id, 0, disc, q)?.with_epsilon(epsilon)?;
    p.policy_id = policy_id.into();
    Ok(p)
}

/// Action probabilities of a discrete policy in every gridworld state, in
/// the layout the exact evaluator expects.
pub fn gridworld_policy_table<P: Policy + ?Sized>(world: &GridWorld, policy: &P) -> Result<Vec<Vec<f64>>> {
    (0..world.n_states())
        .map(|s| match policy.distribution(&world.observation(world.cell(s)))? {
            ActionDistribution::Categorical(p) if p.len() == 4 => Ok(p),
            _ => Err(Error::Config("gridworld policies need a 4-way categorical distribution".into())),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch_rl::Policy;
    use crate::envs::gridworld::gridworld_optimal_policy;

    #[test]
    fn epsilon_optimal_matches_dp_greedy() {
        let world = GridWorld::default();
        let pol = gridworld_epsilon_optimal(&world, 0.9, 0.0, "pi_e").unwrap();
        let (opt, _) = gridworld_optimal_policy(&world, 0.9).unwrap();
        let q = world.to_mdp().value_iteration(0.9, 1e-13).unwrap();
        for s in 0..world.n_states() {
            if world.cell(s) == world.goal {
                continue;
            }
            let obs = world.observation(world.cell(s));
            let g = pol.greedy(&obs).unwrap();
            let best = q[s][opt[s]];
            assert!((q[s][g] - best).abs() < 1e-9);
            assert_eq!(pol.propensity(&obs, &crate::env::Action::Discrete(g)).unwrap(), 1.0);
        }
    }

    #[test]
    fn pd_needs_labelled_forces() {
        let spec = EnvSpec {
            observation: ObservationSpace::new(vec![0.0], vec![1.0]),
            action: ActionSpace::Discrete { n: 4, forces: None },
            reward_weights: vec![1.0],
            constraint_ids: vec![],
            max_steps: 1,
        };
        assert!(pd_behavior_policy(1.0, 1.0, 0.1, &spec).is_err());
    }
}
