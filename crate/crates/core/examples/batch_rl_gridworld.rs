//! Offline training on gridworld logs, checked against dynamic programming,
//! then a few rounds of retraining on the policy's own rollouts.
//!
//!     cargo run --example batch_rl_gridworld

use rwrl::batch_rl::{
    brt, gridworld_epsilon_optimal, train, BrtEvent, Policy, PolicyArtifact, PolicyController, TrainConfig, TrainerKind,
};
use rwrl::env::Environment;
use rwrl::envs::gridworld::{gridworld_optimal_policy, optimal_agreement};
use rwrl::envs::{GridEnv, GridWorld};
use rwrl::metrics::{evaluate_policy, mean_return};
use rwrl::record::{Dataset, Provenance};
use rwrl::rng::{streams, RngStream};
use rwrl::rollout::{collect_transitions, SeedPhase};

fn agreement(world: &GridWorld, gamma: f64, policy: &PolicyArtifact) -> rwrl::Result<f64> {
    let PolicyArtifact::TabularQ(q) = policy else { unreachable!() };
    optimal_agreement(world, gamma, |obs| q.greedy(obs))
}

fn main() -> rwrl::Result<()> {
    let seed = 1;
    let gamma = 0.9;
    let world = GridWorld { slip_prob: 0.1, ..GridWorld::default() };
    let (_, v_star) = gridworld_optimal_policy(&world, gamma)?;
    println!("optimal value at the start cell {:.4}", v_star[world.state_index(world.start)]);

    let mut env = GridEnv::new(world.clone(), seed)?;
    let behavior = gridworld_epsilon_optimal(&world, gamma, 0.5, "pi_B")?;
    let mut controller = PolicyController::new(behavior, RngStream::new(seed, streams::POLICY));
    let mut data = Dataset::new("pi_B", "example", Provenance { config_hash: "example".into(), master_seed: seed }, env.spec());
    data.trajectories = collect_transitions(&mut env, &mut controller, 3000, SeedPhase::Behavior)?;

    for trainer in [TrainerKind::TabularQ, TrainerKind::Fqi] {
        let cfg = TrainConfig { trainer, gamma, bins: 4, ..Default::default() };
        let policy = train(&data, &cfg, 0)?;
        let ret = mean_return(&evaluate_policy(policy.clone(), &mut env, 200, SeedPhase::Evaluation, seed)?, gamma)?;
        println!("{trainer:?}: agrees with DP on {:.0}% of states, return {ret:.4}", 100.0 * agreement(&world, gamma, &policy)?);
    }

    // three retraining rounds, 500 steps each, from a small uniform-ish log
    let small = data.prefix(300);
    let cfg = TrainConfig { trainer: TrainerKind::TabularQ, gamma, rollout_epsilon: 0.2, ..Default::default() };
    let out = brt(&small, &cfg, 3, 500, &mut env, seed, |event| {
        if let BrtEvent::Policy(i, p) = event {
            println!("  trained {} (iteration {i})", p.policy_id());
        }
        Ok(())
    })?;
    for p in &out.policies {
        let ret = mean_return(&evaluate_policy(p.clone(), &mut env, 200, SeedPhase::Evaluation, seed)?, gamma)?;
        println!("{}: agreement {:.0}%, return {ret:.4}", p.policy_id(), 100.0 * agreement(&world, gamma, p)?);
    }
    Ok(())
}
