//! Estimate the optimal gridworld policy's value from ε-greedy logs with
//! IS, WIS, the direct method and doubly robust, and compare with the exact
//! value from dynamic programming.
//!
//!     cargo run --release --example off_policy_evaluation

use rwrl::batch_rl::{gridworld_epsilon_optimal, gridworld_policy_table, Discretizer, PolicyController};
use rwrl::env::Environment;
use rwrl::envs::gridworld::gridworld_exact_value;
use rwrl::envs::{GridEnv, GridWorld};
use rwrl::ope::evaluate_all;
use rwrl::record::{Dataset, Provenance};
use rwrl::rng::{streams, RngStream};
use rwrl::rollout::{run_episodes, SeedPhase};

fn main() -> rwrl::Result<()> {
    let seed = 2;
    let gamma = 0.9;
    let world = GridWorld::default();
    let target = gridworld_epsilon_optimal(&world, gamma, 0.0, "pi_e")?;
    let behavior = gridworld_epsilon_optimal(&world, gamma, 0.3, "pi_B")?;
    let exact = gridworld_exact_value(&world, &gridworld_policy_table(&world, &target)?, gamma)?[world.state_index(world.start)];
    println!("exact value of the target policy at the start: {exact:.5}");

    let mut env = GridEnv::new(world, seed)?;
    let disc = Discretizer::lattice(&env.spec().observation)?;
    for episodes in [100, 1000, 10_000] {
        let mut controller = PolicyController::new(behavior.clone(), RngStream::new(seed, streams::POLICY));
        let mut data = Dataset::new("pi_B", "example", Provenance { config_hash: "example".into(), master_seed: seed }, env.spec());
        data.trajectories = run_episodes(&mut env, &mut controller, episodes, SeedPhase::Behavior)?;
        print!("{episodes:>6} episodes:");
        for est in evaluate_all(&data, &target, gamma, &disc)? {
            print!("  {:?} {:.5} ({:+.2}%)", est.estimator, est.value, 100.0 * (est.value - exact) / exact);
        }
        println!();
    }
    Ok(())
}
