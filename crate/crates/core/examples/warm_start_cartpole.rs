//! Train offline from PD-controller logs on the cart-pole and compare the
//! warm-start return of fitted Q-iteration with a trainer that ignores the
//! data, and with the data-efficiency scan over dataset prefixes.
//!
//!     cargo run --release --example warm_start_cartpole

use rwrl::batch_rl::{pd_behavior_policy, train, PolicyController, TrainConfig, TrainerKind};
use rwrl::challenges::{wrap_action_reshape, ActionRelation, ActionReshapeConfig};
use rwrl::env::Environment;
use rwrl::envs::{CartPole, CartPoleConfig};
use rwrl::metrics::{data_efficiency, warm_start};
use rwrl::record::{Dataset, Provenance};
use rwrl::rng::{streams, RngStream};
use rwrl::rollout::{collect_transitions, SeedPhase};

fn main() -> rwrl::Result<()> {
    let gamma = 0.99;
    for seed in 0..3u64 {
        let plant = CartPole::new(CartPoleConfig::default(), seed)?;
        let mut env = wrap_action_reshape(plant, ActionReshapeConfig { n: 11, relation: ActionRelation::Ordered }, seed, 0)?;
        let pd = pd_behavior_policy(30.0, 5.0, 0.1, &env.spec())?;
        let mut controller = PolicyController::new(pd, RngStream::new(seed, streams::POLICY).derive(0));
        let mut data = Dataset::new("pi_B", "example", Provenance { config_hash: "example".into(), master_seed: seed }, env.spec());
        data.trajectories = collect_transitions(&mut env, &mut controller, 20_000, SeedPhase::Behavior)?;

        let fqi = TrainConfig { gamma, ..Default::default() };
        let random = TrainConfig { trainer: TrainerKind::Uniform, ..fqi.clone() };
        let j_fqi = warm_start(|d| train(d, &fqi, 0), &data, &mut env, 20, gamma, seed)?;
        let j_random = warm_start(|d| train(d, &random, 0), &data, &mut env, 20, gamma, seed)?;
        let eff = data_efficiency(|d| train(d, &fqi, 0), &data, 35.0, &mut env, &[500, 2000, 5000, 20_000], 10, gamma, seed)?;
        let scan: Vec<String> = eff.per_prefix.iter().map(|p| format!("{}:{:.1}", p.size, p.mean_return)).collect();
        println!(
            "seed {seed}: {} episodes logged; warm start fqi {j_fqi:.2} vs random {j_random:.2}; prefixes [{}] first above 35: {:?}",
            data.trajectories.len(),
            scan.join(" "),
            eff.value
        );
    }
    Ok(())
}
