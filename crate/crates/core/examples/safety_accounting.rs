//! Constraint costs on the cart-pole: the online totals, an offline recount
//! from the logged true states, and what a reward penalty does to a trained
//! policy's violations.
//!
//!     cargo run --release --example safety_accounting

use rwrl::batch_rl::{pd_behavior_policy, train, PolicyController, TrainConfig};
use rwrl::challenges::{wrap_action_reshape, ActionRelation, ActionReshapeConfig};
use rwrl::env::Environment;
use rwrl::envs::{CartPole, CartPoleConfig};
use rwrl::metrics::evaluate_policy;
use rwrl::record::{Dataset, Provenance};
use rwrl::rng::{streams, RngStream};
use rwrl::rollout::{collect_transitions, SeedPhase};
use rwrl::safety::{accumulate_violations, cartpole_constraints, logged_violations, CartPoleBounds, SafetyReport};

fn main() -> rwrl::Result<()> {
    let seed = 5;
    // tight bounds so the logs contain violations
    let bounds = CartPoleBounds { x_l: -0.5, x_r: 0.5, theta_dot_v: 0.3, ..CartPoleBounds::default() };
    let specs = cartpole_constraints(&bounds)?;
    let ids: Vec<String> = specs.iter().map(|c| c.id.clone()).collect();
    let plant = CartPole::new(CartPoleConfig::default(), seed)?.with_constraints(specs.clone());
    let mut env = wrap_action_reshape(plant, ActionReshapeConfig { n: 11, relation: ActionRelation::Ordered }, seed, 0)?;

    let pd = pd_behavior_policy(30.0, 5.0, 0.1, &env.spec())?;
    let logs = evaluate_policy(pd.clone(), &mut env, 10, SeedPhase::Evaluation, seed)?;
    let online = SafetyReport::merge_all(
        ids.clone(),
        &logs.iter().map(|t| logged_violations(t, ids.clone(), 1.0)).collect::<rwrl::Result<Vec<_>>>()?,
    )?;
    let recount = SafetyReport::merge_all(
        ids.clone(),
        &logs.iter().map(|t| accumulate_violations(t, &specs, 1.0)).collect::<rwrl::Result<Vec<_>>>()?,
    )?;
    println!("constraints {ids:?}");
    println!("online totals  {:?} over {} steps", online.totals, online.steps);
    println!("recount totals {:?}", recount.totals);
    println!("first violations {:?}", online.first_violation);
    assert_eq!(online, recount);

    // reward shaping with fixed multipliers
    let mut controller = PolicyController::new(pd, RngStream::new(seed, streams::POLICY));
    let mut data = Dataset::new("pi_B", "example", Provenance { config_hash: "example".into(), master_seed: seed }, env.spec());
    data.trajectories = collect_transitions(&mut env, &mut controller, 20_000, SeedPhase::Behavior)?;
    for lambda in [0.0, 5.0] {
        let cfg = TrainConfig { penalty: vec![lambda; ids.len()], ..Default::default() };
        let policy = train(&data, &cfg, 0)?;
        let eval = evaluate_policy(policy, &mut env, 20, SeedPhase::Evaluation, seed)?;
        let v = SafetyReport::merge_all(
            ids.clone(),
            &eval.iter().map(|t| logged_violations(t, ids.clone(), 1.0)).collect::<rwrl::Result<Vec<_>>>()?,
        )?;
        println!(
            "lambda {lambda}: total violations {} {:?}, mean episode length {:.0}",
            v.total_violations(),
            v.totals,
            v.steps as f64 / eval.len() as f64
        );
    }
    Ok(())
}
