//! Put a decision deadline on a controller. Latencies come either from the
//! wall clock or from a fixed injected value; late decisions fall back to
//! the previous action.
//!
//!     cargo run --example realtime_budget

use std::time::Duration;

use rwrl::batch_rl::{pd_behavior_policy, PolicyController};
use rwrl::challenges::{
    neutral_action, wrap_action_reshape, wrap_realtime_budget, ActionRelation, ActionReshapeConfig, Fallback,
    LatencyMode, RealtimeBudget,
};
use rwrl::env::Environment;
use rwrl::envs::{CartPole, CartPoleConfig};
use rwrl::metrics::mean_return;
use rwrl::rng::{streams, RngStream};
use rwrl::rollout::{run_episodes, Controller, Decision, SeedPhase};

/// A controller that takes a while to think every fifth step.
struct Sluggish<C> {
    inner: C,
    calls: usize,
}

impl<C: Controller> Controller for Sluggish<C> {
    fn begin_episode(&mut self, seed: u64) {
        self.inner.begin_episode(seed);
    }

    fn decide(&mut self, observation: &[f64]) -> rwrl::Result<Decision> {
        self.calls += 1;
        if self.calls % 5 == 0 {
            std::thread::sleep(Duration::from_millis(3));
        }
        self.inner.decide(observation)
    }
}

fn main() -> rwrl::Result<()> {
    let seed = 4;
    let plant = CartPole::new(CartPoleConfig { max_steps: 200, ..Default::default() }, seed)?;
    let mut env = wrap_action_reshape(plant, ActionReshapeConfig { n: 11, relation: ActionRelation::Ordered }, seed, 0)?;
    let spec = env.spec();
    let pd = pd_behavior_policy(30.0, 5.0, 0.0, &spec)?;

    let cases = [
        ("wall clock, 1 ms deadline", LatencyMode::WallClock, 0.0),
        ("injected 0 us", LatencyMode::Injected, 0.0),
        ("injected 10x deadline", LatencyMode::Injected, 10_000.0),
    ];
    for (label, mode, injected) in cases {
        let budget = RealtimeBudget { deadline_us: 1000.0, fallback: Fallback::RepeatLast, mode, injected_latency_us: injected };
        let inner = Sluggish { inner: PolicyController::new(pd.clone(), RngStream::new(seed, streams::POLICY)), calls: 0 };
        let mut controller = wrap_realtime_budget(inner, budget, neutral_action(&spec))?;
        let logs = run_episodes(&mut env, &mut controller, 3, SeedPhase::Evaluation)?;
        let steps: usize = logs.iter().map(|t| t.len()).sum();
        println!(
            "{label:>26}: {} misses over {steps} steps, return {:.3}",
            controller.misses(),
            mean_return(&logs, 0.99)?
        );
    }
    Ok(())
}
