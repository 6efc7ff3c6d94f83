//! Score a PD controller on a pinned set of cart-pole variants with heavier
//! or lighter poles and longer or shorter ones, then summarize its returns
//! with robust, CVaR and per-objective metrics.
//!
//!     cargo run --release --example robustness_metrics

use rwrl::batch_rl::{pd_behavior_policy, PolicyArtifact};
use rwrl::challenges::{
    wrap_action_reshape, wrap_perturbation, ActionRelation, ActionReshapeConfig, Distribution, ParameterSource,
    PerturbationSpec,
};
use rwrl::env::Environment;
use rwrl::envs::{CartPole, CartPoleConfig};
use rwrl::metrics::{cvar, discounted_returns, evaluate_policy, multi_objective_return, robust_return, TestEnvSet};
use rwrl::rollout::SeedPhase;

fn env_with(source: ParameterSource, specs: &[PerturbationSpec], seed: u64) -> rwrl::Result<Box<dyn Environment>> {
    let plant = CartPole::new(CartPoleConfig::default(), seed)?;
    let perturbed = wrap_perturbation(plant, specs.to_vec(), source)?;
    Ok(Box::new(wrap_action_reshape(
        perturbed,
        ActionReshapeConfig { n: 11, relation: ActionRelation::Ordered },
        seed,
        1,
    )?))
}

fn main() -> rwrl::Result<()> {
    let seed = 9;
    let gamma = 0.99;
    let specs = vec![
        PerturbationSpec::sample("m_p", Distribution::Uniform { lo: 0.05, hi: 0.3 }),
        PerturbationSpec::sample("l", Distribution::LogUniform { lo: 0.25, hi: 1.0 }),
    ];
    let base = CartPole::new(CartPoleConfig::default(), seed)?.parameters();
    let set = TestEnvSet::draw(&base, &specs, seed, 6, 5)?;

    let probe = env_with(ParameterSource::Fixed(base.clone()), &specs, seed)?;
    let pd = PolicyArtifact::Pd(pd_behavior_policy(30.0, 5.0, 0.0, &probe.spec())?);
    let (summary, _) = robust_return(&pd, |_, p| env_with(ParameterSource::Fixed(p.clone()), &specs, seed), &set, gamma, seed)?;
    for (p, v) in set.params.iter().zip(&summary.per_env) {
        println!("m_p {:.3}  l {:.3}  ->  return {v:8.3}", p["m_p"], p["l"]);
    }
    println!("robust {:.3}, worst case {:.3}", summary.robust, summary.worst_case);

    // nominal plant, 50 episodes, with a noisier policy to spread the returns
    let mut env = env_with(ParameterSource::Fixed(base), &specs, seed)?;
    let noisy = PolicyArtifact::Pd(pd_behavior_policy(30.0, 5.0, 0.3, &env.spec())?);
    let logs = evaluate_policy(noisy, env.as_mut(), 50, SeedPhase::Evaluation, seed)?;
    let returns = discounted_returns(&logs, gamma)?;
    for alpha in [0.1, 0.25, 0.5, 1.0] {
        println!("cvar({alpha}) = {:.3}", cvar(&returns, alpha)?);
    }
    let multi = multi_objective_return(&logs, gamma)?;
    let weights = env.spec().reward_weights;
    println!(
        "per-objective returns {multi:.3?}; weighted sum {:.6} vs mean return {:.6}",
        multi.iter().zip(&weights).map(|(j, w)| j * w).sum::<f64>(),
        returns.iter().sum::<f64>() / returns.len() as f64
    );
    Ok(())
}
