//! Compose challenge wrappers around the cart-pole, either by hand or from
//! a config list, and watch what each one does to an episode.
//!
//!     cargo run --example challenge_wrappers

use rwrl::challenges::{
    build_challenges, wrap_action_delay, wrap_history_stack, wrap_noise, wrap_partial_observation, ChallengeSpec,
    DelayConfig, NoiseConfig,
};
use rwrl::env::{Action, Environment};
use rwrl::envs::{CartPole, CartPoleConfig};

fn main() -> rwrl::Result<()> {
    let seed = 3;

    // hand-built: two steps of actuator delay, sensor noise, theta only, 3 frames
    let plant = CartPole::new(CartPoleConfig::default(), seed)?;
    let delayed = wrap_action_delay(plant, &DelayConfig { action_delay: 2, ..Default::default() });
    let noisy = wrap_noise(delayed, NoiseConfig { sigma_obs: 0.01, sigma_act: 0.0 }, seed, 1)?;
    let masked = wrap_partial_observation(noisy, &[false, false, true, false])?;
    let mut env = wrap_history_stack(masked, 3)?;

    let spec = env.spec();
    println!("observation dim {} (theta over 3 frames)", spec.observation.dim());
    let obs = env.reset(0)?;
    println!("reset: {obs:.4?}");
    for (t, force) in [10.0, -10.0, 0.0, 0.0].into_iter().enumerate() {
        let step = env.step(&Action::Continuous(force))?;
        let applied = step.info.get(rwrl::envs::cartpole::info_keys::FORCE).copied().unwrap_or(f64::NAN);
        println!("t={t} submitted {force:>6.1} applied {applied:>6.1} obs {:.4?}", step.observation);
    }

    // the same kind of stack from config entries, as the suite runner builds it
    let challenges: Vec<ChallengeSpec> = toml::from_str::<Wrapper>(
        r#"
        [[challenges]]
        type = "action_reshape"
        params = { n = 5, relation = "permuted" }

        [[challenges]]
        type = "observation_delay"
        params = { steps = 1 }
        "#,
    )
    .map_err(|e| rwrl::Error::Config(e.to_string()))?
    .challenges;
    let base: Box<dyn Environment> = Box::new(CartPole::new(CartPoleConfig::default(), seed)?);
    let mut env = build_challenges(base, &challenges, seed, None)?;
    println!("from config: action space {:?}", env.spec().action);
    let first = env.reset(0)?;
    let step = env.step(&Action::Discrete(0))?;
    println!("with one step of observation delay the first observation repeats: {}", first == step.observation);
    Ok(())
}

#[derive(serde::Deserialize)]
struct Wrapper {
    challenges: Vec<ChallengeSpec>,
}
