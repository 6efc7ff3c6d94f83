#![allow(dead_code)]

use std::path::PathBuf;

use rwrl::batch_rl::{pd_behavior_policy, PolicyController, TabularQPolicy};
use rwrl::challenges::{wrap_action_reshape, ActionRelation, ActionReshape, ActionReshapeConfig};
use rwrl::env::Environment;
use rwrl::envs::{CartPole, CartPoleConfig, CartPoleParams, GridEnv};
use rwrl::record::{Dataset, Provenance, Trajectory};
use rwrl::rng::{streams, RngStream};
use rwrl::rollout::{collect_transitions, run_episodes, SeedPhase};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn config_path(name: &str) -> PathBuf {
    manifest_dir().join("configs").join(name)
}

pub fn provenance(seed: u64) -> Provenance {
    Provenance {
        config_hash: "test".into(),
        master_seed: seed,
    }
}

/// Cart-pole dynamics from the Lagrangian mass matrix of a uniform rod of
/// half-length l, solved by Cramer's rule.
pub fn reference_derivatives(y: [f64; 4], force: f64, p: &CartPoleParams) -> [f64; 4] {
    let [_, x_dot, theta, theta_dot] = y;
    let (s, c) = theta.sin_cos();
    let m = p.m_c + p.m_p;
    let friction = -p.mu_track * m * p.g * x_dot;
    // [[a, b], [b, d]] [x_ddot, theta_ddot] = [e, f]
    let a = m;
    let b = p.m_p * p.l * c;
    let d = 4.0 / 3.0 * p.m_p * p.l * p.l;
    let e = force + friction + p.m_p * p.l * theta_dot * theta_dot * s;
    let f = p.m_p * p.g * p.l * s;
    let det = a * d - b * b;
    [x_dot, (e * d - b * f) / det, theta_dot, (a * f - b * e) / det]
}

/// Classic RK4 over one control period with `substeps` equal steps.
pub fn reference_step(y: [f64; 4], force: f64, p: &CartPoleParams, substeps: usize) -> [f64; 4] {
    let h = p.dt / substeps as f64;
    let add = |a: [f64; 4], k: [f64; 4], c: f64| -> [f64; 4] { std::array::from_fn(|i| a[i] + c * k[i]) };
    let mut y = y;
    for _ in 0..substeps {
        let k1 = reference_derivatives(y, force, p);
        let k2 = reference_derivatives(add(y, k1, h / 2.0), force, p);
        let k3 = reference_derivatives(add(y, k2, h / 2.0), force, p);
        let k4 = reference_derivatives(add(y, k3, h), force, p);
        y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    y
}

pub fn reshaped_cartpole(config: CartPoleConfig, seed: u64) -> ActionReshape<CartPole> {
    let plant = CartPole::new(config, seed).unwrap();
    wrap_action_reshape(plant, ActionReshapeConfig { n: 11, relation: ActionRelation::Ordered }, seed, 0).unwrap()
}

/// `n` transitions of the ε-greedy PD controller on the balance task.
pub fn pd_dataset(env: &mut dyn Environment, seed: u64, n: usize, epsilon: f64) -> Dataset {
    let pd = pd_behavior_policy(30.0, 5.0, epsilon, &env.spec()).unwrap();
    let mut c = PolicyController::new(pd, RngStream::new(seed, streams::POLICY).derive(0));
    let mut d = Dataset::new("pi_B", "test", provenance(seed), env.spec());
    d.trajectories = collect_transitions(env, &mut c, n, SeedPhase::Behavior).unwrap();
    d
}

/// Whole episodes of a tabular behavior policy on the gridworld.
pub fn grid_episodes(env: &mut GridEnv, behavior: &TabularQPolicy, seed: u64, episodes: usize) -> Dataset {
    let mut c = PolicyController::new(behavior.clone(), RngStream::new(seed, streams::POLICY));
    let mut d = Dataset::new("pi_B", "test", provenance(seed), env.spec());
    d.trajectories = run_episodes(env, &mut c, episodes, SeedPhase::Behavior).unwrap();
    d
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

pub fn total_steps(t: &[Trajectory]) -> usize {
    t.iter().map(|x| x.len()).sum()
}
