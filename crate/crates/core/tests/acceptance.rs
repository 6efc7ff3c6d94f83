//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the PASS/FAIL lines always show up in `cargo test` output.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rwrl::batch_rl::{
    brt, gridworld_epsilon_optimal, gridworld_policy_table, pd_behavior_policy, train, Discretizer, PolicyArtifact,
    PolicyController, PolicyFile, TrainConfig, TrainerKind,
};
use rwrl::challenges::{
    build_challenges, neutral_action, wrap_action_delay, wrap_history_stack, wrap_noise, wrap_observation_delay,
    wrap_partial_observation, wrap_perturbation, wrap_realtime_budget, ChallengeSpec, DelayConfig, Fallback,
    LatencyMode, NoiseConfig, ParameterSource, RealtimeBudget,
};
use rwrl::env::{Action, Environment};
use rwrl::envs::cartpole::{info_keys, integrate, mechanical_energy, Integrator, DEFAULT_SUBSTEPS};
use rwrl::envs::gridworld::{gridworld_exact_value, optimal_agreement};
use rwrl::envs::{CartPole, CartPoleConfig, CartPoleParam, CartPoleParams, CartPoleState, GridEnv, GridWorld, TaskMode};
use rwrl::metrics::{
    cvar, data_efficiency, evaluate_policy, first_exceeding, mean_return, multi_objective_return,
    robust_summary, warm_start,
};
use rwrl::ope::{evaluate_all, importance_sampling, Estimator};
use rwrl::record::{Dataset, Trajectory};
use rwrl::rng::{streams, RngStream, StreamRng};
use rwrl::rollout::{run_episode, run_episodes, Controller, Decision, SeedPhase};
use rwrl::safety::{cartpole_constraints, logged_violations, CartPoleBounds, SafetyReport};
use rwrl::suite::{self, SuiteConfig};

use common::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1

fn ope_oracle() -> Outcome {
    let gamma = 0.9;
    let world = GridWorld::default();
    ensure!(world.width == 4 && world.height == 4, "default world is not 4x4");
    let target = gridworld_epsilon_optimal(&world, gamma, 0.0, "pi_e").map_err(fail)?;
    let behavior = gridworld_epsilon_optimal(&world, gamma, 0.3, "pi_B").map_err(fail)?;
    let exact = gridworld_exact_value(&world, &gridworld_policy_table(&world, &target).map_err(fail)?, gamma)
        .map_err(fail)?[world.state_index(world.start)];

    let mut env = GridEnv::new(world.clone(), 101).map_err(fail)?;
    let data = grid_episodes(&mut env, &behavior, 101, 10_000);
    let disc = Discretizer::lattice(&env.spec().observation).map_err(fail)?;
    let est = evaluate_all(&data, &target, gamma, &disc).map_err(fail)?;
    let get = |e: Estimator| est.iter().find(|x| x.estimator == e).unwrap().value;
    let (wis, dr) = (get(Estimator::Wis), get(Estimator::Dr));
    let rel = |v: f64| (v - exact).abs() / exact.abs();
    ensure!(rel(wis) < 0.05, "WIS {wis} vs exact {exact}: {:.2}% off", 100.0 * rel(wis));
    ensure!(rel(dr) < 0.05, "DR {dr} vs exact {exact}: {:.2}% off", 100.0 * rel(dr));

    let mut is_values = Vec::new();
    for set in 0..500u64 {
        let seed = 10_000 + set;
        let mut env = GridEnv::new(world.clone(), seed).map_err(fail)?;
        let d = grid_episodes(&mut env, &behavior, seed, 100);
        is_values.push(importance_sampling(&d, &target, gamma, false).map_err(fail)?.value);
    }
    let (m, sd) = mean_sd(&is_values);
    let se = sd / (is_values.len() as f64).sqrt();
    ensure!((m - exact).abs() <= 3.0 * se, "IS mean {m} is {:.2} SE from {exact}", (m - exact).abs() / se);
    Ok(format!(
        "exact {exact:.5}; WIS {wis:.5} ({:.2}%), DR {dr:.5} ({:.2}%); IS over 500 sets {m:.5} ({:.2} SE)",
        100.0 * rel(wis),
        100.0 * rel(dr),
        (m - exact).abs() / se
    ))
}

// ---------------------------------------------------------------- 2

/// Uniform random forces, reseeded per episode.
struct RandomForces {
    stream: RngStream,
    rng: StreamRng,
    bound: f64,
    discrete: Option<Vec<f64>>,
}

impl RandomForces {
    fn new(seed: u64, bound: f64) -> Self {
        let stream = RngStream::new(seed, 0xABC);
        Self { rng: stream.rng(), stream, bound, discrete: None }
    }

    fn over(seed: u64, forces: Vec<f64>) -> Self {
        Self { discrete: Some(forces), ..Self::new(seed, 0.0) }
    }
}

impl Controller for RandomForces {
    fn begin_episode(&mut self, episode_seed: u64) {
        self.rng = self.stream.derive(episode_seed).rng();
    }

    fn decide(&mut self, _observation: &[f64]) -> rwrl::Result<Decision> {
        let action = match &self.discrete {
            Some(f) => Action::Discrete(self.rng.random_range(0..f.len())),
            None => Action::Continuous(self.rng.random_range(-self.bound..self.bound)),
        };
        Ok(Decision { action, propensity: None })
    }
}

/// Replays another controller's discrete choices as the matching forces.
struct AsForces(RandomForces);

impl Controller for AsForces {
    fn begin_episode(&mut self, episode_seed: u64) {
        self.0.begin_episode(episode_seed);
    }

    fn decide(&mut self, observation: &[f64]) -> rwrl::Result<Decision> {
        let i = self.0.decide(observation)?.action.as_discrete().unwrap();
        Ok(Decision { action: Action::Continuous(self.0.discrete.as_ref().unwrap()[i]), propensity: None })
    }
}

fn episodes(env: &mut dyn Environment, controller: &mut dyn Controller) -> rwrl::Result<Vec<Trajectory>> {
    (0..10u64).map(|s| run_episode(env, controller, 1000 + s)).collect()
}

fn wrapper_identity() -> Outcome {
    let seed = 21;
    let plant = || CartPole::new(CartPoleConfig::default(), seed).unwrap();
    let reference = episodes(&mut plant(), &mut RandomForces::new(seed, 10.0)).map_err(fail)?;
    let delay = DelayConfig::default();

    let mut cases: Vec<(&str, Box<dyn Environment>)> = vec![
        ("action_delay(0)", Box::new(wrap_action_delay(plant(), &delay))),
        ("observation_delay(0)", Box::new(wrap_observation_delay(plant(), &delay))),
        ("noise(0, 0)", Box::new(wrap_noise(plant(), NoiseConfig::default(), seed, 0).map_err(fail)?)),
        ("partial_observation(all)", Box::new(wrap_partial_observation(plant(), &[true; 4]).map_err(fail)?)),
        ("history_stack(1)", Box::new(wrap_history_stack(plant(), 1).map_err(fail)?)),
        (
            "perturbation(none)",
            Box::new(
                wrap_perturbation(plant(), vec![], ParameterSource::Sampled(RngStream::new(seed, streams::PERTURBATION)))
                    .map_err(fail)?,
            ),
        ),
    ];
    let neutral: Vec<ChallengeSpec> = serde_json::from_str(
        r#"[{"type":"action_delay","params":{"steps":0}},{"type":"observation_delay","params":{"steps":0}},
            {"type":"noise","params":{"sigma_obs":0.0,"sigma_act":0.0}},{"type":"partial_observation","params":{"mask":[true,true,true,true]}},
            {"type":"history_stack","params":{"k":1}},{"type":"perturbation","params":{"specs":[]}}]"#,
    )
    .map_err(fail)?;
    cases.push(("config stack", build_challenges(Box::new(plant()), &neutral, seed, None).map_err(fail)?));

    let mut checked = Vec::new();
    for (name, env) in cases.iter_mut() {
        let got = episodes(env.as_mut(), &mut RandomForces::new(seed, 10.0)).map_err(fail)?;
        ensure!(got == reference, "{name} changed the trajectories");
        checked.push(*name);
    }

    // real-time budget that never binds
    let budget = RealtimeBudget { deadline_us: 1.0, fallback: Fallback::RepeatLast, mode: LatencyMode::Injected, injected_latency_us: 0.0 };
    let mut rt = wrap_realtime_budget(RandomForces::new(seed, 10.0), budget, Action::Continuous(0.0)).map_err(fail)?;
    ensure!(episodes(&mut plant(), &mut rt).map_err(fail)? == reference, "idle real-time budget changed the trajectories");
    checked.push("realtime(no overrun)");

    // a reshaped action index is the same as submitting its force directly
    let mut reshaped = reshaped_cartpole(CartPoleConfig::default(), seed);
    let forces = match &reshaped.spec().action {
        rwrl::env::ActionSpace::Discrete { forces: Some(f), .. } => f.clone(),
        other => return Err(format!("reshape exposes {other:?}")),
    };
    let via_index = episodes(&mut reshaped, &mut RandomForces::over(seed, forces.clone())).map_err(fail)?;
    let via_force = episodes(&mut plant(), &mut AsForces(RandomForces::over(seed, forces))).map_err(fail)?;
    for (a, b) in via_index.iter().zip(&via_force) {
        ensure!(a.len() == b.len(), "reshape changed an episode length");
        for (x, y) in a.records.iter().zip(&b.records) {
            let mut info = x.info.clone();
            info.remove("action_index");
            ensure!(
                x.observation == y.observation && x.next_observation == y.next_observation && x.reward == y.reward && info == y.info,
                "reshape diverged from the equivalent forces"
            );
        }
    }
    checked.push("action_reshape(equivalent forces)");
    Ok(format!("10 seeds bit-identical for {}", checked.join(", ")))
}

// ---------------------------------------------------------------- 3

fn delay_semantics() -> Outcome {
    let seed = 31;
    let cfg = CartPoleConfig { task: TaskMode::Swingup, max_steps: 100, ..Default::default() };
    let plant = CartPole::new(cfg, seed).map_err(fail)?;
    let default = neutral_action(&plant.spec());
    let mut env = wrap_action_delay(plant, &DelayConfig { action_delay: 2, ..Default::default() });
    let mut controller = RandomForces::new(seed, 3.0);
    let mut compared = 0;
    for ep in 0..10u64 {
        let t = run_episode(&mut env, &mut controller, ep).map_err(fail)?;
        ensure!(t.len() == 100, "episode {ep} ended after {} steps", t.len());
        let submitted: Vec<f64> = t.records.iter().map(|r| r.action.as_continuous().unwrap()).collect();
        let applied: Vec<f64> = t.records.iter().map(|r| r.info[info_keys::FORCE]).collect();
        let d = default.as_continuous().unwrap();
        let mut expected = vec![d, d];
        expected.extend_from_slice(&submitted[..98]);
        ensure!(applied == expected, "episode {ep}: applied forces are not the submitted ones shifted by 2");
        compared += applied.len();
    }
    Ok(format!("{compared} applied actions match the shifted submitted sequence"))
}

// ---------------------------------------------------------------- 4

fn independent_costs(info: &BTreeMap<String, f64>, b: &CartPoleBounds) -> [f64; 3] {
    let mut p = CartPoleParams::default();
    for k in CartPoleParam::ALL {
        p.set(k, info[k.name()]);
    }
    let (x, x_dot, theta, theta_dot, force) =
        (info["x"], info["x_dot"], info["theta"], info["theta_dot"], info["force"]);
    let x_ddot = reference_derivatives([x, x_dot, theta, theta_dot], force, &p)[1];
    let flag = |v: bool| if v { 1.0 } else { 0.0 };
    [
        flag(x <= b.x_l || x >= b.x_r),
        flag((b.theta_c - theta).abs() <= b.theta_l && theta_dot >= b.theta_dot_v),
        flag(x_ddot >= b.a_max),
    ]
}

fn safety_recount() -> Outcome {
    let seed = 41;
    let gamma = 0.99;
    let bounds = CartPoleBounds { x_l: -0.3, x_r: 0.3, theta_dot_v: 0.2, a_max: 6.0, ..Default::default() };
    let specs = cartpole_constraints(&bounds).map_err(fail)?;
    let ids: Vec<String> = specs.iter().map(|s| s.id.clone()).collect();
    let plant = CartPole::new(CartPoleConfig::default(), seed).map_err(fail)?.with_constraints(specs);
    let mut env = rwrl::challenges::wrap_action_reshape(
        plant,
        rwrl::challenges::ActionReshapeConfig { n: 11, relation: rwrl::challenges::ActionRelation::Ordered },
        seed,
        0,
    )
    .map_err(fail)?;
    let pd = pd_behavior_policy(30.0, 5.0, 0.4, &env.spec()).map_err(fail)?;
    let mut c = PolicyController::new(pd, RngStream::new(seed, streams::POLICY));
    let trajectories = run_episodes(&mut env, &mut c, 20, SeedPhase::Evaluation).map_err(fail)?;
    let online: Vec<SafetyReport> =
        trajectories.iter().map(|t| logged_violations(t, ids.clone(), gamma)).collect::<rwrl::Result<_>>().map_err(fail)?;

    let dir = tempfile::tempdir().map_err(fail)?;
    let path = dir.path().join("safety.rwrl.jsonl");
    let mut d = Dataset::new("pi_B", "test", provenance(seed), env.spec());
    d.trajectories = trajectories;
    d.write(&path).map_err(fail)?;
    let persisted = Dataset::read(&path).map_err(fail)?;

    let mut grand = [0.0; 3];
    for (t, on) in persisted.trajectories.iter().zip(&online) {
        let mut totals = [0.0; 3];
        let mut discounted = [0.0; 3];
        let mut w = 1.0;
        for r in &t.records {
            let c = independent_costs(&r.info, &bounds);
            for j in 0..3 {
                totals[j] += c[j];
                discounted[j] += w * c[j];
            }
            w *= gamma;
        }
        ensure!(on.totals == totals, "episode {}: online {:?} vs recount {totals:?}", t.episode_seed, on.totals);
        ensure!(on.discounted == discounted, "episode {}: discounted totals differ", t.episode_seed);
        for j in 0..3 {
            grand[j] += totals[j];
        }
    }
    ensure!(grand.iter().all(|v| *v > 0.0), "some constraint was never violated: {grand:?}");
    Ok(format!("20 episodes, exact match; violations per constraint {grand:?}"))
}

// ---------------------------------------------------------------- 5

fn physics_sanity() -> Outcome {
    let p = CartPoleParams { mu_track: 0.0, ..Default::default() };
    let mut s = CartPoleState::new(0.0, 0.2, 0.3, -0.4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let e0 = mechanical_energy(&s, &p);
        s = integrate(&s, 0.0, &p, Integrator::Rk4, DEFAULT_SUBSTEPS).map_err(fail)?;
        let e1 = mechanical_energy(&s, &p);
        worst = worst.max((e1 - e0).abs() / e0.abs());
    }
    ensure!(worst < 1e-4, "relative energy change {worst:e} in one step");

    let mut gap: f64 = 0.0;
    let mut rng = RngStream::new(5, 0xF00).rng();
    for _ in 0..200 {
        let y = [
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-3.0..3.0),
        ];
        let force = rng.random_range(-10.0..10.0);
        let params = CartPoleParams { mu_track: rng.random_range(0.0..0.05), ..Default::default() };
        let got = integrate(&CartPoleState::from_array(y), force, &params, Integrator::Rk4, DEFAULT_SUBSTEPS).map_err(fail)?;
        let want = reference_step(y, force, &params, 1000);
        for (a, b) in got.as_array().iter().zip(want) {
            gap = gap.max((a - b).abs());
        }
    }
    ensure!(gap < 1e-6, "macro step differs from the dt/1000 reference by {gap:e}");
    Ok(format!("worst per-step energy change {worst:.2e}; max gap to dt/1000 reference {gap:.2e} over 200 states"))
}

// ---------------------------------------------------------------- 6

fn metric_algebra() -> Outcome {
    let mut rng = RngStream::new(6, 0xF01).rng();
    let returns: Vec<f64> = (0..137).map(|_| rng.random_range(-50.0..50.0)).collect();
    let m = returns.iter().sum::<f64>() / returns.len() as f64;
    let c1 = cvar(&returns, 1.0).map_err(fail)?;
    ensure!((c1 - m).abs() < 1e-9, "cvar(., 1) = {c1} vs mean {m}");

    let r = robust_summary(vec![2.0, 4.0, 6.0]).map_err(fail)?;
    ensure!(r.robust == 4.0 && r.worst_case == 2.0, "per-env (2,4,6) gave {:?}", (r.robust, r.worst_case));
    ensure!(r.worst_case <= r.robust, "worst case above robust");

    let seed = 61;
    let mut env = reshaped_cartpole(CartPoleConfig::default(), seed);
    let pd = pd_behavior_policy(30.0, 5.0, 0.3, &env.spec()).map_err(fail)?;
    let logs = evaluate_policy(pd, &mut env, 50, SeedPhase::Evaluation, seed).map_err(fail)?;
    let gamma = 0.99;
    let multi = multi_objective_return(&logs, gamma).map_err(fail)?;
    let weighted: f64 = multi.iter().zip(&env.spec().reward_weights).map(|(j, a)| j * a).sum();
    let scalar = mean_return(&logs, gamma).map_err(fail)?;
    ensure!((weighted - scalar).abs() < 1e-9, "sum alpha_j J_multi[j] = {weighted} vs {scalar}");
    Ok(format!("cvar(1) gap {:.1e}; (2,4,6) -> ({}, {}); multi-objective gap {:.1e}", (c1 - m).abs(), r.worst_case, r.robust, (weighted - scalar).abs()))
}

// ---------------------------------------------------------------- 7

fn rwrl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rwrl"))
}

fn run_full(config: &Path, out: &Path, extra: &[&str]) -> Result<(), String> {
    let status = rwrl()
        .arg("full")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .map_err(fail)?;
    ensure!(status.status.success(), "rwrl full failed: {}", String::from_utf8_lossy(&status.stderr));
    Ok(())
}

fn end_to_end() -> Outcome {
    let config = config_path("gridworld.toml");
    let cfg = SuiteConfig::load(&config).map_err(fail)?;
    ensure!(cfg.trainer.trainer == TrainerKind::TabularQ, "gridworld config must use tabular batch Q");
    ensure!(cfg.brt.iterations == 3 && cfg.brt.rollout_steps == 5000, "gridworld config must use N=3, L=5000");
    let rwrl::suite::config::EnvironmentConfig::Gridworld(world) = cfg.environment.clone() else {
        return Err("gridworld config builds a different environment".into());
    };
    let gamma = cfg.trainer.gamma;

    let dir = tempfile::tempdir().map_err(fail)?;
    run_full(&config, dir.path(), &[])?;
    let manifest = suite::commands::read_manifest(dir.path()).map_err(fail)?;
    let PolicyArtifact::TabularQ(last) = PolicyFile::read(dir.path().join(&manifest.final_policy)).map_err(fail)?.policy else {
        return Err("final policy is not tabular".into());
    };
    let agreement = optimal_agreement(&world, gamma, |o| last.greedy(o)).map_err(fail)?;
    ensure!(agreement >= 0.9, "final policy agrees with DP on {:.1}% of states", 100.0 * agreement);

    // paired seeds: returns of pi_0 and pi_3 under the same evaluation episodes
    let (mut j0, mut j3, mut worst_agree) = (Vec::new(), Vec::new(), 1.0f64);
    for seed in 0..20u64 {
        let mut c = cfg.clone();
        c.master_seed = seed;
        let data = suite::commands::generate_data(&c).map_err(fail)?;
        let mut env = c.build_env().map_err(fail)?;
        let out = brt(&data, &c.trainer, 3, 5000, env.as_mut(), seed, |_| Ok(())).map_err(fail)?;
        let score = |p: &PolicyArtifact, env: &mut dyn Environment| -> rwrl::Result<f64> {
            mean_return(&evaluate_policy(p.clone(), env, 200, SeedPhase::Evaluation, seed)?, gamma)
        };
        j0.push(score(&out.policies[0], env.as_mut()).map_err(fail)?);
        j3.push(score(&out.policies[3], env.as_mut()).map_err(fail)?);
        if let PolicyArtifact::TabularQ(q) = &out.policies[3] {
            worst_agree = worst_agree.min(optimal_agreement(&world, gamma, |o| q.greedy(o)).map_err(fail)?);
        }
    }
    let (m0, _) = mean_sd(&j0);
    let (m3, _) = mean_sd(&j3);
    ensure!(m3 >= m0, "mean return of pi_3 {m3} below pi_0 {m0}");
    Ok(format!(
        "configured run agrees on {:.1}% of states; over 20 seeds mean J(pi_3) {m3:.5} >= J(pi_0) {m0:.5}, lowest agreement {:.1}%",
        100.0 * agreement,
        100.0 * worst_agree
    ))
}

// ---------------------------------------------------------------- 8

fn warm_start_ordering() -> Outcome {
    let gamma = 0.99;
    let (mut fqi, mut random) = (Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let mut env = reshaped_cartpole(CartPoleConfig::default(), seed);
        let data = pd_dataset(&mut env, seed, 20_000, 0.1);
        let cfg = TrainConfig { gamma, ..Default::default() };
        let uniform = TrainConfig { trainer: TrainerKind::Uniform, ..cfg.clone() };
        fqi.push(warm_start(|d| train(d, &cfg, 0), &data, &mut env, 20, gamma, seed).map_err(fail)?);
        random.push(warm_start(|d| train(d, &uniform, 0), &data, &mut env, 20, gamma, seed).map_err(fail)?);
    }
    let wins = fqi.iter().zip(&random).filter(|(a, b)| a > b).count();
    let (mf, _) = mean_sd(&fqi);
    let (mr, _) = mean_sd(&random);
    ensure!(wins == 20, "FQI beat the random trainer on only {wins}/20 seeds");
    Ok(format!("FQI {mf:.2} vs random {mr:.2}; FQI ahead on {wins}/20 seeds"))
}

// ---------------------------------------------------------------- 9

fn data_efficiency_scan() -> Outcome {
    let gamma = 0.9;
    let world = GridWorld::default();
    let behavior = gridworld_epsilon_optimal(&world, gamma, 0.8, "pi_B").map_err(fail)?;
    let mut configs = 0;
    for seed in [1u64, 2, 3] {
        let mut env = GridEnv::new(world.clone(), seed).map_err(fail)?;
        let mut c = PolicyController::new(behavior.clone(), RngStream::new(seed, streams::POLICY));
        let mut data = Dataset::new("pi_B", "test", provenance(seed), env.spec());
        data.trajectories =
            rwrl::rollout::collect_transitions(&mut env, &mut c, 3000, SeedPhase::Behavior).map_err(fail)?;
        for trainer in [TrainerKind::TabularQ, TrainerKind::Fqi] {
            let cfg = TrainConfig { trainer, gamma, bins: 4, ..Default::default() };
            for grid in [vec![20, 100, 500, 3000], vec![50, 400, 5000]] {
                for r_min in [-1.0, 0.2, 0.5, 0.55, 10.0] {
                    let eff = data_efficiency(|d| train(d, &cfg, 0), &data, r_min, &mut env, &grid, 30, gamma, seed)
                        .map_err(fail)?;
                    // brute force over the recorded returns
                    let mut scan = None;
                    for p in &eff.per_prefix {
                        if p.mean_return > r_min {
                            scan = Some(p.size);
                            break;
                        }
                    }
                    ensure!(eff.value == scan, "seed {seed} {trainer:?} r_min {r_min}: {:?} vs scan {scan:?}", eff.value);
                    ensure!(first_exceeding(&eff.per_prefix, r_min) == scan, "first_exceeding disagrees with the scan");
                    // the recorded returns replay from the prefixes themselves
                    for p in &eff.per_prefix {
                        let pol = train(&data.prefix(p.size), &cfg, 0).map_err(fail)?;
                        let r = mean_return(&evaluate_policy(pol, &mut env, 30, SeedPhase::Evaluation, seed).map_err(fail)?, gamma)
                            .map_err(fail)?;
                        ensure!(r == p.mean_return, "prefix {} return does not replay", p.size);
                    }
                    let expected_skips: Vec<usize> = grid.iter().copied().filter(|g| *g > 3000).collect();
                    ensure!(eff.skipped == expected_skips, "skipped sizes {:?}", eff.skipped);
                    configs += 1;
                }
            }
        }
    }
    Ok(format!("{configs} configurations match the brute-force scan"))
}

// ---------------------------------------------------------------- 10

fn tree(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(fail)? {
        let entry = entry.map_err(fail)?;
        out.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).map_err(fail)?);
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let mut summary = Vec::new();
    for name in ["gridworld.toml", "cartpole_balance.toml"] {
        let (a, b) = (tempfile::tempdir().map_err(fail)?, tempfile::tempdir().map_err(fail)?);
        for d in [&a, &b] {
            run_full(&config_path(name), d.path(), &["--deterministic-latency"])?;
        }
        let (ta, tb) = (tree(a.path())?, tree(b.path())?);
        ensure!(ta.keys().eq(tb.keys()), "{name}: runs wrote different files");
        for (file, bytes) in &ta {
            ensure!(tb[file] == *bytes, "{name}: {file} differs between runs");
        }
        for required in ["behavior.rwrl.jsonl", "policy_0.json", "report.json", "report.csv", "manifest.json"] {
            ensure!(ta.contains_key(required), "{name}: {required} missing");
        }
        summary.push(format!("{name} ({} files)", ta.len()));
    }
    Ok(format!("byte-identical reruns: {}", summary.join(", ")))
}

// ---------------------------------------------------------------- 11

fn realtime_budget() -> Outcome {
    let seed = 111;
    let mut env = reshaped_cartpole(CartPoleConfig { max_steps: 300, ..Default::default() }, seed);
    let spec = env.spec();
    let pd = pd_behavior_policy(30.0, 5.0, 0.1, &spec).map_err(fail)?;
    let deadline = 500.0;
    let mut lines = Vec::new();
    for (injected, fallback) in [(10.0 * deadline, Fallback::RepeatLast), (10.0 * deadline, Fallback::DefaultAction), (0.0, Fallback::RepeatLast)] {
        let budget = RealtimeBudget { deadline_us: deadline, fallback, mode: LatencyMode::Injected, injected_latency_us: injected };
        let inner = PolicyController::new(pd.clone(), RngStream::new(seed, streams::POLICY));
        let mut c = wrap_realtime_budget(inner, budget, neutral_action(&spec)).map_err(fail)?;
        let logs = run_episodes(&mut env, &mut c, 5, SeedPhase::Evaluation).map_err(fail)?;
        let steps = total_steps(&logs);
        let expected = if injected > deadline { steps } else { 0 };
        ensure!(c.misses() == expected, "injected {injected}: {} misses over {steps} steps", c.misses());
        lines.push(format!("{injected}us -> {}/{steps}", c.misses()));
    }
    Ok(lines.join(", "))
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("off-policy estimates match the exact gridworld value", ope_oracle),
        ("neutral wrappers reproduce the bare environment", wrapper_identity),
        ("action delay shifts the applied sequence", delay_semantics),
        ("online safety totals equal an offline recount", safety_recount),
        ("cart-pole energy and fine-step agreement", physics_sanity),
        ("metric algebra", metric_algebra),
        ("gridworld batch training end to end", end_to_end),
        ("warm start beats a data-blind trainer", warm_start_ordering),
        ("data efficiency equals a brute-force scan", data_efficiency_scan),
        ("byte-identical reruns", determinism),
        ("real-time miss counting", realtime_budget),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2} {name}", i + 1);
        if filter.as_ref().is_some_and(|f| !label.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {label}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {label}: {why} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
