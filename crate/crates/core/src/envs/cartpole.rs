//! Inverted pendulum on a cart with viscous track friction.
//!
//! Angles are measured from upright and are positive toward +x; a positive
//! force pushes the cart toward +x. The pole is a uniform rod of half-length
//! `l`, so its moment of inertia about the pivot is `4/3 · m_p · l²`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    scalarize, Action, ActionSpace, EnvSpec, EnvStep, Environment, EpisodeClock, Info,
    ObservationSpace, INFO_CLAMPED,
};
use crate::error::{Error, Result};
use crate::rng::{streams, RngStream};
use crate::safety::{self, ConstraintSpec};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn new(x: f64, x_dot: f64, theta: f64, theta_dot: f64) -> Self {
        Self {
            x,
            x_dot,
            theta,
            theta_dot,
        }
    }

    pub fn upright() -> Self {
        Self::default()
    }

    pub fn hanging() -> Self {
        Self::new(0.0, 0.0, PI, 0.0)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Wrap an angle into (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = theta - 2.0 * PI * ((theta - PI) / (2.0 * PI)).ceil();
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct CartPoleParams {
    pub m_c: f64,
    pub m_p: f64,
    /// Pole half-length.
    pub l: f64,
    pub g: f64,
    pub mu_track: f64,
    pub f_mag: f64,
    pub dt: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            m_c: 1.0,
            m_p: 0.1,
            l: 0.5,
            g: 9.81,
            mu_track: 0.0,
            f_mag: 10.0,
            dt: 0.02,
        }
    }
}

/// Parameters that perturbation specs may target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CartPoleParam {
    MC,
    MP,
    L,
    G,
    MuTrack,
    FMag,
    Dt,
}

impl CartPoleParam {
    pub const ALL: [CartPoleParam; 7] = [
        CartPoleParam::MC,
        CartPoleParam::MP,
        CartPoleParam::L,
        CartPoleParam::G,
        CartPoleParam::MuTrack,
        CartPoleParam::FMag,
        CartPoleParam::Dt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CartPoleParam::MC => "m_c",
            CartPoleParam::MP => "m_p",
            CartPoleParam::L => "l",
            CartPoleParam::G => "g",
            CartPoleParam::MuTrack => "mu_track",
            CartPoleParam::FMag => "f_mag",
            CartPoleParam::Dt => "dt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl CartPoleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_c", self.m_c),
            ("m_p", self.m_p),
            ("l", self.l),
            ("f_mag", self.f_mag),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("cart-pole {name} must be positive, got {v}")));
            }
        }
        if !(self.mu_track.is_finite() && self.mu_track >= 0.0) {
            return Err(Error::Config(format!(
                "cart-pole mu_track must be non-negative, got {}",
                self.mu_track
            )));
        }
        if !self.g.is_finite() {
            return Err(Error::Config("cart-pole g must be finite".into()));
        }
        Ok(())
    }

    pub fn get(&self, p: CartPoleParam) -> f64 {
        match p {
            CartPoleParam::MC => self.m_c,
            CartPoleParam::MP => self.m_p,
            CartPoleParam::L => self.l,
            CartPoleParam::G => self.g,
            CartPoleParam::MuTrack => self.mu_track,
            CartPoleParam::FMag => self.f_mag,
            CartPoleParam::Dt => self.dt,
        }
    }

    pub fn set(&mut self, p: CartPoleParam, v: f64) {
        match p {
            CartPoleParam::MC => self.m_c = v,
            CartPoleParam::MP => self.m_p = v,
            CartPoleParam::L => self.l = v,
            CartPoleParam::G => self.g = v,
            CartPoleParam::MuTrack => self.mu_track = v,
            CartPoleParam::FMag => self.f_mag = v,
            CartPoleParam::Dt => self.dt = v,
        }
    }

    pub fn write_info(&self, info: &mut Info) {
        for p in CartPoleParam::ALL {
            info.insert(p.name().to_string(), self.get(p));
        }
    }
}

/// Time derivative of [`CartPoleState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleDerivative {
    pub x_dot: f64,
    pub x_ddot: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
}

/// Closed-form rigid-body derivatives. Track friction is viscous,
/// `−mu_track · (m_c + m_p) · g · ẋ`, i.e. proportional to the static normal
/// load.
pub fn cartpole_derivatives(
    state: &CartPoleState,
    force: f64,
    params: &CartPoleParams,
) -> Result<CartPoleDerivative> {
    if !state.is_finite() || !force.is_finite() {
        return Err(Error::Domain(format!("non-finite cart-pole input {state:?}, force {force}")));
    }
    if force.abs() > params.f_mag * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "force {force} exceeds actuator bound {}",
            params.f_mag
        )));
    }
    Ok(derivatives_unchecked(state, force, params))
}

fn derivatives_unchecked(s: &CartPoleState, force: f64, p: &CartPoleParams) -> CartPoleDerivative {
    let total_mass = p.m_c + p.m_p;
    let friction = -p.mu_track * total_mass * p.g * s.x_dot;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + friction + p.m_p * p.l * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_ddot =
        (p.g * sin - cos * temp) / (p.l * (4.0 / 3.0 - p.m_p * cos * cos / total_mass));
    let x_ddot = temp - p.m_p * p.l * theta_ddot * cos / total_mass;
    CartPoleDerivative {
        x_dot: s.x_dot,
        x_ddot,
        theta_dot: s.theta_dot,
        theta_ddot,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    SemiImplicitEuler,
}

pub const DEFAULT_SUBSTEPS: usize = 4;

/// Advance one control period `dt` with `substeps` equal substeps.
pub fn integrate(
    state: &CartPoleState,
    force: f64,
    params: &CartPoleParams,
    integrator: Integrator,
    substeps: usize,
) -> Result<CartPoleState> {
    cartpole_derivatives(state, force, params)?;
    let substeps = substeps.max(1);
    let h = params.dt / substeps as f64;
    let mut s = *state;
    for _ in 0..substeps {
        s = match integrator {
            Integrator::Rk4 => rk4_substep(&s, force, params, h),
            Integrator::SemiImplicitEuler => {
                let d = derivatives_unchecked(&s, force, params);
                let x_dot = s.x_dot + h * d.x_ddot;
                let theta_dot = s.theta_dot + h * d.theta_ddot;
                CartPoleState::new(s.x + h * x_dot, x_dot, s.theta + h * theta_dot, theta_dot)
            }
        };
    }
    if !s.is_finite() {
        return Err(Error::Domain("cart-pole integration diverged".into()));
    }
    s.theta = wrap_angle(s.theta);
    Ok(s)
}

fn rk4_substep(s: &CartPoleState, force: f64, p: &CartPoleParams, h: f64) -> CartPoleState {
    let f = |v: [f64; 4]| {
        let d = derivatives_unchecked(&CartPoleState::from_array(v), force, p);
        [d.x_dot, d.x_ddot, d.theta_dot, d.theta_ddot]
    };
    let y = s.as_array();
    let add = |a: [f64; 4], k: [f64; 4], c: f64| std::array::from_fn(|i| a[i] + c * k[i]);
    let k1 = f(y);
    let k2 = f(add(y, k1, h / 2.0));
    let k3 = f(add(y, k2, h / 2.0));
    let k4 = f(add(y, k3, h));
    CartPoleState::from_array(std::array::from_fn(|i| {
        y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// One control period with the production integrator.
pub fn cartpole_step(state: &CartPoleState, force: f64, params: &CartPoleParams) -> Result<CartPoleState> {
    integrate(state, force, params, Integrator::Rk4, DEFAULT_SUBSTEPS)
}

/// `[uprightness, energy penalty]`.
pub fn cartpole_reward_components(state: &CartPoleState, force: f64, f_mag: f64) -> [f64; 2] {
    let upright = state.theta.cos().clamp(0.0, 1.0);
    let effort = force / f_mag;
    [upright, -(effort * effort)]
}

/// Kinetic plus potential energy, with the pivot height as the zero of
/// potential energy.
pub fn mechanical_energy(s: &CartPoleState, p: &CartPoleParams) -> f64 {
    let total_mass = p.m_c + p.m_p;
    0.5 * total_mass * s.x_dot * s.x_dot
        + p.m_p * p.l * s.x_dot * s.theta_dot * s.theta.cos()
        + 0.5 * (4.0 / 3.0) * p.m_p * p.l * p.l * s.theta_dot * s.theta_dot
        + p.m_p * p.g * p.l * s.theta.cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    /// Start near upright; the episode ends when the pole falls past
    /// `theta_limit` or the cart leaves the track.
    #[default]
    Balance,
    /// Start hanging; only leaving the track ends the episode.
    Swingup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct CartPoleConfig {
    pub params: CartPoleParams,
    pub task: TaskMode,
    pub max_steps: usize,
    pub reward_weights: [f64; 2],
    pub x_limit: f64,
    pub theta_limit: f64,
    pub init_theta_range: f64,
    pub integrator: Integrator,
    pub substeps: usize,
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        Self {
            params: CartPoleParams::default(),
            task: TaskMode::Balance,
            max_steps: 1000,
            reward_weights: [1.0, 0.1],
            x_limit: 4.8,
            theta_limit: 0.8,
            init_theta_range: 0.05,
            integrator: Integrator::Rk4,
            substeps: DEFAULT_SUBSTEPS,
        }
    }
}

impl CartPoleConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(self.x_limit > 0.0 && self.theta_limit > 0.0) {
            return Err(Error::Config("x_limit and theta_limit must be positive".into()));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        Ok(())
    }

    fn observation_space(&self) -> ObservationSpace {
        let (theta, theta_dot, x_dot) = match self.task {
            TaskMode::Balance => (self.theta_limit, 3.0, 2.0),
            TaskMode::Swingup => (PI, 10.0, 5.0),
        };
        ObservationSpace::new(
            vec![-self.x_limit, -x_dot, -theta, -theta_dot],
            vec![self.x_limit, x_dot, theta, theta_dot],
        )
    }
}

/// Info keys written by [`CartPole::step`].
pub mod info_keys {
    pub const X: &str = "x";
    pub const X_DOT: &str = "x_dot";
    pub const THETA: &str = "theta";
    pub const THETA_DOT: &str = "theta_dot";
    pub const FORCE: &str = "force";
}

pub struct CartPole {
    config: CartPoleConfig,
    params: CartPoleParams,
    master_seed: u64,
    constraints: Vec<ConstraintSpec>,
    state: CartPoleState,
    clock: EpisodeClock,
}

impl CartPole {
    pub fn new(config: CartPoleConfig, master_seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            params: config.params,
            config,
            master_seed,
            constraints: Vec::new(),
            state: CartPoleState::default(),
            clock: EpisodeClock::default(),
        })
    }

    pub fn with_constraints(mut self, constraints: Vec<ConstraintSpec>) -> Self {
        self.constraints = constraints;
        self
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }

    pub fn config(&self) -> &CartPoleConfig {
        &self.config
    }

    /// Sample the initial state for `episode_seed` without touching `self`.
    pub fn initial_state(&self, episode_seed: u64) -> CartPoleState {
        let mut rng = RngStream::new(self.master_seed, streams::INITIAL_STATE)
            .derive(episode_seed)
            .rng();
        let range = self.config.init_theta_range;
        let offset = if range > 0.0 {
            rng.random_range(-range..range)
        } else {
            0.0
        };
        let theta = match self.config.task {
            TaskMode::Balance => offset,
            TaskMode::Swingup => wrap_angle(PI + offset),
        };
        CartPoleState::new(0.0, 0.0, theta, 0.0)
    }

    /// Force the plant into a given state, e.g. for oracle tests.
    pub fn set_state(&mut self, state: CartPoleState) {
        self.state = state;
    }

    fn observe(&self) -> Vec<f64> {
        self.state.as_array().to_vec()
    }

    fn is_terminal(&self, s: &CartPoleState) -> bool {
        s.x.abs() > self.config.x_limit
            || (self.config.task == TaskMode::Balance && s.theta.abs() > self.config.theta_limit)
    }
}

/// Fill `info` with the plant snapshot used by safety accounting.
pub fn write_snapshot(info: &mut Info, state: &CartPoleState, force: f64, params: &CartPoleParams) {
    info.insert(info_keys::X.into(), state.x);
    info.insert(info_keys::X_DOT.into(), state.x_dot);
    info.insert(info_keys::THETA.into(), state.theta);
    info.insert(info_keys::THETA_DOT.into(), state.theta_dot);
    info.insert(info_keys::FORCE.into(), force);
    params.write_info(info);
}

impl Environment for CartPole {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            observation: self.config.observation_space(),
            action: ActionSpace::Continuous {
                low: -self.params.f_mag,
                high: self.params.f_mag,
            },
            reward_weights: self.config.reward_weights.to_vec(),
            constraint_ids: self.constraints.iter().map(|c| c.id.clone()).collect(),
            max_steps: self.config.max_steps,
        }
    }

    fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>> {
        self.state = self.initial_state(episode_seed);
        self.clock.start();
        Ok(self.observe())
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        self.clock.ensure_active()?;
        let requested = match action {
            Action::Continuous(f) => *f,
            Action::Discrete(_) => {
                return Err(Error::Usage("cart-pole expects a continuous force".into()))
            }
        };
        if !requested.is_finite() {
            return Err(Error::Domain(format!("non-finite force {requested}")));
        }
        let force = requested.clamp(-self.params.f_mag, self.params.f_mag);
        let mut info = Info::new();
        write_snapshot(&mut info, &self.state, force, &self.params);
        info.insert(INFO_CLAMPED.into(), if force != requested { 1.0 } else { 0.0 });

        let constraint_costs = safety::eval_costs(&self.constraints, &info)?;
        let components = cartpole_reward_components(&self.state, force, self.params.f_mag);
        let next = integrate(
            &self.state,
            force,
            &self.params,
            self.config.integrator,
            self.config.substeps,
        )?;
        self.state = next;
        let terminal = self.is_terminal(&next);
        let truncated = self.clock.tick(terminal, self.config.max_steps);
        Ok(EnvStep {
            observation: self.observe(),
            reward: scalarize(&self.config.reward_weights, &components),
            reward_components: components.to_vec(),
            constraint_costs,
            terminal,
            truncated,
            info,
        })
    }

    fn parameters(&self) -> std::collections::BTreeMap<String, f64> {
        CartPoleParam::ALL
            .into_iter()
            .map(|p| (p.name().to_string(), self.params.get(p)))
            .collect()
    }

    fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        let p = CartPoleParam::from_name(name)
            .ok_or_else(|| Error::Config(format!("unknown cart-pole parameter `{name}`")))?;
        let mut next = self.params;
        next.set(p, value);
        next.validate()?;
        self.params = next;
        Ok(())
    }
}
