//! A slippery tabular gridworld with an exact dynamic-programming oracle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    scalarize, Action, ActionSpace, EnvSpec, EnvStep, Environment, EpisodeClock, Info,
    ObservationSpace, INFO_CLAMPED,
};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::rng::{streams, RngStream, StreamRng};

pub type Cell = [usize; 2];

/// Moves along `[x, y]`: up is +y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn from_index(i: usize) -> Option<Move> {
        Self::ALL.get(i).copied()
    }

    pub fn perpendicular(self) -> [Move; 2] {
        match self {
            Move::Up | Move::Down => [Move::Left, Move::Right],
            Move::Left | Move::Right => [Move::Up, Move::Down],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct GridWorld {
    pub width: usize,
    pub height: usize,
    pub start: Cell,
    pub goal: Cell,
    pub step_reward: f64,
    pub goal_reward: f64,
    pub slip_prob: f64,
    pub max_steps: usize,
}

impl Default for GridWorld {
    fn default() -> Self {
        Self {
            width: 4,
            height: 4,
            start: [0, 0],
            goal: [3, 3],
            step_reward: 0.0,
            goal_reward: 1.0,
            slip_prob: 0.1,
            max_steps: 100,
        }
    }
}

impl GridWorld {
    pub fn validate(&self) -> Result<()> {
        let in_bounds = |c: Cell| c[0] < self.width && c[1] < self.height;
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("gridworld must have positive size".into()));
        }
        if !in_bounds(self.start) || !in_bounds(self.goal) {
            return Err(Error::Config("gridworld start/goal out of bounds".into()));
        }
        if self.start == self.goal {
            return Err(Error::Config("gridworld start equals goal".into()));
        }
        if !(0.0..1.0).contains(&self.slip_prob) {
            return Err(Error::Config(format!("slip_prob {} outside [0, 1)", self.slip_prob)));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.width * self.height
    }

    pub fn state_index(&self, c: Cell) -> usize {
        c[1] * self.width + c[0]
    }

    pub fn cell(&self, index: usize) -> Cell {
        [index % self.width, index / self.width]
    }

    /// Cell from a `[x, y]` observation.
    pub fn cell_of(&self, obs: &[f64]) -> Option<Cell> {
        let x = obs.first()?.round();
        let y = obs.get(1)?.round();
        (x >= 0.0 && y >= 0.0 && (x as usize) < self.width && (y as usize) < self.height)
            .then(|| [x as usize, y as usize])
    }

    pub fn observation(&self, c: Cell) -> Vec<f64> {
        vec![c[0] as f64, c[1] as f64]
    }

    /// Deterministic move with walls blocking.
    pub fn shift(&self, c: Cell, m: Move) -> Cell {
        let [x, y] = c;
        match m {
            Move::Up if y + 1 < self.height => [x, y + 1],
            Move::Down if y > 0 => [x, y - 1],
            Move::Left if x > 0 => [x - 1, y],
            Move::Right if x + 1 < self.width => [x + 1, y],
            _ => c,
        }
    }

    fn outcome(&self, next: Cell) -> (f64, bool) {
        if next == self.goal {
            (self.goal_reward, true)
        } else {
            (self.step_reward, false)
        }
    }

    /// `(next cell, probability)` after aggregating coincident outcomes.
    pub fn transition_distribution(&self, c: Cell, m: Move) -> Vec<(Cell, f64)> {
        let [p1, p2] = m.perpendicular();
        let mut out: Vec<(Cell, f64)> = Vec::with_capacity(3);
        for (mv, p) in [(m, 1.0 - self.slip_prob), (p1, self.slip_prob / 2.0), (p2, self.slip_prob / 2.0)] {
            if p == 0.0 {
                continue;
            }
            let next = self.shift(c, mv);
            match out.iter_mut().find(|(cell, _)| *cell == next) {
                Some(entry) => entry.1 += p,
                None => out.push((next, p)),
            }
        }
        out
    }

    /// The equivalent finite MDP; the goal is absorbing with value zero.
    pub fn to_mdp(&self) -> TabularMdp {
        let mut mdp = TabularMdp::new(self.n_states(), 4);
        for s in 0..self.n_states() {
            let c = self.cell(s);
            if c == self.goal {
                continue;
            }
            for (a, m) in Move::ALL.into_iter().enumerate() {
                let idx = mdp.index(s, a);
                let mut expected = 0.0;
                for (next, p) in self.transition_distribution(c, m) {
                    let (r, terminal) = self.outcome(next);
                    expected += p * r;
                    if !terminal {
                        mdp.transitions[idx].push((self.state_index(next), p));
                    }
                }
                mdp.rewards[idx] = expected;
            }
        }
        mdp
    }
}

/// Sample one move. The first draw decides slip; commanded moves use
/// probability `1 − slip_prob`, each perpendicular `slip_prob / 2`.
pub fn gridworld_step(world: &GridWorld, cell: Cell, m: Move, rng: &mut StreamRng) -> (Cell, f64, bool) {
    let u: f64 = rng.random();
    let [p1, p2] = m.perpendicular();
    let actual = if u < 1.0 - world.slip_prob {
        m
    } else if u < 1.0 - world.slip_prob / 2.0 {
        p1
    } else {
        p2
    };
    let next = world.shift(cell, actual);
    let (reward, terminal) = world.outcome(next);
    (next, reward, terminal)
}

/// Exact state values of `policy` (rows of action probabilities indexed by
/// [`GridWorld::state_index`]).
pub fn gridworld_exact_value(world: &GridWorld, policy: &[Vec<f64>], gamma: f64) -> Result<Vec<f64>> {
    world.to_mdp().policy_evaluation(policy, gamma)
}

/// Optimal deterministic policy and its values.
pub fn gridworld_optimal_policy(world: &GridWorld, gamma: f64) -> Result<(Vec<usize>, Vec<f64>)> {
    world.to_mdp().policy_iteration(gamma)
}

/// For each state, every action whose optimal value lies within `tol` of
/// the best one.
pub fn gridworld_optimal_actions(world: &GridWorld, gamma: f64, tol: f64) -> Result<Vec<Vec<usize>>> {
    let mdp = world.to_mdp();
    let (_, v) = mdp.policy_iteration(gamma)?;
    Ok(mdp
        .q_from_v(&v, gamma)
        .iter()
        .map(|row| {
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (0..row.len()).filter(|a| row[*a] >= best - tol).collect()
        })
        .collect())
}

/// Fraction of non-goal states where `greedy` picks an optimal action.
pub fn optimal_agreement(
    world: &GridWorld,
    gamma: f64,
    mut greedy: impl FnMut(&[f64]) -> Result<usize>,
) -> Result<f64> {
    let sets = gridworld_optimal_actions(world, gamma, 1e-9)?;
    let mut hits = 0usize;
    let mut total = 0usize;
    for (s, set) in sets.iter().enumerate() {
        let cell = world.cell(s);
        if cell == world.goal {
            continue;
        }
        total += 1;
        hits += usize::from(set.contains(&greedy(&world.observation(cell))?));
    }
    Ok(hits as f64 / total.max(1) as f64)
}

pub struct GridEnv {
    world: GridWorld,
    master_seed: u64,
    cell: Cell,
    rng: StreamRng,
    clock: EpisodeClock,
}

impl GridEnv {
    pub fn new(world: GridWorld, master_seed: u64) -> Result<Self> {
        world.validate()?;
        Ok(Self {
            cell: world.start,
            rng: RngStream::new(master_seed, streams::TRANSITION).rng(),
            world,
            master_seed,
            clock: EpisodeClock::default(),
        })
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    pub fn cell(&self) -> Cell {
        self.cell
    }
}

impl Environment for GridEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            observation: ObservationSpace::new(
                vec![-0.5, -0.5],
                vec![self.world.width as f64 - 0.5, self.world.height as f64 - 0.5],
            ),
            action: ActionSpace::Discrete { n: 4, forces: None },
            reward_weights: vec![1.0],
            constraint_ids: Vec::new(),
            max_steps: self.world.max_steps,
        }
    }

    fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>> {
        self.cell = self.world.start;
        self.rng = RngStream::new(self.master_seed, streams::TRANSITION)
            .derive(episode_seed)
            .rng();
        self.clock.start();
        Ok(self.world.observation(self.cell))
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        self.clock.ensure_active()?;
        let requested = action
            .as_discrete()
            .ok_or_else(|| Error::Usage("gridworld expects a discrete action".into()))?;
        let index = requested.min(3);
        let m = Move::from_index(index).expect("index clamped to 0..4");
        let mut info = Info::new();
        info.insert("x".into(), self.cell[0] as f64);
        info.insert("y".into(), self.cell[1] as f64);
        info.insert("action".into(), index as f64);
        info.insert(INFO_CLAMPED.into(), if index != requested { 1.0 } else { 0.0 });
        let (next, reward, terminal) = gridworld_step(&self.world, self.cell, m, &mut self.rng);
        self.cell = next;
        let truncated = self.clock.tick(terminal, self.world.max_steps);
        Ok(EnvStep {
            observation: self.world.observation(next),
            reward: scalarize(&[1.0], &[reward]),
            reward_components: vec![reward],
            constraint_costs: Vec::new(),
            terminal,
            truncated,
            info,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deterministic() -> GridWorld {
        GridWorld {
            slip_prob: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn wall_blocks() {
        let w = deterministic();
        let mut rng = RngStream::new(0, 0).rng();
        let (c, r, t) = gridworld_step(&w, [0, 0], Move::Left, &mut rng);
        assert_eq!((c, r, t), ([0, 0], 0.0, false));
    }

    #[test]
    fn goal_adjacent_reaches_goal() {
        let w = deterministic();
        let mut rng = RngStream::new(0, 0).rng();
        assert_eq!(gridworld_step(&w, [3, 2], Move::Up, &mut rng), ([3, 3], 1.0, true));
        let mut env = GridEnv::new(GridWorld { start: [2, 3], ..w }, 0).unwrap();
        env.reset(5).unwrap();
        let step = env.step(&Action::Discrete(3)).unwrap();
        assert_eq!(step.reward, 1.0);
        assert!(step.terminal);
    }

    #[test]
    fn slip_frequencies_match() {
        let w = GridWorld {
            slip_prob: 0.2,
            ..Default::default()
        };
        let mut rng = RngStream::new(3, 9).rng();
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let (c, _, _) = gridworld_step(&w, [1, 1], Move::Up, &mut rng);
            match c {
                [1, 2] => counts[0] += 1,
                [0, 1] => counts[1] += 1,
                [2, 1] => counts[2] += 1,
                other => panic!("unexpected cell {other:?}"),
            }
        }
        for (count, p) in counts.iter().zip([0.8, 0.1, 0.1]) {
            assert!((*count as f64 / n as f64 - p).abs() < 0.01);
        }
    }

    #[test]
    fn distribution_sums_to_one() {
        let w = GridWorld {
            slip_prob: 0.3,
            ..Default::default()
        };
        for s in 0..w.n_states() {
            for m in Move::ALL {
                let total: f64 = w.transition_distribution(w.cell(s), m).iter().map(|(_, p)| p).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_values_are_bellman_fixed_points() {
        let w = GridWorld::default();
        let uniform = vec![vec![0.25; 4]; w.n_states()];
        let v = gridworld_exact_value(&w, &uniform, 0.9).unwrap();
        assert!(w.to_mdp().bellman_residual(&uniform, &v, 0.9) < 1e-10);
        let zero = gridworld_exact_value(&w, &uniform, 0.0).unwrap();
        // γ = 0: only goal-adjacent cells earn immediate reward.
        assert_eq!(zero[w.state_index([0, 0])], 0.0);
        assert!(zero[w.state_index([3, 2])] > 0.0);
    }

    #[test]
    fn optimal_policy_heads_for_goal() {
        let (pi, v) = gridworld_optimal_policy(&deterministic(), 0.9).unwrap();
        let w = deterministic();
        assert!((v[w.state_index([0, 0])] - 0.9f64.powi(5)).abs() < 1e-12);
        assert_eq!(pi[w.state_index([3, 2])], 0);
        assert_eq!(pi[w.state_index([2, 3])], 3);
    }

    #[test]
    fn config_errors() {
        assert!(GridWorld { goal: [0, 0], ..Default::default() }.validate().is_err());
        assert!(GridWorld { goal: [9, 0], ..Default::default() }.validate().is_err());
        assert!(GridWorld { slip_prob: 1.0, ..Default::default() }.validate().is_err());
    }
}
