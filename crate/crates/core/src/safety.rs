//! Constraint specifications, per-step costs and violation accounting.
//!
//! Costs are always evaluated on the true plant snapshot carried in a step's
//! info map, never on the (possibly noisy or delayed) observation.

use serde::{Deserialize, Serialize};

use crate::env::Info;
use crate::envs::cartpole::{self, info_keys, CartPoleParam, CartPoleParams, CartPoleState};
use crate::error::{Error, Result};
use crate::record::{check_gamma, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Static,
    Kinematic,
    Dynamic,
}

/// Indicator cost functions over the cart-pole snapshot. Each returns 1 when
/// violated and 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum CostFn {
    /// Violated iff `x ≤ x_l` or `x ≥ x_r`.
    Range { x_l: f64, x_r: f64 },
    /// Violated iff `|θ_c − θ| ≤ θ_L` and `θ̇ ≥ θ̇_V`.
    VelocityNearGoal {
        theta_c: f64,
        theta_l: f64,
        theta_dot_v: f64,
    },
    /// Violated iff the cart acceleration at the applied force is `≥ A_max`.
    Acceleration { a_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub id: String,
    pub kind: ConstraintKind,
    pub cost: CostFn,
    /// Cumulative budget `V_k`, if any.
    pub bound: Option<f64>,
}

/// True plant state at decision time together with the applied force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantSnapshot {
    pub state: CartPoleState,
    pub force: f64,
    pub params: CartPoleParams,
}

impl PlantSnapshot {
    pub fn from_info(info: &Info) -> Result<Self> {
        let get = |key: &str| {
            info.get(key)
                .copied()
                .ok_or_else(|| Error::Data(format!("true-state info is missing `{key}`")))
        };
        let mut params = CartPoleParams::default();
        for p in CartPoleParam::ALL {
            params.set(p, get(p.name())?);
        }
        Ok(Self {
            state: CartPoleState::new(
                get(info_keys::X)?,
                get(info_keys::X_DOT)?,
                get(info_keys::THETA)?,
                get(info_keys::THETA_DOT)?,
            ),
            force: get(info_keys::FORCE)?,
            params,
        })
    }
}

impl ConstraintSpec {
    pub fn cost(&self, snap: &PlantSnapshot) -> Result<f64> {
        let s = &snap.state;
        let violated = match self.cost {
            CostFn::Range { x_l, x_r } => s.x <= x_l || s.x >= x_r,
            CostFn::VelocityNearGoal {
                theta_c,
                theta_l,
                theta_dot_v,
            } => (theta_c - s.theta).abs() <= theta_l && s.theta_dot >= theta_dot_v,
            CostFn::Acceleration { a_max } => {
                cartpole::cartpole_derivatives(s, snap.force, &snap.params)?.x_ddot >= a_max
            }
        };
        Ok(if violated { 1.0 } else { 0.0 })
    }
}

/// Bounds for the three cart-pole constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartPoleBounds {
    pub x_l: f64,
    pub x_r: f64,
    pub theta_c: f64,
    pub theta_l: f64,
    pub theta_dot_v: f64,
    pub a_max: f64,
}

impl Default for CartPoleBounds {
    fn default() -> Self {
        Self {
            x_l: -2.4,
            x_r: 2.4,
            theta_c: 0.0,
            theta_l: 0.25,
            theta_dot_v: 1.0,
            a_max: 10.0,
        }
    }
}

/// Range, velocity-near-goal and acceleration constraints, in that order.
pub fn cartpole_constraints(b: &CartPoleBounds) -> Result<Vec<ConstraintSpec>> {
    if !(b.x_l < b.x_r) {
        return Err(Error::Config(format!("x_l {} must be below x_r {}", b.x_l, b.x_r)));
    }
    if !(b.theta_l > 0.0) || !(b.a_max > 0.0) {
        return Err(Error::Config("theta_l and a_max must be positive".into()));
    }
    if ![b.theta_c, b.theta_dot_v].iter().all(|v| v.is_finite()) {
        return Err(Error::Config("constraint bounds must be finite".into()));
    }
    Ok(vec![
        ConstraintSpec {
            id: "range".into(),
            kind: ConstraintKind::Static,
            cost: CostFn::Range { x_l: b.x_l, x_r: b.x_r },
            bound: None,
        },
        ConstraintSpec {
            id: "velocity_near_goal".into(),
            kind: ConstraintKind::Kinematic,
            cost: CostFn::VelocityNearGoal {
                theta_c: b.theta_c,
                theta_l: b.theta_l,
                theta_dot_v: b.theta_dot_v,
            },
            bound: None,
        },
        ConstraintSpec {
            id: "acceleration".into(),
            kind: ConstraintKind::Dynamic,
            cost: CostFn::Acceleration { a_max: b.a_max },
            bound: None,
        },
    ])
}

pub fn eval_costs_at(specs: &[ConstraintSpec], snap: &PlantSnapshot) -> Result<Vec<f64>> {
    specs.iter().map(|c| c.cost(snap)).collect()
}

/// Costs for every spec, in spec order, read from a step's info snapshot.
pub fn eval_costs(specs: &[ConstraintSpec], info: &Info) -> Result<Vec<f64>> {
    if specs.is_empty() {
        return Ok(Vec::new());
    }
    eval_costs_at(specs, &PlantSnapshot::from_info(info)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub constraint_ids: Vec<String>,
    /// Undiscounted per-constraint totals.
    pub totals: Vec<f64>,
    pub discounted: Vec<f64>,
    /// Step index of the first violation; for merged reports, counted over
    /// the concatenated steps.
    pub first_violation: Vec<Option<usize>>,
    pub steps: usize,
    pub episodes: usize,
}

impl SafetyReport {
    pub fn empty(constraint_ids: Vec<String>) -> Self {
        let k = constraint_ids.len();
        Self {
            constraint_ids,
            totals: vec![0.0; k],
            discounted: vec![0.0; k],
            first_violation: vec![None; k],
            steps: 0,
            episodes: 0,
        }
    }

    /// Build from one trajectory's per-step cost vectors.
    pub fn from_costs<'a>(
        constraint_ids: Vec<String>,
        costs: impl IntoIterator<Item = &'a [f64]>,
        gamma: f64,
    ) -> Result<Self> {
        check_gamma(gamma)?;
        let mut report = Self::empty(constraint_ids);
        let k = report.constraint_ids.len();
        let mut discount = 1.0;
        for (t, c) in costs.into_iter().enumerate() {
            if c.len() != k {
                return Err(Error::Data(format!("cost vector of length {} for {k} constraints", c.len())));
            }
            for j in 0..k {
                report.totals[j] += c[j];
                report.discounted[j] += discount * c[j];
                if c[j] > 0.0 && report.first_violation[j].is_none() {
                    report.first_violation[j] = Some(t);
                }
            }
            discount *= gamma;
            report.steps += 1;
        }
        report.episodes = 1;
        Ok(report)
    }

    /// Associative merge; `other` is treated as following `self` in time.
    pub fn merge(&self, other: &SafetyReport) -> Result<SafetyReport> {
        if self.constraint_ids != other.constraint_ids {
            return Err(Error::Data("merging safety reports over different constraints".into()));
        }
        let mut out = self.clone();
        for j in 0..out.totals.len() {
            out.totals[j] += other.totals[j];
            out.discounted[j] += other.discounted[j];
            if out.first_violation[j].is_none() {
                out.first_violation[j] = other.first_violation[j].map(|t| t + self.steps);
            }
        }
        out.steps += other.steps;
        out.episodes += other.episodes;
        Ok(out)
    }

    pub fn merge_all<'a>(constraint_ids: Vec<String>, reports: impl IntoIterator<Item = &'a SafetyReport>) -> Result<SafetyReport> {
        reports
            .into_iter()
            .try_fold(SafetyReport::empty(constraint_ids), |acc, r| acc.merge(r))
    }

    pub fn total_violations(&self) -> f64 {
        self.totals.iter().sum()
    }
}

/// Recount violations from the true-state snapshots stored in a trajectory.
pub fn accumulate_violations(trajectory: &Trajectory, specs: &[ConstraintSpec], gamma: f64) -> Result<SafetyReport> {
    let costs = trajectory
        .records
        .iter()
        .map(|r| eval_costs_at(specs, &PlantSnapshot::from_info(&r.info)?))
        .collect::<Result<Vec<_>>>()?;
    SafetyReport::from_costs(
        specs.iter().map(|c| c.id.clone()).collect(),
        costs.iter().map(Vec::as_slice),
        gamma,
    )
}

/// Totals from the costs the environment reported online.
pub fn logged_violations(trajectory: &Trajectory, constraint_ids: Vec<String>, gamma: f64) -> Result<SafetyReport> {
    SafetyReport::from_costs(
        constraint_ids,
        trajectory.records.iter().map(|r| r.constraint_costs.as_slice()),
        gamma,
    )
}

/// `reward − Σ_k λ_k · cost_k`.
pub fn penalize_reward(reward: f64, costs: &[f64], multipliers: &[f64]) -> Result<f64> {
    if costs.len() != multipliers.len() {
        return Err(Error::Domain(format!(
            "{} costs but {} multipliers",
            costs.len(),
            multipliers.len()
        )));
    }
    if let Some(l) = multipliers.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::Domain(format!("negative multiplier {l}")));
    }
    Ok(reward - costs.iter().zip(multipliers).map(|(c, l)| c * l).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(x: f64, theta: f64, theta_dot: f64, force: f64) -> PlantSnapshot {
        PlantSnapshot {
            state: CartPoleState::new(x, 0.0, theta, theta_dot),
            force,
            params: CartPoleParams::default(),
        }
    }

    fn specs() -> Vec<ConstraintSpec> {
        cartpole_constraints(&CartPoleBounds {
            x_l: -2.0,
            x_r: 2.0,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn satisfied_state_costs_nothing() {
        assert_eq!(eval_costs_at(&specs(), &snap(0.0, 0.0, 0.0, 0.0)).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn range_boundary() {
        let c = eval_costs_at(&specs(), &snap(2.5, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(c, vec![1.0, 0.0, 0.0]);
        assert_eq!(eval_costs_at(&specs(), &snap(2.0, 0.0, 0.0, 0.0)).unwrap()[0], 1.0);
        assert_eq!(eval_costs_at(&specs(), &snap(1.999, 0.0, 0.0, 0.0)).unwrap()[0], 0.0);
    }

    #[test]
    fn velocity_near_goal_is_negated_disjunction() {
        let s = specs();
        assert_eq!(s[1].cost(&snap(0.0, 0.1, 1.5, 0.0)).unwrap(), 1.0);
        assert_eq!(s[1].cost(&snap(0.0, 0.1, 0.5, 0.0)).unwrap(), 0.0);
        assert_eq!(s[1].cost(&snap(0.0, 0.4, 1.5, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn acceleration_matches_dynamics() {
        let s = specs();
        let p = CartPoleParams::default();
        // Full force from rest: ẍ = F / (m_c + m_p / 4) for a uniform rod.
        let xdd = cartpole::cartpole_derivatives(&CartPoleState::upright(), 10.0, &p).unwrap().x_ddot;
        assert!((xdd - 10.0 / (p.m_c + p.m_p / 4.0)).abs() < 1e-12);
        let expected = if xdd >= 10.0 { 1.0 } else { 0.0 };
        assert_eq!(s[2].cost(&snap(0.0, 0.0, 0.0, 10.0)).unwrap(), expected);
        let tight = cartpole_constraints(&CartPoleBounds { a_max: xdd, ..Default::default() }).unwrap();
        assert_eq!(tight[2].cost(&snap(0.0, 0.0, 0.0, 10.0)).unwrap(), 1.0);
        let loose = cartpole_constraints(&CartPoleBounds { a_max: xdd + 1e-9, ..Default::default() }).unwrap();
        assert_eq!(loose[2].cost(&snap(0.0, 0.0, 0.0, 10.0)).unwrap(), 0.0);
    }

    #[test]
    fn malformed_bounds() {
        assert!(cartpole_constraints(&CartPoleBounds { x_l: 1.0, x_r: 1.0, ..Default::default() }).is_err());
        assert!(cartpole_constraints(&CartPoleBounds { theta_l: 0.0, ..Default::default() }).is_err());
        assert!(cartpole_constraints(&CartPoleBounds { a_max: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn report_first_violation_and_totals() {
        let ids = vec!["range".to_string()];
        let costs = [[0.0], [0.0], [0.0], [1.0], [1.0], [0.0]];
        let r = SafetyReport::from_costs(ids.clone(), costs.iter().map(|c| c.as_slice()), 1.0).unwrap();
        assert_eq!(r.totals, vec![2.0]);
        assert_eq!(r.first_violation, vec![Some(3)]);
        let clean = SafetyReport::from_costs(ids, [[0.0]; 4].iter().map(|c| c.as_slice()), 0.9).unwrap();
        assert_eq!(clean.totals, vec![0.0]);
        assert_eq!(clean.first_violation, vec![None]);
        let merged = clean.merge(&r).unwrap();
        assert_eq!(merged.first_violation, vec![Some(7)]);
        assert_eq!(merged.steps, 10);
    }

    #[test]
    fn missing_info_is_data_error() {
        assert!(matches!(eval_costs(&specs(), &Info::new()), Err(Error::Data(_))));
    }

    #[test]
    fn penalty_arithmetic() {
        assert_eq!(penalize_reward(1.0, &[1.0, 0.0, 1.0], &[0.0; 3]).unwrap(), 1.0);
        assert_eq!(penalize_reward(1.0, &[1.0, 0.0, 1.0], &[0.5; 3]).unwrap(), 0.0);
        assert!(matches!(penalize_reward(1.0, &[1.0], &[-0.1]), Err(Error::Domain(_))));
        assert!(penalize_reward(1.0, &[1.0], &[]).is_err());
    }
}
