//! Finite MDPs with exact policy evaluation and dynamic programming.
//!
//! Probability mass missing from a `(state, action)` row flows into an
//! implicit absorbing terminal state worth zero.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense linear solves are used up to this many states; larger models fall
/// back to iterative evaluation.
const DENSE_LIMIT: usize = 3000;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transitions[s * n_actions + a]` lists `(next_state, probability)`.
    pub transitions: Vec<Vec<(usize, f64)>>,
    /// Expected immediate reward, same indexing.
    pub rewards: Vec<f64>,
}

impl TabularMdp {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            transitions: vec![Vec::new(); n_states * n_actions],
            rewards: vec![0.0; n_states * n_actions],
        }
    }

    pub fn index(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    pub fn row(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[self.index(s, a)]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[self.index(s, a)]
    }

    fn check_policy(&self, policy: &[Vec<f64>]) -> Result<()> {
        if policy.len() != self.n_states || policy.iter().any(|p| p.len() != self.n_actions) {
            return Err(Error::Domain("policy table shape does not match the MDP".into()));
        }
        Ok(())
    }

    fn check_discount(gamma: f64) -> Result<()> {
        if (0.0..1.0).contains(&gamma) {
            Ok(())
        } else {
            Err(Error::Domain(format!("exact evaluation needs gamma in [0, 1), got {gamma}")))
        }
    }

    /// Solves `(I − γ P_π) v = r_π`.
    pub fn policy_evaluation(&self, policy: &[Vec<f64>], gamma: f64) -> Result<Vec<f64>> {
        Self::check_discount(gamma)?;
        self.check_policy(policy)?;
        let n = self.n_states;
        let mut r_pi = vec![0.0; n];
        for (s, probs) in policy.iter().enumerate() {
            for (a, &pa) in probs.iter().enumerate() {
                r_pi[s] += pa * self.reward(s, a);
            }
        }
        if n <= DENSE_LIMIT {
            let mut m = DMatrix::<f64>::identity(n, n);
            for (s, probs) in policy.iter().enumerate() {
                for (a, &pa) in probs.iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    for &(next, p) in self.row(s, a) {
                        m[(s, next)] -= gamma * pa * p;
                    }
                }
            }
            let v = m
                .lu()
                .solve(&DVector::from_vec(r_pi))
                .ok_or_else(|| Error::Internal("singular policy-evaluation system".into()))?;
            Ok(v.iter().copied().collect())
        } else {
            self.iterative_evaluation(policy, &r_pi, gamma)
        }
    }

    fn iterative_evaluation(&self, policy: &[Vec<f64>], r_pi: &[f64], gamma: f64) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.n_states];
        for _ in 0..100_000 {
            let mut delta: f64 = 0.0;
            for s in 0..self.n_states {
                let mut x = r_pi[s];
                for (a, &pa) in policy[s].iter().enumerate() {
                    if pa > 0.0 {
                        x += gamma * pa * self.row(s, a).iter().map(|&(n, p)| p * v[n]).sum::<f64>();
                    }
                }
                delta = delta.max((x - v[s]).abs());
                v[s] = x;
            }
            if delta < 1e-13 {
                return Ok(v);
            }
        }
        Err(Error::Internal("iterative policy evaluation did not converge".into()))
    }

    /// `Q(s, a) = r(s, a) + γ Σ P(s'|s,a) v(s')`.
    pub fn q_from_v(&self, v: &[f64], gamma: f64) -> Vec<Vec<f64>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| {
                        self.reward(s, a) + gamma * self.row(s, a).iter().map(|&(n, p)| p * v[n]).sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }

    /// Optimal action values by value iteration to a sup-norm change of `tol`.
    pub fn value_iteration(&self, gamma: f64, tol: f64) -> Result<Vec<Vec<f64>>> {
        Self::check_discount(gamma)?;
        let mut v = vec![0.0; self.n_states];
        loop {
            let q = self.q_from_v(&v, gamma);
            let next: Vec<f64> = q.iter().map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
            let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if delta < tol {
                return Ok(self.q_from_v(&v, gamma));
            }
        }
    }

    /// Policy iteration with exact evaluation; ties go to the lowest action.
    pub fn policy_iteration(&self, gamma: f64) -> Result<(Vec<usize>, Vec<f64>)> {
        let mut policy = vec![0usize; self.n_states];
        for _ in 0..10_000 {
            let table = deterministic_table(&policy, self.n_actions);
            let v = self.policy_evaluation(&table, gamma)?;
            let q = self.q_from_v(&v, gamma);
            let mut stable = true;
            for s in 0..self.n_states {
                let best = argmax_with_tolerance(&q[s], 1e-12);
                if q[s][best] > q[s][policy[s]] + 1e-12 {
                    policy[s] = best;
                    stable = false;
                }
            }
            if stable {
                return Ok((policy, v));
            }
        }
        Err(Error::Internal("policy iteration did not converge".into()))
    }

    /// Largest `|v(s) − (r_π + γ P_π v)(s)|`.
    pub fn bellman_residual(&self, policy: &[Vec<f64>], v: &[f64], gamma: f64) -> f64 {
        let q = self.q_from_v(v, gamma);
        (0..self.n_states)
            .map(|s| {
                let backed: f64 = policy[s].iter().zip(&q[s]).map(|(p, q)| p * q).sum();
                (backed - v[s]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// One-hot rows for a deterministic policy.
pub fn deterministic_table(policy: &[usize], n_actions: usize) -> Vec<Vec<f64>> {
    policy
        .iter()
        .map(|&a| {
            let mut row = vec![0.0; n_actions];
            row[a] = 1.0;
            row
        })
        .collect()
}

/// Index of the first entry within `tol` of the maximum.
pub fn argmax_with_tolerance(values: &[f64], tol: f64) -> usize {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values.iter().position(|v| *v >= max - tol).unwrap_or(0)
}

/// Index of the first maximal entry.
pub fn argmax(values: &[f64]) -> usize {
    argmax_with_tolerance(values, 0.0)
}
