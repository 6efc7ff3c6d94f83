//! Batch reinforcement learning under real-world difficulties: a cart-pole
//! and a gridworld, wrappers that add delays, noise, perturbations, partial
//! observability, reshaped actions and decision deadlines, batch trainers,
//! off-policy estimators, and a metrics suite with safety accounting.
//!
//! Start with the runnable programs under `examples/`.

pub mod batch_rl;
pub mod challenges;
pub mod env;
pub mod envs;
pub mod error;
pub mod jsonfmt;
pub mod mdp;
pub mod metrics;
pub mod ope;
pub mod record;
pub mod rng;
pub mod rollout;
pub mod safety;
pub mod suite;

pub use error::{Error, Result};
