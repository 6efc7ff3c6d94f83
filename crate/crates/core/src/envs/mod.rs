//! Built-in environments.

pub mod cartpole;
pub mod constant;
pub mod gridworld;

pub use cartpole::{CartPole, CartPoleConfig, CartPoleParam, CartPoleParams, CartPoleState, TaskMode};
pub use constant::ConstantEnv;
pub use gridworld::{GridEnv, GridWorld, Move};
