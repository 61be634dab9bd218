//! PPO with an EMA-referenced diversity bonus and KL-triggered evolutionary
//! mutation, plus the environments, statistics and tooling around it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod envs;
pub mod error;
pub mod eval;
pub mod nn;
pub mod poem;
pub mod policy;
pub mod ppo;
pub mod rollout;
pub mod stats;

#[cfg(feature = "harness")]
pub mod harness;

pub use error::{Error, Result};

#[cfg(test)]
mod test_support;
