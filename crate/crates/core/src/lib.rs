//! Exact safety measurement of neural-network RL policies under pruning.
//!
//! The pipeline builds the Markov chain induced by a policy on an MDP,
//! checks PCTL properties on it, prunes network connections and compares
//! the measurements before and after.

pub mod environments;
pub mod error;
pub mod induced;
pub mod model;
pub mod pctl;
pub mod policy;
pub mod pruning;
pub mod workflow;

pub use error::{Error, Result};
