//! PID-accelerated dynamic programming and temporal-difference learning for
//! finite MDPs.
//!
//! The crate covers model-based PID value iteration, sample-based PID TD and
//! PID Q-learning, online gain adaptation, spectral and statistical analysis
//! of the PID operator, and a small experiment harness. See `examples/` for
//! one runnable program per capability.

pub mod analysis;
pub mod environments;
pub mod error;
pub mod gain_adaptation;
pub mod harness;
pub mod learning;
pub mod linalg;
pub mod mdp;
pub mod metrics;
pub mod planning;

pub use error::{Error, Result};
pub use mdp::{MarkovRewardProcess, Policy, TabularMdp, TransitionSample};
pub use planning::{Gains, PeState, QState};
