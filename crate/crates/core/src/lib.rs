//! Quick-Draw bandits for nonstationary, continuum-armed reward environments.
//!
//! - [`quickdraw`]: the Quick-Draw policy (Gaussian-product posterior, clipped UCB index).
//! - [`baselines`]: random, sliding epsilon-greedy, restless, SW-GP-UCB, sliding-window UCB.
//! - [`envgen`]: space-time Gaussian random field payout environments.
//! - [`harness`]: warm-up protocol, regret accounting, ensembles, sweeps, benchmarks.
//! - [`ope`]: inverse-propensity-scoring evaluation on logged bandit feedback.

pub mod baselines;
pub mod envgen;
mod error;
pub mod harness;
pub mod ope;
pub mod quickdraw;
pub mod rng;
pub mod space;

pub use error::{Error, Result};
pub use space::{argmax, ArmSpace, Observation, Policy, PolicyDecision, PolicyDriver, Propensity, RoundContext};
