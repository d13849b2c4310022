//! Comparison policies: uniform random, sliding-window epsilon-greedy, the
//! restless bandit, sliding-window GP-UCB and sliding-window UCB.

mod gp;
mod greedy;
mod random;
mod restless;
mod sliding_ucb;
mod window;

pub use gp::{gp_posterior, log_marginal_likelihood, GpFit, GpHyper, GpHyperGrid, GpParams, HyperOpt, SwGpUcb};
pub use greedy::{sliding_greedy_choice, SlidingGreedy, SlidingGreedyParams};
pub use random::RandomPolicy;
pub use restless::{suspicion, Restless, RestlessParams};
pub use sliding_ucb::{SlidingUcb, SlidingUcbParams};
pub use window::Window;
