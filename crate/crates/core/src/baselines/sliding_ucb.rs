use super::window::Window;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::space::{ArmSpace, Observation, Policy, PolicyDecision, RoundContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlidingUcbParams {
    pub window: usize,
    pub xi: f64,
    /// Reward bound `B`.
    pub bound: f64,
}

impl Default for SlidingUcbParams {
    fn default() -> Self {
        Self { window: 100, xi: 0.5, bound: 1.0 }
    }
}

impl SlidingUcbParams {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::input("window must be at least 1"));
        }
        if !(self.xi > 0.0) || !(self.bound > 0.0) {
            return Err(Error::input("xi and the reward bound must be positive"));
        }
        Ok(())
    }
}

/// Sliding-window UCB: arms absent from the window are played first (lowest
/// index), then `mean + B sqrt(xi ln t / n)` over the window.
#[derive(Debug, Clone)]
pub struct SlidingUcb {
    name: String,
    space: ArmSpace,
    params: SlidingUcbParams,
    window: Window,
}

impl SlidingUcb {
    pub fn new(space: ArmSpace, params: SlidingUcbParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { name: "sliding_ucb".into(), space, params, window: Window::new(params.window) })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn index(&self, round: usize) -> Vec<f64> {
        let k = self.space.len();
        let mut counts = vec![0usize; k];
        let mut sums = vec![0.0; k];
        for obs in self.window.iter() {
            counts[obs.arm] += 1;
            sums[obs.arm] += obs.y;
        }
        let log_t = (round as f64 + 1.0).ln();
        counts
            .iter()
            .zip(&sums)
            .map(|(&n, &s)| {
                if n == 0 {
                    f64::INFINITY
                } else {
                    let n = n as f64;
                    s / n + self.params.bound * (self.params.xi * log_t / n).sqrt()
                }
            })
            .collect()
    }
}

impl Policy for SlidingUcb {
    fn name(&self) -> &str {
        &self.name
    }

    fn arm_space(&self) -> &ArmSpace {
        &self.space
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.space.coordinate(obs.arm)?;
        self.window.push(*obs);
        Ok(())
    }

    fn decide(&mut self, ctx: RoundContext, _rng: &mut StreamRng) -> Result<PolicyDecision> {
        Ok(PolicyDecision::from_index(self.index(ctx.round)))
    }
}
