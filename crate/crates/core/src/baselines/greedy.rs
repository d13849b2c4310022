use rand::Rng;

use super::window::Window;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::space::{ArmSpace, Observation, Policy, PolicyDecision, Propensity, RoundContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlidingGreedyParams {
    pub epsilon: f64,
    pub window: usize,
}

impl Default for SlidingGreedyParams {
    fn default() -> Self {
        Self { epsilon: 0.1, window: 100 }
    }
}

impl SlidingGreedyParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::input(format!("epsilon must lie in [0,1], got {}", self.epsilon)));
        }
        if self.window == 0 {
            return Err(Error::input("window must be at least 1"));
        }
        Ok(())
    }
}

/// One epsilon-greedy draw over a window: explore with probability
/// `epsilon`, otherwise play the arm of the largest reward in the window
/// (latest wins ties). An empty window always explores.
pub fn sliding_greedy_choice<'a>(
    window: impl DoubleEndedIterator<Item = &'a Observation>,
    k: usize,
    epsilon: f64,
    rng: &mut StreamRng,
) -> PolicyDecision {
    let mut greedy: Option<(usize, f64)> = None;
    for obs in window.rev() {
        if greedy.is_none_or(|(_, y)| obs.y > y) {
            greedy = Some((obs.arm, obs.y));
        }
    }
    let explore = rng.random::<f64>() < epsilon;
    match greedy {
        Some((g, _)) => {
            let arm = if explore { rng.random_range(0..k) } else { g };
            PolicyDecision { arm, index_values: None, propensity: Propensity::EpsilonMix { epsilon, greedy: g, k } }
        }
        None => {
            PolicyDecision { arm: rng.random_range(0..k), index_values: None, propensity: Propensity::UniformAll { k } }
        }
    }
}

/// Epsilon-greedy restricted to the last `window` observations.
#[derive(Debug, Clone)]
pub struct SlidingGreedy {
    name: String,
    space: ArmSpace,
    params: SlidingGreedyParams,
    window: Window,
}

impl SlidingGreedy {
    pub fn new(space: ArmSpace, params: SlidingGreedyParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { name: "greedy".into(), space, params, window: Window::new(params.window) })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl Policy for SlidingGreedy {
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

    fn decide(&mut self, _ctx: RoundContext, rng: &mut StreamRng) -> Result<PolicyDecision> {
        Ok(sliding_greedy_choice(self.window.iter(), self.space.len(), self.params.epsilon, rng))
    }
}
