use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::space::{ArmSpace, Observation, Policy, PolicyDecision, Propensity, RoundContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestlessParams {
    /// Drift scale per square-root round.
    pub sigma_r: f64,
}

impl Default for RestlessParams {
    fn default() -> Self {
        Self { sigma_r: 0.02 }
    }
}

impl RestlessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_r > 0.0 && self.sigma_r.is_finite()) {
            return Err(Error::input(format!("sigma_r must be positive, got {}", self.sigma_r)));
        }
        Ok(())
    }
}

/// `y_j + sigma_r * sqrt(dt) - y_leader`.
pub fn suspicion(last_y: f64, sigma_r: f64, rounds_since: f64, leader_y: f64) -> f64 {
    last_y + sigma_r * rounds_since.sqrt() - leader_y
}

#[derive(Debug, Clone, Copy)]
struct LastSeen {
    y: f64,
    round: usize,
}

/// Restless bandit: play the leader (highest last-observed payout) on even
/// rounds; on odd rounds play a uniformly drawn arm whose suspicion is
/// positive, falling back to the leader. Never-observed arms count as
/// infinitely suspicious.
#[derive(Debug, Clone)]
pub struct Restless {
    name: String,
    space: ArmSpace,
    params: RestlessParams,
    last: Vec<Option<LastSeen>>,
    clock: usize,
}

impl Restless {
    pub fn new(space: ArmSpace, params: RestlessParams) -> Result<Self> {
        params.validate()?;
        let k = space.len();
        Ok(Self { name: "restless".into(), space, params, last: vec![None; k], clock: 0 })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Highest last-observed payout; the most recently observed arm wins ties.
    pub fn leader(&self) -> Option<usize> {
        let mut best: Option<(usize, LastSeen)> = None;
        for (arm, seen) in self.last.iter().enumerate() {
            if let Some(s) = seen {
                let better = match best {
                    None => true,
                    Some((_, b)) => s.y > b.y || (s.y == b.y && s.round > b.round),
                };
                if better {
                    best = Some((arm, *s));
                }
            }
        }
        best.map(|(arm, _)| arm)
    }

    /// Arms with positive suspicion at `round`.
    pub fn candidates(&self, round: usize) -> Vec<usize> {
        let Some(leader) = self.leader() else {
            return (0..self.space.len()).collect();
        };
        let leader_y = self.last[leader].map_or(0.0, |s| s.y);
        self.last
            .iter()
            .enumerate()
            .filter(|(_, seen)| match seen {
                None => true,
                Some(s) => {
                    let dt = round.saturating_sub(s.round) as f64;
                    suspicion(s.y, self.params.sigma_r, dt, leader_y) > 0.0
                }
            })
            .map(|(arm, _)| arm)
            .collect()
    }
}

impl Policy for Restless {
    fn name(&self) -> &str {
        &self.name
    }

    fn arm_space(&self) -> &ArmSpace {
        &self.space
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.space.coordinate(obs.arm)?;
        self.last[obs.arm] = Some(LastSeen { y: obs.y, round: self.clock });
        self.clock += 1;
        Ok(())
    }

    fn decide(&mut self, ctx: RoundContext, rng: &mut StreamRng) -> Result<PolicyDecision> {
        let k = self.space.len();
        let Some(leader) = self.leader() else {
            return Ok(PolicyDecision {
                arm: rng.random_range(0..k),
                index_values: None,
                propensity: Propensity::UniformAll { k },
            });
        };
        if ctx.round % 2 == 0 {
            return Ok(PolicyDecision::point(leader));
        }
        let candidates = self.candidates(ctx.round);
        match candidates.choose(rng) {
            Some(&arm) => {
                Ok(PolicyDecision { arm, index_values: None, propensity: Propensity::UniformOver(candidates) })
            }
            None => Ok(PolicyDecision::point(leader)),
        }
    }
}
