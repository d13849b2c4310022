use rand::Rng;

use crate::error::Result;
use crate::rng::StreamRng;
use crate::space::{ArmSpace, Observation, Policy, PolicyDecision, Propensity, RoundContext};

/// Plays a uniformly random arm every round.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    name: String,
    space: ArmSpace,
}

impl RandomPolicy {
    pub fn new(space: ArmSpace) -> Self {
        Self { name: "random".into(), space }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn arm_space(&self) -> &ArmSpace {
        &self.space
    }

    fn observe(&mut self, _obs: &Observation) -> Result<()> {
        Ok(())
    }

    fn decide(&mut self, _ctx: RoundContext, rng: &mut StreamRng) -> Result<PolicyDecision> {
        let k = self.space.len();
        Ok(PolicyDecision { arm: rng.random_range(0..k), index_values: None, propensity: Propensity::UniformAll { k } })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_seeded_and_cover_arms() {
        let mut p = RandomPolicy::new(ArmSpace::grid(5).unwrap());
        let draw = |p: &mut RandomPolicy| {
            let mut rng = crate::rng::stream(&[42]);
            (0..200).map(|r| p.decide(RoundContext::new(r, 0.0), &mut rng).unwrap().arm).collect::<Vec<_>>()
        };
        let a = draw(&mut p);
        assert_eq!(a, draw(&mut p));
        for arm in 0..5 {
            assert!(a.contains(&arm));
        }
    }
}
