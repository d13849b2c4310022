use std::sync::Arc;

use crate::baselines::{
    GpParams, RandomPolicy, Restless, RestlessParams, SlidingGreedy, SlidingGreedyParams, SlidingUcb, SlidingUcbParams,
    SwGpUcb,
};
use crate::envgen::PayoutField;
use crate::error::{Error, Result};
use crate::quickdraw::{QuickDraw, QuickDrawParams};
use crate::rng::StreamRng;
use crate::space::{ArmSpace, Observation, Policy, PolicyDecision, RoundContext};

/// Which policy to build, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyConfig {
    Random,
    QuickDraw(QuickDrawParams),
    Greedy(SlidingGreedyParams),
    Restless(RestlessParams),
    SwGpUcb(GpParams),
    SlidingUcb(SlidingUcbParams),
    /// Plays the true best arm; needs the payout field.
    Oracle,
}

impl PolicyConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            PolicyConfig::Random => "random",
            PolicyConfig::QuickDraw(_) => "quickdraw",
            PolicyConfig::Greedy(_) => "greedy",
            PolicyConfig::Restless(_) => "restless",
            PolicyConfig::SwGpUcb(_) => "sw_gp_ucb",
            PolicyConfig::SlidingUcb(_) => "sliding_ucb",
            PolicyConfig::Oracle => "oracle",
        }
    }

    /// Default-parameter config for a policy kind name.
    pub fn from_kind(kind: &str) -> Result<Self> {
        Ok(match kind {
            "random" => PolicyConfig::Random,
            "quickdraw" => PolicyConfig::QuickDraw(QuickDrawParams::default()),
            "greedy" => PolicyConfig::Greedy(SlidingGreedyParams::default()),
            "restless" => PolicyConfig::Restless(RestlessParams::default()),
            "sw_gp_ucb" => PolicyConfig::SwGpUcb(GpParams::default()),
            "sliding_ucb" => PolicyConfig::SlidingUcb(SlidingUcbParams::default()),
            "oracle" => PolicyConfig::Oracle,
            other => return Err(Error::input(format!("unknown policy: {other}"))),
        })
    }
}

/// A policy config under a display name (used for CSV rows and stream keys).
#[derive(Debug, Clone, PartialEq)]
pub struct NamedPolicy {
    pub name: String,
    pub config: PolicyConfig,
}

impl NamedPolicy {
    pub fn new(name: impl Into<String>, config: PolicyConfig) -> Self {
        Self { name: name.into(), config }
    }

    pub fn default_for(kind: &str) -> Result<Self> {
        Ok(Self::new(kind, PolicyConfig::from_kind(kind)?))
    }

    /// Instantiate on `space`. The oracle needs `field`.
    pub fn build(&self, space: &ArmSpace, field: Option<&Arc<PayoutField>>) -> Result<Box<dyn Policy>> {
        let space = space.clone();
        let name = self.name.clone();
        Ok(match &self.config {
            PolicyConfig::Random => Box::new(RandomPolicy::new(space).with_name(name)),
            PolicyConfig::QuickDraw(p) => Box::new(QuickDraw::new(space, *p)?.with_name(name)),
            PolicyConfig::Greedy(p) => Box::new(SlidingGreedy::new(space, *p)?.with_name(name)),
            PolicyConfig::Restless(p) => Box::new(Restless::new(space, *p)?.with_name(name)),
            PolicyConfig::SwGpUcb(p) => Box::new(SwGpUcb::new(space, p.clone())?.with_name(name)),
            PolicyConfig::SlidingUcb(p) => Box::new(SlidingUcb::new(space, *p)?.with_name(name)),
            PolicyConfig::Oracle => {
                let field = field.ok_or_else(|| Error::input("the oracle policy needs a payout field"))?;
                Box::new(OraclePolicy { name, space, field: Arc::clone(field) })
            }
        })
    }
}

/// Plays `argmax_x mu(x, round)` using the true field.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    name: String,
    space: ArmSpace,
    field: Arc<PayoutField>,
}

impl Policy for OraclePolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn arm_space(&self) -> &ArmSpace {
        &self.space
    }

    fn observe(&mut self, _obs: &Observation) -> Result<()> {
        Ok(())
    }

    fn decide(&mut self, ctx: RoundContext, _rng: &mut StreamRng) -> Result<PolicyDecision> {
        let (arm, _) = self.field.oracle_best(ctx.round)?;
        Ok(PolicyDecision::point(arm))
    }
}
