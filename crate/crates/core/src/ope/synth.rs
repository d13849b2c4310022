use rand::Rng;

use super::log::LoggedEvent;
use super::segment::ReplaySegment;
use crate::envgen::{FieldParams, FieldSampler};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::space::{ArmSpace, Observation, Policy, PolicyDecision, RoundContext};

/// A synthetic click log: user groups, each with its own drifting
/// click-through surface over `k` items, logged by a uniform policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub k: usize,
    pub groups: usize,
    pub events_per_group: usize,
    /// Item-axis correlation length on `[-1, 1]`. The default is about one
    /// item spacing, so neighbouring items are only loosely related.
    pub rho_x: f64,
    /// Time correlation length on `[0, 1]` (one group's whole log).
    pub rho_t: f64,
    pub alpha: f64,
    /// Click probability where the surface peaks.
    pub max_ctr: f64,
    /// Time-grid resolution; rates are interpolated between grid columns.
    pub time_points: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            k: 46,
            groups: 4,
            events_per_group: 25000,
            rho_x: 0.05,
            rho_t: 0.2,
            alpha: 3.0,
            max_ctr: 0.2,
            time_points: 200,
            seed: 0,
        }
    }
}

impl SynthParams {
    /// Click-rate tables `[group][event][item]` drawn from a Gaussian random
    /// field per group.
    pub fn rates(&self) -> Result<Vec<Vec<Vec<f64>>>> {
        if self.k < 2 || self.groups == 0 || self.events_per_group < 2 || self.time_points < 2 {
            return Err(Error::input(
                "synthetic log needs k >= 2, groups >= 1, events_per_group >= 2, time_points >= 2",
            ));
        }
        if !(self.max_ctr > 0.0 && self.max_ctr <= 1.0) {
            return Err(Error::input(format!("max_ctr must lie in (0, 1], got {}", self.max_ctr)));
        }
        let field = FieldParams {
            rho_x: self.rho_x,
            rho_t: self.rho_t,
            alpha: self.alpha,
            sigma_noise: 0.0,
            k: self.k,
            rounds: self.time_points,
            tau_s: 1.0 / (self.time_points - 1) as f64,
            seed: 0,
        };
        let sampler = FieldSampler::new(field)?;
        let n = self.events_per_group;
        let last = self.time_points - 1;
        (0..self.groups)
            .map(|g| {
                let surface = sampler.sample(rng::derive_seed(&[rng::tag::SYNTH, self.seed, g as u64]))?;
                Ok((0..n)
                    .map(|i| {
                        let pos = i as f64 / (n - 1) as f64 * last as f64;
                        let c0 = (pos.floor() as usize).min(last - 1);
                        let frac = pos - c0 as f64;
                        (0..self.k)
                            .map(|a| {
                                self.max_ctr * ((1.0 - frac) * surface.mean(a, c0) + frac * surface.mean(a, c0 + 1))
                            })
                            .collect()
                    })
                    .collect())
            })
            .collect()
    }
}

/// A uniformly logged Bernoulli click log together with the click rates
/// behind it, so true policy values are known.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLog {
    pub k: usize,
    pub events: Vec<LoggedEvent>,
    /// `rates[g][i][a]`: click probability of item `a` at group `g`'s event `i`.
    pub rates: Vec<Vec<Vec<f64>>>,
}

impl SyntheticLog {
    /// Mean click rate of always playing the best item (the oracle value).
    pub fn oracle_value(&self) -> f64 {
        self.mean_over_events(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Mean click rate of uniform play.
    pub fn uniform_value(&self) -> f64 {
        self.mean_over_events(|r| r.iter().sum::<f64>() / r.len() as f64)
    }

    fn mean_over_events(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let n: usize = self.rates.iter().map(Vec::len).sum();
        self.rates.iter().flatten().map(|r| f(r)).sum::<f64>() / n as f64
    }

    /// A target policy that knows the true rates of `segment`'s group.
    pub fn oracle_policy(&self, segment: &ReplaySegment) -> Result<Box<dyn Policy>> {
        let g = segment
            .key
            .first()
            .and_then(|k| k.strip_prefix('g'))
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|g| *g < self.rates.len())
            .ok_or_else(|| Error::input(format!("segment {:?} is not a synthetic group", segment.key)))?;
        Ok(Box::new(SynthOracle {
            space: segment.arm_space.clone(),
            rates: self.rates[g].clone(),
            arm_action: segment.arm_action.clone(),
        }))
    }
}

/// Plays the item with the highest true rate at the current event.
struct SynthOracle {
    space: ArmSpace,
    rates: Vec<Vec<f64>>,
    arm_action: Vec<usize>,
}

impl Policy for SynthOracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn arm_space(&self) -> &ArmSpace {
        &self.space
    }

    fn observe(&mut self, _obs: &Observation) -> Result<()> {
        Ok(())
    }

    fn decide(&mut self, ctx: RoundContext, _rng: &mut StreamRng) -> Result<PolicyDecision> {
        // Synthetic timestamps are event indices, so t maps back exactly.
        let i = (ctx.t * (self.rates.len() - 1) as f64).round() as usize;
        let row = &self.rates[i.min(self.rates.len() - 1)];
        let values: Vec<f64> = self.arm_action.iter().map(|&a| row[a]).collect();
        Ok(PolicyDecision::point(crate::space::argmax(&values)))
    }
}

/// Log `rates[g]` (one row of item click rates per event) with a uniform
/// logging policy. Timestamps are event indices within a group, the user
/// feature is `g{group}`, and item `a` carries item feature `a`.
pub fn synth_log_from_rates(rates: Vec<Vec<Vec<f64>>>, seed: u64) -> Result<SyntheticLog> {
    let k = rates.first().and_then(|g| g.first()).map_or(0, Vec::len);
    if k == 0 {
        return Err(Error::input("synthetic rates are empty"));
    }
    for r in rates.iter().flatten() {
        if r.len() != k {
            return Err(Error::input("synthetic rate rows differ in length"));
        }
        if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::input("synthetic click rates must lie in [0, 1]"));
        }
    }
    let pscore = 1.0 / k as f64;
    let mut events = Vec::with_capacity(rates.iter().map(Vec::len).sum());
    for (g, group) in rates.iter().enumerate() {
        let mut rng = rng::stream(&[rng::tag::SYNTH, seed, g as u64, 1]);
        for (i, r) in group.iter().enumerate() {
            let action = rng.random_range(0..k);
            let click = rng.random::<f64>() < r[action];
            events.push(LoggedEvent {
                timestamp: i as f64,
                action,
                reward: if click { 1.0 } else { 0.0 },
                pscore,
                user_features: vec![format!("g{g}")],
                item_feature: action as f64,
            });
        }
    }
    Ok(SyntheticLog { k, events, rates })
}

/// Generate the click log described by `params`.
pub fn synth_log(params: &SynthParams) -> Result<SyntheticLog> {
    synth_log_from_rates(params.rates()?, params.seed)
}
