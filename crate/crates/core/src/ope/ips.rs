use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::segment::ReplaySegment;
use crate::error::{Error, Result};
use crate::harness::{stats, NamedPolicy, PolicyConfig};
use crate::rng::{self, label_hash};
use crate::space::{Observation, Policy, RoundContext};

/// Which logged events the target policy learns from during replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// Every logged event, whatever the policy chose.
    #[default]
    All,
    /// Only events whose logged action matches the policy's sampled action.
    Matched,
}

impl UpdateRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(UpdateRule::All),
            "matched" => Ok(UpdateRule::Matched),
            other => Err(Error::input(format!("unknown update rule: {other} (expected all|matched)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpsOptions {
    pub n_trials: usize,
    pub seed: u64,
    pub update: UpdateRule,
    /// Clip importance weights at this value, if set.
    pub max_weight: Option<f64>,
}

impl Default for IpsOptions {
    fn default() -> Self {
        Self { n_trials: 10, seed: 0, update: UpdateRule::All, max_weight: None }
    }
}

/// One line of the per-trial OPE table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpsTrialRow {
    pub policy: String,
    pub trial: usize,
    #[serde(rename = "V_hat")]
    pub v_hat: f64,
}

/// One line of the OPE summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpsSummaryRow {
    pub policy: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpsEstimate {
    pub policy: String,
    /// One policy-value estimate per trial.
    pub trials: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub events: usize,
}

impl IpsEstimate {
    pub fn trial_rows(&self) -> Vec<IpsTrialRow> {
        self.trials
            .iter()
            .enumerate()
            .map(|(trial, v)| IpsTrialRow { policy: self.policy.clone(), trial, v_hat: *v })
            .collect()
    }

    pub fn summary_row(&self) -> IpsSummaryRow {
        IpsSummaryRow { policy: self.policy.clone(), mean: self.mean, std: self.std }
    }
}

/// Trials coincide when the replayed history cannot depend on the rng: either
/// every event is observed (the estimator already uses full propensities),
/// or the policy never randomizes.
fn trials_coincide(config: &PolicyConfig, update: UpdateRule) -> bool {
    update == UpdateRule::All
        || matches!(config, PolicyConfig::QuickDraw(_) | PolicyConfig::SwGpUcb(_) | PolicyConfig::SlidingUcb(_))
}

/// Builds a fresh target policy for a segment (called once per interval).
pub type PolicyFactory<'a> = dyn Fn(&ReplaySegment) -> Result<Box<dyn Policy>> + Sync + 'a;

/// Sum of `pi(a_log) / pscore * r` over one segment for one trial.
fn replay_segment(
    label: &str,
    make: &PolicyFactory<'_>,
    seg: &ReplaySegment,
    trial: usize,
    opts: &IpsOptions,
) -> Result<f64> {
    let seg_hash = label_hash(&seg.key.join("\u{1f}"));
    let mut rng = rng::stream(&[rng::tag::TRIAL, opts.seed, trial as u64, seg_hash, label_hash(label)]);
    let mut total = 0.0;
    for range in &seg.intervals {
        let mut p = make(seg)?;
        for (round, i) in range.clone().enumerate() {
            let ev = &seg.events[i];
            let t = seg.times[i];
            let logged_arm = seg.event_arm[i];
            let decision = p.decide(RoundContext { round, t }, &mut rng)?;
            let pi = if seg.arm_action[logged_arm] == ev.action { decision.propensity.prob(logged_arm) } else { 0.0 };
            let mut w = pi / ev.pscore;
            if let Some(cap) = opts.max_weight {
                w = w.min(cap);
            }
            total += w * ev.reward;
            let learn = match opts.update {
                UpdateRule::All => true,
                UpdateRule::Matched => seg.arm_action[decision.arm] == ev.action,
            };
            if learn {
                let obs = Observation { arm: logged_arm, x: seg.arm_space.coordinate(logged_arm)?, t, y: ev.reward };
                p.observe(&obs)?;
            }
        }
    }
    Ok(total)
}

/// Replay an arbitrary policy. `deterministic` promises that the policy's
/// state never depends on its rng draws, so one trial stands for all.
pub fn ips_evaluate_with(
    label: &str,
    make: &PolicyFactory<'_>,
    deterministic: bool,
    segments: &[ReplaySegment],
    opts: &IpsOptions,
) -> Result<IpsEstimate> {
    if opts.n_trials == 0 {
        return Err(Error::input("n_trials must be at least 1"));
    }
    if let Some(cap) = opts.max_weight {
        if !(cap > 0.0) {
            return Err(Error::input(format!("max_weight must be positive, got {cap}")));
        }
    }
    let events: usize = segments.iter().map(|s| s.events.len()).sum();
    if events == 0 {
        return Err(Error::input("no events to evaluate"));
    }
    let distinct = if deterministic { 1 } else { opts.n_trials };
    let jobs: Vec<(usize, usize)> = (0..distinct).flat_map(|tr| (0..segments.len()).map(move |s| (tr, s))).collect();
    let partials = jobs
        .par_iter()
        .map(|&(tr, s)| replay_segment(label, make, &segments[s], tr, opts))
        .collect::<Result<Vec<f64>>>()?;
    let values: Vec<f64> =
        partials.chunks(segments.len().max(1)).map(|c| c.iter().sum::<f64>() / events as f64).collect();
    let trials: Vec<f64> = (0..opts.n_trials).map(|tr| values[tr.min(distinct - 1)]).collect();
    let (mean, std) = stats::mean_std(&trials);
    Ok(IpsEstimate { policy: label.to_string(), trials, mean, std, events })
}

/// Inverse-propensity estimate of `policy`'s value on the segmented log,
/// replayed `n_trials` times. Partial sums are combined in segment order.
pub fn ips_evaluate(policy: &NamedPolicy, segments: &[ReplaySegment], opts: &IpsOptions) -> Result<IpsEstimate> {
    if matches!(policy.config, PolicyConfig::Oracle) {
        return Err(Error::input("the oracle policy needs the true payout field, which a log does not carry"));
    }
    let make = |seg: &ReplaySegment| policy.build(&seg.arm_space, None);
    ips_evaluate_with(&policy.name, &make, trials_coincide(&policy.config, opts.update), segments, opts)
}
