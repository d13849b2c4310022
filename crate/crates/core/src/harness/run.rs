use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policies::{NamedPolicy, PolicyConfig};
use super::stats::mean_std;
use crate::envgen::{FieldParams, FieldSampler, PayoutField};
use crate::error::{Error, Result};
use crate::rng::{self, label_hash, tag};
use crate::space::RoundContext;

/// One experiment: a field family, the policies to compare and the seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub field: FieldParams,
    pub policies: Vec<NamedPolicy>,
    pub warmup_rounds: usize,
    pub n_seeds: usize,
    pub seed_base: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            field: FieldParams::default(),
            policies: ["quickdraw", "greedy", "restless", "sw_gp_ucb", "random"]
                .iter()
                .map(|k| NamedPolicy::default_for(k).expect("built-in policy"))
                .collect(),
            warmup_rounds: 100,
            n_seeds: 20,
            seed_base: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        if self.warmup_rounds >= self.field.rounds {
            return Err(Error::input(format!(
                "warmup_rounds ({}) must be smaller than T ({})",
                self.warmup_rounds, self.field.rounds
            )));
        }
        if self.n_seeds == 0 {
            return Err(Error::input("n_seeds must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(Error::input("no policies configured"));
        }
        let mut names: Vec<&str> = self.policies.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("policy names must be unique"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_seeds as u64).map(move |i| self.seed_base + i)
    }
}

/// Everything recorded for one policy on one field.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub policy: String,
    pub seed: u64,
    pub warmup_rounds: usize,
    pub arms: Vec<usize>,
    pub rewards: Vec<f64>,
    /// `mu(x*_t, t) - mu(x_t, t)` for every round, warm-up included.
    pub regrets: Vec<f64>,
    pub times: Vec<f64>,
    /// Seconds spent in the policy's decide + observe per round.
    pub wall_seconds: Vec<f64>,
}

impl RunResult {
    /// Sum of regrets after the warm-up.
    pub fn cumulative_regret(&self) -> f64 {
        self.regrets[self.warmup_rounds..].iter().sum()
    }

    /// Cumulative post-warm-up regret divided by the number of post-warm-up rounds.
    pub fn mean_regret(&self) -> f64 {
        self.cumulative_regret() / (self.regrets.len() - self.warmup_rounds) as f64
    }

    pub fn total_wall_seconds(&self) -> f64 {
        self.wall_seconds.iter().sum()
    }

    /// Post-warm-up cumulative regret after each round.
    pub fn cumulative_curve(&self) -> Vec<f64> {
        self.regrets[self.warmup_rounds..]
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    pub fn trace_rows(&self) -> Vec<TraceRow> {
        (0..self.arms.len())
            .map(|r| TraceRow {
                round: r,
                t: self.times[r],
                arm: self.arms[r],
                y: self.rewards[r],
                regret: self.regrets[r],
            })
            .collect()
    }
}

/// Warm-up arm sequence for a seed: shared by every policy.
pub fn warmup_arms(seed: u64, k: usize, rounds: usize) -> Vec<usize> {
    let mut rng = rng::stream(&[tag::WARMUP, seed]);
    (0..rounds).map(|_| rng.random_range(0..k)).collect()
}

/// Roll one policy over a field. The first `warmup_rounds` rounds play the
/// shared random warm-up sequence and still feed the policy; afterwards the
/// policy chooses. Noise is keyed by (seed, policy name, round).
pub fn run_once(field: &Arc<PayoutField>, policy: &NamedPolicy, warmup_rounds: usize, seed: u64) -> Result<RunResult> {
    run_horizon(field, policy, warmup_rounds, seed, field.rounds())
}

/// [`run_once`] over the first `rounds` rounds of the field only.
pub fn run_horizon(
    field: &Arc<PayoutField>,
    policy: &NamedPolicy,
    warmup_rounds: usize,
    seed: u64,
    rounds: usize,
) -> Result<RunResult> {
    let k = field.k();
    if rounds > field.rounds() {
        return Err(Error::input(format!("horizon {rounds} exceeds the field's {} rounds", field.rounds())));
    }
    if warmup_rounds > rounds {
        return Err(Error::input("warm-up longer than the horizon"));
    }
    let space = field.arm_space();
    let mut instance = policy.build(space, Some(field))?;
    let name_key = label_hash(&policy.name);
    let mut policy_rng = rng::stream(&[tag::POLICY, seed, name_key]);
    let warm = warmup_arms(seed, k, warmup_rounds);

    let mut out = RunResult {
        policy: policy.name.clone(),
        seed,
        warmup_rounds,
        arms: Vec::with_capacity(rounds),
        rewards: Vec::with_capacity(rounds),
        regrets: Vec::with_capacity(rounds),
        times: Vec::with_capacity(rounds),
        wall_seconds: Vec::with_capacity(rounds),
    };
    let at = |round: usize| move |e: Error| Error::AtRound { round, source: Box::new(e) };

    for round in 0..rounds {
        let t = field.params().time_of(round);
        let start = Instant::now();
        let arm = if round < warmup_rounds {
            warm[round]
        } else {
            let d = instance.decide(RoundContext::new(round, t), &mut policy_rng).map_err(at(round))?;
            if d.arm >= k {
                return Err(at(round)(Error::state(format!("policy chose arm {} of {k}", d.arm))));
            }
            d.arm
        };
        let decide_secs = start.elapsed().as_secs_f64();
        let mut noise = rng::stream(&[tag::NOISE, seed, name_key, round as u64]);
        let y = field.observe(arm, round, &mut noise).map_err(at(round))?;
        let obs = space.observation(arm, t, y).map_err(at(round))?;
        let start = Instant::now();
        instance.observe(&obs).map_err(at(round))?;
        let observe_secs = start.elapsed().as_secs_f64();

        let (_, best) = field.oracle_best(round)?;
        out.arms.push(arm);
        out.rewards.push(y);
        out.regrets.push(best - field.mean(arm, round));
        out.times.push(t);
        out.wall_seconds.push(decide_secs + observe_secs);
    }
    Ok(out)
}

/// One (policy, seed) line of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub policy: String,
    pub seed: u64,
    pub mean_regret: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub n: usize,
    pub mean_regret: f64,
    pub std: f64,
}

impl PolicySummary {
    pub fn std_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }

    /// Gap `other - self` in units of the pooled standard error.
    pub fn gap_in_std_errors(&self, other: &PolicySummary) -> f64 {
        let pooled = (self.std_error().powi(2) + other.std_error().powi(2)).sqrt();
        (other.mean_regret - self.mean_regret) / pooled
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    /// Ordered by seed, then by configured policy order.
    pub rows: Vec<EnsembleRow>,
    /// In configured policy order.
    pub summary: Vec<PolicySummary>,
}

impl EnsembleResult {
    pub fn summary_for(&self, policy: &str) -> Option<&PolicySummary> {
        self.summary.iter().find(|s| s.policy == policy)
    }

    pub fn regrets_for(&self, policy: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.policy == policy).map(|r| r.mean_regret).collect()
    }
}

/// Run every policy on every seed's field. Seeds and policies run in
/// parallel; results are gathered in seed order.
pub fn run_ensemble(config: &ExperimentConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let sampler = FieldSampler::new(config.field)?;
    run_ensemble_with(config, &sampler)
}

pub(crate) fn run_ensemble_with(config: &ExperimentConfig, sampler: &FieldSampler) -> Result<EnsembleResult> {
    let seeds: Vec<u64> = config.seeds().collect();
    let per_seed: Vec<Result<Vec<EnsembleRow>>> = seeds
        .par_iter()
        .map(|&seed| {
            let wrap = |e: Error| Error::AtSeed { seed, source: Box::new(e) };
            let field = Arc::new(sampler.sample(seed).map_err(wrap)?);
            config
                .policies
                .par_iter()
                .map(|p| {
                    let r = run_once(&field, p, config.warmup_rounds, seed).map_err(wrap)?;
                    Ok(EnsembleRow {
                        policy: p.name.clone(),
                        seed,
                        mean_regret: r.mean_regret(),
                        wall_time: r.total_wall_seconds(),
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(seeds.len() * config.policies.len());
    for r in per_seed {
        rows.extend(r?);
    }
    let summary = config
        .policies
        .iter()
        .map(|p| {
            let vals: Vec<f64> = rows.iter().filter(|r| r.policy == p.name).map(|r| r.mean_regret).collect();
            let (mean_regret, std) = mean_std(&vals);
            PolicySummary { policy: p.name.clone(), n: vals.len(), mean_regret, std }
        })
        .collect();
    Ok(EnsembleResult { rows, summary })
}

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    SigmaNoise,
    Alpha,
    RhoX,
    RhoT,
    EllX,
    EllT,
}

impl SweepVariable {
    pub const ALL: [SweepVariable; 6] = [
        SweepVariable::SigmaNoise,
        SweepVariable::Alpha,
        SweepVariable::RhoX,
        SweepVariable::RhoT,
        SweepVariable::EllX,
        SweepVariable::EllT,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::SigmaNoise => "sigma_noise",
            SweepVariable::Alpha => "alpha",
            SweepVariable::RhoX => "rho_x",
            SweepVariable::RhoT => "rho_t",
            SweepVariable::EllX => "ell_x",
            SweepVariable::EllT => "ell_t",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::input(format!("unknown sweep variable: {s}")))
    }

    /// A copy of `config` with this variable set to `value`. Quick-Draw
    /// bandwidths apply to every Quick-Draw policy in the config.
    pub fn apply(&self, config: &ExperimentConfig, value: f64) -> ExperimentConfig {
        let mut c = config.clone();
        match self {
            SweepVariable::SigmaNoise => c.field.sigma_noise = value,
            SweepVariable::Alpha => c.field.alpha = value,
            SweepVariable::RhoX => c.field.rho_x = value,
            SweepVariable::RhoT => c.field.rho_t = value,
            SweepVariable::EllX | SweepVariable::EllT => {
                for p in &mut c.policies {
                    if let PolicyConfig::QuickDraw(q) = &mut p.config {
                        if *self == SweepVariable::EllX {
                            q.ell_x = value;
                        } else {
                            q.ell_t = value;
                        }
                    }
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variable: String,
    pub value: f64,
    pub policy: String,
    pub mean_regret: f64,
    pub std: f64,
}

/// One ensemble per value.
pub fn run_sweep(config: &ExperimentConfig, variable: SweepVariable, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::input("sweep needs at least one value"));
    }
    let field_var = matches!(
        variable,
        SweepVariable::SigmaNoise | SweepVariable::Alpha | SweepVariable::RhoX | SweepVariable::RhoT
    );
    // Bandwidth sweeps share one sampler across values.
    let shared = if field_var { None } else { Some(FieldSampler::new(config.field)?) };
    let mut rows = Vec::new();
    for &value in values {
        let c = variable.apply(config, value);
        c.validate()?;
        let ens = match &shared {
            Some(s) => run_ensemble_with(&c, s)?,
            None => run_ensemble(&c)?,
        };
        rows.extend(ens.summary.into_iter().map(|s| SweepRow {
            variable: variable.name().to_string(),
            value,
            policy: s.policy,
            mean_regret: s.mean_regret,
            std: s.std,
        }));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub t: f64,
    pub arm: usize,
    pub y: f64,
    pub regret: f64,
}
