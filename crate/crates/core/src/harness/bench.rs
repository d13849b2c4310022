use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::policies::{NamedPolicy, PolicyConfig};
use super::run::run_horizon;
use super::stats::log_log_slope;
use crate::baselines::{GpParams, HyperOpt};
use crate::envgen::{sample_field, FieldParams};
use crate::error::{Error, Result};
use crate::quickdraw::QuickDrawParams;

/// Stop repeating a timing once this much time has been spent on it.
const REPEAT_BUDGET_SECS: f64 = 1.0;
const MAX_REPEATS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub policy: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub cumulative_seconds: f64,
    /// This policy's time over Quick-Draw's at the same `T`.
    pub ratio: f64,
}

/// Quick-Draw in stationary cached mode and textbook exact GP-UCB (one
/// kernel row per observation) on the full history.
pub fn bench_policies() -> Vec<NamedPolicy> {
    vec![
        NamedPolicy::new("quickdraw", PolicyConfig::QuickDraw(QuickDrawParams::stationary())),
        NamedPolicy::new(
            "gp_ucb",
            PolicyConfig::SwGpUcb(GpParams {
                window: None,
                hyperopt: HyperOpt::None,
                merge_duplicates: false,
                ..GpParams::default()
            }),
        ),
    ]
}

/// Cumulative decide + observe time over `T` rounds on a stationary field,
/// for each `T`. Cheap runs are repeated and the fastest kept.
pub fn bench_runtime(k: usize, t_values: &[usize], seed: u64, policies: &[NamedPolicy]) -> Result<Vec<BenchRow>> {
    if t_values.is_empty() {
        return Err(Error::input("benchmark needs at least one T"));
    }
    let t_max = *t_values.iter().max().unwrap_or(&1);
    let params = FieldParams { k, rounds: t_max, rho_t: f64::INFINITY, seed, ..FieldParams::default() };
    let field = Arc::new(sample_field(&params)?);
    let mut rows = Vec::new();
    for &t in t_values {
        let mut times = Vec::with_capacity(policies.len());
        for p in policies {
            let mut best = f64::INFINITY;
            let mut spent = 0.0;
            for _ in 0..MAX_REPEATS {
                let secs = run_horizon(&field, p, 0, seed, t)?.total_wall_seconds();
                best = best.min(secs);
                spent += secs;
                if spent > REPEAT_BUDGET_SECS {
                    break;
                }
            }
            times.push(best);
        }
        let reference = policies.iter().position(|p| matches!(p.config, PolicyConfig::QuickDraw(_))).map(|i| times[i]);
        for (p, secs) in policies.iter().zip(&times) {
            rows.push(BenchRow {
                policy: p.name.clone(),
                t,
                cumulative_seconds: *secs,
                ratio: reference.map_or(f64::NAN, |r| secs / r),
            });
        }
    }
    Ok(rows)
}

/// Log-log growth exponent of a policy's cumulative time in `T`.
pub fn runtime_exponent(rows: &[BenchRow], policy: &str) -> Option<f64> {
    let (ts, secs): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.policy == policy).map(|r| (r.t as f64, r.cumulative_seconds)).unzip();
    log_log_slope(&ts, &secs)
}
