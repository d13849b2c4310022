use std::sync::Arc;

use rayon::prelude::*;

use super::policies::{NamedPolicy, PolicyConfig};
use super::run::run_horizon;
use super::stats::log_log_slope;
use crate::envgen::{FieldParams, FieldSampler, PayoutField};
use crate::error::{Error, Result};
use crate::quickdraw::GammaMode;

#[derive(Debug, Clone, PartialEq)]
pub enum ScalingOutcome {
    Fitted {
        slope: f64,
        /// `(T, mean cumulative regret over seeds)`.
        points: Vec<(usize, f64)>,
    },
    /// Regret was not positive at some `T`, so no log-log fit exists.
    Skipped { reason: String },
}

impl ScalingOutcome {
    pub fn slope(&self) -> Option<f64> {
        match self {
            ScalingOutcome::Fitted { slope, .. } => Some(*slope),
            ScalingOutcome::Skipped { .. } => None,
        }
    }
}

/// Replace the Lipschitz constant of a theoretical gamma schedule with the
/// field's largest neighbouring-cell difference quotient.
pub fn with_empirical_lipschitz(policy: &NamedPolicy, field: &PayoutField) -> NamedPolicy {
    let mut p = policy.clone();
    if let PolicyConfig::QuickDraw(q) = &mut p.config {
        if let GammaMode::Theoretical { delta, .. } = q.gamma {
            q.gamma = GammaMode::Theoretical { lipschitz: field.empirical_lipschitz().max(f64::MIN_POSITIVE), delta };
        }
    }
    p
}

/// Fit the growth exponent of cumulative regret in `T` on time-invariant
/// fields. Each seed runs once to the largest `T`; prefixes give the
/// smaller horizons.
pub fn regret_scaling(
    field: FieldParams,
    policy: &NamedPolicy,
    t_values: &[usize],
    n_seeds: usize,
    seed_base: u64,
) -> Result<ScalingOutcome> {
    if t_values.len() < 2 || n_seeds == 0 {
        return Err(Error::input("regret scaling needs at least two horizons and one seed"));
    }
    let t_max = *t_values.iter().max().unwrap_or(&0);
    let params = FieldParams { rounds: t_max, rho_t: f64::INFINITY, ..field };
    let sampler = FieldSampler::new(params)?;
    let curves: Vec<Result<Vec<f64>>> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let seed = seed_base + i;
            let f = Arc::new(sampler.sample(seed)?);
            let p = with_empirical_lipschitz(policy, &f);
            Ok(run_horizon(&f, &p, 0, seed, t_max)?.cumulative_curve())
        })
        .collect();
    let curves = curves.into_iter().collect::<Result<Vec<_>>>()?;
    let points: Vec<(usize, f64)> =
        t_values.iter().map(|&t| (t, curves.iter().map(|c| c[t - 1]).sum::<f64>() / n_seeds as f64)).collect();
    if let Some((t, r)) = points.iter().find(|(_, r)| !(*r > 0.0)) {
        return Ok(ScalingOutcome::Skipped { reason: format!("mean cumulative regret {r} at T={t} is not positive") });
    }
    let (ts, rs): (Vec<f64>, Vec<f64>) = points.iter().map(|(t, r)| (*t as f64, *r)).unzip();
    let slope = log_log_slope(&ts, &rs).ok_or_else(|| Error::input("degenerate regret curve"))?;
    Ok(ScalingOutcome::Fitted { slope, points })
}
