//! The Quick-Draw policy.
//!
//! Every past observation `(x_s, t_s, y_s)` contributes a Gaussian belief
//! about the payout at `(x, t)` centred on `y_s`, with variance
//!
//! ```text
//! sigma_s^2(x, t) = rho^2 + (D(x, x_s) / ell_x)^2 + ((t - t_s) / ell_t)^2
//! ```
//!
//! The product of these beliefs is Gaussian with precision equal to the sum
//! of the per-observation precisions `nu_s = 1 / sigma_s^2` and mean equal to
//! the precision-weighted average of the rewards (a Nadaraya-Watson
//! interpolation). The policy plays the arm maximizing
//! `min(mu_hat + gamma * Sigma_hat, 1)`.
//!
//! In stationary mode (`ell_t = inf`) the precisions never change once
//! observed, so per-arm running sums make each update O(K). With a finite
//! `ell_t` every precision decays with lag and the posterior is recomputed
//! from the full history each round, O(K * T).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::space::{ArmSpace, Observation, Policy, PolicyDecision, RoundContext};

/// Below this many `arm x observation` terms the posterior is evaluated serially.
const PARALLEL_WORK_THRESHOLD: usize = 1 << 16;

/// How the exploration multiplier is chosen each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    Fixed(f64),
    /// `2L + 4 C1 ln^2(2T^2/delta)`, evaluated at `T + 1` after `T` observations.
    Theoretical {
        lipschitz: f64,
        delta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuickDrawParams {
    pub ell_x: f64,
    /// `f64::INFINITY` selects stationary mode.
    pub ell_t: f64,
    pub rho2: f64,
    pub gamma: GammaMode,
    /// Skip observations whose scaled lag `(t - t_s) / ell_t` exceeds this.
    pub truncation: Option<f64>,
    /// Upper clip of the index. The payout bound is 1.
    pub ceiling: f64,
}

impl Default for QuickDrawParams {
    fn default() -> Self {
        Self { ell_x: 1.0, ell_t: 1.0, rho2: 1e-7, gamma: GammaMode::Fixed(2.0), truncation: None, ceiling: 1.0 }
    }
}

impl QuickDrawParams {
    pub fn stationary() -> Self {
        Self { ell_t: f64::INFINITY, ..Self::default() }
    }

    pub fn is_stationary(&self) -> bool {
        self.ell_t.is_infinite()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ell_x > 0.0 && self.ell_x.is_finite()) {
            return Err(Error::input(format!("ell_x must be positive, got {}", self.ell_x)));
        }
        if !(self.ell_t > 0.0) {
            return Err(Error::input(format!("ell_t must be positive, got {}", self.ell_t)));
        }
        if !(self.rho2 > 0.0 && self.rho2.is_finite()) {
            return Err(Error::input(format!("rho2 must be positive, got {}", self.rho2)));
        }
        match self.gamma {
            GammaMode::Fixed(g) if !(g > 0.0 && g.is_finite()) => {
                return Err(Error::input(format!("gamma must be positive, got {g}")));
            }
            GammaMode::Theoretical { lipschitz, delta } => {
                if !(lipschitz > 0.0) {
                    return Err(Error::input(format!("L must be positive, got {lipschitz}")));
                }
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::input(format!("delta must lie in (0,1), got {delta}")));
                }
            }
            GammaMode::Fixed(_) => {}
        }
        if let Some(c) = self.truncation {
            if !(c > 0.0) {
                return Err(Error::input(format!("truncation must be positive, got {c}")));
            }
        }
        if self.ceiling.is_nan() {
            return Err(Error::input("ceiling must not be NaN"));
        }
        Ok(())
    }
}

/// Per-observation variance at a query point. `distance` is normalized and
/// `lag = t_query - t_s`.
#[inline]
pub fn sigma_hat_sq(params: &QuickDrawParams, distance: f64, lag: f64) -> f64 {
    let space = distance / params.ell_x;
    let mut v = params.rho2 + space * space;
    if !params.is_stationary() {
        let time = lag / params.ell_t;
        v += time * time;
    }
    v
}

/// `2L + 4 C1 ln^2(2T^2/delta)` with `C1 = sqrt(rho^2 + 1/ell_x^2) / rho^2`.
pub fn gamma_schedule(lipschitz: f64, delta: f64, round: usize, params: &QuickDrawParams) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!("delta must lie in (0,1), got {delta}")));
    }
    if round == 0 {
        return Err(Error::input("gamma schedule is defined for T >= 1"));
    }
    if !(lipschitz >= 0.0) {
        return Err(Error::input(format!("L must be non-negative, got {lipschitz}")));
    }
    Ok(gamma_schedule_unchecked(lipschitz, delta, round as f64, params.rho2, params.ell_x))
}

/// The schedule as a plain scalar formula (no domain checks on `delta`).
pub fn gamma_schedule_unchecked(lipschitz: f64, delta: f64, round: f64, rho2: f64, ell_x: f64) -> f64 {
    let c1 = (rho2 + 1.0 / (ell_x * ell_x)).sqrt() / rho2;
    let log = (2.0 * round * round / delta).ln();
    2.0 * lipschitz + 4.0 * c1 * log * log
}

/// Posterior mean and standard deviation per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub mu_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub t_query: f64,
}

impl PosteriorSummary {
    /// The empty-history convention: centre of the payout range, infinite spread.
    pub fn uninformed(k: usize, t_query: f64) -> Self {
        Self { mu_hat: vec![0.5; k], sigma_hat: vec![f64::INFINITY; k], t_query }
    }
}

/// `min(mu_hat + gamma * Sigma_hat, ceiling)` per arm.
pub fn ucb_index(summary: &PosteriorSummary, gamma: f64, ceiling: f64) -> Vec<f64> {
    summary.mu_hat.iter().zip(&summary.sigma_hat).map(|(mu, sigma)| (mu + gamma * sigma).min(ceiling)).collect()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// The Quick-Draw policy state.
#[derive(Debug, Clone)]
pub struct QuickDraw {
    name: String,
    space: ArmSpace,
    params: QuickDrawParams,
    history: Vec<Observation>,
    // Stationary mode only: per-arm sum of precisions and of precision * reward.
    precision_sums: Vec<CompensatedSum>,
    weighted_sums: Vec<CompensatedSum>,
    // Range of observed rewards, so rounding cannot push a mean outside it.
    y_range: (f64, f64),
}

impl QuickDraw {
    pub fn new(space: ArmSpace, params: QuickDrawParams) -> Result<Self> {
        params.validate()?;
        let k = space.len();
        Ok(Self {
            name: "quickdraw".to_string(),
            space,
            params,
            history: Vec::new(),
            precision_sums: vec![CompensatedSum::default(); k],
            weighted_sums: vec![CompensatedSum::default(); k],
            y_range: (f64::INFINITY, f64::NEG_INFINITY),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn params(&self) -> &QuickDrawParams {
        &self.params
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    /// Exploration multiplier used after `history.len()` observations.
    pub fn current_gamma(&self) -> Result<f64> {
        match self.params.gamma {
            GammaMode::Fixed(g) => Ok(g),
            GammaMode::Theoretical { lipschitz, delta } => {
                gamma_schedule(lipschitz, delta, self.history.len() + 1, &self.params)
            }
        }
    }

    /// Posterior over all arms at `t_query`.
    pub fn posterior(&self, t_query: f64) -> PosteriorSummary {
        let k = self.space.len();
        if self.history.is_empty() {
            return PosteriorSummary::uninformed(k, t_query);
        }
        if self.params.is_stationary() {
            let (mu_hat, sigma_hat) = self
                .precision_sums
                .iter()
                .zip(&self.weighted_sums)
                .map(|(p, w)| {
                    let precision = p.value();
                    ((w.value() / precision).clamp(self.y_range.0, self.y_range.1), (1.0 / precision).sqrt())
                })
                .unzip();
            return PosteriorSummary { mu_hat, sigma_hat, t_query };
        }

        let coords = self.space.coordinates();
        let per_arm = |x: &f64| self.point_posterior(*x, t_query);
        let pairs: Vec<(f64, f64)> = if k * self.history.len() >= PARALLEL_WORK_THRESHOLD {
            coords.par_iter().map(per_arm).collect()
        } else {
            coords.iter().map(per_arm).collect()
        };
        let (mu_hat, sigma_hat) = pairs.into_iter().unzip();
        PosteriorSummary { mu_hat, sigma_hat, t_query }
    }

    /// Posterior at an arbitrary coordinate, recomputed from the history.
    pub fn point_posterior(&self, x: f64, t_query: f64) -> (f64, f64) {
        let mut precision = CompensatedSum::default();
        let mut weighted = CompensatedSum::default();
        let cutoff = self.params.truncation;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for obs in &self.history {
            let lag = t_query - obs.t;
            if let Some(c) = cutoff {
                if !self.params.is_stationary() && lag / self.params.ell_t > c {
                    continue;
                }
            }
            let nu = 1.0 / sigma_hat_sq(&self.params, self.space.distance_to(x, obs.x), lag);
            precision.add(nu);
            weighted.add(nu * obs.y);
            lo = lo.min(obs.y);
            hi = hi.max(obs.y);
        }
        let p = precision.value();
        if p > 0.0 {
            ((weighted.value() / p).clamp(lo, hi), (1.0 / p).sqrt())
        } else {
            (0.5, f64::INFINITY)
        }
    }

    pub fn index(&self, t_query: f64) -> Result<Vec<f64>> {
        let gamma = self.current_gamma()?;
        Ok(ucb_index(&self.posterior(t_query), gamma, self.params.ceiling))
    }

    /// One iteration of the selection loop: argmax of the clipped index.
    pub fn select(&self, t_query: f64) -> Result<PolicyDecision> {
        Ok(PolicyDecision::from_index(self.index(t_query)?))
    }
}

impl Policy for QuickDraw {
    fn name(&self) -> &str {
        &self.name
    }

    fn arm_space(&self) -> &ArmSpace {
        &self.space
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        let x = self.space.coordinate(obs.arm)?;
        if x != obs.x {
            return Err(Error::state(format!(
                "observation coordinate {} does not match arm {} at {x}",
                obs.x, obs.arm
            )));
        }
        if !obs.y.is_finite() {
            return Err(Error::input(format!("non-finite reward {}", obs.y)));
        }
        if self.params.is_stationary() {
            for (k, xk) in self.space.coordinates().iter().enumerate() {
                let nu = 1.0 / sigma_hat_sq(&self.params, self.space.distance_to(*xk, obs.x), 0.0);
                self.precision_sums[k].add(nu);
                self.weighted_sums[k].add(nu * obs.y);
            }
        }
        self.y_range = (self.y_range.0.min(obs.y), self.y_range.1.max(obs.y));
        self.history.push(*obs);
        Ok(())
    }

    fn decide(&mut self, ctx: RoundContext, _rng: &mut StreamRng) -> Result<PolicyDecision> {
        if let (Some(c), false) = (self.params.truncation, self.params.is_stationary()) {
            // Query times only move forward, so stale observations never return.
            let horizon = ctx.t - c * self.params.ell_t;
            let stale = self.history.iter().take_while(|o| o.t < horizon).count();
            if stale > 0 {
                self.history.drain(..stale);
            }
        }
        self.select(ctx.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qd(k: usize, params: QuickDrawParams) -> QuickDraw {
        QuickDraw::new(ArmSpace::grid(k).unwrap(), params).unwrap()
    }

    #[test]
    fn sigma_hat_sq_substitution() {
        let p = QuickDrawParams::default();
        assert_eq!(sigma_hat_sq(&p, 0.0, 0.0), 1e-7);
        let s = QuickDrawParams::stationary();
        assert_eq!(sigma_hat_sq(&s, 0.5, 123.0), 1e-7 + 0.25);
        assert!((sigma_hat_sq(&p, 0.5, 0.3) - (1e-7 + 0.25 + 0.09)).abs() < 1e-15);
    }

    #[test]
    fn single_observation_posterior_at_its_own_point() {
        let mut q = qd(5, QuickDrawParams::default());
        let obs = q.arm_space().observation(2, 0.4, 0.73).unwrap();
        q.observe(&obs).unwrap();
        let post = q.posterior(0.4);
        assert_eq!(post.mu_hat[2], 0.73);
        assert!((post.sigma_hat[2].powi(2) - 1e-7).abs() < 1e-20);
    }

    #[test]
    fn symmetric_pair_gives_midpoint_mean() {
        let space = ArmSpace::new(vec![-1.0, 0.0, 1.0]).unwrap();
        let mut q = QuickDraw::new(space.clone(), QuickDrawParams::default()).unwrap();
        q.observe(&space.observation(0, 0.2, 0.0).unwrap()).unwrap();
        q.observe(&space.observation(2, 0.2, 1.0).unwrap()).unwrap();
        assert_eq!(q.posterior(0.5).mu_hat[1], 0.5);
    }

    #[test]
    fn ucb_index_examples() {
        let s = PosteriorSummary { mu_hat: vec![0.9, 0.3, 0.4], sigma_hat: vec![0.2, 0.1, 0.0], t_query: 0.0 };
        let idx = ucb_index(&s, 2.0, 1.0);
        assert_eq!(idx[0], 1.0);
        assert!((idx[1] - 0.5).abs() < 1e-15);
        assert_eq!(idx[2], 0.4);
    }

    #[test]
    fn empty_history_plays_arm_zero() {
        let mut q = qd(10, QuickDrawParams::default());
        let mut rng = crate::rng::stream(&[1]);
        let d = q.decide(RoundContext::new(0, 0.0), &mut rng).unwrap();
        assert_eq!(d.arm, 0);
        assert!(d.index_values.unwrap().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn single_high_reward_clips_everywhere() {
        let params = QuickDrawParams { ell_x: 0.01, ..QuickDrawParams::stationary() };
        let mut q = qd(20, params);
        let j = 13;
        let obs = q.arm_space().observation(j, 0.0, 1.0).unwrap();
        q.observe(&obs).unwrap();
        // A lone observation sets mu_hat = 1 at every arm, so every index
        // reaches the ceiling and the tie goes to the lowest arm.
        let idx = q.index(0.0).unwrap();
        assert!(idx.iter().all(|v| *v == 1.0));
        assert_eq!(q.select(0.0).unwrap().arm, 0);
        let post = q.posterior(0.0);
        assert!(post.mu_hat.iter().all(|m| (*m - 1.0).abs() < 1e-12));
        let tightest = post.sigma_hat.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i);
        assert_eq!(tightest, Some(j));
    }

    #[test]
    fn gamma_schedule_values() {
        let p = QuickDrawParams { rho2: 1.0, ell_x: 1.0, ..QuickDrawParams::default() };
        let g = gamma_schedule(1.0, 0.05, 10, &p).unwrap();
        let expected = 2.0 + 4.0 * 2f64.sqrt() * 4000f64.ln().powi(2);
        assert!((g - expected).abs() < 1e-9 * expected);
        assert!(gamma_schedule(1.0, 0.5, 3, &p).unwrap() >= 2.0);
        // delta = 2 T^2 makes the log vanish.
        assert!(gamma_schedule_unchecked(0.0, 2.0 * 25.0, 5.0, 1.0, 1.0).abs() < 1e-24);
        assert!(matches!(gamma_schedule(1.0, 1.0, 3, &p), Err(Error::Input(_))));
        assert!(matches!(gamma_schedule(1.0, 0.0, 3, &p), Err(Error::Input(_))));
    }

    #[test]
    fn params_validation() {
        let bad = [
            QuickDrawParams { ell_x: 0.0, ..Default::default() },
            QuickDrawParams { rho2: -1.0, ..Default::default() },
            QuickDrawParams { ell_t: 0.0, ..Default::default() },
            QuickDrawParams { gamma: GammaMode::Fixed(0.0), ..Default::default() },
            QuickDrawParams { gamma: GammaMode::Theoretical { lipschitz: 1.0, delta: 1.5 }, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
        assert!(QuickDrawParams::stationary().validate().is_ok());
    }

    #[test]
    fn observe_rejects_wrong_coordinate() {
        let mut q = qd(4, QuickDrawParams::default());
        let bad = Observation { arm: 1, x: 0.9, t: 0.0, y: 0.1 };
        assert!(matches!(q.observe(&bad), Err(Error::State(_))));
    }

    #[test]
    fn truncation_drops_stale_history() {
        let params = QuickDrawParams { truncation: Some(10.0), ell_t: 0.01, ..Default::default() };
        let mut q = qd(4, params);
        let s = q.arm_space().clone();
        q.observe(&s.observation(0, 0.0, 1.0).unwrap()).unwrap();
        q.observe(&s.observation(1, 0.5, 0.2).unwrap()).unwrap();
        let mut rng = crate::rng::stream(&[0]);
        q.decide(RoundContext::new(2, 0.55), &mut rng).unwrap();
        assert_eq!(q.history().len(), 1);
        assert_eq!(q.history()[0].arm, 1);
    }
}
