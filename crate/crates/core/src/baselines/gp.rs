//! Exact Gaussian-process regression and the sliding-window GP-UCB policy.
//!
//! Squared-exponential kernel on the normalized arm distance. Targets are
//! centred on their window mean, which serves as the prior mean (0 for an
//! empty window).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::window::Window;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::space::{ArmSpace, Observation, Policy, PolicyDecision, RoundContext};

const BASE_JITTER: f64 = 1e-10;
const MAX_JITTER: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    /// Signal variance `sigma_f^2`.
    pub amplitude: f64,
    pub lengthscale: f64,
    /// Observation noise variance.
    pub noise: f64,
}

impl Default for GpHyper {
    fn default() -> Self {
        Self { amplitude: 0.25, lengthscale: 0.1, noise: 1e-2 }
    }
}

impl GpHyper {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("amplitude", self.amplitude), ("lengthscale", self.lengthscale), ("noise", self.noise)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::input(format!("GP {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    #[inline]
    fn kernel(&self, distance: f64) -> f64 {
        let r = distance / self.lengthscale;
        self.amplitude * (-0.5 * r * r).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperGrid {
    pub lengthscales: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub noises: Vec<f64>,
}

impl Default for GpHyperGrid {
    fn default() -> Self {
        Self { lengthscales: vec![0.03, 0.1, 0.3, 1.0], amplitudes: vec![0.25, 1.0], noises: vec![1e-4, 1e-2] }
    }
}

impl GpHyperGrid {
    pub fn single(h: GpHyper) -> Self {
        Self { lengthscales: vec![h.lengthscale], amplitudes: vec![h.amplitude], noises: vec![h.noise] }
    }

    /// Grid points in a fixed order: lengthscale, then amplitude, then noise.
    pub fn points(&self) -> impl Iterator<Item = GpHyper> + '_ {
        self.lengthscales.iter().flat_map(move |&lengthscale| {
            self.amplitudes.iter().flat_map(move |&amplitude| {
                self.noises.iter().map(move |&noise| GpHyper { amplitude, lengthscale, noise })
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HyperOpt {
    None,
    Grid(GpHyperGrid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpParams {
    /// `None` conditions on the full history.
    pub window: Option<usize>,
    pub hyper: GpHyper,
    pub ucb_beta: f64,
    pub hyperopt: HyperOpt,
    /// Collapse repeated pulls of an arm before factorizing. Exact, and much
    /// cheaper once the window revisits arms; off gives the textbook
    /// one-row-per-observation solve.
    pub merge_duplicates: bool,
}

impl Default for GpParams {
    fn default() -> Self {
        Self {
            window: Some(100),
            hyper: GpHyper::default(),
            ucb_beta: 4.0,
            hyperopt: HyperOpt::Grid(GpHyperGrid::default()),
            merge_duplicates: true,
        }
    }
}

impl GpParams {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.window == Some(0) {
            return Err(Error::input("GP window must be at least 1"));
        }
        if !(self.ucb_beta > 0.0) {
            return Err(Error::input(format!("ucb_beta must be positive, got {}", self.ucb_beta)));
        }
        if let HyperOpt::Grid(g) = &self.hyperopt {
            if g.points().next().is_none() {
                return Err(Error::input("GP hyperparameter grid is empty"));
            }
            for h in g.points() {
                h.validate()?;
            }
        }
        Ok(())
    }
}

/// Posterior mean and variance at the query points.
#[derive(Debug, Clone, PartialEq)]
pub struct GpFit {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub log_marginal_likelihood: f64,
}

/// Observations sharing an input collapse to their mean with noise
/// `sigma^2 / n`; `within` keeps the likelihood terms this drops, so the
/// result is exact for the original data.
struct Factored {
    chol: Cholesky<f64, Dyn>,
    xs: Vec<f64>,
    centred: DVector<f64>,
    alpha: DVector<f64>,
    offset: f64,
    within: f64,
}

struct Groups {
    xs: Vec<f64>,
    counts: Vec<f64>,
    means: Vec<f64>,
    sq_dev: Vec<f64>,
}

fn group(obs: &[Observation], merge: bool) -> Groups {
    let mut xs: Vec<f64> = Vec::new();
    let mut members: Vec<Vec<f64>> = Vec::new();
    for o in obs {
        let found = if merge { xs.iter().position(|x| x.to_bits() == o.x.to_bits()) } else { None };
        match found {
            Some(g) => members[g].push(o.y),
            None => {
                xs.push(o.x);
                members.push(vec![o.y]);
            }
        }
    }
    let counts = members.iter().map(|m| m.len() as f64).collect();
    let means: Vec<f64> = members.iter().map(|m| m.iter().sum::<f64>() / m.len() as f64).collect();
    let sq_dev = members.iter().zip(&means).map(|(m, mu)| m.iter().map(|y| (y - mu).powi(2)).sum()).collect();
    Groups { xs, counts, means, sq_dev }
}

fn factor(hyper: &GpHyper, space: &ArmSpace, obs: &[Observation], merge: bool) -> Result<Factored> {
    let offset = obs.iter().map(|o| o.y).sum::<f64>() / obs.len() as f64;
    let g = group(obs, merge);
    let m = g.xs.len();
    let centred = DVector::from_iterator(m, g.means.iter().map(|y| y - offset));
    let gram = DMatrix::from_fn(m, m, |i, j| hyper.kernel(space.distance_to(g.xs[i], g.xs[j])));
    let mut jitter = BASE_JITTER;
    loop {
        let noise = hyper.noise + jitter;
        let mut a = gram.clone();
        for i in 0..m {
            a[(i, i)] += noise / g.counts[i];
        }
        if let Some(chol) = Cholesky::new(a) {
            let alpha = chol.solve(&centred);
            let ln_2pi_noise = (2.0 * std::f64::consts::PI * noise).ln();
            let within = g
                .counts
                .iter()
                .zip(&g.sq_dev)
                .map(|(n, ss)| -0.5 * (n - 1.0) * ln_2pi_noise - 0.5 * n.ln() - 0.5 * ss / noise)
                .sum();
            return Ok(Factored { chol, xs: g.xs, centred, alpha, offset, within });
        }
        jitter *= 10.0;
        if jitter > MAX_JITTER {
            return Err(Error::Factorization(format!(
                "GP gram matrix of size {m} is not positive definite with jitter up to {MAX_JITTER}"
            )));
        }
    }
}

fn lml(f: &Factored) -> f64 {
    let m = f.centred.len() as f64;
    let log_det: f64 = f.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * f.centred.dot(&f.alpha) - log_det - 0.5 * m * (2.0 * std::f64::consts::PI).ln() + f.within
}

/// Gaussian log marginal likelihood of the centred targets.
pub fn log_marginal_likelihood(hyper: &GpHyper, space: &ArmSpace, obs: &[Observation]) -> Result<f64> {
    marginal_likelihood(hyper, space, obs, true)
}

fn marginal_likelihood(hyper: &GpHyper, space: &ArmSpace, obs: &[Observation], merge: bool) -> Result<f64> {
    if obs.is_empty() {
        return Ok(0.0);
    }
    Ok(lml(&factor(hyper, space, obs, merge)?))
}

/// Exact GP regression at `queries` (raw coordinates of `space`).
pub fn gp_posterior(hyper: &GpHyper, space: &ArmSpace, obs: &[Observation], queries: &[f64]) -> Result<GpFit> {
    posterior(hyper, space, obs, queries, true)
}

fn posterior(hyper: &GpHyper, space: &ArmSpace, obs: &[Observation], queries: &[f64], merge: bool) -> Result<GpFit> {
    hyper.validate()?;
    let nq = queries.len();
    if obs.is_empty() {
        return Ok(GpFit { mean: vec![0.0; nq], variance: vec![hyper.amplitude; nq], log_marginal_likelihood: 0.0 });
    }
    let f = factor(hyper, space, obs, merge)?;
    let m = f.xs.len();
    let cross = DMatrix::from_fn(m, nq, |i, q| hyper.kernel(space.distance_to(f.xs[i], queries[q])));
    let mean_part = cross.tr_mul(&f.alpha);
    let v = f
        .chol
        .l_dirty()
        .solve_lower_triangular(&cross)
        .ok_or_else(|| Error::Factorization("triangular solve failed".into()))?;
    let mean = mean_part.iter().map(|mu| f.offset + mu).collect();
    let variance = v.column_iter().map(|col| (hyper.amplitude - col.norm_squared()).max(0.0)).collect();
    Ok(GpFit { mean, variance, log_marginal_likelihood: lml(&f) })
}

/// GP-UCB conditioned on a sliding window of recent observations, with
/// optional per-round grid search over kernel hyperparameters.
#[derive(Debug, Clone)]
pub struct SwGpUcb {
    name: String,
    space: ArmSpace,
    params: GpParams,
    window: Window,
}

impl SwGpUcb {
    pub fn new(space: ArmSpace, params: GpParams) -> Result<Self> {
        params.validate()?;
        let cap = params.window.unwrap_or(usize::MAX);
        Ok(Self { name: "sw_gp_ucb".into(), space, window: Window::new(cap), params })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Hyperparameters for the current window: the fixed ones, or the grid
    /// point of largest marginal likelihood (first wins ties).
    pub fn fitted_hyper(&self, obs: &[Observation]) -> Result<GpHyper> {
        match &self.params.hyperopt {
            HyperOpt::None => Ok(self.params.hyper),
            HyperOpt::Grid(_) if obs.is_empty() => Ok(self.params.hyper),
            HyperOpt::Grid(grid) => {
                let mut best: Option<(GpHyper, f64)> = None;
                for h in grid.points() {
                    let score = marginal_likelihood(&h, &self.space, obs, self.params.merge_duplicates)?;
                    if best.is_none_or(|(_, s)| score > s) {
                        best = Some((h, score));
                    }
                }
                Ok(best.map(|(h, _)| h).unwrap_or(self.params.hyper))
            }
        }
    }

    pub fn index(&self) -> Result<Vec<f64>> {
        let obs = self.window.to_vec();
        let hyper = self.fitted_hyper(&obs)?;
        let fit = posterior(&hyper, &self.space, &obs, self.space.coordinates(), self.params.merge_duplicates)?;
        let scale = self.params.ucb_beta.sqrt();
        Ok(fit.mean.iter().zip(&fit.variance).map(|(m, v)| m + scale * v.sqrt()).collect())
    }
}

impl Policy for SwGpUcb {
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

    fn decide(&mut self, _ctx: RoundContext, _rng: &mut StreamRng) -> Result<PolicyDecision> {
        Ok(PolicyDecision::from_index(self.index()?))
    }
}
