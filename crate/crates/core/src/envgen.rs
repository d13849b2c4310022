//! Nonstationary payout environments.
//!
//! A zero-mean Gaussian random field is drawn on the `K x T` grid of arm
//! positions (`x` in `[-1, 1]`) and round times (`t = round * tau_s`) with
//! separable squared-exponential covariance
//!
//! ```text
//! C((x,t),(x',t')) = exp(-(x-x')^2 / (2 rho_x^2)) * exp(-(t-t')^2 / (2 rho_t^2))
//! ```
//!
//! using `F = L_x Z L_t^T` where `L_x`, `L_t` are Cholesky factors of the two
//! 1-D covariance matrices and `Z` is white noise. The whole grid is then
//! min-max rescaled to `[0, 1]` and raised to the power `alpha`.
//!
//! `rho_t = inf` gives a stationary field: a single column shared by all rounds.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::space::ArmSpace;

const JITTER_RETRIES: [f64; 3] = [1e-10, 1e-8, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams {
    pub rho_x: f64,
    /// `f64::INFINITY` for a time-invariant field.
    pub rho_t: f64,
    pub alpha: f64,
    pub sigma_noise: f64,
    pub k: usize,
    pub rounds: usize,
    pub tau_s: f64,
    pub seed: u64,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self { rho_x: 0.1, rho_t: 0.1, alpha: 1.0, sigma_noise: 0.0, k: 1000, rounds: 1000, tau_s: 1e-3, seed: 0 }
    }
}

impl FieldParams {
    pub fn is_stationary(&self) -> bool {
        self.rho_t.is_infinite()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_x > 0.0 && self.rho_x.is_finite()) {
            return Err(Error::input(format!("rho_x must be positive, got {}", self.rho_x)));
        }
        if !(self.rho_t > 0.0) {
            return Err(Error::input(format!("rho_t must be positive, got {}", self.rho_t)));
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::input(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        if !(self.sigma_noise >= 0.0 && self.sigma_noise.is_finite()) {
            return Err(Error::input(format!("sigma_noise must be >= 0, got {}", self.sigma_noise)));
        }
        if self.k == 0 || self.rounds == 0 {
            return Err(Error::input("K and T must be at least 1"));
        }
        if !(self.tau_s > 0.0 && self.tau_s.is_finite()) {
            return Err(Error::input(format!("tau_s must be positive, got {}", self.tau_s)));
        }
        Ok(())
    }

    pub fn arm_space(&self) -> Result<ArmSpace> {
        ArmSpace::grid(self.k)
    }

    pub fn time_of(&self, round: usize) -> f64 {
        round as f64 * self.tau_s
    }
}

/// Mean payouts on the arm-by-round grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoutField {
    params: FieldParams,
    space: ArmSpace,
    columns: usize,
    // Row-major: arm * columns + column.
    mu: Vec<f64>,
}

impl PayoutField {
    /// Wrap an explicit grid (`mu[arm][column]`). A single column is treated
    /// as time-invariant.
    pub fn from_grid(params: FieldParams, mu: Vec<Vec<f64>>) -> Result<Self> {
        if mu.len() != params.k {
            return Err(Error::input(format!("grid has {} rows, expected K={}", mu.len(), params.k)));
        }
        let columns = mu.first().map_or(0, Vec::len);
        if columns != 1 && columns != params.rounds {
            return Err(Error::input(format!("grid has {columns} columns, expected 1 or T={}", params.rounds)));
        }
        if mu.iter().any(|row| row.len() != columns) {
            return Err(Error::input("ragged payout grid"));
        }
        let flat: Vec<f64> = mu.into_iter().flatten().collect();
        if flat.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::input("mean payouts must lie in [0,1]"));
        }
        let space = params.arm_space()?;
        Ok(Self { params, space, columns, mu: flat })
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    pub fn arm_space(&self) -> &ArmSpace {
        &self.space
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn rounds(&self) -> usize {
        self.params.rounds
    }

    pub fn is_stationary(&self) -> bool {
        self.columns == 1
    }

    fn column(&self, round: usize) -> usize {
        if self.columns == 1 {
            0
        } else {
            round
        }
    }

    pub fn mean(&self, arm: usize, round: usize) -> f64 {
        self.mu[arm * self.columns + self.column(round)]
    }

    /// Mean payout of every arm at `round`.
    pub fn column_means(&self, round: usize) -> Vec<f64> {
        let c = self.column(round);
        (0..self.params.k).map(|a| self.mu[a * self.columns + c]).collect()
    }

    fn check(&self, arm: usize, round: usize) -> Result<()> {
        if arm >= self.params.k || round >= self.params.rounds {
            return Err(Error::input(format!(
                "cell (arm {arm}, round {round}) outside {}x{} grid",
                self.params.k, self.params.rounds
            )));
        }
        Ok(())
    }

    /// Noisy payout `mu + N(0, sigma_noise^2)` drawn from `noise`.
    pub fn observe(&self, arm: usize, round: usize, noise: &mut StreamRng) -> Result<f64> {
        self.check(arm, round)?;
        let mu = self.mean(arm, round);
        if self.params.sigma_noise == 0.0 {
            return Ok(mu);
        }
        let eps: f64 = noise.sample(StandardNormal);
        Ok(mu + self.params.sigma_noise * eps)
    }

    /// Best arm at `round` and its mean (lowest index on ties).
    pub fn oracle_best(&self, round: usize) -> Result<(usize, f64)> {
        self.check(0, round)?;
        let col = self.column_means(round);
        let arm = crate::space::argmax(&col);
        Ok((arm, col[arm]))
    }

    /// Largest difference quotient between neighbouring grid cells, per unit
    /// normalized distance (and per unit time for nonstationary fields).
    pub fn empirical_lipschitz(&self) -> f64 {
        let k = self.params.k;
        let coords = self.space.coordinates();
        let mut l: f64 = 0.0;
        for c in 0..self.columns {
            for a in 1..k {
                let d = self.space.distance_to(coords[a], coords[a - 1]);
                let diff = (self.mu[a * self.columns + c] - self.mu[(a - 1) * self.columns + c]).abs();
                l = l.max(diff / d);
            }
        }
        for a in 0..k {
            for c in 1..self.columns {
                let diff = (self.mu[a * self.columns + c] - self.mu[a * self.columns + c - 1]).abs();
                l = l.max(diff / self.params.tau_s);
            }
        }
        l
    }

    /// Average over rounds of `max_x mu - mean_x mu`: the expected per-round
    /// regret of uniform random play.
    pub fn random_play_regret(&self, rounds: std::ops::Range<usize>) -> f64 {
        let n = rounds.len();
        rounds
            .map(|r| {
                let col = self.column_means(r);
                let best = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                best - col.iter().sum::<f64>() / col.len() as f64
            })
            .sum::<f64>()
            / n as f64
    }

    /// CSV export: one line per arm, one value per stored column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for a in 0..self.params.k {
            let row = &self.mu[a * self.columns..(a + 1) * self.columns];
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Read a grid written by [`PayoutField::write_csv`]. `K` and the column
    /// count come from the file; `params` supplies the rest.
    pub fn read_csv<R: Read>(input: R, params: FieldParams) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::input(format!("bad grid value {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let columns = rows.first().map_or(0, Vec::len);
        let params =
            FieldParams { k: rows.len(), rounds: if columns == 1 { params.rounds } else { columns }, ..params };
        Self::from_grid(params, rows)
    }
}

fn se_covariance(points: &[f64], length: f64) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| {
        let r = (points[i] - points[j]) / length;
        (-0.5 * r * r).exp()
    })
}

/// Cholesky factor, retrying with growing diagonal jitter.
fn sqrt_factor(cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = cov.clone().cholesky() {
        return Ok(c.unpack());
    }
    for jitter in JITTER_RETRIES {
        let mut a = cov.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(c) = a.cholesky() {
            return Ok(c.unpack());
        }
    }
    Err(Error::Factorization(format!(
        "covariance of size {} not positive definite after jitter {:?}",
        cov.nrows(),
        JITTER_RETRIES
    )))
}

/// Holds the two 1-D covariance factors so repeated draws (one per seed)
/// only pay for the matrix products.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    params: FieldParams,
    space_factor: Arc<DMatrix<f64>>,
    time_factor: Arc<DMatrix<f64>>,
}

impl FieldSampler {
    pub fn new(params: FieldParams) -> Result<Self> {
        params.validate()?;
        let space = params.arm_space()?;
        let space_factor = sqrt_factor(se_covariance(space.coordinates(), params.rho_x))?;
        let time_factor = if params.is_stationary() {
            DMatrix::from_element(1, 1, 1.0)
        } else {
            let times: Vec<f64> = (0..params.rounds).map(|r| params.time_of(r)).collect();
            sqrt_factor(se_covariance(&times, params.rho_t))?
        };
        Ok(Self { params, space_factor: Arc::new(space_factor), time_factor: Arc::new(time_factor) })
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    /// The correlated Gaussian field before rescaling (`K x columns`).
    pub fn sample_raw(&self, seed: u64) -> DMatrix<f64> {
        let k = self.params.k;
        let cols = self.time_factor.nrows();
        let mut rng = rng::stream(&[rng::tag::FIELD, seed]);
        // Column-major fill order, fixed for reproducibility.
        let z = DMatrix::from_fn(k, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
        let zt = z * self.time_factor.transpose();
        &*self.space_factor * zt
    }

    /// Draw the payout field for `seed`: rescale to `[0, 1]`, then power.
    pub fn sample(&self, seed: u64) -> Result<PayoutField> {
        let raw = self.sample_raw(seed);
        let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        let span = hi - lo;
        let alpha = self.params.alpha;
        let rows: Vec<Vec<f64>> = raw
            .row_iter()
            .map(|row| {
                row.iter()
                    .map(|v| {
                        let u = if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
                        if alpha == 1.0 {
                            u
                        } else {
                            u.powf(alpha)
                        }
                    })
                    .collect()
            })
            .collect();
        PayoutField::from_grid(FieldParams { seed, ..self.params }, rows)
    }
}

/// Draw the payout field described by `params` (including its seed).
pub fn sample_field(params: &FieldParams) -> Result<PayoutField> {
    FieldSampler::new(*params)?.sample(params.seed)
}
