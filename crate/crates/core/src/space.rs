//! Shared domain types: the arm space, bandit feedback, decisions, and the
//! policy interface every policy in the crate implements.

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// `K` arm positions on a 1-D metric space with a normalizing diameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSpace {
    coordinates: Vec<f64>,
    diameter: f64,
}

impl ArmSpace {
    /// Arms at the given strictly increasing coordinates. The diameter is the
    /// largest pairwise distance (1 for a single arm).
    pub fn new(coordinates: Vec<f64>) -> Result<Self> {
        let diameter = match (coordinates.first(), coordinates.last()) {
            (Some(lo), Some(hi)) if hi > lo => hi - lo,
            _ => 1.0,
        };
        Self::with_diameter(coordinates, diameter)
    }

    /// Arms with an explicit normalizing diameter, which must cover every
    /// pairwise distance so that normalized distances stay in `[0, 1]`.
    pub fn with_diameter(coordinates: Vec<f64>, diameter: f64) -> Result<Self> {
        if coordinates.is_empty() {
            return Err(Error::input("arm space needs at least one arm"));
        }
        if coordinates.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("arm coordinates must be finite"));
        }
        if coordinates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("arm coordinates must be strictly increasing"));
        }
        if !(diameter > 0.0 && diameter.is_finite()) {
            return Err(Error::input(format!("diameter must be positive, got {diameter}")));
        }
        let span = coordinates[coordinates.len() - 1] - coordinates[0];
        if span > diameter * (1.0 + 1e-12) {
            return Err(Error::input(format!("diameter {diameter} is smaller than the coordinate span {span}")));
        }
        Ok(Self { coordinates, diameter })
    }

    /// `K` cell-centred points on `[-1, 1]` with spacing `2/K`, normalized by
    /// the interval length 2.
    pub fn grid(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::input("arm count must be at least 1"));
        }
        let step = 2.0 / k as f64;
        let coords = (0..k).map(|i| -1.0 + step * (i as f64 + 0.5)).collect();
        Self::with_diameter(coords, 2.0)
    }

    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.coordinates
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn coordinate(&self, arm: usize) -> Result<f64> {
        self.coordinates
            .get(arm)
            .copied()
            .ok_or_else(|| Error::input(format!("arm {arm} out of range for K={}", self.len())))
    }

    /// `|x_i - x_j| / diameter`.
    pub fn normalized_distance(&self, i: usize, j: usize) -> Result<f64> {
        let xi = self.coordinate(i)?;
        let xj = self.coordinate(j)?;
        Ok(self.distance_to(xi, xj))
    }

    /// Normalized distance between two raw coordinates of this space.
    #[inline]
    pub fn distance_to(&self, a: f64, b: f64) -> f64 {
        ((a - b).abs() / self.diameter).min(1.0)
    }

    /// Build a feedback record for `arm`, filling in its coordinate.
    pub fn observation(&self, arm: usize, t: f64, y: f64) -> Result<Observation> {
        let x = self.coordinate(arm)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::input(format!("observation time must be finite and >= 0, got {t}")));
        }
        Ok(Observation { arm, x, t, y })
    }
}

/// One unit of bandit feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub arm: usize,
    pub x: f64,
    pub t: f64,
    pub y: f64,
}

/// Round index and its (rescaled) time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundContext {
    pub round: usize,
    pub t: f64,
}

impl RoundContext {
    pub fn new(round: usize, t: f64) -> Self {
        Self { round, t }
    }
}

/// The probability a policy assigns to each arm at one round.
#[derive(Debug, Clone, PartialEq)]
pub enum Propensity {
    /// All mass on one arm.
    Point(usize),
    /// Uniform over the listed arms.
    UniformOver(Vec<usize>),
    /// Uniform over all `k` arms.
    UniformAll { k: usize },
    /// `epsilon` spread uniformly over `k` arms, the rest on `greedy`.
    EpsilonMix { epsilon: f64, greedy: usize, k: usize },
}

impl Propensity {
    pub fn prob(&self, arm: usize) -> f64 {
        match self {
            Propensity::Point(a) => f64::from(u8::from(*a == arm)),
            Propensity::UniformOver(arms) => {
                if arms.contains(&arm) {
                    1.0 / arms.len() as f64
                } else {
                    0.0
                }
            }
            Propensity::UniformAll { k } => {
                if arm < *k {
                    1.0 / *k as f64
                } else {
                    0.0
                }
            }
            Propensity::EpsilonMix { epsilon, greedy, k } => {
                if arm >= *k {
                    return 0.0;
                }
                let base = epsilon / *k as f64;
                if arm == *greedy {
                    base + (1.0 - epsilon)
                } else {
                    base
                }
            }
        }
    }
}

/// The outcome of one policy decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub arm: usize,
    /// Per-arm scores at selection time, for index policies.
    pub index_values: Option<Vec<f64>>,
    /// The distribution the arm was drawn from.
    pub propensity: Propensity,
}

impl PolicyDecision {
    /// Deterministic argmax decision over `index_values`.
    pub fn from_index(index_values: Vec<f64>) -> Self {
        let arm = argmax(&index_values);
        Self { arm, index_values: Some(index_values), propensity: Propensity::Point(arm) }
    }

    pub fn point(arm: usize) -> Self {
        Self { arm, index_values: None, propensity: Propensity::Point(arm) }
    }
}

/// Index of the largest value; ties go to the lowest index. NaN never wins.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// A bandit policy: a single-threaded state machine fed with feedback and
/// asked for decisions.
pub trait Policy: Send {
    fn name(&self) -> &str;

    fn arm_space(&self) -> &ArmSpace;

    /// Absorb one observation. The observation need not come from this
    /// policy's own decision (warm-up rounds, logged replay).
    fn observe(&mut self, obs: &Observation) -> Result<()>;

    /// Choose an arm for the round. Stochastic policies draw from `rng`.
    fn decide(&mut self, ctx: RoundContext, rng: &mut StreamRng) -> Result<PolicyDecision>;
}

/// Drives a policy through the pull-based protocol: each step hands over
/// the feedback for the previously issued decision, then asks for the next.
pub struct PolicyDriver<P: Policy + ?Sized> {
    pending: Option<(usize, f64)>,
    policy: Box<P>,
}

impl<P: Policy + ?Sized> PolicyDriver<P> {
    pub fn new(policy: Box<P>) -> Self {
        Self { pending: None, policy }
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut P {
        &mut self.policy
    }

    pub fn step(
        &mut self,
        ctx: RoundContext,
        feedback: Option<&Observation>,
        rng: &mut StreamRng,
    ) -> Result<PolicyDecision> {
        match (self.pending.take(), feedback) {
            (Some((arm, t)), Some(obs)) => {
                if obs.arm != arm || obs.t != t {
                    return Err(Error::state(format!(
                        "feedback (arm {}, t {}) does not match issued decision (arm {arm}, t {t})",
                        obs.arm, obs.t
                    )));
                }
                self.policy.observe(obs)?;
            }
            (Some((arm, _)), None) => {
                return Err(Error::state(format!("missing feedback for issued arm {arm}")));
            }
            (None, Some(obs)) => {
                return Err(Error::state(format!("feedback for arm {} but no decision was issued", obs.arm)));
            }
            (None, None) => {}
        }
        let decision = self.policy.decide(ctx, rng)?;
        self.pending = Some((decision.arm, ctx.t));
        Ok(decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_identity_and_endpoints() {
        let s = ArmSpace::new(vec![-1.0, -0.5, 0.25, 1.0]).unwrap();
        assert_eq!(s.normalized_distance(2, 2).unwrap(), 0.0);
        assert_eq!(s.normalized_distance(0, 3).unwrap(), 1.0);
        assert_eq!(s.normalized_distance(3, 0).unwrap(), 1.0);
    }

    #[test]
    fn grid_adjacent_distance() {
        let s = ArmSpace::grid(1000).unwrap();
        let d = s.normalized_distance(10, 11).unwrap();
        assert!((d - 0.001).abs() < 1e-12, "{d}");
        assert!((s.coordinate(1).unwrap() - s.coordinate(0).unwrap() - 0.002).abs() < 1e-12);
        assert!(s.coordinates().iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn out_of_range_is_input_error() {
        let s = ArmSpace::grid(3).unwrap();
        assert!(matches!(s.normalized_distance(0, 3), Err(Error::Input(_))));
    }

    #[test]
    fn rejects_bad_coordinates() {
        assert!(ArmSpace::new(vec![]).is_err());
        assert!(ArmSpace::new(vec![0.0, 0.0]).is_err());
        assert!(ArmSpace::new(vec![1.0, 0.0]).is_err());
        assert!(ArmSpace::with_diameter(vec![-1.0, 1.0], 1.0).is_err());
        assert!(ArmSpace::new(vec![0.3]).is_ok());
    }

    #[test]
    fn metric_axioms_exhaustive_small_grids() {
        for k in 1..=50 {
            let s = ArmSpace::grid(k).unwrap();
            for i in 0..k {
                for j in 0..k {
                    let dij = s.normalized_distance(i, j).unwrap();
                    assert_eq!(dij, s.normalized_distance(j, i).unwrap());
                    assert!((0.0..=1.0).contains(&dij));
                    assert_eq!(dij == 0.0, i == j);
                    for m in 0..k {
                        let via = dij + s.normalized_distance(j, m).unwrap();
                        assert!(s.normalized_distance(i, m).unwrap() <= via + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
        assert_eq!(argmax(&[f64::NAN, 0.5]), 1);
    }

    #[test]
    fn propensities_sum_to_one() {
        let k = 7;
        let cases = [
            Propensity::Point(3),
            Propensity::UniformOver(vec![1, 4]),
            Propensity::UniformAll { k },
            Propensity::EpsilonMix { epsilon: 0.1, greedy: 2, k },
        ];
        for p in cases {
            let total: f64 = (0..k).map(|a| p.prob(a)).sum();
            assert!((total - 1.0).abs() < 1e-12, "{p:?}");
        }
    }

    struct Fixed(ArmSpace, usize);

    impl Policy for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn arm_space(&self) -> &ArmSpace {
            &self.0
        }
        fn observe(&mut self, _obs: &Observation) -> Result<()> {
            Ok(())
        }
        fn decide(&mut self, _ctx: RoundContext, _rng: &mut StreamRng) -> Result<PolicyDecision> {
            Ok(PolicyDecision::point(self.1))
        }
    }

    #[test]
    fn driver_rejects_mismatched_feedback() {
        let space = ArmSpace::grid(4).unwrap();
        let mut rng = crate::rng::stream(&[0]);
        let mut d = PolicyDriver::new(Box::new(Fixed(space.clone(), 2)));
        let first = d.step(RoundContext::new(0, 0.0), None, &mut rng).unwrap();
        assert_eq!(first.arm, 2);
        let wrong = space.observation(1, 0.0, 0.5).unwrap();
        assert!(matches!(d.step(RoundContext::new(1, 0.1), Some(&wrong), &mut rng), Err(Error::State(_))));

        let mut d = PolicyDriver::new(Box::new(Fixed(space.clone(), 2)));
        let stray = space.observation(2, 0.0, 0.5).unwrap();
        assert!(d.step(RoundContext::new(0, 0.0), Some(&stray), &mut rng).is_err());

        let mut d = PolicyDriver::new(Box::new(Fixed(space.clone(), 2)));
        d.step(RoundContext::new(0, 0.0), None, &mut rng).unwrap();
        let ok = space.observation(2, 0.0, 0.5).unwrap();
        assert!(d.step(RoundContext::new(1, 0.1), Some(&ok), &mut rng).is_ok());
    }
}
