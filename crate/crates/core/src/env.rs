//! Synthetic contextual-bandit environments.
//!
//! Each environment draws a covariate from a fixed distribution on a subset of
//! Euclidean space and realises a reward for *every* arm, so that the regret
//! against the oracle can be computed from realised rewards. The mean field
//! `f^a(x)` is exposed for diagnostics and for the oracle baseline.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A point in the ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariate(Vec<f64>);

impl Covariate {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid(
                "covariate",
                "must have at least one coordinate",
            ));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(
                "covariate",
                format!("non-finite coordinate {bad}"),
            ));
        }
        Ok(Covariate(coords))
    }

    /// One-dimensional covariate; panics on non-finite input.
    pub fn scalar(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite covariate");
        Covariate(vec![x])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &Covariate) -> f64 {
        euclidean(&self.0, &other.0)
    }
}

impl AsRef<[f64]> for Covariate {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Euclidean distance; the metric used by every built-in environment.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Rewards in {0, 1} with success probability `f^a(x)`.
    Bernoulli,
    /// `f^a(x)` plus standard normal noise.
    GaussianUnit,
}

impl NoiseModel {
    pub fn is_bounded(self) -> bool {
        matches!(self, NoiseModel::Bernoulli)
    }

    pub fn sample<R: Rng + ?Sized>(self, mean: f64, rng: &mut R) -> f64 {
        match self {
            NoiseModel::Bernoulli => {
                if rng.gen::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseModel::GaussianUnit => mean + rng.sample::<f64, _>(StandardNormal),
        }
    }
}

/// Parameters of the Lipschitz bump environment on the unit cube.
///
/// Arm `a` has mean `base + height * max(0, 1 - |x - c_a| / width)`, which is
/// Lipschitz with constant `height / width`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpParams {
    pub width: f64,
    pub height: f64,
    pub base: f64,
    /// Bump centres, one per arm. `None` spreads them along the diagonal.
    pub centers: Option<Vec<Vec<f64>>>,
}

impl Default for BumpParams {
    fn default() -> Self {
        BumpParams {
            width: 0.5,
            height: 0.5,
            base: 0.25,
            centers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentKind {
    /// `X ~ U[0,1]`, two arms with `f¹(x) = x`, `f²(x) = 1 - x`.
    FlipLine,
    /// `X ~ U[0,1]^D` with one Lipschitz bump per arm.
    BumpCube(BumpParams),
    /// `X` uniform on a circle of radius ½ centred at (½, ½) in the first two
    /// ambient coordinates; the remaining coordinates are zero.
    EmbeddedCircle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    pub kind: EnvironmentKind,
    pub ambient_dim: usize,
    pub arms: usize,
    pub noise: NoiseModel,
}

impl EnvironmentSpec {
    pub fn flip_line(noise: NoiseModel) -> Self {
        EnvironmentSpec {
            kind: EnvironmentKind::FlipLine,
            ambient_dim: 1,
            arms: 2,
            noise,
        }
    }

    pub fn build(&self) -> Result<Environment> {
        let field = |name: &str| format!("environment.{name}");
        if self.arms == 0 {
            return Err(Error::invalid(field("arms"), "must be at least 1"));
        }
        if self.ambient_dim == 0 {
            return Err(Error::invalid(field("ambient_dim"), "must be at least 1"));
        }
        let mean_field = match &self.kind {
            EnvironmentKind::FlipLine => {
                if self.ambient_dim != 1 {
                    return Err(Error::invalid(field("ambient_dim"), "flip_line requires 1"));
                }
                if self.arms != 2 {
                    return Err(Error::invalid(field("arms"), "flip_line requires 2"));
                }
                MeanField::FlipLine
            }
            EnvironmentKind::BumpCube(p) => {
                if !(p.width > 0.0 && p.width.is_finite()) {
                    return Err(Error::invalid(field("params.width"), "must be > 0"));
                }
                if !(p.height > 0.0) || !(p.base >= 0.0) || p.base + p.height > 1.0 {
                    return Err(Error::invalid(
                        field("params.height"),
                        "need height > 0, base >= 0 and base + height <= 1",
                    ));
                }
                let centers = match &p.centers {
                    Some(c) => {
                        if c.len() != self.arms {
                            return Err(Error::invalid(
                                field("params.centers"),
                                format!("expected {} centres, got {}", self.arms, c.len()),
                            ));
                        }
                        for (i, ci) in c.iter().enumerate() {
                            if ci.len() != self.ambient_dim
                                || ci.iter().any(|v| !(0.0..=1.0).contains(v))
                            {
                                return Err(Error::invalid(
                                    format!("environment.params.centers[{i}]"),
                                    "must have ambient_dim coordinates in [0, 1]",
                                ));
                            }
                        }
                        c.clone()
                    }
                    None => (0..self.arms)
                        .map(|a| vec![(a as f64 + 0.5) / self.arms as f64; self.ambient_dim])
                        .collect(),
                };
                MeanField::Bumps {
                    centers,
                    width: p.width,
                    height: p.height,
                    base: p.base,
                }
            }
            EnvironmentKind::EmbeddedCircle => {
                if self.ambient_dim < 2 {
                    return Err(Error::invalid(
                        field("ambient_dim"),
                        "embedded_circle requires >= 2",
                    ));
                }
                let directions = (0..self.arms)
                    .map(|a| {
                        let angle = 2.0 * PI * a as f64 / self.arms as f64;
                        [angle.cos(), angle.sin()]
                    })
                    .collect();
                MeanField::Circle { directions }
            }
        };
        Ok(Environment {
            spec: self.clone(),
            mean_field,
        })
    }
}

#[derive(Debug, Clone)]
enum MeanField {
    FlipLine,
    Bumps {
        centers: Vec<Vec<f64>>,
        width: f64,
        height: f64,
        base: f64,
    },
    Circle {
        directions: Vec<[f64; 2]>,
    },
}

pub const CIRCLE_RADIUS: f64 = 0.5;
const CIRCLE_CENTER: [f64; 2] = [0.5, 0.5];

/// One round of interaction with every arm's reward realised.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub x: Covariate,
    pub rewards: Vec<f64>,
    pub means: Vec<f64>,
    pub oracle_arm: usize,
    pub oracle_mean: f64,
}

/// Per-arm gaps `Δ^a(x)` and the smallest strictly positive gap `Δ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaps {
    pub per_arm: Vec<f64>,
    pub margin: f64,
}

/// A validated, immutable environment.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvironmentSpec,
    mean_field: MeanField,
}

impl Environment {
    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn arms(&self) -> usize {
        self.spec.arms
    }

    pub fn dim(&self) -> usize {
        self.spec.ambient_dim
    }

    pub fn noise(&self) -> NoiseModel {
        self.spec.noise
    }

    /// Declared Lipschitz constant of every arm's mean function.
    pub fn lipschitz(&self) -> f64 {
        match &self.mean_field {
            MeanField::FlipLine | MeanField::Circle { .. } => 1.0,
            MeanField::Bumps { width, height, .. } => height / width,
        }
    }

    /// Diameter of the covariate support.
    pub fn diameter(&self) -> f64 {
        match &self.mean_field {
            MeanField::FlipLine => 1.0,
            MeanField::Bumps { .. } => (self.dim() as f64).sqrt(),
            MeanField::Circle { .. } => 2.0 * CIRCLE_RADIUS,
        }
    }

    pub fn mean(&self, arm: usize, x: &[f64]) -> f64 {
        match &self.mean_field {
            MeanField::FlipLine => {
                if arm == 0 {
                    x[0]
                } else {
                    1.0 - x[0]
                }
            }
            MeanField::Bumps {
                centers,
                width,
                height,
                base,
            } => base + height * (1.0 - euclidean(x, &centers[arm]) / width).max(0.0),
            MeanField::Circle { directions } => {
                let u = directions[arm];
                let proj = (x[0] - CIRCLE_CENTER[0]) * u[0] + (x[1] - CIRCLE_CENTER[1]) * u[1];
                (0.5 + proj).clamp(0.0, 1.0)
            }
        }
    }

    pub fn means(&self, x: &[f64]) -> Vec<f64> {
        (0..self.arms()).map(|a| self.mean(a, x)).collect()
    }

    /// Oracle arm (lowest index among maximisers) and its mean.
    pub fn oracle(&self, x: &[f64]) -> (usize, f64) {
        argmax_lowest(&self.means(x))
    }

    pub fn gap(&self, x: &Covariate) -> Gaps {
        let means = self.means(x.coords());
        let best = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let per_arm: Vec<f64> = means.iter().map(|m| best - m).collect();
        let margin = per_arm
            .iter()
            .cloned()
            .filter(|g| *g > 0.0)
            .fold(f64::INFINITY, f64::min);
        Gaps {
            per_arm,
            margin: if margin.is_finite() { margin } else { 0.0 },
        }
    }

    pub fn sample_covariate<R: Rng + ?Sized>(&self, rng: &mut R) -> Covariate {
        let coords = match &self.mean_field {
            MeanField::FlipLine => vec![rng.gen::<f64>()],
            MeanField::Bumps { .. } => (0..self.dim()).map(|_| rng.gen::<f64>()).collect(),
            MeanField::Circle { .. } => {
                let angle = 2.0 * PI * rng.gen::<f64>();
                let mut c = vec![0.0; self.dim()];
                c[0] = CIRCLE_CENTER[0] + CIRCLE_RADIUS * angle.cos();
                c[1] = CIRCLE_CENTER[1] + CIRCLE_RADIUS * angle.sin();
                c
            }
        };
        Covariate(coords)
    }

    /// Draws a covariate, then one reward per arm in arm order.
    pub fn sample_round<R: Rng + ?Sized>(&self, rng: &mut R) -> Round {
        let x = self.sample_covariate(rng);
        self.round_at(x, rng)
    }

    /// Realises rewards at a forced covariate.
    pub fn round_at<R: Rng + ?Sized>(&self, x: Covariate, rng: &mut R) -> Round {
        let means = self.means(x.coords());
        let rewards = means.iter().map(|&m| self.noise().sample(m, rng)).collect();
        let (oracle_arm, oracle_mean) = argmax_lowest(&means);
        Round {
            x,
            rewards,
            means,
            oracle_arm,
            oracle_mean,
        }
    }

    pub fn check_covariate(&self, x: &Covariate) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Monte Carlo estimate of `μ{x : 0 < Δ(x) < δ}`.
    pub fn margin_mass_estimate<R: Rng + ?Sized>(
        &self,
        delta: f64,
        samples: usize,
        rng: &mut R,
    ) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::invalid("delta", "must be > 0"));
        }
        if samples == 0 {
            return Err(Error::invalid("samples", "must be >= 1"));
        }
        let hits = (0..samples)
            .filter(|_| {
                let margin = self.gap(&self.sample_covariate(rng)).margin;
                margin > 0.0 && margin < delta
            })
            .count();
        Ok(hits as f64 / samples as f64)
    }

    /// Monte Carlo estimate of `μ(B(x, r))` for the closed ball.
    pub fn ball_mass_estimate<R: Rng + ?Sized>(
        &self,
        x: &Covariate,
        r: f64,
        samples: usize,
        rng: &mut R,
    ) -> Result<f64> {
        self.check_covariate(x)?;
        if !(r > 0.0) {
            return Err(Error::invalid("r", "must be > 0"));
        }
        if samples == 0 {
            return Err(Error::invalid("samples", "must be >= 1"));
        }
        if r >= self.diameter() {
            return Ok(1.0);
        }
        let hits = (0..samples)
            .filter(|_| self.sample_covariate(rng).distance(x) <= r)
            .count();
        Ok(hits as f64 / samples as f64)
    }

    /// Estimate of `M = max_a sup_x Δ^a(x)` over sampled covariates.
    pub fn max_gap_estimate<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> f64 {
        (0..samples)
            .map(|_| {
                let g = self.gap(&self.sample_covariate(rng));
                g.per_arm.into_iter().fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Largest excess `|f^a(x0) - f^a(x1)| - λ ρ(x0, x1)` over random pairs.
    /// Non-positive when the declared Lipschitz constant holds on the sample.
    pub fn lipschitz_excess<R: Rng + ?Sized>(&self, pairs: usize, rng: &mut R) -> f64 {
        let lambda = self.lipschitz();
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..pairs {
            let x0 = self.sample_covariate(rng);
            let x1 = self.sample_covariate(rng);
            let rho = x0.distance(&x1);
            for a in 0..self.arms() {
                let diff = (self.mean(a, x0.coords()) - self.mean(a, x1.coords())).abs();
                worst = worst.max(diff - lambda * rho);
            }
        }
        worst
    }
}

/// Index of the largest value (lowest index on ties) and the value itself.
pub(crate) fn argmax_lowest(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    (best, values[best])
}
