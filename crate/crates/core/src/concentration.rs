//! Self-normalised concentration under predictable sampling.
//!
//! Let `Z_1..Z_n` be independent with `log E[exp(ρ Z_t)] ≤ φ(ρ)` for `ρ ≥ 0`,
//! and let `ε_t ∈ {0,1}` be chosen from information available before `Z_t`.
//! With `S = Σ ε_t Z_t`, `N = Σ ε_t` and `ξ̂ = S/N` (`0/0 := 0`):
//!
//! ```text
//! P[N φ*(ξ̂) > δ] ≤ e ⌈δ ln n⌉ exp(-δ),      φ*(x) = sup_{ρ≥0} (ρx - φ(ρ)).
//! ```
//!
//! This module evaluates the envelopes and their Legendre transforms, and runs
//! Monte Carlo experiments that try to falsify the bound and the
//! supermartingale property of `W^ρ_t = exp(ρ S(t) - N(t) φ(ρ))` behind it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::kl_bernoulli;
use crate::rng::{stream, StreamTag};

/// Bisection tolerance on `ρ` for the numeric Legendre transform.
const RHO_TOLERANCE: f64 = 1e-12;

/// A log-MGF envelope `φ` with `φ(0) = 0` and `φ'' > 0` on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MgfBound {
    /// `φ(ρ) = ρ²/2`: the standard normal log-MGF.
    GaussianHalfSquare,
    /// `φ(ρ) = log(1 + ξ_max (e^ρ - 1))`: any `[0,1]` variable with mean at
    /// most `ξ_max`.
    BernoulliEnvelope { xi_max: f64 },
    /// `φ(ρ) = v ρ²/2`. With `v < 1` this understates the Gaussian MGF and
    /// is only useful to check that the harness can fail.
    Quadratic { variance: f64 },
}

impl MgfBound {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MgfBound::BernoulliEnvelope { xi_max } if !(xi_max > 0.0 && xi_max < 1.0) => {
                Err(Error::invalid("xi_max", "must lie in (0, 1)"))
            }
            MgfBound::Quadratic { variance } if !(variance > 0.0 && variance.is_finite()) => {
                Err(Error::invalid("variance", "must be finite and > 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            MgfBound::GaussianHalfSquare => "gaussian".into(),
            MgfBound::BernoulliEnvelope { xi_max } => format!("bernoulli(xi_max={xi_max})"),
            MgfBound::Quadratic { variance } => format!("quadratic(variance={variance})"),
        }
    }

    /// `φ(ρ)` for `ρ ≥ 0`.
    pub fn phi(&self, rho: f64) -> f64 {
        match *self {
            MgfBound::GaussianHalfSquare => 0.5 * rho * rho,
            // log(1 + ξ(e^ρ - 1)) = ρ + log(ξ + (1 - ξ) e^{-ρ}), stable for large ρ.
            MgfBound::BernoulliEnvelope { xi_max } => {
                rho + (xi_max + (1.0 - xi_max) * (-rho).exp()).ln()
            }
            MgfBound::Quadratic { variance } => 0.5 * variance * rho * rho,
        }
    }

    pub fn phi_prime(&self, rho: f64) -> f64 {
        match *self {
            MgfBound::GaussianHalfSquare => rho,
            MgfBound::BernoulliEnvelope { xi_max } => {
                xi_max / (xi_max + (1.0 - xi_max) * (-rho).exp())
            }
            MgfBound::Quadratic { variance } => variance * rho,
        }
    }

    /// `lim_{ρ→∞} φ'(ρ)`.
    pub fn phi_prime_limit(&self) -> f64 {
        match self {
            MgfBound::BernoulliEnvelope { .. } => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// `φ*(x)` in closed form.
    pub fn legendre(&self, x: f64) -> f64 {
        match *self {
            MgfBound::GaussianHalfSquare => {
                if x > 0.0 {
                    0.5 * x * x
                } else {
                    0.0
                }
            }
            MgfBound::Quadratic { variance } => {
                if x > 0.0 {
                    0.5 * x * x / variance
                } else {
                    0.0
                }
            }
            MgfBound::BernoulliEnvelope { xi_max } => {
                if x <= xi_max {
                    0.0
                } else if x <= 1.0 {
                    kl_bernoulli(x, xi_max)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `φ*(x)` by solving `φ'(ρ) = x`: a doubling bracket from `ρ = 1`, then
    /// bisection to `1e-12` in `ρ`.
    pub fn legendre_numeric(&self, x: f64) -> f64 {
        let limit = self.phi_prime_limit();
        if x > limit {
            return f64::INFINITY;
        }
        // φ' is increasing, so ρx - φ(ρ) is nonincreasing from ρ = 0.
        if x <= self.phi_prime(0.0) {
            return 0.0;
        }
        let objective = |rho: f64| rho * x - self.phi(rho);
        if x == limit {
            // The supremum is approached as ρ → ∞.
            let mut rho = 1.0;
            let mut value = objective(rho);
            while rho < 1e6 {
                rho *= 2.0;
                let next = objective(rho);
                if (next - value).abs() <= 1e-16 * value.abs().max(1.0) {
                    return next;
                }
                value = next;
            }
            return value;
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.phi_prime(hi) < x {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            if hi - lo <= RHO_TOLERANCE {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.phi_prime(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        objective(0.5 * (lo + hi))
    }
}

/// Free-function form of [`MgfBound::legendre`].
pub fn legendre(bound: &MgfBound, x: f64) -> f64 {
    bound.legendre(x)
}

/// `|φ*(φ'(ρ)) - (ρ φ'(ρ) - φ(ρ))|` using the closed-form transform.
pub fn legendre_identity_check(bound: &MgfBound, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::invalid("rho", "must be > 0"));
    }
    let slope = bound.phi_prime(rho);
    Ok((bound.legendre(slope) - (rho * slope - bound.phi(rho))).abs())
}

/// `e ⌈δ ln n⌉ e^{-δ}`, capped at 1.
pub fn tail_bound(delta: f64, n: u64) -> Result<f64> {
    if !(delta > 1.0) {
        return Err(Error::PeelingUndefined(delta));
    }
    if n < 2 {
        return Err(Error::invalid("n", "must be at least 2"));
    }
    let slabs = (delta * (n as f64).ln()).ceil();
    Ok((slabs * (1.0 - delta).exp()).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "p", rename_all = "snake_case")]
pub enum ZDistribution {
    StandardNormal,
    Bernoulli(f64),
}

impl ZDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ZDistribution::StandardNormal => rng.sample(StandardNormal),
            ZDistribution::Bernoulli(p) => {
                if rng.gen::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ZDistribution::StandardNormal => "standard_normal".into(),
            ZDistribution::Bernoulli(p) => format!("bernoulli(p={p})"),
        }
    }
}

/// Rule for the selection variable `ε_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    AlwaysOn,
    /// Independent coin with success probability `q`.
    IidCoin(f64),
    /// `ε_t = 1` iff `S(t-1) ≤ 0`.
    AdaptiveSign,
    /// `ε_t = 1` iff `N(t-1) < t/2`.
    AdaptiveCount,
}

impl Scheme {
    pub const DEFAULT_COIN: f64 = 0.5;

    pub fn all() -> [Scheme; 4] {
        [
            Scheme::AlwaysOn,
            Scheme::IidCoin(Self::DEFAULT_COIN),
            Scheme::AdaptiveSign,
            Scheme::AdaptiveCount,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::AlwaysOn => "always_on",
            Scheme::IidCoin(_) => "iid_coin",
            Scheme::AdaptiveSign => "adaptive_sign",
            Scheme::AdaptiveCount => "adaptive_count",
        }
    }

    /// Decides `ε_t` from the state before round `t`.
    fn select<R: Rng + ?Sized>(&self, past: Past, rng: &mut R) -> bool {
        match *self {
            Scheme::AlwaysOn => true,
            Scheme::IidCoin(q) => rng.gen::<f64>() < q,
            Scheme::AdaptiveSign => past.sum <= 0.0,
            Scheme::AdaptiveCount => (past.count as f64) < past.t as f64 / 2.0,
        }
    }
}

/// Everything a selection rule may look at: the state after round `t - 1`.
#[derive(Debug, Clone, Copy)]
struct Past {
    t: u64,
    sum: f64,
    count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptedExperiment {
    pub n: u64,
    pub z: ZDistribution,
    pub scheme: Scheme,
}

/// Final state `(S(n), N(n))` of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub sum: f64,
    pub count: u64,
}

impl Trajectory {
    pub fn xi_hat(&self) -> f64 {
        crate::knn::ratio_or_zero(self.sum, self.count)
    }

    /// `N φ*(ξ̂) > δ`; never true when `N = 0`.
    pub fn violates(&self, bound: &MgfBound, delta: f64) -> bool {
        self.count > 0 && self.count as f64 * bound.legendre(self.xi_hat()) > delta
    }

    /// `W^ρ_n = exp(ρ S - N φ(ρ))`.
    pub fn w(&self, bound: &MgfBound, rho: f64) -> f64 {
        (rho * self.sum - self.count as f64 * bound.phi(rho)).exp()
    }
}

/// One step as seen by an observer: the selection and the draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub selected: bool,
    pub z: f64,
}

impl AdaptedExperiment {
    /// Simulates one trajectory. `Z_t` is drawn every round, after `ε_t` has
    /// been fixed, so the selection never sees the value it gates.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Trajectory {
        self.run_with(rng, |_| {})
    }

    pub fn run_traced<R: Rng + ?Sized>(&self, rng: &mut R) -> (Trajectory, Vec<Step>) {
        let mut steps = Vec::with_capacity(self.n as usize);
        let traj = self.run_with(rng, |s| steps.push(s));
        (traj, steps)
    }

    fn run_with<R: Rng + ?Sized>(&self, rng: &mut R, mut observe: impl FnMut(Step)) -> Trajectory {
        let mut sum = 0.0;
        let mut count = 0u64;
        for t in 1..=self.n {
            let selected = self.scheme.select(Past { t, sum, count }, rng);
            let z = self.z.sample(rng);
            if selected {
                sum += z;
                count += 1;
            }
            observe(Step { selected, z });
        }
        Trajectory { sum, count }
    }
}

/// Accepts only pairings where `φ` really dominates the log-MGF of `Z`.
pub fn check_pairing(z: &ZDistribution, bound: &MgfBound) -> Result<()> {
    bound.validate()?;
    let ok = match (*z, *bound) {
        (ZDistribution::StandardNormal, MgfBound::GaussianHalfSquare) => true,
        (ZDistribution::StandardNormal, MgfBound::Quadratic { variance }) => variance >= 1.0,
        (ZDistribution::Bernoulli(p), MgfBound::BernoulliEnvelope { xi_max }) => {
            (0.0..=xi_max).contains(&p)
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::IncompatiblePairing {
            distribution: z.name(),
            envelope: bound.name(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOutcome {
    pub count: u64,
    pub xi_hat: f64,
    pub violated: bool,
}

pub fn run_adapted_experiment<R: Rng + ?Sized>(
    exp: &AdaptedExperiment,
    bound: &MgfBound,
    delta: f64,
    rng: &mut R,
) -> Result<ExperimentOutcome> {
    check_pairing(&exp.z, bound)?;
    let traj = exp.run(rng);
    Ok(ExperimentOutcome {
        count: traj.count,
        xi_hat: traj.xi_hat(),
        violated: traj.violates(bound, delta),
    })
}

/// The sub-Gaussian form of the event: `S > sqrt(2 δ N)`.
pub fn gaussian_event(traj: &Trajectory, delta: f64) -> bool {
    traj.sum > (2.0 * delta * traj.count as f64).sqrt()
}

/// The KL form of the event: `ξ̂ > ξ_max` and `N d(ξ̂, ξ_max) > δ`.
pub fn kl_event(traj: &Trajectory, xi_max: f64, delta: f64) -> bool {
    let xi = traj.xi_hat();
    xi > xi_max && traj.count as f64 * kl_bernoulli(xi.min(1.0), xi_max) > delta
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub scheme: &'static str,
    pub envelope: String,
    pub distribution: String,
    pub delta: f64,
    pub n: u64,
    pub replications: u64,
    pub violations: u64,
    pub rate: f64,
    pub bound: f64,
    /// Three binomial standard deviations at the bound.
    pub half_width: f64,
    pub pass: bool,
    /// Trajectories where the envelope's closed-form event (`S > sqrt(2δN)`
    /// or the KL form) disagreed with `N φ*(ξ̂) > δ`; `None` when the
    /// envelope has no such form.
    pub event_mismatches: Option<u64>,
}

impl ViolationReport {
    fn new(
        exp: &AdaptedExperiment,
        bound: &MgfBound,
        delta: f64,
        replications: u64,
        violations: u64,
        event_mismatches: Option<u64>,
    ) -> Result<Self> {
        let b = tail_bound(delta, exp.n)?;
        let rate = violations as f64 / replications as f64;
        let half_width = 3.0 * (b * (1.0 - b) / replications as f64).sqrt();
        Ok(ViolationReport {
            scheme: exp.scheme.name(),
            envelope: bound.name(),
            distribution: exp.z.name(),
            delta,
            n: exp.n,
            replications,
            violations,
            rate,
            bound: b,
            half_width,
            pass: rate <= b + half_width,
            event_mismatches,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessOptions {
    pub replications: u64,
    pub seed: u64,
    /// Reject pairings whose envelope does not dominate the log-MGF. Turn off
    /// only to demonstrate that a broken envelope is detected.
    pub enforce_pairing: bool,
}

fn cell_seed(seed: u64, scheme: &Scheme) -> u64 {
    let tag = match scheme {
        Scheme::AlwaysOn => 1u64,
        Scheme::IidCoin(_) => 2,
        Scheme::AdaptiveSign => 3,
        Scheme::AdaptiveCount => 4,
    };
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Simulates `replications` trajectories of one experiment in parallel.
pub fn simulate_trajectories(
    exp: &AdaptedExperiment,
    replications: u64,
    seed: u64,
) -> Vec<Trajectory> {
    let seed = cell_seed(seed, &exp.scheme);
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng: ChaCha8Rng = stream(seed, StreamTag::Harness, r);
            exp.run(&mut rng)
        })
        .collect()
}

/// Runs every scheme once and scores every `δ` on the same trajectories.
pub fn verify_bound(
    n: u64,
    z: ZDistribution,
    schemes: &[Scheme],
    bound: &MgfBound,
    deltas: &[f64],
    opts: HarnessOptions,
) -> Result<Vec<ViolationReport>> {
    if opts.enforce_pairing {
        check_pairing(&z, bound)?;
    } else {
        bound.validate()?;
    }
    if opts.replications == 0 {
        return Err(Error::invalid("replications", "must be at least 1"));
    }
    for &d in deltas {
        tail_bound(d, n)?;
    }
    let mut reports = Vec::with_capacity(schemes.len() * deltas.len());
    for scheme in schemes {
        let exp = AdaptedExperiment {
            n,
            z,
            scheme: *scheme,
        };
        let trajectories = simulate_trajectories(&exp, opts.replications, opts.seed);
        for &delta in deltas {
            let mut violations = 0u64;
            let mut mismatches = 0u64;
            for traj in &trajectories {
                let v = traj.violates(bound, delta);
                violations += v as u64;
                let alt = match *bound {
                    MgfBound::GaussianHalfSquare => Some(gaussian_event(traj, delta)),
                    MgfBound::BernoulliEnvelope { xi_max } => Some(kl_event(traj, xi_max, delta)),
                    MgfBound::Quadratic { .. } => None,
                };
                if alt.is_some_and(|a| a != v) {
                    mismatches += 1;
                }
            }
            let applies = !matches!(bound, MgfBound::Quadratic { .. });
            reports.push(ViolationReport::new(
                &exp,
                bound,
                delta,
                opts.replications,
                violations,
                applies.then_some(mismatches),
            )?);
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupermartingaleReport {
    pub scheme: &'static str,
    pub rho: f64,
    pub mean: f64,
    pub stderr: f64,
    pub pass: bool,
}

/// Monte Carlo estimates of `E[W^ρ_n]`; each passes when it is at most
/// `1 + 3 stderr`.
pub fn supermartingale_check(
    bound: &MgfBound,
    exp: &AdaptedExperiment,
    rhos: &[f64],
    replications: u64,
    seed: u64,
) -> Result<Vec<SupermartingaleReport>> {
    check_pairing(&exp.z, bound)?;
    if replications < 2 {
        return Err(Error::invalid("replications", "must be at least 2"));
    }
    if let Some(r) = rhos.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::invalid("rho", format!("{r} is negative")));
    }
    let trajectories = simulate_trajectories(exp, replications, seed);
    Ok(rhos
        .iter()
        .map(|&rho| {
            let ws: Vec<f64> = trajectories.iter().map(|t| t.w(bound, rho)).collect();
            let (mean, stderr) = crate::sim::mean_and_stderr(&ws);
            SupermartingaleReport {
                scheme: exp.scheme.name(),
                rho,
                mean,
                stderr,
                pass: mean <= 1.0 + 3.0 * stderr,
            }
        })
        .collect())
}

/// Largest `E[W] - 1 - 3 stderr` over the reports; nonpositive when all pass.
pub fn max_deviation(reports: &[SupermartingaleReport]) -> f64 {
    reports
        .iter()
        .map(|r| r.mean - 1.0 - 3.0 * r.stderr)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const BOUNDS: [MgfBound; 4] = [
        MgfBound::GaussianHalfSquare,
        MgfBound::BernoulliEnvelope { xi_max: 0.25 },
        MgfBound::BernoulliEnvelope { xi_max: 0.5 },
        MgfBound::Quadratic { variance: 0.5 },
    ];

    #[test]
    fn phi_vanishes_at_zero_and_is_convex() {
        for b in BOUNDS {
            assert_eq!(b.phi(0.0), 0.0);
            let mut prev = b.phi_prime(0.0);
            for i in 1..400 {
                let d = b.phi_prime(i as f64 * 0.05);
                assert!(d > prev, "{b:?}");
                assert!(d <= b.phi_prime_limit());
                prev = d;
            }
        }
    }

    #[test]
    fn phi_prime_matches_finite_differences() {
        for b in BOUNDS {
            for i in 1..50 {
                let rho = i as f64 * 0.2;
                let h = 1e-6;
                let fd = (b.phi(rho + h) - b.phi(rho - h)) / (2.0 * h);
                assert_abs_diff_eq!(fd, b.phi_prime(rho), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn legendre_worked_values() {
        let g = MgfBound::GaussianHalfSquare;
        assert_eq!(g.legendre(1.0), 0.5);
        assert_eq!(g.legendre(-1.0), 0.0);
        let b = MgfBound::BernoulliEnvelope { xi_max: 0.25 };
        assert_eq!(b.legendre(0.25), 0.0);
        // d(0.5, 0.25) = d(0.5, 0.75) by the p ↔ 1-p, q ↔ 1-q symmetry.
        assert_abs_diff_eq!(b.legendre(0.5), kl_bernoulli(0.5, 0.75), epsilon = 1e-15);
        assert_abs_diff_eq!(b.legendre(0.5), 0.143841036, epsilon = 1e-9);
        assert_eq!(b.legendre(1.5), f64::INFINITY);
        assert_abs_diff_eq!(b.legendre(1.0), 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn numeric_legendre_matches_closed_form() {
        for b in BOUNDS {
            for i in 0..100 {
                let x = -0.5 + 1.6 * i as f64 / 99.0;
                let (c, n) = (b.legendre(x), b.legendre_numeric(x));
                if c.is_infinite() {
                    assert_eq!(n, c);
                } else {
                    assert_abs_diff_eq!(c, n, epsilon = 1e-8);
                }
            }
        }
        let b = MgfBound::BernoulliEnvelope { xi_max: 0.3 };
        assert_abs_diff_eq!(b.legendre_numeric(1.0), -(0.3f64.ln()), epsilon = 1e-12);
    }

    #[test]
    fn legendre_identity() {
        let g = MgfBound::GaussianHalfSquare;
        assert_eq!(legendre_identity_check(&g, 2.0).unwrap(), 0.0);
        assert!(legendre_identity_check(&g, 1e-9).unwrap() < 1e-15);
        let b = MgfBound::BernoulliEnvelope { xi_max: 0.5 };
        assert!(legendre_identity_check(&b, 1.0).unwrap() <= 1e-8);
        assert!(legendre_identity_check(&b, 0.0).is_err());
    }

    #[test]
    fn legendre_is_nonnegative_nondecreasing_convex() {
        for b in BOUNDS {
            let xs: Vec<f64> = (0..=300).map(|i| -1.0 + 2.0 * i as f64 / 300.0).collect();
            let v: Vec<f64> = xs.iter().map(|&x| b.legendre(x)).collect();
            for w in v.windows(3) {
                assert!(w[0] >= 0.0);
                assert!(w[1] >= w[0]);
                if w[2].is_finite() {
                    assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
                }
            }
            // φ*(φ'(ρ)) strictly increasing in ρ.
            let mut prev = 0.0;
            for i in 1..100 {
                let rho = i as f64 * 0.1;
                let v = b.legendre(b.phi_prime(rho));
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn tail_bound_values() {
        assert_abs_diff_eq!(
            tail_bound(5.0, 100).unwrap(),
            24.0 * (-4f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(tail_bound(5.0, 100).unwrap(), 0.43958, epsilon = 1e-5);
        assert_abs_diff_eq!(
            tail_bound(8.0, 1000).unwrap(),
            56.0 * (-7f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(tail_bound(5.0, 1000).unwrap(), 0.64105, epsilon = 1e-5);
        assert_eq!(tail_bound(3.0, 1000).unwrap(), 1.0);
        assert_eq!(tail_bound(1.0, 100), Err(Error::PeelingUndefined(1.0)));
        assert!(tail_bound(0.5, 100).is_err());
        assert!(tail_bound(2.0, 1).is_err());
    }

    #[test]
    fn tail_bound_nonincreasing_on_integer_deltas() {
        for n in [2u64, 10, 100, 1000, 1_000_000] {
            let mut prev = tail_bound(2.0, n).unwrap();
            for d in 3..60 {
                let v = tail_bound(d as f64, n).unwrap();
                assert!(v <= prev, "n={n} delta={d}");
                prev = v;
            }
        }
    }

    #[test]
    fn pairings() {
        let g = MgfBound::GaussianHalfSquare;
        let b = MgfBound::BernoulliEnvelope { xi_max: 0.5 };
        assert!(check_pairing(&ZDistribution::StandardNormal, &g).is_ok());
        assert!(check_pairing(&ZDistribution::Bernoulli(0.5), &b).is_ok());
        assert!(check_pairing(&ZDistribution::Bernoulli(0.6), &b).is_err());
        assert!(check_pairing(&ZDistribution::StandardNormal, &b).is_err());
        assert!(check_pairing(&ZDistribution::Bernoulli(0.2), &g).is_err());
        assert!(check_pairing(
            &ZDistribution::StandardNormal,
            &MgfBound::Quadratic { variance: 0.5 }
        )
        .is_err());
    }

    #[test]
    fn always_on_counts_every_round_and_matches_gaussian_event() {
        let exp = AdaptedExperiment {
            n: 50,
            z: ZDistribution::StandardNormal,
            scheme: Scheme::AlwaysOn,
        };
        let g = MgfBound::GaussianHalfSquare;
        let mut rng = stream(1, StreamTag::Harness, 0);
        for _ in 0..2000 {
            let t = exp.run(&mut rng);
            assert_eq!(t.count, 50);
            for delta in [1.5, 3.0, 5.0] {
                assert_eq!(t.violates(&g, delta), gaussian_event(&t, delta));
            }
        }
    }

    #[test]
    fn empty_selection_never_violates() {
        let t = Trajectory { sum: 0.0, count: 0 };
        assert_eq!(t.xi_hat(), 0.0);
        assert!(!t.violates(&MgfBound::GaussianHalfSquare, 1.5));
        let exp = AdaptedExperiment {
            n: 100,
            z: ZDistribution::StandardNormal,
            scheme: Scheme::IidCoin(0.0),
        };
        let mut rng = stream(2, StreamTag::Harness, 0);
        let out =
            run_adapted_experiment(&exp, &MgfBound::GaussianHalfSquare, 1.5, &mut rng).unwrap();
        assert_eq!((out.count, out.violated), (0, false));
    }

    #[test]
    fn single_bernoulli_draw_violates_with_probability_p() {
        let exp = AdaptedExperiment {
            n: 1,
            z: ZDistribution::Bernoulli(0.25),
            scheme: Scheme::AlwaysOn,
        };
        let b = MgfBound::BernoulliEnvelope { xi_max: 0.25 };
        let r = 100_000;
        let mut hits = 0;
        for i in 0..r {
            let mut rng = stream(3, StreamTag::Harness, i);
            let out = run_adapted_experiment(&exp, &b, 0.5, &mut rng).unwrap();
            hits += out.violated as u64;
        }
        let rate = hits as f64 / r as f64;
        assert!((rate - 0.25).abs() <= 3.0 * (0.25f64 * 0.75 / r as f64).sqrt());
    }

    #[test]
    fn selections_are_predictable() {
        let mut rng = stream(4, StreamTag::Harness, 0);
        for scheme in [Scheme::AdaptiveSign, Scheme::AdaptiveCount] {
            let exp = AdaptedExperiment {
                n: 300,
                z: ZDistribution::StandardNormal,
                scheme,
            };
            let (traj, steps) = exp.run_traced(&mut rng);
            let (mut s, mut c) = (0.0, 0u64);
            for (i, step) in steps.iter().enumerate() {
                let t = i as u64 + 1;
                let expected = match scheme {
                    Scheme::AdaptiveSign => s <= 0.0,
                    _ => (c as f64) < t as f64 / 2.0,
                };
                assert_eq!(step.selected, expected);
                if step.selected {
                    s += step.z;
                    c += 1;
                }
            }
            assert_eq!((traj.sum, traj.count), (s, c));
        }
    }

    #[test]
    fn w_is_one_at_rho_zero() {
        let exp = AdaptedExperiment {
            n: 100,
            z: ZDistribution::Bernoulli(0.3),
            scheme: Scheme::AdaptiveSign,
        };
        let b = MgfBound::BernoulliEnvelope { xi_max: 0.5 };
        let reports = supermartingale_check(&b, &exp, &[0.0], 100, 9).unwrap();
        assert_eq!(reports[0].mean, 1.0);
        assert_eq!(reports[0].stderr, 0.0);
    }

    #[test]
    fn rejects_incompatible_or_bad_input() {
        let exp = AdaptedExperiment {
            n: 10,
            z: ZDistribution::StandardNormal,
            scheme: Scheme::AlwaysOn,
        };
        let b = MgfBound::BernoulliEnvelope { xi_max: 0.5 };
        let mut rng = stream(5, StreamTag::Harness, 0);
        assert!(run_adapted_experiment(&exp, &b, 2.0, &mut rng).is_err());
        let opts = HarnessOptions {
            replications: 10,
            seed: 0,
            enforce_pairing: true,
        };
        assert!(verify_bound(
            10,
            ZDistribution::StandardNormal,
            &Scheme::all(),
            &MgfBound::GaussianHalfSquare,
            &[1.0],
            opts
        )
        .is_err());
    }
}
