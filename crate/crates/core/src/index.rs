//! Uncertainty values and the k-NN UCB / KL-UCB indices.
//!
//! Infinite values are ordinary `f64::INFINITY`; comparisons use
//! [`f64::total_cmp`] so `+∞` orders above every finite value.

use crate::error::{Error, Result};
use crate::knn::PrefixStats;

/// Default absolute tolerance of the KL-UCB bisection.
pub const KL_TOLERANCE: f64 = 1e-9;
/// Iteration cap of the KL-UCB bisection.
pub const KL_MAX_ITER: usize = 100;

/// Nondecreasing weight `φ: ℕ → [1, ∞)` on the radius term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi {
    /// `φ(t) = c` with `c >= 1`.
    Const(f64),
    /// `φ(t) = max(1, c ln t)` with `c > 0`.
    LogScaled(f64),
}

impl Phi {
    pub fn eval(self, t: u64) -> f64 {
        match self {
            Phi::Const(c) => c,
            Phi::LogScaled(c) => (c * (t.max(1) as f64).ln()).max(1.0),
        }
    }

    pub fn validate(self, field: &str) -> Result<()> {
        match self {
            Phi::Const(c) if !(c >= 1.0 && c.is_finite()) => Err(Error::invalid(
                format!("{field}.scale"),
                "constant phi must be >= 1",
            )),
            Phi::LogScaled(c) if !(c > 0.0 && c.is_finite()) => Err(Error::invalid(
                format!("{field}.scale"),
                "log-scaled phi needs scale > 0",
            )),
            _ => Ok(()),
        }
    }

    /// Largest value `φ` ever reaches, if bounded.
    fn supremum(self) -> Option<f64> {
        match self {
            Phi::Const(c) => Some(c),
            Phi::LogScaled(_) => None,
        }
    }
}

/// `φ⁻¹(λ) = inf{t ∈ ℕ : φ(t) ≥ λ}`, or `None` when no representable `t`
/// reaches `λ`.
pub fn phi_inverse(phi: Phi, lambda: f64) -> Option<u64> {
    if phi.eval(1) >= lambda {
        return Some(1);
    }
    if phi.supremum().is_some_and(|s| s < lambda) {
        return None;
    }
    // Doubling bracket: phi(lo) < lambda <= phi(hi).
    let mut lo = 1u64;
    let mut hi = 2u64;
    while phi.eval(hi) < lambda {
        lo = hi;
        hi = hi.checked_mul(2)?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if phi.eval(mid) >= lambda {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    Ucb,
    KlUcb,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexParams {
    pub theta: f64,
    pub phi: Phi,
    pub kind: IndexKind,
    pub tol: f64,
}

impl IndexParams {
    pub fn new(kind: IndexKind, theta: f64, phi: Phi) -> Self {
        IndexParams {
            theta,
            phi,
            kind,
            tol: KL_TOLERANCE,
        }
    }

    /// θ = 4.5 for UCB, 2.5 for KL-UCB, with `φ(t) = max(1, ln t)`.
    pub fn recommended(kind: IndexKind) -> Self {
        let theta = match kind {
            IndexKind::Ucb => 4.5,
            IndexKind::KlUcb => 2.5,
        };
        IndexParams::new(kind, theta, Phi::LogScaled(1.0))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid("policy.theta", "must be finite and > 0"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("policy.tol", "must be > 0"));
        }
        self.phi.validate("policy.phi")
    }
}

/// Bernoulli KL divergence `d(p, q)`, with `0 log 0 = 0` and `+∞` when `q`
/// sits on the boundary but `p` does not.
pub fn kl_div(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutsideUnitInterval {
            name: "p",
            value: p,
        });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutsideUnitInterval {
            name: "q",
            value: q,
        });
    }
    Ok(kl_bernoulli(p, q))
}

/// [`kl_div`] without range checks.
#[inline]
pub fn kl_bernoulli(p: f64, q: f64) -> f64 {
    let head = if p > 0.0 {
        if q <= 0.0 {
            return f64::INFINITY;
        }
        p * (p / q).ln()
    } else {
        0.0
    };
    let tail = if p < 1.0 {
        if q >= 1.0 {
            return f64::INFINITY;
        }
        (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
    } else {
        0.0
    };
    // Rounding can leave a tiny negative value when p ≈ q.
    (head + tail).max(0.0)
}

/// `U = sqrt(θ ln t / N) + φ(t) r`, infinite when `N = 0`.
#[inline]
pub fn uncertainty(theta: f64, phi: Phi, t: u64, count: u64, radius: f64) -> f64 {
    uncertainty_with(theta * (t as f64).ln(), phi.eval(t), count, radius)
}

/// [`uncertainty`] with the budget `θ ln t` and `φ(t)` precomputed.
#[inline]
pub fn uncertainty_with(budget: f64, phi_t: f64, count: u64, radius: f64) -> f64 {
    if count == 0 {
        return f64::INFINITY;
    }
    (budget / count as f64).sqrt() + phi_t * radius
}

/// The minimising neighbourhood size (one-based) and its uncertainty. Ties go
/// to the smallest `k`; if every value is infinite the whole history is used.
pub fn select_k(theta: f64, phi: Phi, t: u64, stats: &PrefixStats) -> Result<(usize, f64)> {
    if stats.is_empty() {
        return Err(Error::EmptyStats);
    }
    let budget = theta * (t as f64).ln();
    let phi_t = phi.eval(t);
    let values = stats
        .counts
        .iter()
        .zip(&stats.radii)
        .map(|(&n, &r)| uncertainty_with(budget, phi_t, n, r));
    Ok(argmin_first(values).unwrap_or((stats.len(), f64::INFINITY)))
}

/// First position (one-based) of the smallest finite value, if any.
pub(crate) fn argmin_first(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, u) in values.enumerate() {
        if u.is_finite() && best.map_or(true, |(_, b)| u < b) {
            best = Some((i + 1, u));
        }
    }
    best
}

/// k-NN UCB index: `f̂ + U`.
#[inline]
pub fn index_ucb(mean: f64, uncertainty: f64) -> f64 {
    mean + uncertainty
}

/// `sup{ω ∈ [0,1] : N d(f̂, ω) ≤ budget}` by bisection on `[f̂, 1]`.
///
/// The returned value is always feasible and within `tol` of the supremum.
pub fn kl_upper_bound(mean: f64, count: u64, budget: f64, tol: f64) -> f64 {
    if count == 0 || mean >= 1.0 {
        return 1.0;
    }
    let n = count as f64;
    if n * kl_bernoulli(mean, 1.0) <= budget {
        return 1.0;
    }
    let mut lo = mean;
    let mut hi = 1.0;
    for _ in 0..KL_MAX_ITER {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if n * kl_bernoulli(mean, mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// k-NN KL-UCB index: the KL upper bound at budget `θ ln t` plus `φ(t) r`.
pub fn index_klucb(
    mean: f64,
    count: u64,
    theta: f64,
    phi: Phi,
    t: u64,
    radius: f64,
    tol: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&mean) {
        return Err(Error::UnboundedRewards);
    }
    let budget = theta * (t as f64).ln();
    Ok(kl_upper_bound(mean, count, budget, tol) + phi.eval(t) * radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn kl_values() {
        assert_eq!(kl_div(0.5, 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(kl_div(1.0, 0.5).unwrap(), 2f64.ln(), epsilon = 1e-15);
        // 0.5 ln(2/3) + 0.5 ln 2
        assert_abs_diff_eq!(kl_div(0.5, 0.75).unwrap(), 0.143841036, epsilon = 1e-9);
        assert_eq!(kl_div(0.3, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(kl_div(0.3, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(kl_div(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(kl_div(1.0, 1.0).unwrap(), 0.0);
        assert!(kl_div(1.2, 0.5).is_err());
        assert!(kl_div(0.5, -0.1).is_err());
    }

    #[test]
    fn uncertainty_values() {
        // θ ln t = 4 via θ = 4 / ln 3 at t = 3.
        let theta = 4.0 / 3f64.ln();
        assert_abs_diff_eq!(
            uncertainty(theta, Phi::Const(1.0), 3, 4, 0.5),
            1.5,
            epsilon = 1e-12
        );
        assert_eq!(uncertainty(4.5, Phi::Const(1.0), 10, 0, 0.1), f64::INFINITY);
        assert_abs_diff_eq!(
            uncertainty(4.5, Phi::Const(1.0), 8, 9, 0.2),
            (4.5 * 8f64.ln() / 9.0).sqrt() + 0.2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            uncertainty(4.5, Phi::Const(1.0), 8, 9, 0.2),
            1.21967,
            epsilon = 1e-5
        );
    }

    fn stats_from(counts: Vec<u64>, radii: Vec<f64>) -> PrefixStats {
        let n = counts.len();
        PrefixStats {
            arm: 0,
            counts,
            sums: vec![0.0; n],
            radii,
            means: vec![0.0; n],
        }
    }

    #[test]
    fn argmin_ties_go_to_smallest_k() {
        let got = argmin_first([f64::INFINITY, 3.0, 2.1, 2.1, 2.4].into_iter());
        assert_eq!(got, Some((3, 2.1)));
        assert_eq!(argmin_first([f64::INFINITY; 3].into_iter()), None);
    }

    #[test]
    fn select_k_with_constant_count() {
        // The arm appears only as the nearest neighbour: N = 1 everywhere.
        let s = stats_from(vec![0, 1, 1, 1, 1], vec![0.0, 0.1, 0.2, 0.3, 0.4]);
        let (k, _) = select_k(4.5, Phi::Const(1.0), 6, &s).unwrap();
        assert_eq!(k, 2);
        let s = stats_from(vec![1], vec![0.3]);
        assert_eq!(select_k(4.5, Phi::Const(1.0), 2, &s).unwrap().0, 1);
        let s = stats_from(vec![0, 0], vec![0.1, 0.2]);
        assert_eq!(
            select_k(4.5, Phi::Const(1.0), 3, &s).unwrap(),
            (2, f64::INFINITY)
        );
        assert_eq!(
            select_k(4.5, Phi::Const(1.0), 3, &stats_from(vec![], vec![])),
            Err(Error::EmptyStats)
        );
    }

    #[test]
    fn ucb_index() {
        assert_eq!(index_ucb(0.75, 1.5), 2.25);
        assert_eq!(index_ucb(0.3, f64::INFINITY), f64::INFINITY);
        assert_eq!(index_ucb(0.0, 0.0), 0.0);
    }

    /// Scan of `d(0.5, ·)` on a fine grid: independent of the bisection.
    fn grid_sup(mean: f64, count: u64, budget: f64, step: f64) -> f64 {
        let mut best = mean;
        let mut w = mean;
        while w <= 1.0 {
            if count as f64 * kl_bernoulli(mean, w) <= budget {
                best = w;
            }
            w += step;
        }
        best
    }

    #[test]
    fn klucb_worked_values() {
        let theta = 1.0 / 3f64.ln();
        let idx = index_klucb(0.5, 10, theta, Phi::Const(1.0), 3, 0.0, 1e-3).unwrap();
        assert_abs_diff_eq!(idx, grid_sup(0.5, 10, 1.0, 1e-6), epsilon = 1e-3);
        assert_abs_diff_eq!(idx, 0.7127, epsilon = 1e-3);
        let idx = index_klucb(0.4, 0, 2.5, Phi::Const(2.0), 10, 0.3, 1e-9).unwrap();
        assert_abs_diff_eq!(idx, 1.6, epsilon = 1e-15);
        assert_eq!(kl_upper_bound(1.0, 7, 0.1, 1e-9), 1.0);
        assert_eq!(
            index_klucb(1.5, 3, 2.5, Phi::Const(1.0), 10, 0.0, 1e-9),
            Err(Error::UnboundedRewards)
        );
    }

    #[test]
    fn phi_inverse_values() {
        assert_eq!(phi_inverse(Phi::Const(1.0), 1.0), Some(1));
        assert_eq!(phi_inverse(Phi::LogScaled(1.0), 2.0), Some(8));
        assert_eq!(phi_inverse(Phi::Const(1.0), 2.0), None);
        for lambda in [1.5, 3.0, 7.25, 20.0] {
            let t = phi_inverse(Phi::LogScaled(1.0), lambda).unwrap();
            assert!(Phi::LogScaled(1.0).eval(t) >= lambda);
            assert!(Phi::LogScaled(1.0).eval(t - 1) < lambda);
        }
    }

    #[test]
    fn phi_is_nondecreasing_and_at_least_one() {
        for phi in [
            Phi::Const(1.0),
            Phi::Const(3.0),
            Phi::LogScaled(0.3),
            Phi::LogScaled(2.0),
        ] {
            let mut prev = phi.eval(1);
            assert!(prev >= 1.0);
            for t in 2..5000 {
                let v = phi.eval(t);
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn kl_monotone_on_grid() {
        for i in 1..50 {
            let p = i as f64 / 50.0;
            let mut prev = 0.0;
            for j in 0..=200 {
                let q = p + (1.0 - p) * j as f64 / 200.0;
                if q >= 1.0 {
                    break;
                }
                let d = kl_bernoulli(p, q);
                assert!(d >= prev);
                if j > 0 {
                    assert!(d > prev, "p={p} q={q}");
                }
                prev = d;
            }
            let mut prev = 0.0;
            for j in 0..=200 {
                let q = p - p * j as f64 / 200.0;
                if q <= 0.0 {
                    break;
                }
                let d = kl_bernoulli(p, q);
                if j > 0 {
                    assert!(d > prev, "p={p} q={q}");
                }
                prev = d;
            }
        }
    }

    proptest! {
        #[test]
        fn kl_nonnegative(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            let d = kl_div(p, q).unwrap();
            prop_assert!(d >= 0.0);
            if p == q { prop_assert_eq!(d, 0.0); }
        }

        #[test]
        fn klucb_bracket_and_self_consistency(
            mean in 0.0f64..1.0,
            count in 1u64..500,
            budget in 0.01f64..20.0,
        ) {
            let tol = 1e-9;
            let s = kl_upper_bound(mean, count, budget, tol);
            prop_assert!(s >= mean && s <= 1.0);
            let n = count as f64;
            prop_assert!(n * kl_bernoulli(mean, s) <= budget);
            if s + 2.0 * tol <= 1.0 {
                prop_assert!(n * kl_bernoulli(mean, s + 2.0 * tol) > budget);
            }
        }

        #[test]
        fn klucb_monotone(
            mean in 0.0f64..1.0,
            count in 1u64..200,
            theta in 0.5f64..5.0,
            t in 2u64..10_000,
        ) {
            let base = index_klucb(mean, count, theta, Phi::Const(1.0), t, 0.0, 1e-12).unwrap();
            let more_theta = index_klucb(mean, count, theta * 1.5, Phi::Const(1.0), t, 0.0, 1e-12).unwrap();
            let more_t = index_klucb(mean, count, theta, Phi::Const(1.0), t * 2, 0.0, 1e-12).unwrap();
            let more_n = index_klucb(mean, count * 2, theta, Phi::Const(1.0), t, 0.0, 1e-12).unwrap();
            prop_assert!(more_theta >= base - 1e-12);
            prop_assert!(more_t >= base - 1e-12);
            prop_assert!(more_n <= base + 1e-12);
        }

        #[test]
        fn select_k_scale_invariant(
            increments in proptest::collection::vec((0u64..=1, 0.0f64..0.1), 1..60),
            scale in 0.1f64..10.0,
        ) {
            // Build a PrefixStats and a copy whose U values are all scaled by
            // `scale`: multiply radii by scale and the budget by scale².
            let mut counts = Vec::new();
            let mut radii = Vec::new();
            let (mut n, mut r) = (0, 0.0);
            for (dn, dr) in increments {
                n += dn;
                r += dr;
                counts.push(n);
                radii.push(r);
            }
            let stats = stats_from(counts.clone(), radii.clone());
            let scaled = stats_from(counts, radii.iter().map(|r| r * scale).collect());
            let t = 50u64;
            let (k1, u1) = select_k(3.0, Phi::Const(1.0), t, &stats).unwrap();
            let (k2, u2) = select_k(3.0 * scale * scale, Phi::Const(1.0), t, &scaled).unwrap();
            if u1.is_finite() {
                // Scaling can only break exact ties through rounding.
                let values: Vec<f64> = stats.counts.iter().zip(&stats.radii)
                    .map(|(&n, &r)| uncertainty(3.0, Phi::Const(1.0), t, n, r)).collect();
                let near_tie = values.iter().enumerate()
                    .any(|(i, v)| i + 1 != k1 && (v - u1).abs() <= 1e-9 * u1.abs());
                if !near_tie { prop_assert_eq!(k1, k2); }
                prop_assert!((u2 - u1 * scale).abs() <= 1e-9 * u2.abs().max(1.0));
            } else {
                prop_assert_eq!(k1, k2);
            }
        }

        #[test]
        fn klucb_saturates(mean in 0.0f64..1.0, count in 1u64..50, r in 0.0f64..0.5) {
            let idx = index_klucb(mean, count, 1e6, Phi::Const(2.0), 100, r, 1e-9).unwrap();
            // Within the bisection tolerance when d(f̂, 1) is infinite.
            prop_assert!((idx - (1.0 + 2.0 * r)).abs() <= 2e-9);
        }
    }
}
