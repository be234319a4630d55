//! Neighbour ordering and per-arm prefix statistics over the reward history.
//!
//! For a query point `x` the history is enumerated by nondecreasing distance
//! (ties go to the earlier sample). The first `k` entries of that enumeration
//! form the neighbourhood of size `k`; for every `k` at once we accumulate the
//! arm's pull count `N_k`, reward sum `S_k`, the radius `r_k` and the mean
//! `S_k / N_k` with `0/0 := 0`.
//!
//! [`order_neighbours`] and [`prefix_stats`] materialise everything: one query
//! costs `O(t log t)` for the sort plus `O(t)` per arm, so a run of horizon `n`
//! is `O(n² log n)`. [`NeighbourStream`] orders lazily for callers that can
//! stop early; nothing is kept between queries.

use crate::env::euclidean;
use crate::error::{Error, Result};

/// A single history entry, borrowed from a [`History`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry<'a> {
    pub x: &'a [f64],
    pub arm: usize,
    pub reward: f64,
}

/// Append-only reward history, stored column-wise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    dim: usize,
    coords: Vec<f64>,
    arms: Vec<usize>,
    rewards: Vec<f64>,
}

impl History {
    pub fn new(dim: usize) -> Self {
        History {
            dim,
            ..Default::default()
        }
    }

    pub fn with_capacity(dim: usize, capacity: usize) -> Self {
        History {
            dim,
            coords: Vec::with_capacity(dim * capacity),
            arms: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn push(&mut self, x: &[f64], arm: usize, reward: f64) {
        assert_eq!(x.len(), self.dim, "covariate dimension mismatch");
        self.coords.extend_from_slice(x);
        self.arms.push(arm);
        self.rewards.push(reward);
    }

    pub fn get(&self, i: usize) -> HistoryEntry<'_> {
        HistoryEntry {
            x: self.x(i),
            arm: self.arms[i],
            reward: self.rewards[i],
        }
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn arms(&self) -> &[usize] {
        &self.arms
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn iter(&self) -> impl Iterator<Item = HistoryEntry<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn pulls(&self, arm: usize) -> usize {
        self.arms.iter().filter(|&&a| a == arm).count()
    }
}

/// History indices (zero-based) sorted by distance to a query point.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighbourOrder {
    pub order: Vec<usize>,
    pub dist: Vec<f64>,
}

impl NeighbourOrder {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

pub fn order_neighbours(x: &[f64], history: &History) -> Result<NeighbourOrder> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if x.len() != history.dim() {
        return Err(Error::DimensionMismatch {
            expected: history.dim(),
            got: x.len(),
        });
    }
    let mut keyed: Vec<(f64, u32)> = (0..history.len())
        .map(|i| (euclidean(x, history.x(i)), i as u32))
        .collect();
    // Distances are finite and nonnegative, so total_cmp is the usual order.
    keyed.sort_unstable_by(by_distance_then_index);
    let (dist, order) = keyed.into_iter().map(|(d, i)| (d, i as usize)).unzip();
    Ok(NeighbourOrder { order, dist })
}

/// Nearest neighbours delivered in order, sorting only as far as requested.
///
/// Chunks of doubling size are carved off the unsorted remainder with a
/// selection step and then sorted, so consumers that stop early pay `O(t)`
/// rather than `O(t log t)`. The enumeration is identical to
/// [`order_neighbours`].
#[derive(Debug, Clone)]
pub struct NeighbourStream {
    keyed: Vec<(f64, u32)>,
    ready: usize,
    chunk: usize,
}

#[inline]
fn by_distance_then_index(a: &(f64, u32), b: &(f64, u32)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl NeighbourStream {
    const FIRST_CHUNK: usize = 64;

    pub fn new(x: &[f64], history: &History) -> Result<Self> {
        if history.is_empty() {
            return Err(Error::EmptyHistory);
        }
        if x.len() != history.dim() {
            return Err(Error::DimensionMismatch {
                expected: history.dim(),
                got: x.len(),
            });
        }
        let keyed = (0..history.len())
            .map(|i| (euclidean(x, history.x(i)), i as u32))
            .collect();
        Ok(NeighbourStream {
            keyed,
            ready: 0,
            chunk: Self::FIRST_CHUNK.max(history.len() / 16),
        })
    }

    pub fn len(&self) -> usize {
        self.keyed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyed.is_empty()
    }

    /// Largest distance in the whole history.
    pub fn max_distance(&self) -> f64 {
        self.keyed.iter().map(|k| k.0).fold(0.0, f64::max)
    }

    /// Sorts the next chunk and returns the range of newly ordered positions.
    pub fn advance(&mut self) -> std::ops::Range<usize> {
        let start = self.ready;
        let rest = &mut self.keyed[start..];
        if rest.len() > self.chunk {
            rest.select_nth_unstable_by(self.chunk - 1, by_distance_then_index);
            rest[..self.chunk].sort_unstable_by(by_distance_then_index);
            self.ready += self.chunk;
            self.chunk *= 4;
        } else {
            rest.sort_unstable_by(by_distance_then_index);
            self.ready = self.keyed.len();
        }
        start..self.ready
    }

    /// `(distance, history index)` at ordered position `q`; `q` must be
    /// below the end of the last range returned by [`advance`](Self::advance).
    #[inline]
    pub fn get(&self, q: usize) -> (f64, usize) {
        debug_assert!(q < self.ready);
        let (d, i) = self.keyed[q];
        (d, i as usize)
    }
}

/// Cumulative statistics of one arm for every neighbourhood size.
///
/// Entry `k - 1` describes the `k` nearest neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixStats {
    pub arm: usize,
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
    pub radii: Vec<f64>,
    pub means: Vec<f64>,
}

impl PrefixStats {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Statistics of the `k` nearest neighbours, `1 <= k <= len`.
    pub fn at(&self, k: usize) -> NeighbourhoodStats {
        NeighbourhoodStats {
            count: self.counts[k - 1],
            sum: self.sums[k - 1],
            radius: self.radii[k - 1],
            mean: self.means[k - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighbourhoodStats {
    pub count: u64,
    pub sum: f64,
    pub radius: f64,
    pub mean: f64,
}

/// `S / N` with `0/0 := 0`.
#[inline]
pub fn ratio_or_zero(sum: f64, count: u64) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

pub fn prefix_stats(
    order: &NeighbourOrder,
    history: &History,
    arm: usize,
    arms: usize,
) -> Result<PrefixStats> {
    if arm >= arms {
        return Err(Error::ArmOutOfRange { arm, arms });
    }
    if order.len() != history.len() {
        return Err(Error::invalid(
            "order",
            format!(
                "covers {} entries, history has {}",
                order.len(),
                history.len()
            ),
        ));
    }
    let len = order.len();
    let mut counts = Vec::with_capacity(len);
    let mut sums = Vec::with_capacity(len);
    let mut means = Vec::with_capacity(len);
    let mut n = 0u64;
    let mut s = 0.0f64;
    let hist_arms = history.arms();
    let hist_rewards = history.rewards();
    for &i in &order.order {
        if hist_arms[i] == arm {
            n += 1;
            s += hist_rewards[i];
        }
        counts.push(n);
        sums.push(s);
        means.push(ratio_or_zero(s, n));
    }
    Ok(PrefixStats {
        arm,
        counts,
        sums,
        radii: order.dist.clone(),
        means,
    })
}

/// Recomputes the statistics of the `k` nearest neighbours from the
/// definitions with a full stable sort. Slow; used to cross-check
/// [`prefix_stats`].
pub fn naive_stats(
    x: &[f64],
    history: &History,
    arm: usize,
    k: usize,
) -> Result<NeighbourhoodStats> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if k == 0 || k > history.len() {
        return Err(Error::invalid(
            "k",
            format!("must be in 1..={}", history.len()),
        ));
    }
    let mut idx: Vec<usize> = (0..history.len()).collect();
    let dist: Vec<f64> = (0..history.len())
        .map(|i| euclidean(x, history.x(i)))
        .collect();
    idx.sort_by(|&a, &b| dist[a].partial_cmp(&dist[b]).expect("finite distances"));
    let mut count = 0u64;
    let mut sum = 0.0;
    for &i in &idx[..k] {
        let e = history.get(i);
        if e.arm == arm {
            count += 1;
            sum += e.reward;
        }
    }
    Ok(NeighbourhoodStats {
        count,
        sum,
        radius: dist[idx[k - 1]],
        mean: ratio_or_zero(sum, count),
    })
}
