//! The generalised k-NN index strategy and comparison baselines.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Covariate, Environment};
use crate::error::{Error, Result};
use crate::index::{
    index_klucb, index_ucb, kl_upper_bound, select_k, IndexKind, IndexParams, Phi, KL_TOLERANCE,
};
use crate::knn::{order_neighbours, prefix_stats, ratio_or_zero, History, NeighbourStream};

/// What a policy chose in one round. `k` is the neighbourhood size used for
/// the chosen arm, or 0 when no neighbourhood was involved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Choice {
    pub arm: usize,
    pub k: usize,
}

/// A sequential decision rule. `observe` receives only the chosen arm's
/// reward.
pub trait Policy: Send {
    fn arms(&self) -> usize;
    fn choose(&mut self, x: &Covariate) -> Choice;
    fn observe(&mut self, x: &Covariate, arm: usize, reward: f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Index,
}

/// Per-arm intermediates of one index-phase decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmTrace {
    pub k: usize,
    pub count: u64,
    pub mean: f64,
    pub radius: f64,
    pub uncertainty: f64,
    pub index: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrace {
    pub t: u64,
    pub phase: Phase,
    pub chosen_arm: usize,
    /// Empty during initialisation.
    pub arms: Vec<ArmTrace>,
}

impl DecisionTrace {
    pub fn choice(&self) -> Choice {
        Choice {
            arm: self.chosen_arm,
            k: self.arms.get(self.chosen_arm).map_or(0, |a| a.k),
        }
    }
}

/// k-NN UCB / k-NN KL-UCB.
///
/// Rounds `1..=A` pull arms in order. Afterwards each arm picks the
/// neighbourhood size minimising its uncertainty, and the arm with the
/// largest index is played (lowest arm on ties).
#[derive(Debug, Clone)]
pub struct KnnIndexPolicy {
    params: IndexParams,
    arms: usize,
    history: History,
    pulls: Vec<u64>,
}

impl KnnIndexPolicy {
    pub fn new(params: IndexParams, arms: usize, dim: usize) -> Result<Self> {
        params.validate()?;
        if arms == 0 {
            return Err(Error::invalid("environment.arms", "must be at least 1"));
        }
        Ok(KnnIndexPolicy {
            params,
            arms,
            history: History::new(dim),
            pulls: vec![0; arms],
        })
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    /// The round about to be played.
    pub fn t(&self) -> u64 {
        self.history.len() as u64 + 1
    }

    pub fn decide(&self, x: &Covariate) -> DecisionTrace {
        let t = self.t();
        if t <= self.arms as u64 {
            return Self::init_trace(t);
        }
        let selected = self.select_neighbourhoods(x, t);
        self.finish(t, selected)
    }

    /// Same result as [`decide`](Self::decide), computed from the fully
    /// materialised prefix statistics of every arm.
    pub fn decide_reference(&self, x: &Covariate) -> DecisionTrace {
        let t = self.t();
        if t <= self.arms as u64 {
            return Self::init_trace(t);
        }
        let order = order_neighbours(x.coords(), &self.history)
            .expect("history is nonempty after initialisation");
        let IndexParams { theta, phi, .. } = self.params;
        let selected = (0..self.arms)
            .map(|arm| {
                let stats =
                    prefix_stats(&order, &self.history, arm, self.arms).expect("arm in range");
                let (k, uncertainty) = select_k(theta, phi, t, &stats).expect("nonempty stats");
                let at = stats.at(k);
                Selected {
                    k,
                    count: at.count,
                    sum: at.sum,
                    radius: at.radius,
                    uncertainty,
                }
            })
            .collect();
        self.finish(t, selected)
    }

    fn init_trace(t: u64) -> DecisionTrace {
        DecisionTrace {
            t,
            phase: Phase::Init,
            chosen_arm: (t - 1) as usize,
            arms: Vec::new(),
        }
    }

    /// Minimises the uncertainty of every arm in a single pass over the
    /// neighbours in distance order.
    ///
    /// Since `N_k` never exceeds the arm's total pulls and `r_k` never
    /// decreases, `sqrt(θ ln t / pulls) + φ(t) r_k` bounds every later
    /// uncertainty from below; once it reaches the current minimum no later
    /// `k` can win (ties go to the smaller `k`), and the arm is settled.
    fn select_neighbourhoods(&self, x: &Covariate, t: u64) -> Vec<Selected> {
        let mut stream = NeighbourStream::new(x.coords(), &self.history)
            .expect("history is nonempty after initialisation");
        let budget = self.params.theta * (t as f64).ln();
        let phi_t = self.params.phi.eval(t);

        #[derive(Clone, Copy)]
        struct Scan {
            count: u64,
            sum: f64,
            root: f64,
            floor_root: f64,
            best: Option<Selected>,
            settled: bool,
        }
        let mut scans: Vec<Scan> = self
            .pulls
            .iter()
            .map(|&p| Scan {
                count: 0,
                sum: 0.0,
                root: f64::INFINITY,
                floor_root: (budget / p as f64).sqrt(),
                best: None,
                // Never pulled: no neighbourhood has finite uncertainty.
                settled: p == 0,
            })
            .collect();
        let mut active = scans.iter().filter(|s| !s.settled).count();
        let arms = self.history.arms();
        let rewards = self.history.rewards();
        let mut end = 0;
        while active > 0 && end < stream.len() {
            let range = stream.advance();
            end = range.end;
            for q in range {
                let (radius, i) = stream.get(q);
                let own = &mut scans[arms[i]];
                own.count += 1;
                own.sum += rewards[i];
                own.root = (budget / own.count as f64).sqrt();
                for scan in scans.iter_mut().filter(|s| !s.settled && s.count > 0) {
                    let u = scan.root + phi_t * radius;
                    let best_u = match scan.best {
                        Some(b) if b.uncertainty <= u => b.uncertainty,
                        _ => {
                            scan.best = Some(Selected {
                                k: q + 1,
                                count: scan.count,
                                sum: scan.sum,
                                radius,
                                uncertainty: u,
                            });
                            u
                        }
                    };
                    if scan.floor_root + phi_t * radius >= best_u {
                        scan.settled = true;
                        active -= 1;
                    }
                }
                if active == 0 {
                    break;
                }
            }
        }
        let len = stream.len();
        scans
            .into_iter()
            .map(|s| {
                s.best.unwrap_or(Selected {
                    k: len,
                    count: 0,
                    sum: 0.0,
                    radius: stream.max_distance(),
                    uncertainty: f64::INFINITY,
                })
            })
            .collect()
    }

    fn finish(&self, t: u64, selected: Vec<Selected>) -> DecisionTrace {
        let IndexParams {
            theta,
            phi,
            kind,
            tol,
        } = self.params;
        let arms: Vec<ArmTrace> = selected
            .into_iter()
            .map(|s| {
                let mean = ratio_or_zero(s.sum, s.count);
                let index = match kind {
                    IndexKind::Ucb => index_ucb(mean, s.uncertainty),
                    IndexKind::KlUcb => index_klucb(mean, s.count, theta, phi, t, s.radius, tol)
                        .expect("KL-UCB configured with bounded rewards"),
                };
                ArmTrace {
                    k: s.k,
                    count: s.count,
                    mean,
                    radius: s.radius,
                    uncertainty: s.uncertainty,
                    index,
                }
            })
            .collect();
        let chosen_arm = argmax_total(arms.iter().map(|a| a.index));
        DecisionTrace {
            t,
            phase: Phase::Index,
            chosen_arm,
            arms,
        }
    }

    pub fn update(&mut self, x: &Covariate, arm: usize, reward: f64) {
        assert!(arm < self.arms, "arm {arm} out of range");
        self.history.push(x.coords(), arm, reward);
        self.pulls[arm] += 1;
    }
}

impl Policy for KnnIndexPolicy {
    fn arms(&self) -> usize {
        self.arms
    }

    fn choose(&mut self, x: &Covariate) -> Choice {
        self.decide(x).choice()
    }

    fn observe(&mut self, x: &Covariate, arm: usize, reward: f64) {
        self.update(x, arm, reward)
    }
}

/// The neighbourhood chosen for one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Selected {
    k: usize,
    count: u64,
    sum: f64,
    radius: f64,
    uncertainty: f64,
}

/// Argmax under the total order with `+∞` on top; lowest index on ties.
fn argmax_total(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if i == 0 || v.total_cmp(&best.1).is_gt() {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Ucb,
    KlUcb,
    UniformRandom,
    Oracle,
}

/// UCB or KL-UCB on global per-arm counts, ignoring the covariate.
#[derive(Debug, Clone)]
pub struct ContextFreeIndex {
    kind: IndexKind,
    theta: f64,
    counts: Vec<u64>,
    sums: Vec<f64>,
    t: u64,
}

impl ContextFreeIndex {
    pub fn new(kind: IndexKind, theta: f64, arms: usize) -> Self {
        ContextFreeIndex {
            kind,
            theta,
            counts: vec![0; arms],
            sums: vec![0.0; arms],
            t: 1,
        }
    }

    pub fn indices(&self) -> Vec<f64> {
        let budget = self.theta * (self.t as f64).ln();
        self.counts
            .iter()
            .zip(&self.sums)
            .map(|(&n, &s)| {
                if n == 0 {
                    return f64::INFINITY;
                }
                let mean = s / n as f64;
                match self.kind {
                    IndexKind::Ucb => mean + (budget / n as f64).sqrt(),
                    IndexKind::KlUcb => {
                        kl_upper_bound(mean.clamp(0.0, 1.0), n, budget, KL_TOLERANCE)
                    }
                }
            })
            .collect()
    }
}

impl Policy for ContextFreeIndex {
    fn arms(&self) -> usize {
        self.counts.len()
    }

    fn choose(&mut self, _x: &Covariate) -> Choice {
        let arm = if self.t <= self.counts.len() as u64 {
            (self.t - 1) as usize
        } else {
            argmax_total(self.indices().into_iter())
        };
        Choice { arm, k: 0 }
    }

    fn observe(&mut self, _x: &Covariate, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += reward;
        self.t += 1;
    }
}

#[derive(Debug, Clone)]
pub struct UniformRandom {
    arms: usize,
    rng: ChaCha8Rng,
}

impl UniformRandom {
    pub fn new(arms: usize, rng: ChaCha8Rng) -> Self {
        UniformRandom { arms, rng }
    }
}

impl Policy for UniformRandom {
    fn arms(&self) -> usize {
        self.arms
    }

    fn choose(&mut self, _x: &Covariate) -> Choice {
        Choice {
            arm: self.rng.gen_range(0..self.arms),
            k: 0,
        }
    }

    fn observe(&mut self, _x: &Covariate, _arm: usize, _reward: f64) {}
}

/// Plays `argmax_a f^a(x)` using the environment's mean field.
#[derive(Debug, Clone)]
pub struct Oracle {
    env: Environment,
}

impl Oracle {
    pub fn new(mean_field: Option<&Environment>) -> Result<Self> {
        let env = mean_field.ok_or(Error::MissingMeanField)?;
        Ok(Oracle { env: env.clone() })
    }
}

impl Policy for Oracle {
    fn arms(&self) -> usize {
        self.env.arms()
    }

    fn choose(&mut self, x: &Covariate) -> Choice {
        Choice {
            arm: self.env.oracle(x.coords()).0,
            k: 0,
        }
    }

    fn observe(&mut self, _x: &Covariate, _arm: usize, _reward: f64) {}
}

/// Always plays the same arm.
#[derive(Debug, Clone)]
pub struct FixedArm {
    arms: usize,
    arm: usize,
}

impl FixedArm {
    pub fn new(arm: usize, arms: usize) -> Result<Self> {
        if arm >= arms {
            return Err(Error::ArmOutOfRange { arm, arms });
        }
        Ok(FixedArm { arms, arm })
    }
}

impl Policy for FixedArm {
    fn arms(&self) -> usize {
        self.arms
    }

    fn choose(&mut self, _x: &Covariate) -> Choice {
        Choice {
            arm: self.arm,
            k: 0,
        }
    }

    fn observe(&mut self, _x: &Covariate, _arm: usize, _reward: f64) {}
}

/// Builds a context-free baseline. The oracle needs the mean field.
pub fn baseline_context_free(
    kind: BaselineKind,
    arms: usize,
    theta: f64,
    mean_field: Option<&Environment>,
    rng: ChaCha8Rng,
) -> Result<Box<dyn Policy>> {
    Ok(match kind {
        BaselineKind::Ucb => Box::new(ContextFreeIndex::new(IndexKind::Ucb, theta, arms)),
        BaselineKind::KlUcb => Box::new(ContextFreeIndex::new(IndexKind::KlUcb, theta, arms)),
        BaselineKind::UniformRandom => Box::new(UniformRandom::new(arms, rng)),
        BaselineKind::Oracle => Box::new(Oracle::new(mean_field)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    KnnUcb,
    KnnKlUcb,
    CfUcb,
    CfKlUcb,
    Uniform,
    Oracle,
    /// Always plays the given (zero-based) arm.
    Fixed(usize),
}

impl PolicyKind {
    pub fn name(self) -> String {
        match self {
            PolicyKind::KnnUcb => "knn_ucb".into(),
            PolicyKind::KnnKlUcb => "knn_klucb".into(),
            PolicyKind::CfUcb => "cf_ucb".into(),
            PolicyKind::CfKlUcb => "cf_klucb".into(),
            PolicyKind::Uniform => "uniform".into(),
            PolicyKind::Oracle => "oracle".into(),
            PolicyKind::Fixed(a) => format!("fixed_{}", a + 1),
        }
    }

    pub fn requires_bounded_rewards(self) -> bool {
        matches!(self, PolicyKind::KnnKlUcb | PolicyKind::CfKlUcb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub theta: f64,
    pub phi: Phi,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, theta: f64, phi: Phi) -> Self {
        PolicySpec { kind, theta, phi }
    }

    pub fn validate(&self, env: &Environment) -> Result<()> {
        if self.kind.requires_bounded_rewards() && !env.noise().is_bounded() {
            return Err(Error::UnboundedRewards);
        }
        match self.kind {
            PolicyKind::KnnUcb | PolicyKind::KnnKlUcb => self.index_params().validate(),
            PolicyKind::CfUcb | PolicyKind::CfKlUcb if !(self.theta > 0.0) => {
                Err(Error::invalid("policy.theta", "must be finite and > 0"))
            }
            PolicyKind::Fixed(a) if a >= env.arms() => Err(Error::ArmOutOfRange {
                arm: a,
                arms: env.arms(),
            }),
            _ => Ok(()),
        }
    }

    fn index_params(&self) -> IndexParams {
        let kind = match self.kind {
            PolicyKind::KnnKlUcb | PolicyKind::CfKlUcb => IndexKind::KlUcb,
            _ => IndexKind::Ucb,
        };
        IndexParams::new(kind, self.theta, self.phi)
    }

    pub fn build(&self, env: &Environment, rng: ChaCha8Rng) -> Result<Box<dyn Policy>> {
        self.validate(env)?;
        let arms = env.arms();
        Ok(match self.kind {
            PolicyKind::KnnUcb | PolicyKind::KnnKlUcb => {
                Box::new(KnnIndexPolicy::new(self.index_params(), arms, env.dim())?)
            }
            PolicyKind::CfUcb => {
                baseline_context_free(BaselineKind::Ucb, arms, self.theta, None, rng)?
            }
            PolicyKind::CfKlUcb => {
                baseline_context_free(BaselineKind::KlUcb, arms, self.theta, None, rng)?
            }
            PolicyKind::Uniform => {
                baseline_context_free(BaselineKind::UniformRandom, arms, self.theta, None, rng)?
            }
            PolicyKind::Oracle => {
                baseline_context_free(BaselineKind::Oracle, arms, self.theta, Some(env), rng)?
            }
            PolicyKind::Fixed(a) => Box::new(FixedArm::new(a, arms)?),
        })
    }
}
