//! The interaction loop and regret accounting.
//!
//! Each round the environment realises every arm's reward. The policy sees
//! only the reward of the arm it played; the rest feed the realised regret
//! `Σ (Y^{π*} - Y^{π})` and the pseudo-regret `Σ (f^{π*}(X) - f^{π}(X))`.

use rayon::prelude::*;
use serde::Serialize;

use crate::env::{Environment, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::policy::{Policy, PolicySpec};
use crate::rng::{stream, StreamTag};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub environment: EnvironmentSpec,
    pub policy: PolicySpec,
    pub horizon: u64,
    pub master_seed: u64,
    pub replications: u64,
    /// Stride of the per-round records; the last round is always recorded.
    pub record_every: u64,
}

impl RunConfig {
    /// Checks every constraint and returns the built environment.
    pub fn validate(&self) -> Result<Environment> {
        let env = self.environment.build()?;
        if self.horizon < env.arms() as u64 {
            return Err(Error::invalid(
                "horizon",
                format!("must be at least the number of arms ({})", env.arms()),
            ));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be at least 1"));
        }
        self.policy.validate(&env)?;
        Ok(env)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundRecord {
    pub t: u64,
    pub chosen_arm: usize,
    pub k: usize,
    pub reward: f64,
    pub oracle_arm: usize,
    pub oracle_reward: f64,
    pub regret: f64,
    pub pseudo_regret: f64,
    pub cum_regret: f64,
    pub cum_pseudo_regret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: u64,
    pub regret: f64,
    pub pseudo_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub replication: u64,
    pub final_regret: f64,
    pub final_pseudo_regret: f64,
    #[serde(skip)]
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub result: ReplicationResult,
}

/// Plays `policy` against `env` for `horizon` rounds.
pub fn simulate(
    env: &Environment,
    policy: &mut dyn Policy,
    horizon: u64,
    record_every: u64,
    replication: u64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> RunOutput {
    assert!(record_every >= 1);
    let mut records = Vec::with_capacity((horizon / record_every + 1) as usize);
    let (mut cum_regret, mut cum_pseudo) = (0.0, 0.0);
    for t in 1..=horizon {
        let round = env.sample_round(rng);
        let choice = policy.choose(&round.x);
        let arm = choice.arm;
        let reward = round.rewards[arm];
        policy.observe(&round.x, arm, reward);

        let oracle_reward = round.rewards[round.oracle_arm];
        let regret = oracle_reward - reward;
        let pseudo_regret = round.oracle_mean - round.means[arm];
        cum_regret += regret;
        cum_pseudo += pseudo_regret;
        if t % record_every == 0 || t == horizon {
            records.push(RoundRecord {
                t,
                chosen_arm: arm,
                k: choice.k,
                reward,
                oracle_arm: round.oracle_arm,
                oracle_reward,
                regret,
                pseudo_regret,
                cum_regret,
                cum_pseudo_regret: cum_pseudo,
            });
        }
    }
    let checkpoints = records
        .iter()
        .map(|r| Checkpoint {
            t: r.t,
            regret: r.cum_regret,
            pseudo_regret: r.cum_pseudo_regret,
        })
        .collect();
    RunOutput {
        records,
        result: ReplicationResult {
            replication,
            final_regret: cum_regret,
            final_pseudo_regret: cum_pseudo,
            checkpoints,
        },
    }
}

/// One replication, fully determined by `(master_seed, replication)`.
pub fn run_once(config: &RunConfig, replication: u64) -> Result<RunOutput> {
    let env = config.validate()?;
    let mut policy = config.policy.build(
        &env,
        stream(config.master_seed, StreamTag::Policy, replication),
    )?;
    let mut rng = stream(config.master_seed, StreamTag::Environment, replication);
    Ok(simulate(
        &env,
        policy.as_mut(),
        config.horizon,
        config.record_every,
        replication,
        &mut rng,
    ))
}

/// Runs the given replications in parallel; output is in the given order.
pub fn run_replications(config: &RunConfig, replications: &[u64]) -> Result<Vec<RunOutput>> {
    config.validate()?;
    replications
        .par_iter()
        .map(|&r| run_once(config, r))
        .collect()
}

pub fn run_all(config: &RunConfig) -> Result<Vec<RunOutput>> {
    let reps: Vec<u64> = (0..config.replications).collect();
    run_replications(config, &reps)
}

pub fn run_replicated(config: &RunConfig) -> Result<RunSummary> {
    let outputs = run_all(config)?;
    Ok(RunSummary::aggregate(
        outputs.into_iter().map(|o| o.result).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCheckpoint {
    pub t: u64,
    pub mean_regret: f64,
    pub mean_pseudo_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub replications: Vec<ReplicationResult>,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    pub mean_pseudo_regret: f64,
    pub stderr_pseudo_regret: f64,
    pub checkpoints: Vec<MeanCheckpoint>,
}

impl RunSummary {
    /// Aggregates replication results. The input order does not matter.
    pub fn aggregate(mut results: Vec<ReplicationResult>) -> Self {
        assert!(!results.is_empty(), "no replications to aggregate");
        results.sort_by_key(|r| r.replication);
        let regrets: Vec<f64> = results.iter().map(|r| r.final_regret).collect();
        let pseudo: Vec<f64> = results.iter().map(|r| r.final_pseudo_regret).collect();
        let (mean_regret, stderr_regret) = mean_and_stderr(&regrets);
        let (mean_pseudo_regret, stderr_pseudo_regret) = mean_and_stderr(&pseudo);
        let reps = results.len() as f64;
        let checkpoints = results[0]
            .checkpoints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (mut r, mut p) = (0.0, 0.0);
                for res in &results {
                    r += res.checkpoints[i].regret;
                    p += res.checkpoints[i].pseudo_regret;
                }
                MeanCheckpoint {
                    t: c.t,
                    mean_regret: r / reps,
                    mean_pseudo_regret: p / reps,
                }
            })
            .collect();
        RunSummary {
            replications: results,
            mean_regret,
            stderr_regret,
            mean_pseudo_regret,
            stderr_pseudo_regret,
            checkpoints,
        }
    }
}

/// Arithmetic mean and `stdev / sqrt(n)` with the `n - 1` denominator; the
/// standard error of a single value is 0.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
