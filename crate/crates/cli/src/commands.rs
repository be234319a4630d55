use std::fs;
use std::path::{Path, PathBuf};

use knnbandit::concentration::{
    verify_bound, HarnessOptions, MgfBound, Scheme, ViolationReport, ZDistribution,
};
use knnbandit::sim::{run_all, run_replicated};
use knnbandit::RunSummary;

use crate::config::{ConfigFile, Format, Overrides, PolicyName};
use crate::error::{CliError, Result};
use crate::output::{rounds_csv, summary_json, sweep_csv, SweepRow};

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Runs every replication of the configured experiment and writes
/// `rounds_<rep>.csv` and/or `summary.json`. Returns the files written.
pub fn cmd_run(config_path: &Path, overrides: &Overrides) -> Result<Vec<PathBuf>> {
    let config = ConfigFile::load(config_path)?.resolve(overrides)?;
    let run = config.run_config()?;
    let outputs = run_all(&run)?;

    let dir = &config.output.dir;
    create_dir(dir)?;
    let mut written = Vec::new();
    if config.output.formats.contains(&Format::Csv) {
        for out in &outputs {
            let name = format!("rounds_{}.csv", out.result.replication);
            written.push(write(dir, &name, &rounds_csv(&out.records))?);
        }
    }
    if config.output.formats.contains(&Format::Json) {
        let summary = RunSummary::aggregate(outputs.into_iter().map(|o| o.result).collect());
        written.push(write(
            dir,
            "summary.json",
            &summary_json(&config, &summary),
        )?);
    }
    Ok(written)
}

/// Runs the configuration at every horizon for every policy and writes one
/// row per pair to `sweep.csv`, horizons outermost.
///
/// `policies` defaults to the configured one. A policy other than the
/// configured one uses the `--theta` override if given, else its default.
pub fn cmd_sweep(
    config_path: &Path,
    horizons: &[u64],
    policies: &[PolicyName],
    overrides: &Overrides,
) -> Result<PathBuf> {
    if horizons.is_empty() {
        return Err(CliError::Validation(
            "horizons: at least one is required".into(),
        ));
    }
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Validation(
            "horizons: must be strictly ascending".into(),
        ));
    }
    let base = ConfigFile::load(config_path)?.resolve(overrides)?;
    let policies = if policies.is_empty() {
        vec![base.policy.kind]
    } else {
        policies.to_vec()
    };

    let mut configs = Vec::new();
    for &horizon in horizons {
        for &policy in &policies {
            let mut c = base.clone();
            c.horizon = horizon;
            c.record_every = horizon;
            if policy != base.policy.kind {
                c.policy.kind = policy;
                c.policy.theta = Some(overrides.theta.unwrap_or(policy.default_theta()));
            }
            let run = c.run_config()?;
            run.validate()?;
            configs.push((horizon, policy, run));
        }
    }

    let mut rows = Vec::with_capacity(configs.len());
    for (horizon, _, run) in &configs {
        let s = run_replicated(run)?;
        rows.push(SweepRow {
            horizon: *horizon,
            policy: run.policy.kind.name(),
            mean_regret: s.mean_regret,
            stderr: s.stderr_pseudo_regret,
            mean_pseudo_regret: s.mean_pseudo_regret,
        });
    }
    create_dir(&base.output.dir)?;
    write(&base.output.dir, "sweep.csv", &sweep_csv(&rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum EnvelopeName {
    /// ρ²/2 against standard normal draws.
    Gaussian,
    /// log(1 + ξ_max(e^ρ - 1)) against Bernoulli draws.
    Bernoulli,
    /// vρ²/2 against standard normal draws.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SchemeName {
    AlwaysOn,
    IidCoin,
    AdaptiveSign,
    AdaptiveCount,
}

impl SchemeName {
    pub fn scheme(self) -> Scheme {
        match self {
            SchemeName::AlwaysOn => Scheme::AlwaysOn,
            SchemeName::IidCoin => Scheme::IidCoin(Scheme::DEFAULT_COIN),
            SchemeName::AdaptiveSign => Scheme::AdaptiveSign,
            SchemeName::AdaptiveCount => Scheme::AdaptiveCount,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationArgs {
    pub phi: EnvelopeName,
    pub xi_max: Option<f64>,
    /// Success probability of the Bernoulli draws; defaults to `xi_max`.
    pub p: Option<f64>,
    pub variance: Option<f64>,
    pub n: u64,
    pub deltas: Vec<f64>,
    /// Empty means all four.
    pub schemes: Vec<SchemeName>,
    pub replications: u64,
    pub seed: u64,
    /// Skip the check that the envelope dominates the draws' log-MGF.
    pub allow_unsound: bool,
}

/// Runs the concentration harness; the caller decides what a failing cell
/// means.
pub fn cmd_concentration(args: &ConcentrationArgs) -> Result<Vec<ViolationReport>> {
    let (bound, z) = match args.phi {
        EnvelopeName::Gaussian => (MgfBound::GaussianHalfSquare, ZDistribution::StandardNormal),
        EnvelopeName::Bernoulli => {
            let xi_max = args.xi_max.ok_or_else(|| {
                CliError::Validation("xi_max: required for the bernoulli envelope".into())
            })?;
            let p = args.p.unwrap_or(xi_max);
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::Validation("p: must lie in [0, 1]".into()));
            }
            (
                MgfBound::BernoulliEnvelope { xi_max },
                ZDistribution::Bernoulli(p),
            )
        }
        EnvelopeName::Quadratic => {
            let variance = args.variance.ok_or_else(|| {
                CliError::Validation("variance: required for the quadratic envelope".into())
            })?;
            (
                MgfBound::Quadratic { variance },
                ZDistribution::StandardNormal,
            )
        }
    };
    if args.deltas.is_empty() {
        return Err(CliError::Validation(
            "delta: at least one value is required".into(),
        ));
    }
    let schemes: Vec<Scheme> = if args.schemes.is_empty() {
        Scheme::all().to_vec()
    } else {
        args.schemes.iter().map(|s| s.scheme()).collect()
    };
    let opts = HarnessOptions {
        replications: args.replications,
        seed: args.seed,
        enforce_pairing: !args.allow_unsound,
    };
    Ok(verify_bound(
        args.n,
        z,
        &schemes,
        &bound,
        &args.deltas,
        opts,
    )?)
}

pub fn reports_json(reports: &[ViolationReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialise");
    s.push('\n');
    s
}
