//! File formats.
//!
//! CSV files are comma separated with a header row and `\n` line endings.
//! Floats are written as `d.ddddddddddddddddde±x` (17 significant digits,
//! which round-trips every `f64`), independent of locale. Arms are numbered
//! from 1.

use knnbandit::RoundRecord;
use serde::Serialize;

use crate::config::ConfigFile;

pub const ROUNDS_HEADER: &str = "t,chosen_arm,k,reward,oracle_arm,oracle_reward,regret,pseudo_regret,cum_regret,cum_pseudo_regret";
pub const SWEEP_HEADER: &str = "horizon,policy,mean_regret,stderr,mean_pseudo_regret";

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn rounds_csv(records: &[RoundRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(ROUNDS_HEADER);
    out.push('\n');
    for r in records {
        let row = [
            r.t.to_string(),
            (r.chosen_arm + 1).to_string(),
            r.k.to_string(),
            float(r.reward),
            (r.oracle_arm + 1).to_string(),
            float(r.oracle_reward),
            float(r.regret),
            float(r.pseudo_regret),
            float(r.cum_regret),
            float(r.cum_pseudo_regret),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One row of `sweep.csv`. `stderr` is the standard error of the mean
/// pseudo-regret.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub horizon: u64,
    pub policy: String,
    pub mean_regret: f64,
    pub stderr: f64,
    pub mean_pseudo_regret: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.horizon,
            r.policy,
            float(r.mean_regret),
            float(r.stderr),
            float(r.mean_pseudo_regret)
        ));
    }
    out
}

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub name: &'static str,
    pub version: &'static str,
}

pub const ARTIFACT: Artifact = Artifact {
    name: "knnbandit",
    version: env!("CARGO_PKG_VERSION"),
};

/// Where every random stream of a run comes from.
#[derive(Debug, Serialize)]
pub struct Seeds {
    pub master_seed: u64,
    pub generator: &'static str,
    pub replications: Vec<u64>,
}

#[derive(Debug, Serialize)]
pub struct SummaryFile<'a> {
    pub artifact: Artifact,
    pub config: &'a ConfigFile,
    pub seeds: Seeds,
    pub summary: &'a knnbandit::RunSummary,
}

pub fn summary_json(config: &ConfigFile, summary: &knnbandit::RunSummary) -> String {
    let file = SummaryFile {
        artifact: ARTIFACT,
        config,
        seeds: Seeds {
            master_seed: config.master_seed,
            generator: "chacha8, stream (tag << 60) | replication, tags environment=1 policy=2",
            replications: summary.replications.iter().map(|r| r.replication).collect(),
        },
        summary,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("summary serialises");
    s.push('\n');
    s
}
