//! The TOML run configuration.
//!
//! Parsing is strict: unknown keys are errors, and every error names the
//! offending field by its dotted path.

use std::path::{Path, PathBuf};

use knnbandit::env::BumpParams;
use knnbandit::{
    EnvironmentKind, EnvironmentSpec, NoiseModel, Phi, PolicyKind, PolicySpec, RunConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub horizon: u64,
    #[serde(default = "one")]
    pub replications: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one")]
    pub record_every: u64,
    pub environment: EnvironmentConfig,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub kind: EnvironmentName,
    pub ambient_dim: usize,
    pub arms: usize,
    pub noise: NoiseName,
    #[serde(default, skip_serializing_if = "EnvParams::is_empty")]
    pub params: EnvParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentName {
    FlipLine,
    BumpCube,
    EmbeddedCircle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseName {
    Bernoulli,
    GaussianUnit,
}

/// Kind-specific environment parameters; only `bump_cube` has any.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
}

impl EnvParams {
    fn is_empty(&self) -> bool {
        *self == EnvParams::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyName,
    /// Defaults to 4.5 for the UCB policies and 2.5 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default)]
    pub phi: PhiConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PolicyName {
    KnnUcb,
    KnnKlucb,
    CfUcb,
    CfKlucb,
    Uniform,
    Oracle,
}

impl PolicyName {
    pub fn kind(self) -> PolicyKind {
        match self {
            PolicyName::KnnUcb => PolicyKind::KnnUcb,
            PolicyName::KnnKlucb => PolicyKind::KnnKlUcb,
            PolicyName::CfUcb => PolicyKind::CfUcb,
            PolicyName::CfKlucb => PolicyKind::CfKlUcb,
            PolicyName::Uniform => PolicyKind::Uniform,
            PolicyName::Oracle => PolicyKind::Oracle,
        }
    }

    pub fn default_theta(self) -> f64 {
        match self {
            PolicyName::KnnUcb | PolicyName::CfUcb => 4.5,
            _ => 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiConfig {
    pub kind: PhiName,
    pub scale: f64,
}

impl Default for PhiConfig {
    fn default() -> Self {
        PhiConfig {
            kind: PhiName::LogScaled,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiName {
    Const,
    LogScaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("output")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// `rounds_<rep>.csv` per replication.
    Csv,
    /// `summary.json`.
    Json,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub horizon: Option<u64>,
    pub seed: Option<u64>,
    pub theta: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            let inner = err.into_inner();
            let message = inner.message().trim().to_string();
            let location = inner
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!(" (line {line})")
                })
                .unwrap_or_default();
            if path == "." {
                CliError::Validation(format!("{message}{location}"))
            } else {
                CliError::Validation(format!("{path}: {message}{location}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies overrides and fills every default, so that serialising the
    /// result describes the run completely.
    pub fn resolve(mut self, overrides: &Overrides) -> Result<Self> {
        if let Some(h) = overrides.horizon {
            self.horizon = h;
        }
        if let Some(s) = overrides.seed {
            self.master_seed = s;
        }
        if let Some(t) = overrides.theta {
            self.policy.theta = Some(t);
        }
        if let Some(d) = &overrides.output_dir {
            self.output.dir = d.clone();
        }
        self.policy
            .theta
            .get_or_insert(self.policy.kind.default_theta());
        if self.output.formats.is_empty() {
            return Err(CliError::Validation(
                "output.formats: must not be empty".into(),
            ));
        }
        self.run_config()?.validate()?;
        Ok(self)
    }

    /// The library view of this configuration.
    pub fn run_config(&self) -> Result<RunConfig> {
        Ok(RunConfig {
            environment: self.environment.spec()?,
            policy: self.policy.spec(),
            horizon: self.horizon,
            master_seed: self.master_seed,
            replications: self.replications,
            record_every: self.record_every,
        })
    }
}

impl EnvironmentConfig {
    pub fn spec(&self) -> Result<EnvironmentSpec> {
        let kind = match self.kind {
            EnvironmentName::BumpCube => {
                let d = BumpParams::default();
                let p = &self.params;
                EnvironmentKind::BumpCube(BumpParams {
                    width: p.width.unwrap_or(d.width),
                    height: p.height.unwrap_or(d.height),
                    base: p.base.unwrap_or(d.base),
                    centers: p.centers.clone(),
                })
            }
            other => {
                if !self.params.is_empty() {
                    return Err(CliError::Validation(
                        "environment.params: only bump_cube takes parameters".into(),
                    ));
                }
                match other {
                    EnvironmentName::FlipLine => EnvironmentKind::FlipLine,
                    _ => EnvironmentKind::EmbeddedCircle,
                }
            }
        };
        Ok(EnvironmentSpec {
            kind,
            ambient_dim: self.ambient_dim,
            arms: self.arms,
            noise: match self.noise {
                NoiseName::Bernoulli => NoiseModel::Bernoulli,
                NoiseName::GaussianUnit => NoiseModel::GaussianUnit,
            },
        })
    }
}

impl PolicyConfig {
    pub fn spec(&self) -> PolicySpec {
        let phi = match self.phi.kind {
            PhiName::Const => Phi::Const(self.phi.scale),
            PhiName::LogScaled => Phi::LogScaled(self.phi.scale),
        };
        PolicySpec::new(
            self.kind.kind(),
            self.theta.unwrap_or(self.kind.default_theta()),
            phi,
        )
    }
}
