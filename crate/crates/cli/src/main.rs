use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use knnbandit_cli::commands::{reports_json, EnvelopeName, SchemeName};
use knnbandit_cli::config::PolicyName;
use knnbandit_cli::{
    cmd_concentration, cmd_run, cmd_sweep, CliError, ConcentrationArgs, Overrides,
};

/// Simulate k-NN index strategies on contextual bandits.
///
/// Exit codes: 0 success, 1 a concentration cell failed, 2 invalid
/// configuration or arguments, 3 file error.
#[derive(Parser)]
#[command(name = "knnbandit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write per-round CSVs and a JSON summary.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run the configuration at several horizons and write sweep.csv.
    Sweep {
        config: PathBuf,
        /// Strictly ascending, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        horizons: Vec<u64>,
        /// Policies to compare; defaults to the configured one.
        #[arg(long, value_delimiter = ',')]
        policies: Vec<PolicyName>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Monte Carlo check of the self-normalised tail bound. Prints a JSON array.
    Concentration {
        #[arg(long, value_enum)]
        phi: EnvelopeName,
        #[arg(long)]
        xi_max: Option<f64>,
        /// Bernoulli success probability; defaults to --xi-max.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        variance: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        n: u64,
        /// Comma separated, each > 1.
        #[arg(long = "delta", value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        /// Comma separated; defaults to all.
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<SchemeName>,
        #[arg(long, default_value_t = 100_000)]
        replications: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Accept an envelope that does not dominate the draws' log-MGF.
        #[arg(long)]
        allow_unsound: bool,
        /// Write the reports here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Output directory; overrides output.dir.
    #[arg(long, env = "KNNBANDIT_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            horizon: a.horizon,
            seed: a.seed,
            theta: a.theta,
            output_dir: a.output_dir,
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { config, overrides } => {
            for path in cmd_run(&config, &overrides.into())? {
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::Sweep {
            config,
            horizons,
            policies,
            overrides,
        } => {
            let path = cmd_sweep(&config, &horizons, &policies, &overrides.into())?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Concentration {
            phi,
            xi_max,
            p,
            variance,
            n,
            deltas,
            schemes,
            replications,
            seed,
            allow_unsound,
            output,
        } => {
            let args = ConcentrationArgs {
                phi,
                xi_max,
                p,
                variance,
                n,
                deltas,
                schemes,
                replications,
                seed,
                allow_unsound,
            };
            let reports = cmd_concentration(&args)?;
            let json = reports_json(&reports);
            match output {
                Some(path) => std::fs::write(&path, json)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                None => print!("{json}"),
            }
            Ok(if reports.iter().all(|r| r.pass) { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("knnbandit: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
