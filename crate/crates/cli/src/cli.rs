use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lnmpc_core::sim::{ControllerKind, SCENARIO_IDS};

use crate::commands::{check_bounds, render_bounds, render_run, run_command, sweep, SweepGrid};
use crate::config::{load_config, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "lnmpc", version, about = "Quadrotor attitude-control comparisons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the scenario under each controller and write logs and reports.
    Run(Common),
    /// Evaluate the recursive-feasibility certificate.
    CheckBounds {
        #[command(flatten)]
        common: Common,
        /// Print the bounds and margin as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Scan a grid of sliding-mode gains, reporting margins and tracking error.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated λ values (default: the configured value).
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        c1: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        c2: Vec<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SCENARIO_IDS))]
    pub scenario: Option<String>,
    /// Comma-separated subset of lnmpc, smc, bsc.
    #[arg(long, value_delimiter = ',')]
    pub controllers: Option<Vec<ControllerKind>>,
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// One SQP iteration per control step.
    #[arg(long)]
    pub rti: bool,
    /// Simulated time in seconds, replacing the scenario default.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Extra `key=value` setting; repeatable, overrides the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Common {
    pub fn load(&self) -> Result<RunConfig, crate::config::ConfigError> {
        let flags = Overrides {
            scenario: self.scenario.clone(),
            controllers: self.controllers.clone(),
            seed: self.seed,
            out: self.out.clone(),
            rti: self.rti,
            duration: self.duration,
            set: self.set.clone(),
        };
        load_config(self.config.as_deref(), &flags)
    }
}

/// Output text and process exit status of one invocation.
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

/// Exit status for configuration and I/O failures.
pub const EXIT_ERROR: i32 = 2;

pub fn execute(cli: &Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let outcome = run_command(&cfg)?;
            Ok(Outcome { stdout: render_run(&outcome), code: outcome.exit_code() })
        }
        Command::CheckBounds { common, json } => {
            let cfg = common.load()?;
            let o = check_bounds(&cfg)?;
            let stdout = if *json {
                serde_json::to_string_pretty(&serde_json::json!({
                    "bounds": o.bounds,
                    "lhs": o.feasibility.lhs,
                    "margin": o.feasibility.margin,
                    "holds": o.feasibility.holds(),
                }))? + "\n"
            } else {
                render_bounds(&o)
            };
            Ok(Outcome { stdout, code: o.exit_code() })
        }
        Command::Sweep { common, lambda, c1, c2 } => {
            let cfg = common.load()?;
            let g = cfg.setup.smc_gains;
            let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
            let grid = SweepGrid {
                lambda: or(lambda, g.lambda.max()),
                c1: or(c1, g.c1.max()),
                c2: or(c2, g.c2.max()),
            };
            let rows = sweep(&cfg, &grid)?;
            let violations: usize = rows
                .iter()
                .flat_map(|r| r.results.iter())
                .filter(|(k, _, _)| *k == ControllerKind::Lnmpc)
                .map(|(_, _, v)| v)
                .sum();
            Ok(Outcome {
                stdout: crate::commands::render_sweep(&rows),
                code: i32::from(violations > 0),
            })
        }
    }
}
