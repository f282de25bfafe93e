//! Experiment harness for the mobile-control library.
//!
//! Verbs: `solve`, `sweep`, `pipeline`, `picard`, `certify`, `witness`,
//! each taking `--config <path>` and `--out <dir>`, with repeatable
//! `--override key.path=value` for scalar fields. Exit codes: 0 pass,
//! 2 certificate failure, 3 infeasible synthesis, 4 config error.

mod artifact;
mod config;
mod plot;
mod runner;
mod witness;

use clap::{Args, Parser, Subcommand};
use config::ExperimentKind;
use runner::RunStatus;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mobctrl", about = "Mobile-support parabolic control experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the run artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Scalar override, `key.path=value`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Verb {
    /// Forward solve, optionally checked against the sine-expansion oracle.
    Solve(RunArgs),
    /// Damping-sweep synthesis with the certified inequality chain.
    Sweep(RunArgs),
    /// Two-phase steering pipeline (sweep, then lifted additive correction).
    Pipeline(RunArgs),
    /// Quasilinear fixed-point loop over frozen-coefficient pipelines.
    Picard(RunArgs),
    /// Maximum-principle, comparison, decay, and energy certificates.
    Certify(RunArgs),
    /// Static-support noncontrollability witness with seeded controls.
    Witness(RunArgs),
}

const EXIT_CERT_FAILURE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CONFIG_ERROR: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (expected_kind, args) = match &cli.verb {
        Verb::Solve(a) => (ExperimentKind::Solve, a),
        Verb::Sweep(a) => (ExperimentKind::Sweep, a),
        Verb::Pipeline(a) => (ExperimentKind::Pipeline, a),
        Verb::Picard(a) => (ExperimentKind::Picard, a),
        Verb::Certify(a) => (ExperimentKind::Certify, a),
        Verb::Witness(a) => (ExperimentKind::Witness, a),
    };

    let (cfg, effective) = match config::load_config(&args.config, &args.overrides) {
        Ok(ok) => ok,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(EXIT_CONFIG_ERROR);
        }
    };
    if cfg.kind != expected_kind {
        eprintln!(
            "config error: the config declares kind `{:?}` but the verb expects `{:?}`",
            cfg.kind, expected_kind
        );
        return ExitCode::from(EXIT_CONFIG_ERROR);
    }

    match runner::run_experiment(&cfg, &effective, &args.out) {
        Ok(RunStatus::Pass) => {
            eprintln!("run complete: pass ({})", args.out.display());
            ExitCode::SUCCESS
        }
        Ok(RunStatus::CertFailure) => {
            eprintln!("run complete: certificate failure ({})", args.out.display());
            ExitCode::from(EXIT_CERT_FAILURE)
        }
        Ok(RunStatus::Infeasible) => {
            eprintln!("run failed: infeasible synthesis ({})", args.out.display());
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(e) => {
            eprintln!("run error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
