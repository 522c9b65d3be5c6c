use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use compound_ld::config::{parse_unvalidated, ExperimentConfig};
use compound_ld::runner::{defaults_text, run_experiment};
use compound_ld::Error;

#[derive(Parser)]
#[command(
    name = "compound-ld",
    version,
    about = "Rate functions and rare-event checks for compound sums"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate I, J1 and J2 on a grid of (x, y).
    RateEval(RunArgs),
    /// Estimate decay rates of a half-space event.
    LdpCheck(RunArgs),
    /// Sweep a moderate-deviation scaling.
    MdCheck(RunArgs),
    /// Compare scaled moments against their limits.
    MomentsCheck(RunArgs),
    /// Check the central limit regime.
    CltCheck(RunArgs),
    /// Evaluate Mittag-Leffler functions.
    MlEval(RunArgs),
    /// Print every documented default.
    Defaults,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo replications.
    #[arg(long, env = "COMPOUND_LD_WORKERS")]
    workers: Option<usize>,
}

fn load(kind: &str, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = parse_unvalidated(&text)?;
    if cfg.experiment.kind() != kind {
        return Err(Error::Config(format!(
            "config describes a {} experiment, not {kind}",
            cfg.experiment.kind()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.experiment.set_seed(seed);
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(kind: &str, args: &RunArgs) -> ExitCode {
    let cfg = match load(kind, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.module());
            return ExitCode::from(2);
        }
    };
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match run_experiment(&cfg, PathBuf::from(&cfg.output.dir).as_path(), workers) {
        Ok(outcome) => {
            for b in &outcome.bands {
                println!(
                    "{} {}: value {} target {} tolerance {} margin {}",
                    if b.pass { "PASS" } else { "FAIL" },
                    b.name,
                    b.value,
                    b.target,
                    b.tolerance,
                    b.margin
                );
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.module());
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::RateEval(a) => run("rate-eval", a),
        Command::LdpCheck(a) => run("ldp-check", a),
        Command::MdCheck(a) => run("md-check", a),
        Command::MomentsCheck(a) => run("moments-check", a),
        Command::CltCheck(a) => run("clt-check", a),
        Command::MlEval(a) => run("ml-eval", a),
        Command::Defaults => {
            print!("{}", defaults_text());
            ExitCode::SUCCESS
        }
    }
}
