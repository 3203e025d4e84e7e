use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nnreach::config::RunConfig;
use nnreach::pipeline::{self, ReachSummary, ValidateSummary};
use nnreach::Error;

/// Reachable-set approximation for a learned quadrotor model.
#[derive(Parser)]
#[command(name = "nnreach", version)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random stream (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// nominal or rotor_failure (overrides `scenario`).
    #[arg(long, global = true)]
    scenario: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the training dataset.
    Generate,
    /// Train the network on the dataset.
    Train,
    /// Run the online lift-and-propagate loop.
    Reach,
    /// Monte-Carlo check of the stored reach tube.
    Validate,
    /// Summarise every available artifact.
    Report,
    /// All stages, both scenarios.
    All,
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(s) = &cli.scenario {
        cfg.scenario = s.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_reach(r: &ReachSummary) {
    println!(
        "reach {}: {} steps, mean {:.4} s/step, max {:.4} s/step -> {}",
        r.scenario,
        r.steps,
        r.mean_step_seconds,
        r.max_step_seconds,
        r.dir.display()
    );
}

fn print_validate(v: &ValidateSummary) {
    for r in &v.reports {
        println!(
            "validate {} / {}: worst violation fraction {:.4}, {}",
            v.scenario,
            r.model,
            r.containment.worst_fraction(),
            match (r.passed, pipeline::gated(v.scenario, &r.model)) {
                (true, _) => "pass",
                (false, true) => "FAIL",
                (false, false) => "above threshold (informational)",
            }
        );
    }
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Generate => {
            let g = pipeline::cmd_generate(&cfg)?;
            println!("generated {} trajectories of {} steps -> {}", g.trajectories, g.steps, g.dir.display());
        }
        Command::Train => {
            let t = pipeline::cmd_train(&cfg)?;
            println!(
                "trained {} epochs in {:.1} s, final loss {:.6e} -> {}",
                t.epochs,
                t.seconds,
                t.final_loss,
                t.checkpoint.display()
            );
        }
        Command::Reach => print_reach(&pipeline::cmd_reach(&cfg, cfg.scenario)?),
        Command::Validate => {
            let v = pipeline::cmd_validate(&cfg, cfg.scenario)?;
            print_validate(&v);
            return Ok(v.passed);
        }
        Command::Report => {
            let r = pipeline::cmd_report(&cfg)?;
            println!("report for {} scenario(s) -> {}", r.scenarios.len(), r.dir.display());
        }
        Command::All => {
            let run = pipeline::run_all(&cfg)?;
            println!("generated {} trajectories", run.generate.trajectories);
            println!("final training loss {:.6e} ({:.1} s)", run.train.final_loss, run.train.seconds);
            run.reach.iter().for_each(print_reach);
            run.validate.iter().for_each(print_validate);
            println!("report -> {}", run.report.dir.display());
            return Ok(run.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
