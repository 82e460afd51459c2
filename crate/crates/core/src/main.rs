use clap::{Parser, Subcommand};
use finsler_lab::run::{exit_code_for, run};
use finsler_lab::scenario::{load_scenario, refine, CheckName, Scenario};
use std::path::PathBuf;
use std::process::ExitCode;

/// Anisotropic heat-flow laboratory: curvature reports, nonlinear heat and
/// Ricci-flow solves, and pointwise gradient/Harnack estimate verification
/// on periodic grids.
#[derive(Parser)]
#[command(name = "finsler-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override for sampling and random initial data.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Also report the strict (2C1) variant of the flow estimate.
    #[arg(long, global = true)]
    strict_variant: bool,

    /// Halve the grid spacing and time step this many times.
    #[arg(long, global = true, default_value_t = 0)]
    refine: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Curvature report: per-node/direction samples and bound extraction.
    Curvature,
    /// Solve the heat equation on the static metric and dump checkpoints.
    Heat,
    /// Integrate the Ricci flow (with the coupled heat solve) and dump
    /// metric checkpoints and the bounds trace.
    Flow,
    /// Verify the static gradient estimate.
    VerifyStatic,
    /// Verify the static Harnack inequality on sampled quadruples.
    VerifyHarnack,
    /// Verify the flow gradient estimate.
    VerifyFlow,
    /// Verify the flow Harnack inequality on sampled quadruples.
    VerifyHarnackFlow,
    /// Run every check listed in the scenario.
    All,
}

fn checks_for(cmd: &Command, scenario: &Scenario) -> Vec<CheckName> {
    match cmd {
        Command::Curvature => vec![CheckName::Curvature],
        Command::Heat => vec![CheckName::Heat],
        Command::Flow => vec![CheckName::Flow],
        Command::VerifyStatic => vec![CheckName::VerifyStatic],
        Command::VerifyHarnack => vec![CheckName::VerifyHarnack],
        Command::VerifyFlow => vec![CheckName::VerifyFlow],
        Command::VerifyHarnackFlow => vec![CheckName::VerifyHarnackFlow],
        Command::All => scenario.checks.clone(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let path = match &cli.scenario {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --scenario <path> is required");
            return ExitCode::from(2);
        }
    };
    let mut scenario = match load_scenario(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.refine > 0 {
        scenario = match refine(&scenario, cli.refine) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
    }
    if let Some(out) = &cli.out {
        scenario.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    let checks = checks_for(&cli.command, &scenario);
    // flow-dependent subcommands need the scenario's flow section
    let needs_flow = checks.iter().any(|c| {
        matches!(
            c,
            CheckName::Flow | CheckName::VerifyFlow | CheckName::VerifyHarnackFlow
        )
    });
    if needs_flow && !scenario.flow_enabled {
        eprintln!("error: this check needs flow.enabled = true in the scenario");
        return ExitCode::from(2);
    }
    match run(&scenario, &checks, cli.strict_variant) {
        Ok(outcome) => {
            println!(
                "{} checks, exit code {}; artifacts in {}",
                outcome.summary.checks.len(),
                outcome.exit_code,
                scenario.out_dir.display()
            );
            for c in &outcome.summary.checks {
                match c.pass {
                    Some(true) => println!("  [PASS] {}", c.name),
                    Some(false) => println!(
                        "  [FAIL] {} worst margin {:.6e} > budget {:.6e}",
                        c.name,
                        c.worst_margin.unwrap_or(f64::NAN),
                        c.tol_budget.unwrap_or(f64::NAN)
                    ),
                    None => println!("  [info] {}", c.name),
                }
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
