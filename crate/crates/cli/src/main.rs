mod format;
mod run;
mod scenario;
mod verify;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use postsel::conic::SolveOptions;
use postsel::Error;

use crate::scenario::{parse, preset, Scenario, PRESETS};

#[derive(Parser)]
#[command(name = "postsel", version, about = "Post-selected steering and Bell bounds under arbitrary losses")]
struct Cli {
    /// Solver tolerance on residuals and duality gap.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 200)]
    max_iters: usize,
    /// Seed for randomized searches (quantum optimisation of Bell values).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Source {
    /// Scenario JSON file.
    scenario: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long)]
    preset: Option<String>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Bound, quantum value and violation flag at the scenario's efficiencies.
    Bound {
        #[command(flatten)]
        source: Source,
        /// Override the efficiency with a uniform value or preset parameter.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// CSV of the bound across the scenario's η sweep.
    Sweep {
        #[command(flatten)]
        source: Source,
    },
    /// Consistency checks; with --reference, also compares a sweep CSV.
    Verify {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Lists built-in scenarios.
    Presets,
}

enum Failure {
    Parse(String),
    Solver(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver(_) | Error::InconsistentEfficiencies => Failure::Solver(e.to_string()),
            other => Failure::Parse(other.to_string()),
        }
    }
}

fn load(source: &Source) -> Result<Scenario, Failure> {
    match (&source.scenario, &source.preset) {
        (Some(_), Some(_)) => Err(Failure::Parse("give either a scenario file or --preset, not both".into())),
        (None, None) => Err(Failure::Parse("a scenario file or --preset is required".into())),
        (None, Some(name)) => preset(name).ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            Failure::Parse(format!("unknown preset {name:?}; known: {}", known.join(", ")))
        }),
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
            parse(&text, &path.display().to_string()).map_err(|e| Failure::Parse(e.0))
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let opts = SolveOptions { tol: cli.tol, max_iters: cli.max_iters, ..SolveOptions::default() };
    match &cli.command {
        Command::Presets => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(())
        }
        Command::Bound { source, eta } => {
            let s = load(source)?;
            let prepared = run::prepare(&s, cli.seed)?;
            let pt = run::point(&s, &prepared, *eta, &opts)?;
            let record = run::bound_json(&s, &pt, &s.efficiency(*eta)?);
            emit(&source.out, &format!("{}\n", serde_json::to_string_pretty(&record).expect("json")))
        }
        Command::Sweep { source } => {
            let s = load(source)?;
            let prepared = run::prepare(&s, cli.seed)?;
            let rows = run::sweep(&s, &prepared, &opts)?;
            emit(&source.out, &run::sweep_csv(&s, &rows, cli.seed))
        }
        Command::Verify { source, reference } => {
            let s = load(source)?;
            let prepared = run::prepare(&s, cli.seed)?;
            let mut checks = verify::run_checks(&s, &prepared, &opts)?;
            if let Some(path) = reference {
                let text = fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
                let fresh = run::sweep_csv(&s, &run::sweep(&s, &prepared, &opts)?, cli.seed);
                let problems = verify::compare_csv(&fresh, &text);
                checks.push(verify::Check {
                    name: "reference".into(),
                    pass: problems.is_empty(),
                    detail: if problems.is_empty() { "sweep matches".into() } else { problems.join("; ") },
                });
            }
            let mut report = String::new();
            for c in &checks {
                report.push_str(&format!("{} {}: {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
            }
            emit(&source.out, &report)?;
            let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Verification(format!("failed checks: {}", failed.join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Parse(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver failure: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(3)
        }
    }
}
