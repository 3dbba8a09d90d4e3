use std::path::PathBuf;
use std::process::ExitCode;

use bakerlab::experiment::{budget_report, run_experiment, Task};
use bakerlab::output::to_json;
use bakerlab::{CliError, ExperimentConfig, EXIT_CHECK_FAILED};
use bakerlab_core::PoleCase;
use clap::{Args, Parser, Subcommand};

/// Certified numerics for meromorphic maps with Baker domains.
#[derive(Debug, Parser)]
#[command(name = "bakerlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Prints the admissible coefficient budget.
    Budget {
        #[arg(long)]
        case: PoleCase,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        decay: Option<f64>,
        #[arg(long)]
        safety: Option<f64>,
    },
    /// Iterates the seeds and certifies the drift bound.
    Orbit(ConfigArg),
    /// Evaluates the Abel series at the seeds.
    Abel(ConfigArg),
    /// Runs the type classifier on the seeds.
    Classify(ConfigArg),
    /// Pushes the configured loop forward and reports windings.
    Loop(ConfigArg),
    /// Checks winding persistence along the pushed-forward loops.
    Persist(ConfigArg),
    /// Renders the certified region.
    Render(ConfigArg),
    /// Runs the built-in experiment for one model case.
    #[command(name = "reproduce-thm51")]
    Reproduce {
        #[arg(long)]
        case: PoleCase,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Prints the built-in configuration and exits.
        #[arg(long)]
        print_config: bool,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("BAKERLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("BAKERLAB_THREADS must be a positive integer, got '{value}'")))?;
    if n == 0 {
        return Err(CliError::Config("BAKERLAB_THREADS must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run_with(arg: &ConfigArg, name: &str, tasks: &[Task]) -> Result<bool, CliError> {
    let mut config = ExperimentConfig::load(&arg.config)?;
    if let Some(out) = &arg.out {
        config.output.dir = out.clone();
    }
    report(run_experiment(&config, name, tasks, false)?)
}

fn report(summary: bakerlab::Summary) -> Result<bool, CliError> {
    for check in &summary.checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", check.name, check.detail);
    }
    if let Some(v) = summary.verdict {
        println!("verdict: {}", v.label());
    }
    Ok(summary.passed())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Budget {
            case,
            epsilon,
            decay,
            safety,
        } => {
            print!("{}", to_json(&budget_report(case, epsilon, decay, safety)?));
            Ok(true)
        }
        Command::Orbit(a) => run_with(&a, "orbit", &[Task::Orbit, Task::Absorb]),
        Command::Abel(a) => run_with(&a, "abel", &[Task::Abel]),
        Command::Classify(a) => run_with(&a, "classify", &[Task::Classify, Task::OneStep]),
        Command::Loop(a) => run_with(&a, "loop", &[Task::Loop]),
        Command::Persist(a) => run_with(&a, "persist", &[Task::Persist]),
        Command::Render(a) => run_with(&a, "render", &[Task::Render]),
        Command::Reproduce {
            case,
            out,
            print_config,
        } => {
            let mut config = ExperimentConfig::builtin(case);
            if print_config {
                print!("{}", config.to_toml());
                return Ok(true);
            }
            if let Some(out) = out {
                config.output.dir = out;
            }
            // The Abel series only converges fast enough to certify in the first case.
            let tasks: Vec<Task> = Task::ALL
                .into_iter()
                .filter(|&t| t != Task::Abel || case == PoleCase::ImaginaryAxis)
                .collect();
            report(run_experiment(&config, "reproduce-thm51", &tasks, true)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
