use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use maslovkit::cli::{builtin_model, default_out_dir, property_suite, run_scenario};

#[derive(Parser)]
#[command(
    name = "maslovkit",
    version,
    about = "Maslov indices, Jacobi flows and conjugate/focal comparison"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a scenario file and write the report bundle.
    Run {
        scenario: PathBuf,
        /// Output directory; defaults to `<scenario stem>-report`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the integration step.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Print or write a built-in model scenario.
    Model {
        /// One of flat, sphere, hyperbolic, lorentz-flat, lorentz-const.
        name: String,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
        interval: Option<Vec<f64>>,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Run the randomized property suite.
    Props {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        dims: Vec<usize>,
    },
}

/// `Ok(true)` when every asserted property holds.
fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            step,
        } => {
            let out = out.unwrap_or_else(|| default_out_dir(&scenario));
            let outcome = run_scenario(&scenario, &out, step)?;
            for v in &outcome.verdicts {
                println!("{:<40} {}", v.id, v.status.as_str());
            }
            println!("report written to {}", out.display());
            Ok(outcome.all_hold)
        }
        Command::Model {
            name,
            n,
            interval,
            emit,
        } => {
            let interval = interval.map(|v| (v[0], v[1]));
            let scenario = builtin_model(&name, n, interval)?;
            let json = scenario.to_json() + "\n";
            match emit {
                Some(path) => std::fs::write(&path, json)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{json}"),
            }
            Ok(true)
        }
        Command::Props { seed, trials, dims } => {
            let summary = property_suite(seed, trials, &dims)?;
            print!("{}", summary.render());
            for f in summary
                .families
                .iter()
                .filter(|f| f.counterexample.is_some())
            {
                println!(
                    "counterexample {}: {}",
                    f.family,
                    serde_json::to_string(&f.counterexample)?
                );
            }
            Ok(summary.all_pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
