use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use direct_action::scenario::{run, Overrides};

/// Run a direct-action scenario file and write a canonical JSON report.
#[derive(Parser)]
#[command(name = "direct-action", version)]
struct Args {
    /// Scenario file (JSON).
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override the report path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Do not print the report to stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides {
        seed: args.seed,
        output: args.out,
    };
    match run(&args.scenario, &overrides) {
        Ok(text) => {
            if !args.quiet {
                println!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code as u8)
        }
    }
}
