//! `saddle-crn`: solve saddle point problems from JSON run specs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use saddle_crn_cli::{parse_fit_spec, run_batch, run_check, run_fit, run_spec_file};

/// Cubic-regularized Newton solver for saddle point problems.
///
/// Exit codes: 0 converged, 2 iteration budget exhausted (or stalled, or a
/// failed diagnostic sweep), 3 diverged or numerically broke down, 4
/// invalid spec or arguments, 5 I/O failure.
///
/// Set SADDLE_CRN_LOG (e.g. `info`, `debug`) to control log verbosity.
#[derive(Parser)]
#[command(name = "saddle-crn", version, about, verbatim_doc_comment)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run spec, writing its trace and summary files.
    Run {
        /// Run spec (JSON). Relative paths inside it resolve against its
        /// directory.
        spec: PathBuf,
    },
    /// Execute every *.json run spec in a directory concurrently; the
    /// process exits with the worst per-spec code.
    Batch {
        dir: PathBuf,
    },
    /// Sweep the derivative oracles against finite differences on seeded
    /// instances and report the results as JSON.
    Check {
        /// Number of seeded instances (three checks each).
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the regularization-path error bound `C ν^θ` from a fit spec
    /// (JSON with `problem` and a descending `nus` ladder).
    FitEb {
        spec: PathBuf,
    },
}

fn cmd_run(spec: &Path) -> u8 {
    let outcome = run_spec_file(spec);
    if outcome.exit_code == 0 || outcome.exit_code == 2 {
        println!("{}: {}", outcome.name, outcome.message);
    } else {
        eprintln!("{}: {}", outcome.name, outcome.message);
    }
    outcome.exit_code as u8
}

fn cmd_batch(dir: &Path) -> u8 {
    match run_batch(dir) {
        Ok((outcomes, worst)) => {
            for outcome in &outcomes {
                println!("{}: exit {} ({})", outcome.name, outcome.exit_code, outcome.message);
            }
            worst as u8
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

fn cmd_check(count: usize, out: Option<&Path>) -> u8 {
    let report = run_check(count);
    let text = report.to_json();
    if let Some(path) = out {
        if let Err(e) = std::fs::write(path, &text) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return 5;
        }
    } else {
        print!("{text}");
    }
    let worst = report
        .entries
        .iter()
        .filter(|e| !e.pass)
        .fold(None::<&saddle_crn::CheckEntry>, |worst, e| match worst {
            Some(w) if w.max_rel_error >= e.max_rel_error => worst,
            _ => Some(e),
        });
    match worst {
        None => 0,
        Some(entry) => {
            eprintln!(
                "check failed: {} on seed {} at relative error {:e}",
                entry.check_name, entry.instance_seed, entry.max_rel_error
            );
            2
        }
    }
}

fn cmd_fit(spec_path: &Path) -> u8 {
    let text = match std::fs::read_to_string(spec_path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", spec_path.display());
            return 5;
        }
    };
    let spec = match parse_fit_spec(&text) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e}");
            return 4;
        }
    };
    let base = spec_path.parent().unwrap_or_else(|| Path::new("."));
    match run_fit(&spec, base) {
        Ok(fit) => {
            println!("{}", serde_json::to_string_pretty(&fit).expect("fit serializes"));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("SADDLE_CRN_LOG", "warn"),
    )
    .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 4,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match &cli.command {
        Command::Run { spec } => cmd_run(spec),
        Command::Batch { dir } => cmd_batch(dir),
        Command::Check { count, out } => cmd_check(*count, out.as_deref()),
        Command::FitEb { spec } => cmd_fit(spec),
    };
    ExitCode::from(code)
}
