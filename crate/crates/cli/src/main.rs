use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isomonodromy_cli::{emit_csv, run, write_checkpoints, CliError, Overrides, ProblemDocument};

/// Thread count for the internal fan-out.
const THREADS_VAR: &str = "ISOMONO_THREADS";

#[derive(Parser)]
#[command(name = "isomono", version, about = "Fuchsian systems: monodromy, local series, Schlesinger flow, tau")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a problem document and write its report.
    Run {
        file: PathBuf,
        /// Integrator tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Seed for randomized checks.
        #[arg(long)]
        seed: Option<u64>,
        /// Emit this trace as CSV instead of the JSON report.
        #[arg(long)]
        csv: Option<String>,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write flow checkpoints as JSON lines.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| CliError::Schema(format!("{THREADS_VAR} must be a count, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Schema(format!("{THREADS_VAR}: {e}")))
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    init_threads()?;
    let Command::Run { file, tol, seed, csv, out, checkpoints } = cli.command;
    let text = std::fs::read_to_string(&file)?;
    let doc = ProblemDocument::parse(&text)?;
    let report = run(&doc, Overrides { tol, seed })?;
    let mut w = sink(&out)?;
    match csv {
        Some(sel) => emit_csv(&report, &sel, &mut w)?,
        None => w.write_all(report.to_json().as_bytes())?,
    }
    w.flush()?;
    if let Some(p) = checkpoints {
        let mut f = BufWriter::new(File::create(p)?);
        write_checkpoints(&report, &mut f)?;
        f.flush()?;
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("isomono: check {} failed: residual {:e}, threshold {:e}", c.name.name(), c.residual, c.threshold);
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("isomono: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
