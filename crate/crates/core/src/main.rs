use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cmagrad::app::{run_manufactured, run_probe, run_report, run_solve, AppError, RunOutcome};
use cmagrad::bundle::Status;
use cmagrad::config::parse_config;

#[derive(Parser)]
#[command(version, about = "Continuation solver for the complex Monge-Ampere equation with a gradient term on flat tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for the numerical kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Bundle directory, overriding `outputs.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reject unknown configuration keys.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem and write a result bundle.
    Solve(RunArgs),
    /// Solve with the source generated by the configured `truth` and report the errors.
    Verify(RunArgs),
    /// Solve, then re-solve with altered schedules and random warm starts.
    Probe(RunArgs),
    /// Summarize a bundle as text and plot CSV.
    Report {
        /// Bundle directory.
        bundle: PathBuf,
        /// Directory for `report.txt` and `trace.csv`; text goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(args: &RunArgs) -> Result<cmagrad::config::RunConfig, AppError> {
    let text = std::fs::read_to_string(&args.config)?;
    Ok(parse_config(&text, args.strict)?)
}

fn summarize(outcome: &RunOutcome) {
    let m = &outcome.bundle.metadata;
    println!("bundle: {}", outcome.dir.display());
    println!("b = {:.12e}", m.b);
    println!("final residual = {:.3e}", m.final_residual);
    if let Some(mr) = &m.manufactured {
        println!("u error = {:.3e}, b error = {:.3e}", mr.u_error, mr.b_error);
    }
    if let Some(pr) = &m.probe {
        println!(
            "probe: max |du| = {:.3e}, max |db| = {:.3e} ({})",
            pr.max_u_distance,
            pr.max_b_distance,
            if pr.passed { "pass" } else { "fail" }
        );
    }
}

fn write_report(bundle: &Path, out: Option<&Path>) -> Result<(), AppError> {
    let report = run_report(bundle)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("report.txt"), &report.text)?;
            std::fs::write(dir.join("trace.csv"), &report.csv)?;
        }
        None => print!("{}", report.text),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = load(&args)?;
            summarize(&run_solve(&cfg, args.out.as_deref())?);
        }
        Command::Verify(args) => {
            let cfg = load(&args)?;
            summarize(&run_manufactured(&cfg, args.out.as_deref())?);
        }
        Command::Probe(args) => {
            let cfg = load(&args)?;
            let outcome = run_probe(&cfg, args.out.as_deref())?;
            summarize(&outcome);
            if outcome.bundle.metadata.status != Status::Converged {
                return Ok(());
            }
        }
        Command::Report { bundle, out } => write_report(&bundle, out.as_deref())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
