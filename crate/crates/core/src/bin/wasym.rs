use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use wasym::interp::{Limits, Program, SymConfig, DEFAULT_FUEL, DEFAULT_YIELD_EVERY};
use wasym::report::{self, ReportOptions, EXIT_CONFIG_ERROR, EXIT_INTERNAL_ERROR, EXIT_LOAD_ERROR};
use wasym::solver::{Model, SolverConfig, DEFAULT_SOLVER_COMMAND};

/// Symbolic execution for WebAssembly text modules.
#[derive(Parser)]
#[command(name = "wasym", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run `main` once on concrete values.
    Run {
        file: PathBuf,
        /// Instruction budget.
        #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
    },
    /// Explore every path of `main` and report traps and failed assertions.
    Sym(SymArgs),
    /// Run `main` concretely, reading symbol values from a model file.
    Replay {
        file: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
    },
}

#[derive(Args)]
struct SymArgs {
    file: PathBuf,
    /// Worker threads. Defaults to the available parallelism.
    #[arg(short = 'w', long = "workers", value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Instruction budget per path.
    #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    /// Wall-clock limit in seconds for the whole run; 0 means none.
    #[arg(long, default_value_t = 0.0)]
    timeout: f64,
    /// Command of an SMT-LIB2 solver reading from standard input.
    #[arg(long, default_value = DEFAULT_SOLVER_COMMAND)]
    solver: String,
    /// Per-query solver timeout in seconds; 0 means one day.
    #[arg(long, default_value_t = 10.0)]
    query_timeout: f64,
    /// Reassert the whole path condition on every query.
    #[arg(long)]
    no_incremental: bool,
    /// Stop at the first finding.
    #[arg(long)]
    fail_fast: bool,
    /// Only report failed assertions.
    #[arg(long)]
    fail_on_assertion_only: bool,
    /// Print statistics to standard error.
    #[arg(long)]
    stats: bool,
    /// One worker and no periodic yields, for reproducible reports.
    #[arg(long)]
    deterministic: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { file, fuel } => load(&file).and_then(|p| concrete(&p, fuel, None)),
        Command::Replay { file, model, fuel } => {
            load(&file).and_then(|p| read_model(&model).and_then(|m| concrete(&p, fuel, Some(&m))))
        }
        Command::Sym(args) => load(&args.file).and_then(|p| symbolic(&p, &args)),
    };
    ExitCode::from(code.unwrap_or_else(|c| c) as u8)
}

fn load(file: &Path) -> Result<Arc<Program>, i32> {
    let text = std::fs::read_to_string(file).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", file.display());
        EXIT_LOAD_ERROR
    })?;
    let inst = wasym::wat::load(&text).map_err(|e| {
        eprintln!("error: {}: {e}", file.display());
        EXIT_LOAD_ERROR
    })?;
    Program::new(inst).ok_or_else(|| {
        eprintln!("error: {}: no entry point", file.display());
        EXIT_LOAD_ERROR
    })
}

fn read_model(file: &Path) -> Result<Model, i32> {
    let text = std::fs::read_to_string(file).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", file.display());
        EXIT_CONFIG_ERROR
    })?;
    Model::parse(&text).map_err(|e| {
        eprintln!("error: {}: {e}", file.display());
        EXIT_CONFIG_ERROR
    })
}

fn concrete(prog: &Arc<Program>, fuel: u64, model: Option<&Model>) -> Result<i32, i32> {
    let (text, code) = report::run_report(prog, fuel, model).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG_ERROR
    })?;
    emit(&text);
    Ok(code)
}

/// Write to stdout as one block. A closed pipe is not an error worth
/// reporting, so write failures are ignored.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

fn seconds(flag: &str, s: f64) -> Result<Option<Duration>, i32> {
    match Duration::try_from_secs_f64(s) {
        Ok(d) if d.is_zero() => Ok(None),
        Ok(d) => Ok(Some(d)),
        Err(_) => {
            eprintln!("error: --{flag} must be a non-negative number of seconds");
            Err(EXIT_CONFIG_ERROR)
        }
    }
}

fn symbolic(prog: &Arc<Program>, args: &SymArgs) -> Result<i32, i32> {
    let (mut solver, warning) = SolverConfig::auto(&args.solver);
    if let Some(w) = warning {
        eprintln!("warning: {w}");
    }
    solver.query_timeout = seconds("query-timeout", args.query_timeout)?.unwrap_or(Duration::from_secs(86_400));
    solver.incremental = !args.no_incremental;
    let workers = if args.deterministic {
        1
    } else {
        args.workers
            .map(|w| w as usize)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    };
    let yield_every = (!args.deterministic).then_some(DEFAULT_YIELD_EVERY);
    let cfg = SymConfig {
        workers,
        limits: Limits { fuel: args.fuel, yield_every },
        solver,
        timeout: seconds("timeout", args.timeout)?,
    };
    let opts = ReportOptions { fail_fast: args.fail_fast, assertion_only: args.fail_on_assertion_only };
    let result = report::sym_report(prog, &cfg, opts, |finding| emit(&finding.render()));
    let rep = result.map_err(|e| {
        eprintln!("internal error: {e}");
        EXIT_INTERNAL_ERROR
    })?;
    emit(&format!("{}\n", rep.verdict()));
    if args.stats {
        eprint!("{}", report::render_stats(&rep.stats));
    }
    Ok(rep.exit_code())
}
