//! Report text, exit codes, and the finding collector the command line
//! tool is built on.

use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use crate::choice::{EngineError, Flow};
use crate::interp::{
    run_concrete, run_symbolic, ConcreteEnd, ConcreteRun, EvalOutcome, Leaf, PathEnd, Program, SymConfig, SymStats,
};
use crate::solver::Model;
use crate::trap::TrapKind;
use crate::values::{Concrete, SymExpr};

pub const EXIT_OK: i32 = 0;
pub const EXIT_LOAD_ERROR: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;
pub const EXIT_INTERNAL_ERROR: i32 = 3;
pub const EXIT_PROBLEM: i32 = 13;

pub const PROBLEM_LINE: &str = "Reached problem!";
pub const OK_LINE: &str = "All OK";
pub const PRUNED_LINE: &str = "Assumption violated";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FindingKind {
    Trap(TrapKind),
    Assert,
}

/// One reported problem: the headline line and the model that reaches it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub kind: FindingKind,
    /// `Trap: <message>` or `Assert failure: <expression>`.
    pub headline: String,
    pub model: Model,
}

impl Finding {
    /// The finding a leaf reports, if it is a problem with a model.
    pub fn from_leaf(leaf: &Leaf) -> Option<Finding> {
        let PathEnd::Outcome(outcome) = &leaf.end else { return None };
        let (kind, headline) = symbolic_headline(outcome)?;
        Some(Finding { kind, headline, model: leaf.model.clone()? })
    }

    /// The block printed for this finding, newline terminated.
    pub fn render(&self) -> String {
        format!("{}\nModel:\n{}\n", self.headline, self.model.render())
    }
}

fn trap_line(kind: TrapKind) -> String {
    format!("Trap: {}", kind.message())
}

fn symbolic_headline(outcome: &EvalOutcome<SymExpr>) -> Option<(FindingKind, String)> {
    match outcome {
        EvalOutcome::Eval(_) | EvalOutcome::Trap(TrapKind::FuelExhausted, _) => None,
        EvalOutcome::Trap(k, _) => Some((FindingKind::Trap(*k), trap_line(*k))),
        EvalOutcome::Assert(e, _) => Some((FindingKind::Assert, format!("Assert failure: {}", e.render()))),
    }
}

/// Headline of a concrete outcome, or `None` when `main` returned.
pub fn concrete_headline(outcome: &EvalOutcome<Concrete>) -> Option<(FindingKind, String)> {
    match outcome {
        EvalOutcome::Eval(_) => None,
        EvalOutcome::Trap(k, _) => Some((FindingKind::Trap(*k), trap_line(*k))),
        EvalOutcome::Assert(c, _) => Some((FindingKind::Assert, format!("Assert failure: {c}"))),
    }
}

/// Report text and exit code of a concrete run. Every trap, fuel
/// exhaustion included, is a problem here.
pub fn concrete_report(run: &ConcreteRun) -> (String, i32) {
    match &run.end {
        ConcreteEnd::Pruned => (format!("{PRUNED_LINE}\n"), EXIT_OK),
        ConcreteEnd::Outcome(o) => match concrete_headline(o) {
            Some((_, line)) => (format!("{line}\n{PROBLEM_LINE}\n"), EXIT_PROBLEM),
            None => (format!("{OK_LINE}\n"), EXIT_OK),
        },
    }
}

/// Run `main` concretely with an optional replay model.
pub fn run_report(prog: &Arc<Program>, fuel: u64, model: Option<&Model>) -> Result<(String, i32), crate::interp::ConfigError> {
    run_concrete(prog, fuel, model).map(|run| concrete_report(&run))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    /// Stop exploring after the first reported finding.
    pub fail_fast: bool,
    /// Report failed assertions only; traps still end their paths.
    pub assertion_only: bool,
}

#[derive(Debug, Clone)]
pub struct SymReport {
    /// In the order they were accepted.
    pub findings: Vec<Finding>,
    pub stats: SymStats,
}

impl SymReport {
    pub fn exit_code(&self) -> i32 {
        if self.findings.is_empty() {
            EXIT_OK
        } else {
            EXIT_PROBLEM
        }
    }

    /// The whole report stream: every finding block, then the verdict.
    pub fn render(&self) -> String {
        let mut out: String = self.findings.iter().map(Finding::render).collect();
        out.push_str(self.verdict());
        out.push('\n');
        out
    }

    pub fn verdict(&self) -> &'static str {
        if self.findings.is_empty() {
            OK_LINE
        } else {
            PROBLEM_LINE
        }
    }
}

/// Explore `prog` symbolically. `emit` receives each accepted finding while
/// the exploration runs, one at a time and in the order they are recorded.
pub fn sym_report(
    prog: &Arc<Program>,
    cfg: &SymConfig,
    opts: ReportOptions,
    emit: impl Fn(&Finding) + Sync,
) -> Result<SymReport, EngineError> {
    let findings: Mutex<Vec<Finding>> = Mutex::new(Vec::new());
    let stats = run_symbolic(prog, cfg, |leaf| {
        let Some(f) = Finding::from_leaf(&leaf) else { return Flow::Continue };
        if opts.assertion_only && f.kind != FindingKind::Assert {
            return Flow::Continue;
        }
        let mut all = findings.lock().unwrap_or_else(|e| e.into_inner());
        if opts.fail_fast && !all.is_empty() {
            return Flow::Halt;
        }
        emit(&f);
        all.push(f);
        if opts.fail_fast {
            Flow::Halt
        } else {
            Flow::Continue
        }
    })?;
    let findings = findings.into_inner().unwrap_or_else(|e| e.into_inner());
    Ok(SymReport { findings, stats })
}

/// Human-readable statistics, one item per line.
pub fn render_stats(stats: &SymStats) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "paths: {} completed, {} problems, {} incomplete, {} pruned",
        stats.completed, stats.problems, stats.incomplete, stats.pruned
    );
    let q = &stats.solver;
    let _ = writeln!(
        s,
        "solver: {} queries ({} sat, {} unsat, {} unknown) in {:.3}s",
        q.queries,
        q.sat,
        q.unsat,
        q.unknown,
        q.time.as_secs_f64()
    );
    let _ = writeln!(s, "concretizations: {}", stats.concretizations);
    let sc = &stats.scheduler;
    let _ = writeln!(s, "scheduler: {} steps, {} choices, {} yields, {} finals", sc.steps, sc.choices, sc.yields, sc.finals);
    if stats.timed_out {
        let _ = writeln!(s, "timeout reached: exploration incomplete");
    }
    let _ = writeln!(s, "wall time: {:.3}s", stats.wall.as_secs_f64());
    s
}
