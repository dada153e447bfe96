//! Satisfiability of path conditions over fixed-width bitvectors.
//!
//! Two backends sit behind [`SolverHandle`]: an external SMT-LIB2 process
//! (one per worker) and an exhaustive enumerator for small domains. Every
//! model either backend returns is re-evaluated by the engine before it is
//! handed out.

mod brute;
mod external;
mod model;
mod smtlib;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

pub use brute::{brute_check, DEFAULT_CAP_BITS};
pub use external::ExternalSession;
pub use model::{Model, ModelParseError};
pub use smtlib::{parse_model, parse_sexps, render_smtlib, symbol_name, Sexp};

use crate::values::{symbols_of, Compiled, SymExpr};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(Model),
    Unsat,
    Unknown(String),
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

pub const DEFAULT_SOLVER_COMMAND: &str = "z3 -in";
pub const DEFAULT_QUERY_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendKind {
    /// A command line, split on whitespace, that speaks SMT-LIB2 on stdio.
    External(String),
    /// Enumerate assignments up to this many total bits.
    BruteForce(u32),
}

impl BackendKind {
    pub fn name(&self) -> String {
        match self {
            BackendKind::External(cmd) => format!("external solver `{cmd}`"),
            BackendKind::BruteForce(cap) => format!("brute force ({cap}-bit cap)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub backend: BackendKind,
    pub query_timeout: Duration,
    /// Keep one push scope per conjunct instead of re-asserting the whole
    /// path condition for every query.
    pub incremental: bool,
}

impl SolverConfig {
    pub fn external(command: &str) -> SolverConfig {
        SolverConfig {
            backend: BackendKind::External(command.to_string()),
            query_timeout: DEFAULT_QUERY_TIMEOUT,
            incremental: true,
        }
    }

    pub fn brute_force() -> SolverConfig {
        SolverConfig {
            backend: BackendKind::BruteForce(DEFAULT_CAP_BITS),
            query_timeout: DEFAULT_QUERY_TIMEOUT,
            incremental: false,
        }
    }

    /// The external backend if `command` answers a probe query, otherwise
    /// brute force together with a warning for the user.
    pub fn auto(command: &str) -> (SolverConfig, Option<String>) {
        if ExternalSession::probe(command) {
            (SolverConfig::external(command), None)
        } else {
            let warning = format!(
                "solver command `{command}` is not usable; falling back to brute force over at most {DEFAULT_CAP_BITS} bits"
            );
            (SolverConfig::brute_force(), Some(warning))
        }
    }
}

/// Query counters shared by every handle created from one run.
#[derive(Debug, Default)]
pub struct SolverCounters {
    pub queries: AtomicU64,
    pub sat: AtomicU64,
    pub unsat: AtomicU64,
    pub unknown: AtomicU64,
    pub micros: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub queries: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub time: Duration,
}

impl SolverCounters {
    pub fn snapshot(&self) -> SolverStats {
        SolverStats {
            queries: self.queries.load(Ordering::Relaxed),
            sat: self.sat.load(Ordering::Relaxed),
            unsat: self.unsat.load(Ordering::Relaxed),
            unknown: self.unknown.load(Ordering::Relaxed),
            time: Duration::from_micros(self.micros.load(Ordering::Relaxed)),
        }
    }
}

/// A backend returned a model that does not satisfy the query.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{backend} returned a model that violates the path condition: {model}")]
pub struct InvalidModel {
    pub backend: String,
    pub model: String,
}

/// One worker's solver. Not shared between threads.
pub struct SolverHandle {
    kind: BackendKind,
    session: Option<ExternalSession>,
    counters: Arc<SolverCounters>,
}

impl SolverHandle {
    pub fn new(config: &SolverConfig, counters: Arc<SolverCounters>) -> SolverHandle {
        let session = match &config.backend {
            BackendKind::External(cmd) => Some(ExternalSession::new(cmd, config.query_timeout, config.incremental)),
            BackendKind::BruteForce(_) => None,
        };
        SolverHandle { kind: config.backend.clone(), session, counters }
    }

    pub fn backend(&self) -> &BackendKind {
        &self.kind
    }

    pub fn counters(&self) -> &Arc<SolverCounters> {
        &self.counters
    }

    /// Decide the conjunction of `pc`. A `Sat` model assigns every symbol
    /// of `pc` and has been checked against it.
    pub fn check(&mut self, pc: &[SymExpr]) -> Result<SatResult, InvalidModel> {
        let start = Instant::now();
        let raw = match (&self.kind, self.session.as_mut()) {
            (BackendKind::External(_), Some(session)) => session.check(pc),
            (BackendKind::BruteForce(cap), _) => brute_check(pc, *cap),
            (BackendKind::External(_), None) => unreachable!("external backend without a session"),
        };
        let c = &self.counters;
        c.queries.fetch_add(1, Ordering::Relaxed);
        c.micros.fetch_add(start.elapsed().as_micros() as u64, Ordering::Relaxed);
        match raw {
            SatResult::Sat(model) => {
                c.sat.fetch_add(1, Ordering::Relaxed);
                let model = complete_model(model, pc);
                if !model_satisfies(&model, pc) {
                    return Err(InvalidModel { backend: self.kind.name(), model: model.render() });
                }
                Ok(SatResult::Sat(model))
            }
            SatResult::Unsat => {
                c.unsat.fetch_add(1, Ordering::Relaxed);
                Ok(SatResult::Unsat)
            }
            SatResult::Unknown(why) => {
                c.unknown.fetch_add(1, Ordering::Relaxed);
                Ok(SatResult::Unknown(why))
            }
        }
    }
}

/// Restrict `model` to the symbols of `pc`, at their declared widths,
/// assigning 0 to any the backend left out.
fn complete_model(model: Model, pc: &[SymExpr]) -> Model {
    let mut out = Model::new();
    for (id, width) in symbols_of(pc) {
        out.insert(id, width, model.get(id).unwrap_or(0));
    }
    out
}

/// Evaluate every conjunct of `pc` under `model` with the engine's own
/// evaluator. Missing symbols count as a violation.
pub fn model_satisfies(model: &Model, pc: &[SymExpr]) -> bool {
    let compiled = Compiled::new(pc);
    let mut assignment = Vec::with_capacity(compiled.symbols.len());
    for (id, width) in &compiled.symbols {
        match (model.get(*id), model.width_of(*id)) {
            (Some(v), Some(w)) if w == *width => assignment.push(v),
            _ => return false,
        }
    }
    compiled.all_true(&assignment, &mut Vec::new())
}
