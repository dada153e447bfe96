use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use super::code::Program;
use super::machine::{Answer, EvalOutcome, Event, Limits, Pending, Thread};
use crate::choice::{Coroutine, EngineError, Flow, Priority, Scheduler, SchedulerStats, Status};
use crate::solver::{Model, SatResult, SolverConfig, SolverCounters, SolverHandle, SolverStats};
use crate::trap::TrapKind;
use crate::values::{PathCondition, RelOp, SymExpr, ValueType};

#[derive(Debug, Clone)]
pub struct SymConfig {
    pub workers: usize,
    pub limits: Limits,
    pub solver: SolverConfig,
    /// Wall-clock budget for the whole exploration.
    pub timeout: Option<Duration>,
}

impl SymConfig {
    pub fn new(solver: SolverConfig) -> SymConfig {
        SymConfig { workers: 1, limits: Limits::default(), solver, timeout: None }
    }
}

/// Why a path stopped without a verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Incomplete {
    Fuel,
    Solver(String),
}

#[derive(Debug, Clone)]
pub enum PathEnd {
    Outcome(EvalOutcome<SymExpr>),
    Incomplete(Incomplete),
}

/// One finished path.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub end: PathEnd,
    /// For traps and failed assertions: values for every symbol the path
    /// minted, in a model of its path condition.
    pub model: Option<Model>,
    /// Conjuncts in the final path condition.
    pub pc_len: usize,
}

impl Leaf {
    /// A trap or an assertion failure.
    pub fn is_problem(&self) -> bool {
        matches!(self.end, PathEnd::Outcome(EvalOutcome::Trap(..) | EvalOutcome::Assert(..)))
    }

    pub fn is_incomplete(&self) -> bool {
        matches!(self.end, PathEnd::Incomplete(_))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SymStats {
    /// Paths that reached a leaf.
    pub paths: u64,
    pub completed: u64,
    pub problems: u64,
    pub incomplete: u64,
    /// Paths cut because their condition became unsatisfiable.
    pub pruned: u64,
    pub concretizations: u64,
    pub scheduler: SchedulerStats,
    pub solver: SolverStats,
    pub wall: Duration,
    pub timed_out: bool,
}

/// Per-worker storage: a private solver session.
pub struct Worker {
    pub id: usize,
    solver: SolverHandle,
}

impl Worker {
    fn check(&mut self, pc: &PathCondition) -> SatResult {
        match self.solver.check(&pc.to_vec()) {
            Ok(r) => r,
            Err(invalid) => panic!("{invalid}"),
        }
    }
}

#[derive(Default)]
struct Shared {
    concretizations: AtomicU64,
}

type Task = Coroutine<Leaf, Worker>;

#[derive(Clone)]
struct SymState {
    thread: Thread<SymExpr>,
    pc: PathCondition,
    /// A model of the first `n` conjuncts, kept while it stays valid.
    model: Option<(usize, Model)>,
}

impl SymState {
    fn extend(&mut self, pc: PathCondition, model: Model) {
        self.model = Some((pc.len(), model));
        self.pc = pc;
    }

    /// A model of the current path condition, asking the solver only when
    /// the cached one is stale.
    fn current_model(&self, w: &mut Worker) -> Result<Model, Status<Leaf, Worker>> {
        if let Some((n, m)) = &self.model {
            if *n == self.pc.len() {
                return Ok(m.clone());
            }
        }
        match w.check(&self.pc) {
            SatResult::Sat(m) => Ok(m),
            SatResult::Unsat => Err(Status::Stop),
            SatResult::Unknown(why) => Err(Status::Now(self.incomplete(Incomplete::Solver(why)))),
        }
    }

    fn incomplete(&self, why: Incomplete) -> Leaf {
        Leaf { end: PathEnd::Incomplete(why), model: None, pc_len: self.pc.len() }
    }

    /// If the cached model already satisfies `cond`, it is a model of the
    /// extended condition too.
    fn model_with(&self, cond: &SymExpr) -> Option<Model> {
        let (n, m) = self.model.as_ref()?;
        if *n != self.pc.len() {
            return None;
        }
        let value = cond.eval(&|id| Some(m.get(id).unwrap_or(0)))?;
        if value == 0 {
            return None;
        }
        let mut m = m.clone();
        for (id, width) in cond.symbols() {
            if m.get(id).is_none() {
                m.insert(id, width, 0);
            }
        }
        Some(m)
    }
}

fn explore(st: SymState, sh: Arc<Shared>) -> Task {
    Coroutine::new(move |w| step(st.clone(), &sh, w))
}

fn step(mut st: SymState, sh: &Arc<Shared>, w: &mut Worker) -> Status<Leaf, Worker> {
    loop {
        match st.thread.run() {
            Event::Done(o) => return finish(st, o, w),
            Event::Pruned => return Status::Stop,
            Event::Suspend(Pending::Yield) => return Status::Yield(Priority::default(), explore(st, sh.clone())),
            Event::Suspend(Pending::Fresh(ty)) => {
                let id = st.thread.symbols().len() as u32;
                st.thread.answer(Answer::Value(SymExpr::symbol(id, ty)));
            }
            Event::Suspend(Pending::Select(c)) => {
                let taken = branch(st.clone(), c.clone(), true, sh.clone());
                let not_taken = branch(st, SymExpr::not(&c), false, sh.clone());
                return Coroutine::choose(taken, not_taken).run(w);
            }
            Event::Suspend(Pending::Assume(c)) => {
                let pc = st.pc.with(c.clone());
                if let Some(m) = st.model_with(&c) {
                    st.extend(pc, m);
                } else {
                    match w.check(&pc) {
                        SatResult::Sat(m) => st.extend(pc, m),
                        SatResult::Unsat => return Status::Stop,
                        SatResult::Unknown(why) => return Status::Now(st.incomplete(Incomplete::Solver(why))),
                    }
                }
                st.thread.answer(Answer::Unit);
            }
            Event::Suspend(Pending::Concretize(v)) => {
                let mut m = match st.current_model(w) {
                    Ok(m) => m,
                    Err(status) => return status,
                };
                for (id, width) in v.symbols() {
                    if m.get(id).is_none() {
                        m.insert(id, width, 0);
                    }
                }
                let bits = v.eval(&|id| m.get(id)).expect("model covers the expression");
                let c = SymExpr::constant(v.width(), bits);
                let pc = st.pc.with(SymExpr::relop(RelOp::Eq, &v, &c));
                st.extend(pc, m);
                sh.concretizations.fetch_add(1, Ordering::Relaxed);
                st.thread.answer(Answer::Value(c));
            }
        }
    }
}

/// Continue `st` on the side of a branch where `cond` holds, after going
/// back through the queue.
fn branch(st: SymState, cond: SymExpr, taken: bool, sh: Arc<Shared>) -> Task {
    Coroutine::yield_now(Priority::default()).bind(move |()| {
        let (st, cond, sh) = (st.clone(), cond.clone(), sh.clone());
        Coroutine::new(move |w: &mut Worker| {
            let mut st = st.clone();
            let pc = st.pc.with(cond.clone());
            if let Some(m) = st.model_with(&cond) {
                st.extend(pc, m);
            } else {
                match w.check(&pc) {
                    SatResult::Sat(m) => st.extend(pc, m),
                    SatResult::Unsat => return Status::Stop,
                    SatResult::Unknown(why) => return Status::Now(st.incomplete(Incomplete::Solver(why))),
                }
            }
            st.thread.answer(Answer::Bool(taken));
            step(st, &sh, w)
        })
    })
}

fn finish(st: SymState, outcome: EvalOutcome<SymExpr>, w: &mut Worker) -> Status<Leaf, Worker> {
    let pc_len = st.pc.len();
    match outcome {
        EvalOutcome::Trap(TrapKind::FuelExhausted, _) => Status::Now(st.incomplete(Incomplete::Fuel)),
        EvalOutcome::Eval(_) => Status::Now(Leaf { end: PathEnd::Outcome(outcome), model: None, pc_len }),
        _ => match st.current_model(w) {
            Ok(m) => {
                let model = complete(m, st.thread.symbols());
                Status::Now(Leaf { end: PathEnd::Outcome(outcome), model: Some(model), pc_len })
            }
            Err(status) => status,
        },
    }
}

/// Restrict `m` to the minted symbols, giving unconstrained ones zero.
fn complete(m: Model, symbols: &[ValueType]) -> Model {
    let mut out = Model::new();
    for (id, ty) in symbols.iter().enumerate() {
        let id = id as u32;
        out.insert(id, ty.bits(), m.get(id).unwrap_or(0));
    }
    out
}

/// Explore every path of `main` on `cfg.workers` threads. `on_leaf` is
/// called on the worker that finished each path, possibly concurrently;
/// returning [`Flow::Halt`] stops the exploration.
pub fn run_symbolic(
    prog: &Arc<Program>,
    cfg: &SymConfig,
    on_leaf: impl Fn(Leaf) -> Flow + Sync,
) -> Result<SymStats, EngineError> {
    let start = Instant::now();
    let counters = Arc::new(SolverCounters::default());
    let shared = Arc::new(Shared::default());
    let sched: Scheduler<Leaf, Worker> = Scheduler::new();
    let root = SymState { thread: Thread::new(prog.clone(), cfg.limits), pc: PathCondition::new(), model: None };
    sched.submit(explore(root, shared.clone()));

    let timed_out = Arc::new(AtomicBool::new(false));
    let (stop_tx, stop_rx) = mpsc::channel::<()>();
    let watchdog = cfg.timeout.map(|limit| {
        let closer = sched.closer();
        let timed_out = timed_out.clone();
        thread::spawn(move || {
            if let Err(mpsc::RecvTimeoutError::Timeout) = stop_rx.recv_timeout(limit) {
                timed_out.store(true, Ordering::SeqCst);
                closer.close();
            }
        })
    });

    let tally = [AtomicU64::new(0), AtomicU64::new(0), AtomicU64::new(0)];
    let result = sched.run(
        cfg.workers.max(1),
        |id| Worker { id, solver: SolverHandle::new(&cfg.solver, counters.clone()) },
        |leaf, _w| {
            let slot = if leaf.is_problem() {
                1
            } else if leaf.is_incomplete() {
                2
            } else {
                0
            };
            tally[slot].fetch_add(1, Ordering::Relaxed);
            on_leaf(leaf)
        },
    );
    drop(stop_tx);
    if let Some(h) = watchdog {
        let _ = h.join();
    }
    let scheduler = result?;
    let [completed, problems, incomplete] = tally.map(|t| t.into_inner());
    Ok(SymStats {
        paths: completed + problems + incomplete,
        completed,
        problems,
        incomplete,
        pruned: scheduler.stops,
        concretizations: shared.concretizations.load(Ordering::Relaxed),
        scheduler,
        solver: counters.snapshot(),
        wall: start.elapsed(),
        timed_out: timed_out.load(Ordering::SeqCst),
    })
}
