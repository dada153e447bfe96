//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use wasym::interp::{run_concrete, ConcreteEnd, EvalOutcome, Program, SymConfig};
use wasym::report::{self, Finding, ReportOptions, SymReport};
use wasym::solver::{ExternalSession, Model, SolverConfig, DEFAULT_SOLVER_COMMAND};
use wasym::values::Concrete;

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

fn wat_files(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "wat"))
        .collect();
    out.sort();
    out
}

/// Programs that mint no symbols, each annotated with `;; expect:`.
pub fn concrete_corpus() -> Vec<PathBuf> {
    wat_files(&corpus_dir().join("concrete"))
}

/// Programs with symbols, each annotated with `;; findings:`.
pub fn symbolic_corpus() -> Vec<PathBuf> {
    wat_files(&corpus_dir())
}

pub fn all_corpus() -> Vec<PathBuf> {
    let mut all = concrete_corpus();
    all.extend(symbolic_corpus());
    all
}

pub fn name(path: &Path) -> String {
    path.file_name().unwrap().to_string_lossy().into_owned()
}

pub fn load_src(src: &str) -> Arc<Program> {
    Program::new(wasym::wat::load(src).expect("corpus program loads")).unwrap()
}

pub fn load(path: &Path) -> Arc<Program> {
    load_src(&std::fs::read_to_string(path).unwrap())
}

/// The text after `;; <key>:` on the first line that has it.
pub fn annotation(path: &Path, key: &str) -> Option<String> {
    let prefix = format!(";; {key}:");
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix(&prefix).map(|rest| rest.trim().to_string()))
}

pub fn z3_available() -> bool {
    ExternalSession::probe(DEFAULT_SOLVER_COMMAND)
}

pub fn external_solver() -> SolverConfig {
    SolverConfig::auto(DEFAULT_SOLVER_COMMAND).0
}

pub fn sym_config(workers: usize) -> SymConfig {
    SymConfig { workers, ..SymConfig::new(external_solver()) }
}

pub fn explore_with(prog: &Arc<Program>, cfg: &SymConfig, opts: ReportOptions) -> SymReport {
    report::sym_report(prog, cfg, opts, |_| {}).expect("exploration succeeds")
}

pub fn explore(prog: &Arc<Program>, workers: usize) -> SymReport {
    explore_with(prog, &sym_config(workers), ReportOptions::default())
}

/// Finding headlines, sorted, so reports compare as multisets.
pub fn headlines(rep: &SymReport) -> Vec<String> {
    let mut h: Vec<_> = rep.findings.iter().map(|f| f.headline.clone()).collect();
    h.sort();
    h
}

/// Headlines listed in a `;; findings:` annotation, sorted.
pub fn expected_findings(path: &Path) -> Vec<String> {
    let text = annotation(path, "findings").unwrap_or_default();
    let mut kinds: Vec<String> = text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    kinds.sort();
    kinds
}

/// Only the part before the first colon-separated detail of assert
/// headlines, which the annotations do not spell out.
pub fn kind_of(headline: &str) -> String {
    if headline.starts_with("Assert failure") {
        "Assert failure".to_string()
    } else {
        headline.to_string()
    }
}

/// Replay a finding's model and return the concrete end.
pub fn replay(prog: &Arc<Program>, finding: &Finding) -> ConcreteEnd {
    run_concrete(prog, wasym::interp::DEFAULT_FUEL, Some(&finding.model)).expect("model fits the program").end
}

/// Whether replaying reaches a problem of the same kind.
pub fn replay_confirms(prog: &Arc<Program>, finding: &Finding) -> bool {
    match replay(prog, finding) {
        ConcreteEnd::Outcome(o) => report::concrete_headline(&o).is_some_and(|(kind, _)| kind == finding.kind),
        ConcreteEnd::Pruned => false,
    }
}

/// A recorded outcome: `eval`, `eval N`, or a report headline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expected {
    Eval(Option<i128>),
    Headline(String),
}

pub fn expected_outcome(path: &Path) -> Expected {
    let text = annotation(path, "expect").expect("annotated program");
    match text.strip_prefix("eval") {
        Some("") => Expected::Eval(None),
        Some(n) => Expected::Eval(Some(n.trim().parse().unwrap())),
        None => Expected::Headline(text),
    }
}

/// The observable result of a concrete outcome in the annotation's terms.
pub fn observe(outcome: &EvalOutcome<Concrete>) -> Expected {
    match outcome {
        EvalOutcome::Eval(vals) => Expected::Eval(vals.first().map(|c| c.as_i64() as i128)),
        _ => Expected::Headline(report::concrete_headline(outcome).unwrap().1),
    }
}

pub fn model_values(m: &Model) -> Vec<i64> {
    m.iter().map(|(_, w, bits)| wasym::values::bits::to_signed(w, bits)).collect()
}

pub mod gen {
    //! Seeded generators shared by the property tests and the acceptance
    //! target.

    use rand::rngs::StdRng;
    use rand::Rng;
    use wasym::choice::{Coroutine, Priority, Status};
    use wasym::values::{BinOp, RelOp, SymExpr};

    /// An 8-bit term over symbols `0..nsyms`.
    pub fn term(rng: &mut StdRng, nsyms: u32, depth: u32) -> SymExpr {
        if depth == 0 || rng.gen_bool(0.3) {
            return if rng.gen_bool(0.6) {
                SymExpr::symbol_of_width(rng.gen_range(0..nsyms), 8)
            } else {
                SymExpr::constant(8, rng.gen_range(0..256))
            };
        }
        let op = BinOp::ALL[rng.gen_range(0..BinOp::ALL.len())];
        let lhs = term(rng, nsyms, depth - 1);
        let rhs = term(rng, nsyms, depth - 1);
        SymExpr::binop(op, &lhs, &rhs)
    }

    /// A conjunction of one to four comparisons over at most `nsyms`
    /// 8-bit symbols.
    pub fn formula(rng: &mut StdRng, nsyms: u32) -> Vec<SymExpr> {
        (0..rng.gen_range(1..=4))
            .map(|_| {
                let op = RelOp::ALL[rng.gen_range(0..RelOp::ALL.len())];
                let a = term(rng, nsyms, 3);
                let b = term(rng, nsyms, 2);
                let c = SymExpr::relop(op, &a, &b);
                if rng.gen_bool(0.2) {
                    SymExpr::not(&c)
                } else {
                    c
                }
            })
            .collect()
    }

    const I32_OPS: [&str; 13] =
        ["add", "sub", "mul", "div_s", "div_u", "rem_s", "rem_u", "and", "or", "xor", "shl", "shr_s", "shr_u"];
    const I32_RELS: [&str; 10] = ["eq", "ne", "lt_s", "lt_u", "gt_s", "gt_u", "le_s", "le_u", "ge_s", "ge_u"];

    fn expr(rng: &mut StdRng, depth: u32) -> String {
        if depth == 0 || rng.gen_bool(0.25) {
            return match rng.gen_range(0..3) {
                0 => format!("(local.get $l{})", rng.gen_range(0..3)),
                1 => "(global.get $g)".to_string(),
                _ => format!("(i32.const {})", rng.gen_range(-40i32..40)),
            };
        }
        match rng.gen_range(0..10) {
            0 => format!("(i32.eqz {})", expr(rng, depth - 1)),
            1 => format!(
                "(i32.{} {} {})",
                I32_RELS[rng.gen_range(0..I32_RELS.len())],
                expr(rng, depth - 1),
                expr(rng, depth - 1)
            ),
            2 => format!("(select {} {} {})", expr(rng, depth - 1), expr(rng, depth - 1), expr(rng, depth - 1)),
            3 => format!("(i32.load8_u (i32.and {} (i32.const 63)))", expr(rng, depth - 1)),
            4 => format!("(i32.wrap_i64 (i64.mul (i64.extend_i32_s {}) (i64.const 3)))", expr(rng, depth - 1)),
            _ => format!(
                "(i32.{} {} {})",
                I32_OPS[rng.gen_range(0..I32_OPS.len())],
                expr(rng, depth - 1),
                expr(rng, depth - 1)
            ),
        }
    }

    fn stmt(rng: &mut StdRng, depth: u32) -> String {
        match rng.gen_range(0..6) {
            0 if depth > 0 => format!(
                "(if {} (then {}) (else {}))",
                expr(rng, 2),
                stmt(rng, depth - 1),
                stmt(rng, depth - 1)
            ),
            1 => format!("(i32.store8 (i32.and {} (i32.const 63)) {})", expr(rng, 2), expr(rng, 2)),
            2 => format!("(global.set $g {})", expr(rng, 3)),
            3 if depth > 0 => format!(
                "(local.set $n{d} (i32.and {} (i32.const 7))) (block $out{d} (loop $top{d} (br_if $out{d} (i32.eqz (local.get $n{d}))) {} (local.set $n{d} (i32.sub (local.get $n{d}) (i32.const 1))) (br $top{d})))",
                expr(rng, 1),
                stmt(rng, depth - 1),
                d = depth
            ),
            _ => format!("(local.set $l{} {})", rng.gen_range(0..3), expr(rng, 3)),
        }
    }

    /// A symbol-free module whose `main` returns an i32 or traps.
    pub fn program(rng: &mut StdRng) -> String {
        let body: Vec<String> = (0..rng.gen_range(2..6)).map(|_| stmt(rng, 2)).collect();
        format!(
            "(module\n  (memory 1)\n  (global $g (mut i32) (i32.const {}))\n  (func (export \"main\") (result i32)\n    (local $l0 i32) (local $l1 i32) (local $l2 i32) (local $n1 i32) (local $n2 i32)\n    (local.set $l0 (i32.const {}))\n    (local.set $l1 (i32.const {}))\n    {}\n    {}))",
            rng.gen_range(-9..9),
            rng.gen_range(-100..100),
            rng.gen_range(-100..100),
            body.join("\n    "),
            expr(rng, 3)
        )
    }

    /// A finite nondeterministic computation.
    #[derive(Debug, Clone)]
    pub enum Tree {
        Ret(u32),
        Stop,
        Yield(Box<Tree>),
        Choose(Box<Tree>, Box<Tree>),
    }

    impl Tree {
        pub fn random(rng: &mut StdRng, depth: u32) -> Tree {
            if depth == 0 {
                return Tree::Ret(rng.gen_range(0..50));
            }
            match rng.gen_range(0..8) {
                0 => Tree::Stop,
                1 | 2 => Tree::Ret(rng.gen_range(0..50)),
                3 | 4 => Tree::Yield(Box::new(Tree::random(rng, depth - 1))),
                _ => Tree::Choose(Box::new(Tree::random(rng, depth - 1)), Box::new(Tree::random(rng, depth - 1))),
            }
        }

        /// Final values in any order.
        pub fn values(&self) -> Vec<u32> {
            match self {
                Tree::Ret(x) => vec![*x],
                Tree::Stop => vec![],
                Tree::Yield(t) => t.values(),
                Tree::Choose(a, b) => {
                    let mut v = a.values();
                    v.extend(b.values());
                    v
                }
            }
        }

        pub fn coroutine<W: 'static>(&self) -> Coroutine<u32, W> {
            match self {
                Tree::Ret(x) => Coroutine::ret(*x),
                Tree::Stop => Coroutine::stop(),
                Tree::Yield(t) => {
                    let k = t.coroutine();
                    Coroutine::new(move |_| Status::Yield(Priority::default(), k.clone()))
                }
                Tree::Choose(a, b) => Coroutine::choose(a.coroutine(), b.coroutine()),
            }
        }
    }

    /// One operation against a forest of memory views.
    #[derive(Debug, Clone, Copy)]
    pub enum MemOp {
        Write { view: usize, addr: u32, byte: u8 },
        Read { view: usize, addr: u32 },
        Fork { view: usize },
        Drop { view: usize },
    }

    /// Addresses cluster in a small window so reads hit earlier writes.
    pub fn mem_op(rng: &mut StdRng, views: usize) -> MemOp {
        let view = rng.gen_range(0..views);
        let addr = if rng.gen_bool(0.8) { rng.gen_range(0..256) } else { rng.gen_range(0..65536) };
        match rng.gen_range(0..20) {
            0 | 1 => MemOp::Fork { view },
            2 => MemOp::Drop { view },
            3..=10 => MemOp::Write { view, addr, byte: rng.gen() },
            _ => MemOp::Read { view, addr },
        }
    }
}

/// Apply `ops` to copy-on-write views and to plain byte vectors side by
/// side, failing on the first disagreement. Forks beyond `max_depth` are
/// skipped. Returns the number of reads compared.
pub fn memory_agrees(seed: u64, nops: usize, max_depth: usize) -> Result<usize, String> {
    use rand::SeedableRng;
    use wasym::memory::Memory;

    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut views: Vec<(Memory<u8>, Vec<u8>, usize)> = vec![(Memory::new(1, None, 0), vec![0; 65536], 0)];
    let mut reads = 0;
    for step in 0..nops {
        match gen::mem_op(&mut rng, views.len()) {
            gen::MemOp::Write { view, addr, byte } => {
                views[view].0.write(addr, byte);
                views[view].1[addr as usize] = byte;
            }
            gen::MemOp::Read { view, addr } => {
                let (m, naive, _) = &views[view];
                if m.read(addr) != naive[addr as usize] {
                    return Err(format!("step {step}: view {view} address {addr}"));
                }
                reads += 1;
            }
            gen::MemOp::Fork { view } if views[view].2 < max_depth => {
                let (m, naive, d) = &views[view];
                let child = (m.clone(), naive.clone(), d + 1);
                views[view].2 += 1;
                views.push(child);
            }
            gen::MemOp::Drop { view } if views.len() > 1 => {
                views.swap_remove(view);
            }
            _ => {}
        }
    }
    for (i, (m, naive, _)) in views.iter().enumerate() {
        for addr in 0..512u32 {
            if m.read(addr) != naive[addr as usize] {
                return Err(format!("final: view {i} address {addr}"));
            }
        }
    }
    Ok(reads)
}
