//! One line per acceptance criterion. Criteria are independent: a failing
//! one is reported and the rest still run. The target fails if any line
//! reads FAIL, except a speedup measurement taken on a machine with fewer
//! than four hardware threads, which is reported but cannot be met there.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use common::gen::{self, Tree};
use common::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use wasym::choice::{run_scheduler, run_sequential, Coroutine, Flow, WorkQueue};
use wasym::interp::{run_concrete, run_symbolic, ConcreteEnd, EvalOutcome, PathEnd, DEFAULT_FUEL};
use wasym::report::{FindingKind, ReportOptions};
use wasym::solver::{brute_check, model_satisfies, ExternalSession, SatResult, DEFAULT_SOLVER_COMMAND};
use wasym::values::{Concrete, Value};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cpus() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

fn wasym_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wasym")).args(args).output().expect("binary runs")
}

fn corpus(name: &str) -> std::path::PathBuf {
    corpus_dir().join(name)
}

fn test_swap() -> Check {
    let path = corpus("test_swap.wat");
    let start = Instant::now();
    let out = wasym_cli(&["sym", path.to_str().unwrap()]);
    let elapsed = start.elapsed();
    ensure(out.status.code() == Some(13), || format!("exit {:?}", out.status.code()))?;

    let prog = load(&path);
    let rep = explore(&prog, 1);
    ensure(rep.stats.paths == 3, || format!("{} paths", rep.stats.paths))?;
    ensure(rep.findings.len() == 1, || format!("{} findings", rep.findings.len()))?;
    let f = &rep.findings[0];
    ensure(f.headline == "Trap: unreachable", || f.headline.clone())?;
    ensure(f.model.len() == 2, || format!("model has {} symbols", f.model.len()))?;

    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model");
    std::fs::write(&model, format!("Model:\n{}\n", f.model.render())).unwrap();
    let replay = wasym_cli(&["replay", path.to_str().unwrap(), "--model", model.to_str().unwrap()]);
    ensure(replay.status.code() == Some(13), || format!("replay exit {:?}", replay.status.code()))?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("3 paths, 1 finding, model {:?}, exit 13, replay 13, {:.2}s", model_values(&f.model), elapsed.as_secs_f64()))
}

fn sub_overflow() -> Check {
    let prog = load(&corpus("concrete/sub_overflow.wat"));
    let run = run_concrete(&prog, DEFAULT_FUEL, None).unwrap();
    let want = Concrete::I32(2139095167);
    ensure(run.end == ConcreteEnd::Outcome(EvalOutcome::Eval(vec![want])), || format!("{:?}", run.end))?;
    let out = Mutex::new(None);
    run_symbolic(&prog, &sym_config(1), |leaf| {
        *out.lock().unwrap() = Some(leaf.end);
        Flow::Continue
    })
    .map_err(|e| e.to_string())?;
    let got = match out.into_inner().unwrap() {
        Some(PathEnd::Outcome(EvalOutcome::Eval(vs))) => vs.first().and_then(|v| v.to_concrete()),
        other => return Err(format!("symbolic run ended with {other:?}")),
    };
    ensure(got == Some(want), || format!("symbolic gave {got:?}"))?;
    Ok("both modes return 2139095167".into())
}

fn mean1(x: i32, y: i32) -> i32 {
    (x & y).wrapping_add((x ^ y) >> 1)
}

fn mean2(x: i32, y: i32) -> i32 {
    x.wrapping_add(y) / 2
}

fn mean_equivalence() -> Check {
    let start = Instant::now();
    let prog = load(&corpus("mean.wat"));
    let rep = explore(&prog, 1);
    let elapsed = start.elapsed();
    let asserts: Vec<_> = rep.findings.iter().filter(|f| f.kind == FindingKind::Assert).collect();
    ensure(!asserts.is_empty(), || "no assertion failure".into())?;
    for f in &asserts {
        let v = model_values(&f.model);
        ensure(v.len() == 2, || format!("model {v:?}"))?;
        let (x, y) = (v[0] as i32, v[1] as i32);
        ensure(mean1(x, y) != mean2(x, y), || format!("means agree at ({x}, {y})"))?;
        ensure(replay_confirms(&prog, f), || "replay does not fail the assertion".into())?;
    }
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    let v = model_values(&asserts[0].model);
    Ok(format!(
        "x={} y={}: mean1={} mean2={}, replays, {:.2}s",
        v[0],
        v[1],
        mean1(v[0] as i32, v[1] as i32),
        mean2(v[0] as i32, v[1] as i32),
        elapsed.as_secs_f64()
    ))
}

fn single_path_outcome(prog: &Arc<wasym::interp::Program>) -> Result<EvalOutcome<Concrete>, String> {
    let leaves = Mutex::new(Vec::new());
    run_symbolic(prog, &sym_config(1), |leaf| {
        leaves.lock().unwrap().push(leaf.end);
        Flow::Continue
    })
    .map_err(|e| e.to_string())?;
    let leaves = leaves.into_inner().unwrap();
    let [PathEnd::Outcome(o)] = leaves.as_slice() else { return Err(format!("leaves {leaves:?}")) };
    let fold = |v: &wasym::values::SymExpr| v.to_concrete().ok_or_else(|| format!("symbolic value {}", v.render()));
    Ok(match o {
        EvalOutcome::Eval(vs) => EvalOutcome::Eval(vs.iter().map(fold).collect::<Result<_, _>>()?),
        EvalOutcome::Trap(k, l) => EvalOutcome::Trap(*k, *l),
        EvalOutcome::Assert(v, l) => EvalOutcome::Assert(fold(v)?, *l),
    })
}

fn concrete_symbolic_coincide() -> Check {
    let mut sources: Vec<(String, String)> = concrete_corpus()
        .iter()
        .map(|p| (name(p), std::fs::read_to_string(p).unwrap()))
        .collect();
    let fixed = sources.len();
    for seed in 0..100u64 {
        sources.push((format!("generated #{seed}"), gen::program(&mut StdRng::seed_from_u64(seed))));
    }
    let mut traps = 0;
    for (label, src) in &sources {
        let prog = load_src(src);
        let ConcreteEnd::Outcome(want) = run_concrete(&prog, DEFAULT_FUEL, None).unwrap().end else {
            return Err(format!("{label}: pruned"));
        };
        traps += matches!(want, EvalOutcome::Trap(..)) as usize;
        let got = single_path_outcome(&prog).map_err(|e| format!("{label}: {e}"))?;
        ensure(got == want, || format!("{label}: concrete {want:?} symbolic {got:?}"))?;
    }
    ensure(fixed >= 20, || format!("only {fixed} recorded programs"))?;
    Ok(format!("{} programs ({fixed} recorded, 100 generated, {traps} trapping) agree", sources.len()))
}

fn scheduling_independence() -> Check {
    let programs = all_corpus();
    let mut runs = 0;
    for path in &programs {
        let prog = load(path);
        let reference = headlines(&explore(&prog, 1));
        for workers in [1, 2, 4, 8] {
            for _ in 0..5 {
                let got = headlines(&explore(&prog, workers));
                ensure(got == reference, || format!("{} with {workers} workers: {got:?} vs {reference:?}", name(path)))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs over all {} corpus programs, N in {{1,2,4,8}} x 5, identical finding multisets", programs.len()))
}

fn cow_memory() -> Check {
    let mut reads = 0;
    for seed in 0..5u64 {
        reads += memory_agrees(seed, 10_000, 8)?;
    }
    Ok(format!("5 x 10^4 operations on fork trees of depth <= 8, {reads} reads agree"))
}

fn solver_agreement() -> Check {
    ensure(z3_available(), || "external solver not available".into())?;
    let mut z3 = ExternalSession::new(DEFAULT_SOLVER_COMMAND, Duration::from_secs(10), false);
    let (mut sat, mut unsat) = (0, 0);
    for seed in 0..500u64 {
        let nsyms = 1 + (seed % 3) as u32;
        let pc = gen::formula(&mut StdRng::seed_from_u64(seed), nsyms);
        let brute = brute_check(&pc, 24);
        let ext = z3.check(&pc);
        ensure(brute.is_sat() == ext.is_sat(), || format!("formula {seed}: brute {brute:?} external {ext:?}"))?;
        for r in [&brute, &ext] {
            match r {
                SatResult::Sat(m) => ensure(model_satisfies(m, &pc), || format!("formula {seed}: bad model {m}"))?,
                SatResult::Unsat => {}
                SatResult::Unknown(why) => return Err(format!("formula {seed}: unknown ({why})")),
            }
        }
        if brute.is_sat() {
            sat += 1;
        } else {
            unsat += 1;
        }
    }
    Ok(format!("500 formulas ({sat} sat, {unsat} unsat) agree, all models validate"))
}

fn bounds_overflow() -> Check {
    let prog = load(&corpus("bounds_overflow.wat"));
    let rep = explore(&prog, 1);
    let f = rep
        .findings
        .iter()
        .find(|f| f.headline == "Trap: memory heap buffer overflow")
        .ok_or_else(|| format!("findings {:?}", headlines(&rep)))?;
    let idx = model_values(&f.model)[0];
    ensure((36..100).contains(&idx), || format!("index {idx} does not overflow"))?;
    ensure(replay_confirms(&prog, f), || "replay does not trap".into())?;
    Ok(format!("index {idx} overflows, replay traps"))
}

/// `bits` symbolic branches, then a countdown of `iters` iterations on
/// every path.
fn branching_program(bits: u32, iters: u32) -> String {
    let branches: String = (0..bits)
        .map(|_| "\n    (if (i32.and (call $s) (i32.const 1)) (then (local.set $acc (i32.add (local.get $acc) (i32.const 1)))))")
        .collect();
    format!(
        r#"(module
  (import "owi" "i32_symbol" (func $s (result i32)))
  (func (export "main") (local $acc i32) (local $n i32){branches}
    (local.set $n (i32.const {iters}))
    (loop $spin
      (local.set $acc (i32.xor (local.get $acc) (local.get $n)))
      (br_if $spin (local.tee $n (i32.sub (local.get $n) (i32.const 1)))))))"#
    )
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn speedup() -> Check {
    let prog = load_src(&branching_program(10, 14_000));
    let mut all_ones = wasym::solver::Model::new();
    for id in 0..10 {
        all_ones.insert(id, 32, 1);
    }
    let per_path = run_concrete(&prog, DEFAULT_FUEL, Some(&all_ones)).unwrap().executed;
    let time = |workers: usize| -> Result<f64, String> {
        let mut cfg = sym_config(workers);
        cfg.limits.fuel = 10_000_000;
        let start = Instant::now();
        let rep = explore_with(&prog, &cfg, ReportOptions::default());
        ensure(rep.stats.paths == 1024 && rep.stats.incomplete == 0, || format!("{:?}", rep.stats))?;
        Ok(start.elapsed().as_secs_f64())
    };
    let t1 = median((0..5).map(|_| time(1)).collect::<Result<_, _>>()?);
    let t4 = median((0..5).map(|_| time(4)).collect::<Result<_, _>>()?);
    let ratio = t1 / t4;
    let detail = format!(
        "1024 paths of {per_path} instructions, median of 5: N=1 {t1:.2}s, N=4 {t4:.2}s, speedup {ratio:.2}x on {} hardware thread(s)",
        cpus()
    );
    ensure(ratio >= 1.5, || detail.clone())?;
    Ok(detail)
}

fn sorted(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    v
}

fn choice_layer() -> Check {
    type C = Coroutine<u32, ()>;
    let seq = |c: &C| sorted(run_sequential(c, &mut ()));
    let par = |c: &C, n: usize| {
        let out = Mutex::new(Vec::new());
        run_scheduler(vec![c.clone()], n, |_| (), |x, _| {
            out.lock().unwrap().push(x);
            Flow::Continue
        })
        .unwrap();
        sorted(out.into_inner().unwrap())
    };
    let kleisli = |salt: u64| {
        move |x: u32| -> C {
            Tree::random(&mut StdRng::seed_from_u64(salt ^ x as u64), 3).coroutine().map(move |y| y.wrapping_add(x))
        }
    };
    let trees = 1000u64;
    for seed in 0..trees {
        let t = Tree::random(&mut StdRng::seed_from_u64(seed), 6);
        let m: C = t.coroutine();
        let (f, g) = (kleisli(seed), kleisli(!seed));
        ensure(seq(&m) == sorted(t.values()), || format!("tree {seed}: values"))?;
        let x = (seed % 50) as u32;
        ensure(seq(&C::ret(x).bind(f)) == seq(&f(x)), || format!("tree {seed}: left identity"))?;
        ensure(seq(&m.clone().bind(C::ret)) == seq(&m), || format!("tree {seed}: right identity"))?;
        let lhs = m.clone().bind(f).bind(g);
        let rhs = m.clone().bind(move |x| f(x).bind(g));
        ensure(seq(&lhs) == seq(&rhs), || format!("tree {seed}: associativity"))?;
        let n = 1 + (seed % 4) as usize;
        ensure(par(&m, n) == seq(&m), || format!("tree {seed}: scheduler with {n} workers"))?;
    }

    // A pledge keeps an idle consumer waiting until the holder pushes.
    let q = Arc::new(WorkQueue::new());
    q.push(1u32);
    let first = q.pop(true);
    let waiter = {
        let q = q.clone();
        thread::spawn(move || q.pop(false))
    };
    thread::sleep(Duration::from_millis(50));
    ensure(!waiter.is_finished(), || "consumer returned while a pledge was held".into())?;
    q.push(2);
    q.end_pledge();
    let second = waiter.join().unwrap();
    ensure((first, second) == (Some(1), Some(2)), || format!("popped {first:?} then {second:?}"))?;
    // Ending the last pledge on an empty queue releases every waiter.
    q.make_pledge();
    let waiters: Vec<_> = (0..3)
        .map(|_| {
            let q = q.clone();
            thread::spawn(move || q.pop(false))
        })
        .collect();
    thread::sleep(Duration::from_millis(20));
    q.end_pledge();
    for w in waiters {
        ensure(w.join().unwrap().is_none(), || "waiter got an element from an empty queue".into())?;
    }

    // The watchdog stops an exploration with about 2^40 paths.
    let prog = load_src(&branching_program(40, 1));
    let mut cfg = sym_config(2);
    cfg.timeout = Some(Duration::from_millis(300));
    let start = Instant::now();
    let rep = explore_with(&prog, &cfg, ReportOptions::default());
    let waited = start.elapsed();
    ensure(rep.stats.timed_out, || "timeout not recorded".into())?;
    ensure(waited < Duration::from_secs(10), || format!("stopped after {waited:?}"))?;
    Ok(format!(
        "monad laws and scheduler equivalence on {trees} trees, pledge wait and release, watchdog stopped after {:.2}s with {} paths done",
        waited.as_secs_f64(),
        rep.stats.paths
    ))
}

fn main() {
    let criteria: [(u32, fn() -> Check); 10] = [
        (1, test_swap),
        (2, sub_overflow),
        (3, mean_equivalence),
        (4, concrete_symbolic_coincide),
        (5, scheduling_independence),
        (6, cow_memory),
        (7, solver_agreement),
        (8, bounds_overflow),
        (9, speedup),
        (10, choice_layer),
    ];
    let mut results = BTreeMap::new();
    for (n, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        match &outcome {
            Ok(detail) => println!("criterion {n}: PASS {detail} [{:.1}s]", start.elapsed().as_secs_f64()),
            Err(detail) => println!("criterion {n}: FAIL {detail} [{:.1}s]", start.elapsed().as_secs_f64()),
        }
        results.insert(n, outcome.is_ok());
    }
    let unattainable = |n: u32| n == 9 && cpus() < 4;
    if !results[&9] && unattainable(9) {
        println!("criterion 9: needs at least 4 hardware threads, this machine has {}", cpus());
    }
    let failed: Vec<u32> = results.iter().filter(|(n, ok)| !**ok && !unattainable(**n)).map(|(n, _)| *n).collect();
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
