//! The evaluator, generic over the value realization.
//!
//! A [`Thread`] runs until it finishes or needs a decision it cannot make
//! by itself: the truth of a non-constant condition, a fresh symbol, a
//! concrete address. It then returns [`Event::Suspend`] without changing
//! any state. The driver feeds back an [`Answer`] and calls
//! [`Thread::run`] again, which replays the same instruction from the
//! start, consuming the answers in order. Answers are cleared once an
//! instruction completes.

use std::fmt;
use std::sync::Arc;

use super::code::{BlockId, Op, Program};
use crate::memory::Memory;
use crate::trap::TrapKind;
use crate::values::{BinOp, Concrete, RelOp, Value, ValueType};
use crate::wat::{FuncType, Intrinsic};

/// Where an outcome happened: function index and operation position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub func: u32,
    pub block: BlockId,
    pub index: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "func {} block {} op {}", self.func, self.block, self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalOutcome<V> {
    /// `main` returned these values.
    Eval(Vec<V>),
    Trap(TrapKind, Location),
    /// A call to the assert intrinsic whose argument may be false.
    Assert(V, Location),
}

/// A request from the thread to its driver.
#[derive(Debug, Clone)]
pub enum Pending<V> {
    /// Which way does this condition go? Answer with [`Answer::Bool`].
    Select(V),
    /// Restrict the path to this condition. Answer with [`Answer::Unit`].
    Assume(V),
    /// Pick one concrete value for this expression. Answer with
    /// [`Answer::Value`] holding a constant.
    Concretize(V),
    /// Mint a new symbol of this type. Answer with [`Answer::Value`].
    Fresh(ValueType),
    /// Fuel checkpoint. No answer expected.
    Yield,
}

#[derive(Debug, Clone)]
pub enum Answer<V> {
    Bool(bool),
    Value(V),
    Unit,
}

#[derive(Debug, Clone)]
pub enum Event<V> {
    Done(EvalOutcome<V>),
    /// An assumption on constants was false.
    Pruned,
    Suspend(Pending<V>),
}

enum Interrupt<V> {
    Suspend(Pending<V>),
    Done(EvalOutcome<V>),
    Pruned,
    Finished(Vec<V>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LabelKind {
    Block,
    Loop,
    Func,
}

#[derive(Debug, Clone, Copy)]
struct Label {
    kind: LabelKind,
    body: BlockId,
    ret: (BlockId, usize),
    height: usize,
    arity: usize,
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    func: u32,
    locals_base: usize,
    label: usize,
}

/// Execution limits for one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Instructions a path may execute before it traps with fuel exhausted.
    pub fuel: u64,
    /// Suspend with [`Pending::Yield`] after this many instructions.
    pub yield_every: Option<u64>,
}

pub const DEFAULT_FUEL: u64 = 1_000_000;
pub const DEFAULT_YIELD_EVERY: u64 = 10_000;

impl Default for Limits {
    fn default() -> Self {
        Limits { fuel: DEFAULT_FUEL, yield_every: Some(DEFAULT_YIELD_EVERY) }
    }
}

/// The full state of one execution path. Cloning copies the stacks and
/// shares memory pages with the original.
#[derive(Debug, Clone)]
pub struct Thread<V: Value> {
    prog: Arc<Program>,
    stack: Vec<V>,
    locals: Vec<V>,
    frames: Vec<Frame>,
    labels: Vec<Label>,
    block: BlockId,
    ip: usize,
    globals: Vec<V>,
    memory: Option<Memory<V::Byte>>,
    symbols: Vec<ValueType>,
    limits: Limits,
    executed: u64,
    since_yield: u64,
    answers: Vec<Answer<V>>,
    cursor: usize,
}

type Step<V> = Result<(), Interrupt<V>>;

impl<V: Value> Thread<V> {
    /// A thread positioned at the start of `main`.
    pub fn new(prog: Arc<Program>, limits: Limits) -> Thread<V> {
        let inst = &prog.instance;
        let globals = inst.globals.iter().map(|&c| V::constant(c)).collect();
        let memory = inst.memory.map(|l| {
            let mut mem = Memory::new(l.min, l.max, V::zero_byte());
            for d in &inst.module.datas {
                let bytes: Vec<_> = d.bytes.iter().map(|&b| V::byte(b)).collect();
                mem.write_bytes(d.offset, &bytes);
            }
            mem
        });
        let mut t = Thread {
            prog: prog.clone(),
            stack: Vec::new(),
            locals: Vec::new(),
            frames: Vec::new(),
            labels: Vec::new(),
            block: 0,
            ip: 0,
            globals,
            memory,
            symbols: Vec::new(),
            limits,
            executed: 0,
            since_yield: 0,
            answers: Vec::new(),
            cursor: 0,
        };
        t.enter(prog.entry, Vec::new());
        t
    }

    pub fn program(&self) -> &Arc<Program> {
        &self.prog
    }

    /// Types of the symbols minted so far, by symbol number.
    pub fn symbols(&self) -> &[ValueType] {
        &self.symbols
    }

    /// Instructions completed so far.
    pub fn executed(&self) -> u64 {
        self.executed
    }

    pub fn memory(&self) -> Option<&Memory<V::Byte>> {
        self.memory.as_ref()
    }

    pub fn globals(&self) -> &[V] {
        &self.globals
    }

    /// Supply the answer to the last [`Pending`] request.
    pub fn answer(&mut self, a: Answer<V>) {
        self.answers.push(a);
    }

    pub fn run(&mut self) -> Event<V> {
        let prog = self.prog.clone();
        loop {
            let ops = &prog.blocks[self.block as usize];
            if self.ip == ops.len() {
                if let Some(results) = self.exit(self.labels.len() - 1) {
                    return Event::Done(EvalOutcome::Eval(results));
                }
                continue;
            }
            if self.executed >= self.limits.fuel {
                return Event::Done(EvalOutcome::Trap(TrapKind::FuelExhausted, self.location()));
            }
            self.cursor = 0;
            match self.exec(&ops[self.ip]) {
                Ok(()) => {
                    self.answers.clear();
                    self.executed += 1;
                    self.since_yield += 1;
                    if self.limits.yield_every.is_some_and(|n| self.since_yield >= n) {
                        self.since_yield = 0;
                        return Event::Suspend(Pending::Yield);
                    }
                }
                Err(Interrupt::Suspend(p)) => return Event::Suspend(p),
                Err(Interrupt::Done(o)) => return Event::Done(o),
                Err(Interrupt::Pruned) => return Event::Pruned,
                Err(Interrupt::Finished(results)) => return Event::Done(EvalOutcome::Eval(results)),
            }
        }
    }

    fn location(&self) -> Location {
        let func = self.frames.last().map_or(self.prog.entry, |f| f.func);
        Location { func, block: self.block, index: self.ip as u32 }
    }

    fn trap<T>(&self, kind: TrapKind) -> Result<T, Interrupt<V>> {
        Err(Interrupt::Done(EvalOutcome::Trap(kind, self.location())))
    }

    fn next_answer(&mut self, pending: impl FnOnce() -> Pending<V>) -> Result<Answer<V>, Interrupt<V>> {
        match self.answers.get(self.cursor) {
            Some(a) => {
                self.cursor += 1;
                Ok(a.clone())
            }
            None => Err(Interrupt::Suspend(pending())),
        }
    }

    fn decide(&mut self, cond: &V) -> Result<bool, Interrupt<V>> {
        if let Some(c) = cond.to_concrete() {
            return Ok(c.is_true());
        }
        match self.next_answer(|| Pending::Select(cond.clone()))? {
            Answer::Bool(b) => Ok(b),
            other => panic!("expected a branch answer, got {other:?}"),
        }
    }

    fn concretize(&mut self, v: &V) -> Result<Concrete, Interrupt<V>> {
        if let Some(c) = v.to_concrete() {
            return Ok(c);
        }
        match self.next_answer(|| Pending::Concretize(v.clone()))? {
            Answer::Value(c) => Ok(c.to_concrete().expect("concretization answers are constants")),
            other => panic!("expected a value answer, got {other:?}"),
        }
    }

    fn peek(&self, depth: usize) -> &V {
        &self.stack[self.stack.len() - 1 - depth]
    }

    fn pop(&mut self) -> V {
        self.stack.pop().expect("operand stack underflow in validated code")
    }

    fn memory_mut(&mut self) -> &mut Memory<V::Byte> {
        self.memory.as_mut().expect("memory access in a module without memory")
    }

    /// Push a frame for function `f`, taking `args` as its parameters.
    fn enter(&mut self, f: u32, args: Vec<V>) {
        let code = self.prog.func(f).clone();
        let ret = (self.block, self.ip + 1);
        self.frames.push(Frame { func: f, locals_base: self.locals.len(), label: self.labels.len() });
        self.locals.extend(args);
        self.locals.extend(code.locals.iter().map(|&t| V::constant(Concrete::zero(t))));
        self.labels.push(Label {
            kind: LabelKind::Func,
            body: code.body,
            ret,
            height: self.stack.len(),
            arity: code.results,
        });
        self.block = code.body;
        self.ip = 0;
    }

    /// Leave label `li` normally. Returns `main`'s results when the last
    /// frame is popped.
    fn exit(&mut self, li: usize) -> Option<Vec<V>> {
        let label = self.labels[li];
        let results = self.stack.split_off(self.stack.len() - label.arity);
        self.stack.truncate(label.height);
        self.labels.truncate(li);
        if label.kind == LabelKind::Func {
            let frame = self.frames.pop().expect("function label without a frame");
            self.locals.truncate(frame.locals_base);
            if self.frames.is_empty() {
                return Some(results);
            }
        }
        self.stack.extend(results);
        (self.block, self.ip) = label.ret;
        None
    }

    fn branch(&mut self, depth: u32) -> Step<V> {
        let li = self.labels.len() - 1 - depth as usize;
        let label = self.labels[li];
        if label.kind == LabelKind::Loop {
            self.stack.truncate(label.height);
            self.labels.truncate(li + 1);
            self.block = label.body;
            self.ip = 0;
            return Ok(());
        }
        match self.exit(li) {
            Some(results) => Err(Interrupt::Finished(results)),
            None => Ok(()),
        }
    }

    fn open(&mut self, kind: LabelKind, body: BlockId, arity: u32) {
        self.labels.push(Label {
            kind,
            body,
            ret: (self.block, self.ip + 1),
            height: self.stack.len(),
            arity: arity as usize,
        });
        self.block = body;
        self.ip = 0;
    }

    fn local(&self, k: u32) -> usize {
        self.frames.last().expect("no active frame").locals_base + k as usize
    }

    fn exec(&mut self, op: &Op) -> Step<V> {
        match op {
            Op::Const(c) => self.stack.push(V::constant(*c)),
            Op::Binop(ty, op) => {
                let (a, b) = (self.peek(1).clone(), self.peek(0).clone());
                if op.may_trap() {
                    self.check_division(*ty, *op, &a, &b)?;
                }
                self.stack.truncate(self.stack.len() - 2);
                self.stack.push(V::binop(*op, &a, &b));
            }
            Op::Relop(op) => {
                let b = self.pop();
                let a = self.pop();
                self.stack.push(V::relop(*op, &a, &b));
            }
            Op::Eqz => {
                let a = self.pop();
                self.stack.push(V::eqz(&a));
            }
            Op::Convert(op) => {
                let a = self.pop();
                self.stack.push(V::convert(*op, &a));
            }
            Op::Drop => {
                self.pop();
            }
            Op::Select => {
                let c = self.peek(0).clone();
                let take_first = self.decide(&c)?;
                self.pop();
                let b = self.pop();
                let a = self.pop();
                self.stack.push(if take_first { a } else { b });
            }
            Op::Nop => {}
            Op::Unreachable => return self.trap(TrapKind::Unreachable),
            Op::LocalGet(k) => {
                let v = self.locals[self.local(*k)].clone();
                self.stack.push(v);
            }
            Op::LocalSet(k) => {
                let i = self.local(*k);
                self.locals[i] = self.pop();
            }
            Op::LocalTee(k) => {
                let i = self.local(*k);
                self.locals[i] = self.peek(0).clone();
            }
            Op::GlobalGet(k) => self.stack.push(self.globals[*k as usize].clone()),
            Op::GlobalSet(k) => self.globals[*k as usize] = self.pop(),
            Op::Load { ty, width, signed, offset } => {
                let addr = self.peek(0).clone();
                let at = self.effective_address(&addr, *offset, *width)?;
                let bytes = self.memory_mut().read_bytes(at, *width);
                self.pop();
                self.stack.push(V::from_le_bytes(&bytes, *ty, *signed));
            }
            Op::Store { width, offset } => {
                let addr = self.peek(1).clone();
                let at = self.effective_address(&addr, *offset, *width)?;
                let v = self.pop();
                self.pop();
                let bytes = v.to_le_bytes(*width as usize);
                self.memory_mut().write_bytes(at, &bytes);
            }
            Op::MemorySize => {
                let pages = self.memory_mut().pages();
                self.stack.push(V::i32(pages as i32));
            }
            Op::MemoryGrow => {
                let delta = self.peek(0).clone();
                let delta = self.concretize(&delta)?.bits() as u32;
                self.pop();
                let old = self.memory_mut().grow(delta).map_or(-1, |p| p as i32);
                self.stack.push(V::i32(old));
            }
            Op::Block { body, arity } => {
                self.open(LabelKind::Block, *body, *arity);
                return Ok(());
            }
            Op::Loop { body, arity } => {
                self.open(LabelKind::Loop, *body, *arity);
                return Ok(());
            }
            Op::If { then, els, arity } => {
                let c = self.peek(0).clone();
                let taken = self.decide(&c)?;
                self.pop();
                self.open(LabelKind::Block, if taken { *then } else { *els }, *arity);
                return Ok(());
            }
            Op::Br(d) => return self.branch(*d),
            Op::BrIf(d) => {
                let c = self.peek(0).clone();
                let taken = self.decide(&c)?;
                self.pop();
                if taken {
                    return self.branch(*d);
                }
            }
            Op::Return => {
                let depth = self.labels.len() - 1 - self.frames.last().expect("no active frame").label;
                return self.branch(depth as u32);
            }
            Op::Call(f) => return self.invoke(*f, 0),
            Op::CallIndirect(ty) => return self.call_indirect(ty),
        }
        self.ip += 1;
        Ok(())
    }

    fn check_division(&mut self, ty: ValueType, op: BinOp, a: &V, b: &V) -> Step<V> {
        let zero = V::constant(Concrete::zero(ty));
        if self.decide(&V::relop(RelOp::Eq, b, &zero))? {
            return self.trap(TrapKind::IntegerDivideByZero);
        }
        if op == BinOp::DivS {
            let (min, minus_one) = match ty {
                ValueType::I32 => (V::i32(i32::MIN), V::i32(-1)),
                ValueType::I64 => (V::i64(i64::MIN), V::i64(-1)),
            };
            let overflow = V::binop(BinOp::And, &V::relop(RelOp::Eq, a, &min), &V::relop(RelOp::Eq, b, &minus_one));
            if self.decide(&overflow)? {
                return self.trap(TrapKind::IntegerOverflow);
            }
        }
        Ok(())
    }

    fn effective_address(&mut self, addr: &V, offset: u32, width: u32) -> Result<u32, Interrupt<V>> {
        let size = self.memory.as_ref().expect("memory access in a module without memory").size();
        if !self.decide(&V::in_bounds(addr, offset, width, size))? {
            return self.trap(TrapKind::OutOfBoundsMemory);
        }
        let base = self.concretize(addr)?.bits();
        let at = base + offset as u64;
        if at + width as u64 > size {
            return self.trap(TrapKind::OutOfBoundsMemory);
        }
        Ok(at as u32)
    }

    fn call_indirect(&mut self, ty: &FuncType) -> Step<V> {
        let idx = self.peek(0).clone();
        let n = self.prog.instance.table.len() as u32;
        let slot = match idx.to_concrete() {
            Some(c) => c.bits() as u32,
            None if n == 0 => return self.trap(TrapKind::UndefinedTableElement),
            None => {
                let in_range = V::relop(RelOp::LtU, &idx, &V::i32(n as i32));
                if !self.decide(&in_range)? {
                    return self.trap(TrapKind::UndefinedTableElement);
                }
                let mut chosen = n - 1;
                for k in 0..n - 1 {
                    if self.decide(&V::relop(RelOp::Eq, &idx, &V::i32(k as i32)))? {
                        chosen = k;
                        break;
                    }
                }
                chosen
            }
        };
        let Some(Some(f)) = self.prog.instance.table.get(slot as usize).copied() else {
            return self.trap(TrapKind::UndefinedTableElement);
        };
        if self.prog.instance.module.func_type(f) != Some(ty) {
            return self.trap(TrapKind::IndirectCallTypeMismatch);
        }
        self.invoke(f, 1)
    }

    /// Call function `f`. Its arguments sit below `extra` operands that are
    /// dropped once all decisions are made.
    fn invoke(&mut self, f: u32, extra: usize) -> Step<V> {
        let Some(intrinsic) = self.prog.instance.intrinsic(f) else {
            let params = self.prog.func(f).params;
            self.stack.truncate(self.stack.len() - extra);
            let args = self.stack.split_off(self.stack.len() - params);
            self.enter(f, args);
            return Ok(());
        };
        match intrinsic {
            Intrinsic::I32Symbol | Intrinsic::I64Symbol => {
                let ty = if intrinsic == Intrinsic::I32Symbol { ValueType::I32 } else { ValueType::I64 };
                let v = match self.next_answer(|| Pending::Fresh(ty))? {
                    Answer::Value(v) => v,
                    other => panic!("expected a symbol, got {other:?}"),
                };
                self.stack.truncate(self.stack.len() - extra);
                self.symbols.push(ty);
                self.stack.push(v);
            }
            Intrinsic::Assume => {
                let c = self.peek(extra).clone();
                match c.to_concrete() {
                    Some(k) if !k.is_true() => return Err(Interrupt::Pruned),
                    Some(_) => {}
                    None => {
                        self.next_answer(|| Pending::Assume(c.clone()))?;
                    }
                }
                self.stack.truncate(self.stack.len() - extra - 1);
            }
            Intrinsic::Assert => {
                let c = self.peek(extra).clone();
                if !self.decide(&c)? {
                    return Err(Interrupt::Done(EvalOutcome::Assert(c, self.location())));
                }
                self.stack.truncate(self.stack.len() - extra - 1);
            }
        }
        self.ip += 1;
        Ok(())
    }
}
