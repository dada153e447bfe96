use std::collections::HashSet;
use std::ops::Deref;

use super::ast::*;
use crate::memory::MAX_PAGES;
use crate::values::{CvtOp, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    /// `offset` counts instructions of the body in textual order, from 0.
    #[error("function {func}, instruction {offset}: {message}")]
    Func { func: u32, offset: usize, message: String },
    #[error("{0}")]
    Module(String),
}

/// A module that passed [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedModule(Module);

impl ValidatedModule {
    pub fn into_inner(self) -> Module {
        self.0
    }
}

impl Deref for ValidatedModule {
    type Target = Module;
    fn deref(&self) -> &Module {
        &self.0
    }
}

type Result<T> = std::result::Result<T, ValidationError>;

pub fn validate(m: Module) -> Result<ValidatedModule> {
    check_module(&m)?;
    for (k, f) in m.funcs.iter().enumerate() {
        let index = (m.imports.len() + k) as u32;
        FuncChecker::new(&m, f, index).run()?;
    }
    Ok(ValidatedModule(m))
}

fn check_limits(l: &Limits, cap: u32, what: &str) -> Result<()> {
    if l.min > cap || l.max.is_some_and(|max| max > cap) {
        return Err(ValidationError::Module(format!("{what} size exceeds {cap}")));
    }
    if l.max.is_some_and(|max| max < l.min) {
        return Err(ValidationError::Module(format!("{what} maximum is below its minimum")));
    }
    Ok(())
}

fn check_module(m: &Module) -> Result<()> {
    let bad = |s: String| Err(ValidationError::Module(s));
    if let Some(mem) = &m.memory {
        check_limits(mem, MAX_PAGES as u32, "memory")?;
    }
    if let Some(t) = &m.table {
        check_limits(t, u32::MAX, "table")?;
    }
    for (k, g) in m.globals.iter().enumerate() {
        if g.init.ty() != g.ty {
            return bad(format!("global {k}: initializer has type {}, expected {}", g.init.ty(), g.ty));
        }
    }
    let mut names = HashSet::new();
    for e in &m.exports {
        if !names.insert(e.name.as_str()) {
            return bad(format!("duplicate export name \"{}\"", e.name));
        }
        let ok = match e.kind {
            ExportKind::Func => (e.index as usize) < m.func_count(),
            ExportKind::Global => (e.index as usize) < m.globals.len(),
            ExportKind::Memory => e.index == 0 && m.memory.is_some(),
            ExportKind::Table => e.index == 0 && m.table.is_some(),
        };
        if !ok {
            return bad(format!("export \"{}\" refers to a missing item", e.name));
        }
    }
    if !m.elems.is_empty() && m.table.is_none() {
        return bad("element segment without a table".into());
    }
    for e in &m.elems {
        if let Some(f) = e.funcs.iter().find(|f| **f as usize >= m.func_count()) {
            return bad(format!("element segment refers to missing function {f}"));
        }
    }
    if !m.datas.is_empty() && m.memory.is_none() {
        return bad("data segment without a memory".into());
    }
    Ok(())
}

struct Frame {
    /// Types a branch to this label carries.
    label: Vec<ValueType>,
    /// Types left on the stack when the block ends.
    end: Vec<ValueType>,
    height: usize,
    unreachable: bool,
}

struct FuncChecker<'a> {
    m: &'a Module,
    f: &'a Func,
    index: u32,
    locals: Vec<ValueType>,
    stack: Vec<ValueType>,
    frames: Vec<Frame>,
    /// Position of the instruction being checked, and of the next one.
    offset: usize,
    next: usize,
}

impl<'a> FuncChecker<'a> {
    fn new(m: &'a Module, f: &'a Func, index: u32) -> Self {
        let mut locals = f.ty.params.clone();
        locals.extend_from_slice(&f.locals);
        FuncChecker { m, f, index, locals, stack: Vec::new(), frames: Vec::new(), offset: 0, next: 0 }
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(ValidationError::Func { func: self.index, offset: self.offset, message: message.into() })
    }

    fn run(mut self) -> Result<()> {
        let results = self.f.ty.results.clone();
        self.frames.push(Frame { label: results.clone(), end: results, height: 0, unreachable: false });
        self.seq(&self.f.body)?;
        self.end_frame()?;
        Ok(())
    }

    fn push(&mut self, t: ValueType) {
        self.stack.push(t);
    }

    /// Pop one operand; `None` stands for the polymorphic bottom of an
    /// unreachable stack.
    fn pop(&mut self) -> Result<Option<ValueType>> {
        let frame = self.frames.last().unwrap();
        if self.stack.len() == frame.height {
            if frame.unreachable {
                return Ok(None);
            }
            return self.fail("stack underflow");
        }
        Ok(self.stack.pop())
    }

    fn pop_expect(&mut self, want: ValueType) -> Result<()> {
        match self.pop()? {
            Some(t) if t != want => self.fail(format!("type mismatch: expected {want}, found {t}")),
            _ => Ok(()),
        }
    }

    fn pop_all(&mut self, ts: &[ValueType]) -> Result<()> {
        for t in ts.iter().rev() {
            self.pop_expect(*t)?;
        }
        Ok(())
    }

    fn set_unreachable(&mut self) {
        let frame = self.frames.last_mut().unwrap();
        self.stack.truncate(frame.height);
        frame.unreachable = true;
    }

    fn end_frame(&mut self) -> Result<Vec<ValueType>> {
        let end = self.frames.last().unwrap().end.clone();
        self.pop_all(&end)?;
        let frame = self.frames.last().unwrap();
        if self.stack.len() != frame.height {
            return self.fail(format!("{} extra value(s) left at the end of a block", self.stack.len() - frame.height));
        }
        self.frames.pop();
        Ok(end)
    }

    fn block(&mut self, bt: &BlockType, body: &[Instr], is_loop: bool) -> Result<()> {
        let end: Vec<ValueType> = bt.iter().copied().collect();
        let label = if is_loop { Vec::new() } else { end.clone() };
        self.frames.push(Frame { label, end, height: self.stack.len(), unreachable: false });
        self.seq(body)?;
        let results = self.end_frame()?;
        self.stack.extend(results);
        Ok(())
    }

    fn label_types(&self, depth: u32) -> Result<Vec<ValueType>> {
        let n = self.frames.len();
        if depth as usize >= n {
            return self.fail(format!("branch depth {depth} out of range (at most {})", n - 1));
        }
        Ok(self.frames[n - 1 - depth as usize].label.clone())
    }

    fn local(&self, k: u32) -> Result<ValueType> {
        match self.locals.get(k as usize) {
            Some(t) => Ok(*t),
            None => self.fail(format!("unknown local {k}")),
        }
    }

    fn global(&self, k: u32) -> Result<&'a Global> {
        match self.m.globals.get(k as usize) {
            Some(g) => Ok(g),
            None => self.fail(format!("unknown global {k}")),
        }
    }

    fn need_memory(&self) -> Result<()> {
        if self.m.memory.is_none() {
            return self.fail("memory instruction without a memory");
        }
        Ok(())
    }

    fn seq(&mut self, code: &[Instr]) -> Result<()> {
        for i in code {
            self.instr(i)?;
        }
        Ok(())
    }

    fn instr(&mut self, i: &Instr) -> Result<()> {
        use ValueType::*;
        self.offset = self.next;
        self.next += 1;
        match i {
            Instr::Const(c) => self.push(c.ty()),
            Instr::Binop(t, _) | Instr::Relop(t, _) => {
                self.pop_expect(*t)?;
                self.pop_expect(*t)?;
                self.push(if matches!(i, Instr::Binop(..)) { *t } else { I32 });
            }
            Instr::Eqz(t) => {
                self.pop_expect(*t)?;
                self.push(I32);
            }
            Instr::Convert(op) => {
                self.pop_expect(op.input())?;
                self.push(op.output());
                debug_assert!(matches!(op, CvtOp::WrapI64 | CvtOp::ExtendI32S | CvtOp::ExtendI32U));
            }
            Instr::Drop => {
                self.pop()?;
            }
            Instr::Select => {
                self.pop_expect(I32)?;
                let b = self.pop()?;
                let a = self.pop()?;
                match (a, b) {
                    (Some(x), Some(y)) if x != y => return self.fail(format!("select operands differ: {x} and {y}")),
                    (Some(t), _) | (_, Some(t)) => self.push(t),
                    // Both operands come from an unreachable stack; any
                    // type will do as nothing can observe it.
                    (None, None) => {}
                }
            }
            Instr::Nop => {}
            Instr::Unreachable => self.set_unreachable(),
            Instr::LocalGet(k) => {
                let t = self.local(*k)?;
                self.push(t);
            }
            Instr::LocalSet(k) => {
                let t = self.local(*k)?;
                self.pop_expect(t)?;
            }
            Instr::LocalTee(k) => {
                let t = self.local(*k)?;
                self.pop_expect(t)?;
                self.push(t);
            }
            Instr::GlobalGet(k) => {
                let t = self.global(*k)?.ty;
                self.push(t);
            }
            Instr::GlobalSet(k) => {
                let g = self.global(*k)?;
                if !g.mutable {
                    return self.fail(format!("global {k} is immutable"));
                }
                self.pop_expect(g.ty)?;
            }
            Instr::Load { ty, .. } => {
                self.need_memory()?;
                self.pop_expect(I32)?;
                self.push(*ty);
            }
            Instr::Store { ty, .. } => {
                self.need_memory()?;
                self.pop_expect(*ty)?;
                self.pop_expect(I32)?;
            }
            Instr::MemorySize => {
                self.need_memory()?;
                self.push(I32);
            }
            Instr::MemoryGrow => {
                self.need_memory()?;
                self.pop_expect(I32)?;
                self.push(I32);
            }
            Instr::Block(bt, body) => self.block(bt, body, false)?,
            Instr::Loop(bt, body) => self.block(bt, body, true)?,
            Instr::If(bt, then, els) => {
                self.pop_expect(I32)?;
                let height = self.stack.len();
                self.block(bt, then, false)?;
                if bt.is_some() || !els.is_empty() {
                    let results: Vec<ValueType> = bt.iter().copied().collect();
                    self.stack.truncate(height);
                    if els.is_empty() {
                        return self.fail("`if` with a result needs an `else` arm");
                    }
                    self.block(bt, els, false)?;
                    debug_assert_eq!(self.stack.len(), height + results.len());
                }
            }
            Instr::Br(d) => {
                let ts = self.label_types(*d)?;
                self.pop_all(&ts)?;
                self.set_unreachable();
            }
            Instr::BrIf(d) => {
                let ts = self.label_types(*d)?;
                self.pop_expect(I32)?;
                self.pop_all(&ts)?;
                self.stack.extend(ts);
            }
            Instr::Return => {
                let ts = self.f.ty.results.clone();
                self.pop_all(&ts)?;
                self.set_unreachable();
            }
            Instr::Call(k) => {
                let Some(ty) = self.m.func_type(*k) else {
                    return self.fail(format!("call to unknown function {k}"));
                };
                let ty = ty.clone();
                self.pop_all(&ty.params)?;
                self.stack.extend(ty.results);
            }
            Instr::CallIndirect(ty) => {
                if self.m.table.is_none() {
                    return self.fail("call_indirect without a table");
                }
                self.pop_expect(I32)?;
                self.pop_all(&ty.params)?;
                self.stack.extend(ty.results.iter().copied());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wat::parse_module;

    fn check(src: &str) -> Result<ValidatedModule> {
        validate(parse_module(src).unwrap())
    }

    #[test]
    fn underflow_and_depth() {
        let e = check("(module (func i32.add))").unwrap_err();
        assert!(e.to_string().contains("stack underflow"), "{e}");
        let e = check("(module (func block br 3 end))").unwrap_err();
        assert!(e.to_string().contains("out of range"), "{e}");
    }

    #[test]
    fn type_errors_name_both_types() {
        let e = check("(module (func (result i32) (i32.add (i32.const 1) (i64.const 2))))").unwrap_err();
        assert_eq!(
            e,
            ValidationError::Func { func: 0, offset: 2, message: "type mismatch: expected i32, found i64".into() }
        );
    }

    #[test]
    fn unreachable_code_is_polymorphic() {
        check("(module (func (result i32) unreachable i32.add))").unwrap();
        check("(module (func (result i64) (return (i64.const 1)) drop drop))").unwrap();
        check("(module (func (result i32) unreachable (i64.const 1)))").unwrap_err();
        check("(module (func (result i32) block (result i32) (br 0 (i32.const 1)) end))").unwrap();
    }

    #[test]
    fn module_level_rules() {
        assert!(check("(module (global i32 (i64.const 0)))").is_err());
        assert!(check("(module (global i32 (i32.const 0)) (func (global.set 0 (i32.const 1))))").is_err());
        assert!(check("(module (func (drop (i32.load (i32.const 0)))))").is_err());
        assert!(check(r#"(module (func) (export "a" (func 0)) (export "a" (func 0)))"#).is_err());
        assert!(check("(module (memory 2 1))").is_err());
    }
}
