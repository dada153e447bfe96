//! Lowering of the nested instruction tree into a table of flat blocks.
//!
//! Structured instructions refer to their bodies by [`BlockId`], so the
//! interpreter's position is a plain `(block, index)` pair that can be
//! saved in labels and copied into forked threads.

use std::sync::Arc;

use crate::values::{BinOp, Concrete, CvtOp, RelOp, ValueType};
use crate::wat::{entry_point, FuncType, Instance, Instr};

pub type BlockId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Const(Concrete),
    Binop(ValueType, BinOp),
    Relop(RelOp),
    Eqz,
    Convert(CvtOp),
    Drop,
    Select,
    Nop,
    Unreachable,
    LocalGet(u32),
    LocalSet(u32),
    LocalTee(u32),
    GlobalGet(u32),
    GlobalSet(u32),
    Load { ty: ValueType, width: u32, signed: bool, offset: u32 },
    Store { width: u32, offset: u32 },
    MemorySize,
    MemoryGrow,
    /// `arity` is the number of results left when the block ends.
    Block { body: BlockId, arity: u32 },
    Loop { body: BlockId, arity: u32 },
    If { then: BlockId, els: BlockId, arity: u32 },
    Br(u32),
    BrIf(u32),
    Return,
    Call(u32),
    CallIndirect(FuncType),
}

#[derive(Debug, Clone)]
pub struct FuncCode {
    pub body: BlockId,
    pub params: usize,
    pub locals: Vec<ValueType>,
    pub results: usize,
}

/// A linked module ready to execute.
#[derive(Debug)]
pub struct Program {
    pub instance: Instance,
    pub(crate) blocks: Vec<Vec<Op>>,
    /// Defined functions, indexed from the first non-imported function.
    pub(crate) funcs: Vec<FuncCode>,
    pub(crate) entry: u32,
}

impl Program {
    /// Lower `instance`. Returns `None` when it has no `main` entry point.
    pub fn new(instance: Instance) -> Option<Arc<Program>> {
        let entry = entry_point(&instance)?;
        let mut blocks = Vec::new();
        let funcs = instance
            .module
            .funcs
            .iter()
            .map(|f| FuncCode {
                body: lower(&f.body, &mut blocks),
                params: f.ty.params.len(),
                locals: f.locals.clone(),
                results: f.ty.results.len(),
            })
            .collect();
        Some(Arc::new(Program { instance, blocks, funcs, entry }))
    }

    pub fn imported_count(&self) -> u32 {
        self.instance.intrinsics.len() as u32
    }

    pub(crate) fn func(&self, index: u32) -> &FuncCode {
        &self.funcs[(index - self.imported_count()) as usize]
    }

    /// Total number of lowered operations.
    pub fn op_count(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }
}

fn lower(code: &[Instr], blocks: &mut Vec<Vec<Op>>) -> BlockId {
    let id = blocks.len() as BlockId;
    blocks.push(Vec::new());
    let mut ops = Vec::with_capacity(code.len());
    for i in code {
        let op = match i {
            Instr::Const(c) => Op::Const(*c),
            Instr::Binop(t, op) => Op::Binop(*t, *op),
            Instr::Relop(_, op) => Op::Relop(*op),
            Instr::Eqz(_) => Op::Eqz,
            Instr::Convert(op) => Op::Convert(*op),
            Instr::Drop => Op::Drop,
            Instr::Select => Op::Select,
            Instr::Nop => Op::Nop,
            Instr::Unreachable => Op::Unreachable,
            Instr::LocalGet(k) => Op::LocalGet(*k),
            Instr::LocalSet(k) => Op::LocalSet(*k),
            Instr::LocalTee(k) => Op::LocalTee(*k),
            Instr::GlobalGet(k) => Op::GlobalGet(*k),
            Instr::GlobalSet(k) => Op::GlobalSet(*k),
            Instr::Load { ty, width, signed, arg } => {
                Op::Load { ty: *ty, width: *width as u32, signed: *signed, offset: arg.offset }
            }
            Instr::Store { width, arg, .. } => Op::Store { width: *width as u32, offset: arg.offset },
            Instr::MemorySize => Op::MemorySize,
            Instr::MemoryGrow => Op::MemoryGrow,
            Instr::Block(bt, body) => Op::Block { body: lower(body, blocks), arity: bt.is_some() as u32 },
            Instr::Loop(bt, body) => Op::Loop { body: lower(body, blocks), arity: bt.is_some() as u32 },
            Instr::If(bt, then, els) => {
                Op::If { then: lower(then, blocks), els: lower(els, blocks), arity: bt.is_some() as u32 }
            }
            Instr::Br(d) => Op::Br(*d),
            Instr::BrIf(d) => Op::BrIf(*d),
            Instr::Return => Op::Return,
            Instr::Call(f) => Op::Call(*f),
            Instr::CallIndirect(t) => Op::CallIndirect(t.clone()),
        };
        ops.push(op);
    }
    blocks[id as usize] = ops;
    id
}
