//! Value realizations for the interpreter.
//!
//! [`Concrete`] is a plain two's-complement machine integer; [`SymExpr`] is
//! an immutable bitvector expression. Both implement [`Value`], the
//! interface the generic evaluator is written against.

pub mod bits;
mod concrete;
mod expr;
mod pc;

use std::fmt;

pub use concrete::{concrete_binop, concrete_relop, Concrete};
pub use expr::{Compiled, ExprRef, Node, SymExpr};
pub use pc::PathCondition;

pub(crate) use expr::symbols_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueType {
    I32,
    I64,
}

impl ValueType {
    pub fn bits(self) -> u8 {
        match self {
            ValueType::I32 => 32,
            ValueType::I64 => 64,
        }
    }

    pub fn bytes(self) -> u32 {
        self.bits() as u32 / 8
    }

    pub fn name(self) -> &'static str {
        match self {
            ValueType::I32 => "i32",
            ValueType::I64 => "i64",
        }
    }

    pub fn from_bits(bits: u8) -> Option<ValueType> {
        match bits {
            32 => Some(ValueType::I32),
            64 => Some(ValueType::I64),
            _ => None,
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    DivS,
    DivU,
    RemS,
    RemU,
    And,
    Or,
    Xor,
    Shl,
    ShrS,
    ShrU,
}

impl BinOp {
    pub const ALL: [BinOp; 13] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::DivS,
        BinOp::DivU,
        BinOp::RemS,
        BinOp::RemU,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::ShrS,
        BinOp::ShrU,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::DivS => "div_s",
            BinOp::DivU => "div_u",
            BinOp::RemS => "rem_s",
            BinOp::RemU => "rem_u",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::Shl => "shl",
            BinOp::ShrS => "shr_s",
            BinOp::ShrU => "shr_u",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.mnemonic() == s)
    }

    /// Division and remainder are the only operations that can trap.
    pub fn may_trap(self) -> bool {
        matches!(self, BinOp::DivS | BinOp::DivU | BinOp::RemS | BinOp::RemU)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelOp {
    Eq,
    Ne,
    LtS,
    LtU,
    GtS,
    GtU,
    LeS,
    LeU,
    GeS,
    GeU,
}

impl RelOp {
    pub const ALL: [RelOp; 10] = [
        RelOp::Eq,
        RelOp::Ne,
        RelOp::LtS,
        RelOp::LtU,
        RelOp::GtS,
        RelOp::GtU,
        RelOp::LeS,
        RelOp::LeU,
        RelOp::GeS,
        RelOp::GeU,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            RelOp::Eq => "eq",
            RelOp::Ne => "ne",
            RelOp::LtS => "lt_s",
            RelOp::LtU => "lt_u",
            RelOp::GtS => "gt_s",
            RelOp::GtU => "gt_u",
            RelOp::LeS => "le_s",
            RelOp::LeU => "le_u",
            RelOp::GeS => "ge_s",
            RelOp::GeU => "ge_u",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<RelOp> {
        RelOp::ALL.into_iter().find(|op| op.mnemonic() == s)
    }

    /// The relation that holds exactly when `self` does not.
    pub fn complement(self) -> RelOp {
        match self {
            RelOp::Eq => RelOp::Ne,
            RelOp::Ne => RelOp::Eq,
            RelOp::LtS => RelOp::GeS,
            RelOp::LtU => RelOp::GeU,
            RelOp::GtS => RelOp::LeS,
            RelOp::GtU => RelOp::LeU,
            RelOp::LeS => RelOp::GtS,
            RelOp::LeU => RelOp::GtU,
            RelOp::GeS => RelOp::LtS,
            RelOp::GeU => RelOp::LtU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CvtOp {
    WrapI64,
    ExtendI32S,
    ExtendI32U,
}

impl CvtOp {
    pub fn mnemonic(self) -> &'static str {
        match self {
            CvtOp::WrapI64 => "i32.wrap_i64",
            CvtOp::ExtendI32S => "i64.extend_i32_s",
            CvtOp::ExtendI32U => "i64.extend_i32_u",
        }
    }

    pub fn input(self) -> ValueType {
        match self {
            CvtOp::WrapI64 => ValueType::I64,
            _ => ValueType::I32,
        }
    }

    pub fn output(self) -> ValueType {
        match self {
            CvtOp::WrapI64 => ValueType::I32,
            _ => ValueType::I64,
        }
    }
}

/// The value interface the generic interpreter is parameterized over.
///
/// Booleans are `i32` values that are nonzero when true. `binop` is only
/// called once the interpreter has ruled out the trapping cases of
/// division and remainder.
pub trait Value: Clone + fmt::Debug + Send + Sync + 'static {
    /// One cell of linear memory.
    type Byte: Clone + fmt::Debug + Send + Sync + 'static;

    fn constant(c: Concrete) -> Self;
    /// The concrete value, when this value is (or folds to) a constant.
    fn to_concrete(&self) -> Option<Concrete>;
    fn binop(op: BinOp, lhs: &Self, rhs: &Self) -> Self;
    fn relop(op: RelOp, lhs: &Self, rhs: &Self) -> Self;
    fn eqz(v: &Self) -> Self;
    /// Boolean negation of a truthiness value.
    fn not(v: &Self) -> Self;
    fn convert(op: CvtOp, v: &Self) -> Self;

    fn zero_byte() -> Self::Byte;
    fn byte(b: u8) -> Self::Byte;
    /// Little-endian low `n` bytes.
    fn to_le_bytes(&self, n: usize) -> Vec<Self::Byte>;
    /// Reassemble little-endian bytes, extending to `ty`.
    fn from_le_bytes(bytes: &[Self::Byte], ty: ValueType, signed: bool) -> Self;

    fn i32(v: i32) -> Self {
        Self::constant(Concrete::I32(v))
    }

    fn i64(v: i64) -> Self {
        Self::constant(Concrete::I64(v))
    }

    /// `addr + offset + width <= size`, computed without wraparound.
    fn in_bounds(addr: &Self, offset: u32, width: u32, size: u64) -> Self {
        let wide = Self::convert(CvtOp::ExtendI32U, addr);
        let end = Self::binop(BinOp::Add, &wide, &Self::i64(offset as i64 + width as i64));
        Self::relop(RelOp::LeU, &end, &Self::i64(size as i64))
    }
}
