use crate::values::{BinOp, Concrete, CvtOp, RelOp, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FuncType {
    pub params: Vec<ValueType>,
    pub results: Vec<ValueType>,
}

impl FuncType {
    pub fn new(params: &[ValueType], results: &[ValueType]) -> FuncType {
        FuncType { params: params.to_vec(), results: results.to_vec() }
    }
}

/// Result type of a structured block. Only `[] -> []` and `[] -> [t]`.
pub type BlockType = Option<ValueType>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemArg {
    pub offset: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Const(Concrete),
    Binop(ValueType, BinOp),
    Relop(ValueType, RelOp),
    Eqz(ValueType),
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
    /// `width` is the access size in bytes.
    Load { ty: ValueType, width: u8, signed: bool, arg: MemArg },
    Store { ty: ValueType, width: u8, arg: MemArg },
    MemorySize,
    MemoryGrow,
    Block(BlockType, Vec<Instr>),
    Loop(BlockType, Vec<Instr>),
    If(BlockType, Vec<Instr>, Vec<Instr>),
    Br(u32),
    BrIf(u32),
    Return,
    Call(u32),
    CallIndirect(FuncType),
}

impl Instr {
    /// The mnemonic, without immediates.
    pub fn name(&self) -> String {
        match self {
            Instr::Const(c) => format!("{}.const", c.ty()),
            Instr::Binop(t, op) => format!("{t}.{}", op.mnemonic()),
            Instr::Relop(t, op) => format!("{t}.{}", op.mnemonic()),
            Instr::Eqz(t) => format!("{t}.eqz"),
            Instr::Convert(op) => op.mnemonic().to_string(),
            Instr::Drop => "drop".into(),
            Instr::Select => "select".into(),
            Instr::Nop => "nop".into(),
            Instr::Unreachable => "unreachable".into(),
            Instr::LocalGet(_) => "local.get".into(),
            Instr::LocalSet(_) => "local.set".into(),
            Instr::LocalTee(_) => "local.tee".into(),
            Instr::GlobalGet(_) => "global.get".into(),
            Instr::GlobalSet(_) => "global.set".into(),
            Instr::Load { ty, width, signed, .. } => load_name(*ty, *width, *signed),
            Instr::Store { ty, width, .. } => store_name(*ty, *width),
            Instr::MemorySize => "memory.size".into(),
            Instr::MemoryGrow => "memory.grow".into(),
            Instr::Block(..) => "block".into(),
            Instr::Loop(..) => "loop".into(),
            Instr::If(..) => "if".into(),
            Instr::Br(_) => "br".into(),
            Instr::BrIf(_) => "br_if".into(),
            Instr::Return => "return".into(),
            Instr::Call(_) => "call".into(),
            Instr::CallIndirect(_) => "call_indirect".into(),
        }
    }
}

pub(crate) fn load_name(ty: ValueType, width: u8, signed: bool) -> String {
    if width == ty.bytes() as u8 {
        format!("{ty}.load")
    } else {
        format!("{ty}.load{}_{}", width * 8, if signed { 's' } else { 'u' })
    }
}

pub(crate) fn store_name(ty: ValueType, width: u8) -> String {
    if width == ty.bytes() as u8 {
        format!("{ty}.store")
    } else {
        format!("{ty}.store{}", width * 8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Func {
    pub ty: FuncType,
    pub locals: Vec<ValueType>,
    pub body: Vec<Instr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Import {
    pub module: String,
    pub name: String,
    pub ty: FuncType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Global {
    pub ty: ValueType,
    pub mutable: bool,
    pub init: Concrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub min: u32,
    pub max: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Func,
    Memory,
    Table,
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Export {
    pub name: String,
    pub kind: ExportKind,
    pub index: u32,
}

/// Active element segment: `funcs` are written to the table from `offset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Elem {
    pub offset: u32,
    pub funcs: Vec<u32>,
}

/// Active data segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Data {
    pub offset: u32,
    pub bytes: Vec<u8>,
}

/// A module of the supported subset. Imported functions come first in the
/// function index space.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Module {
    pub types: Vec<FuncType>,
    pub imports: Vec<Import>,
    pub funcs: Vec<Func>,
    pub globals: Vec<Global>,
    pub memory: Option<Limits>,
    pub table: Option<Limits>,
    pub exports: Vec<Export>,
    pub elems: Vec<Elem>,
    pub datas: Vec<Data>,
}

impl Module {
    /// Number of functions, imported and defined.
    pub fn func_count(&self) -> usize {
        self.imports.len() + self.funcs.len()
    }

    pub fn func_type(&self, index: u32) -> Option<&FuncType> {
        let i = index as usize;
        if i < self.imports.len() {
            Some(&self.imports[i].ty)
        } else {
            self.funcs.get(i - self.imports.len()).map(|f| &f.ty)
        }
    }

    pub fn exported_func(&self, name: &str) -> Option<u32> {
        self.exports.iter().find(|e| e.kind == ExportKind::Func && e.name == name).map(|e| e.index)
    }
}
