use std::fmt;

use super::ast::{FuncType, Limits};
use super::validate::ValidatedModule;
use crate::memory::PAGE_SIZE;
use crate::values::{Concrete, ValueType};

/// Import namespace of the symbolic intrinsics.
pub const INTRINSIC_MODULE: &str = "owi";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Intrinsic {
    I32Symbol,
    I64Symbol,
    Assume,
    Assert,
}

impl Intrinsic {
    pub const ALL: [Intrinsic; 4] = [Intrinsic::I32Symbol, Intrinsic::I64Symbol, Intrinsic::Assume, Intrinsic::Assert];

    pub fn item_name(self) -> &'static str {
        match self {
            Intrinsic::I32Symbol => "i32_symbol",
            Intrinsic::I64Symbol => "i64_symbol",
            Intrinsic::Assume => "assume",
            Intrinsic::Assert => "assert",
        }
    }

    pub fn signature(self) -> FuncType {
        use ValueType::*;
        match self {
            Intrinsic::I32Symbol => FuncType::new(&[], &[I32]),
            Intrinsic::I64Symbol => FuncType::new(&[], &[I64]),
            Intrinsic::Assume | Intrinsic::Assert => FuncType::new(&[I32], &[]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error("unknown import \"{module}\" \"{name}\"")]
    UnknownImport { module: String, name: String },
    #[error("import \"{module}\" \"{name}\" has type {found}, expected {expected}")]
    SignatureMismatch { module: String, name: String, expected: Sig, found: Sig },
    #[error("element segment at {offset} does not fit in a table of {size} entries")]
    ElemOutOfBounds { offset: u32, size: u32 },
    #[error("data segment at {offset} does not fit in a memory of {size} bytes")]
    DataOutOfBounds { offset: u32, size: u64 },
}

/// A function type in arrow notation, for messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sig(pub FuncType);

impl fmt::Display for Sig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |ts: &[ValueType]| ts.iter().map(|t| t.name()).collect::<Vec<_>>().join(" ");
        write!(f, "[{}] -> [{}]", list(&self.0.params), list(&self.0.results))
    }
}

/// An executable module: imports bound, globals and the table initialized.
/// Memory contents are materialized per execution from `memory` and the
/// module's data segments.
#[derive(Debug, Clone)]
pub struct Instance {
    pub module: ValidatedModule,
    /// One entry per imported function, in index order.
    pub intrinsics: Vec<Intrinsic>,
    pub globals: Vec<Concrete>,
    /// Function index per table slot; `None` for empty slots.
    pub table: Vec<Option<u32>>,
    pub memory: Option<Limits>,
}

impl Instance {
    pub fn memory_bytes(&self) -> u64 {
        self.memory.map_or(0, |m| m.min as u64 * PAGE_SIZE)
    }

    /// The intrinsic behind function `index`, if it is an import.
    pub fn intrinsic(&self, index: u32) -> Option<Intrinsic> {
        self.intrinsics.get(index as usize).copied()
    }

    pub fn uses_symbols(&self) -> bool {
        self.intrinsics.iter().any(|i| matches!(i, Intrinsic::I32Symbol | Intrinsic::I64Symbol))
    }
}

pub fn link(module: ValidatedModule) -> Result<Instance, LinkError> {
    let mut intrinsics = Vec::new();
    for imp in &module.imports {
        let found = Intrinsic::ALL
            .into_iter()
            .find(|i| imp.module == INTRINSIC_MODULE && imp.name == i.item_name())
            .ok_or_else(|| LinkError::UnknownImport { module: imp.module.clone(), name: imp.name.clone() })?;
        if imp.ty != found.signature() {
            return Err(LinkError::SignatureMismatch {
                module: imp.module.clone(),
                name: imp.name.clone(),
                expected: Sig(found.signature()),
                found: Sig(imp.ty.clone()),
            });
        }
        intrinsics.push(found);
    }
    let globals = module.globals.iter().map(|g| g.init).collect();
    let mut table = vec![None; module.table.map_or(0, |t| t.min as usize)];
    for e in &module.elems {
        let end = e.offset as u64 + e.funcs.len() as u64;
        if end > table.len() as u64 {
            return Err(LinkError::ElemOutOfBounds { offset: e.offset, size: table.len() as u32 });
        }
        for (k, f) in e.funcs.iter().enumerate() {
            table[e.offset as usize + k] = Some(*f);
        }
    }
    let memory = module.memory;
    let size = memory.map_or(0, |m| m.min as u64 * PAGE_SIZE);
    for d in &module.datas {
        if d.offset as u64 + d.bytes.len() as u64 > size {
            return Err(LinkError::DataOutOfBounds { offset: d.offset, size });
        }
    }
    Ok(Instance { module, intrinsics, globals, table, memory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wat::{parse_module, validate};

    fn inst(src: &str) -> Result<Instance, LinkError> {
        link(validate(parse_module(src).unwrap()).unwrap())
    }

    #[test]
    fn binds_intrinsics() {
        let i = inst(r#"(module (import "owi" "i32_symbol" (func (result i32))) (import "owi" "assert" (func (param i32))))"#)
            .unwrap();
        assert_eq!(i.intrinsics, vec![Intrinsic::I32Symbol, Intrinsic::Assert]);
        assert!(i.uses_symbols());
    }

    #[test]
    fn rejects_foreign_and_mistyped_imports() {
        let e = inst(r#"(module (import "env" "puts" (func (param i32))))"#).unwrap_err();
        assert_eq!(e.to_string(), "unknown import \"env\" \"puts\"");
        let e = inst(r#"(module (import "owi" "assert" (func (param i64))))"#).unwrap_err();
        assert_eq!(e.to_string(), "import \"owi\" \"assert\" has type [i64] -> [], expected [i32] -> []");
    }

    #[test]
    fn memory_table_and_segments() {
        let i = inst("(module (memory 1))").unwrap();
        assert_eq!(i.memory_bytes(), 65536);
        let i = inst("(module (func) (table 3 funcref) (elem (i32.const 1) 0 0))").unwrap();
        assert_eq!(i.table, vec![None, Some(0), Some(0)]);
        assert!(inst("(module (func) (table 1 funcref) (elem (i32.const 1) 0))").is_err());
        assert!(inst(r#"(module (memory 1) (data (i32.const 65535) "ab"))"#).is_err());
    }
}
