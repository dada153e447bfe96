//! The WebAssembly text format, restricted to the integer subset the
//! engine executes: parsing, printing, validation and linking.

mod ast;
mod link;
mod parser;
mod print;
mod sexpr;
mod validate;

pub use ast::*;
pub use link::{link, Instance, Intrinsic, LinkError, Sig, INTRINSIC_MODULE};
pub use parser::parse_module;
pub use print::print_module;
pub use validate::{validate, ValidatedModule, ValidationError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown opcode `{0}`")]
    UnknownOpcode(String),
    #[error("unsupported feature \"{0}\"")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("validation error: {0}")]
    Validate(#[from] ValidationError),
    #[error("link error: {0}")]
    Link(#[from] LinkError),
    #[error("no exported function \"main\" without parameters")]
    NoMain,
}

/// Name of the entry point the engine runs.
pub const ENTRY: &str = "main";

/// Parse, validate and link `text`, and check that it has an entry point.
pub fn load(text: &str) -> Result<Instance, LoadError> {
    let inst = link(validate(parse_module(text)?)?)?;
    entry_point(&inst).ok_or(LoadError::NoMain)?;
    Ok(inst)
}

/// Index of the exported `main` function, if it takes no parameters.
pub fn entry_point(inst: &Instance) -> Option<u32> {
    let f = inst.module.exported_func(ENTRY)?;
    inst.module.func_type(f).filter(|t| t.params.is_empty()).map(|_| f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_requires_main() {
        assert_eq!(load("(module)").unwrap_err(), LoadError::NoMain);
        assert_eq!(load(r#"(module (func (export "main") (param i32)))"#).unwrap_err(), LoadError::NoMain);
        load(r#"(module (func (export "main")))"#).unwrap();
        let empty = parse_module("(module)").unwrap();
        assert!(empty.funcs.is_empty() && empty.memory.is_none());
    }
}
