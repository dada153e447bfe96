use std::fmt;

/// Runtime faults that abort a single execution path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrapKind {
    Unreachable,
    OutOfBoundsMemory,
    IntegerDivideByZero,
    IntegerOverflow,
    IndirectCallTypeMismatch,
    UndefinedTableElement,
    /// The per-path instruction budget ran out. The path is incomplete,
    /// not buggy.
    FuelExhausted,
}

impl TrapKind {
    pub fn message(self) -> &'static str {
        match self {
            TrapKind::Unreachable => "unreachable",
            TrapKind::OutOfBoundsMemory => "memory heap buffer overflow",
            TrapKind::IntegerDivideByZero => "integer divide by zero",
            TrapKind::IntegerOverflow => "integer overflow",
            TrapKind::IndirectCallTypeMismatch => "indirect call type mismatch",
            TrapKind::UndefinedTableElement => "undefined element",
            TrapKind::FuelExhausted => "fuel exhausted",
        }
    }

    pub fn from_message(msg: &str) -> Option<TrapKind> {
        const ALL: [TrapKind; 7] = [
            TrapKind::Unreachable,
            TrapKind::OutOfBoundsMemory,
            TrapKind::IntegerDivideByZero,
            TrapKind::IntegerOverflow,
            TrapKind::IndirectCallTypeMismatch,
            TrapKind::UndefinedTableElement,
            TrapKind::FuelExhausted,
        ];
        ALL.into_iter().find(|k| k.message() == msg)
    }
}

impl fmt::Display for TrapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.message())
    }
}
