//! The interpreter.
//!
//! [`Thread`] is written once against [`crate::values::Value`] and never
//! decides anything it cannot compute: it suspends with a [`Pending`]
//! request instead. Two drivers answer those requests. [`run_concrete`]
//! runs machine integers, where every request but a fresh symbol is
//! impossible, and reads symbols from a replay model. [`run_symbolic`]
//! runs bitvector expressions, turns each undecided branch into a choice
//! of the coroutine monad, and checks feasibility with a solver.

mod code;
mod concrete;
mod machine;
mod symbolic;

pub use code::{BlockId, Program};
pub use concrete::{run_concrete, ConcreteEnd, ConcreteRun, ConfigError};
pub use machine::{Answer, EvalOutcome, Event, Limits, Location, Pending, Thread, DEFAULT_FUEL, DEFAULT_YIELD_EVERY};
pub use symbolic::{run_symbolic, Incomplete, Leaf, PathEnd, SymConfig, SymStats, Worker};
