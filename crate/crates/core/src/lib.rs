//! Parallel symbolic execution for a core integer subset of WebAssembly.
//!
//! One interpreter ([`interp::Thread`]) is written once against a value
//! realization ([`values::Value`]) and suspends whenever it needs a choice
//! made. Driving it with concrete machine integers gives an ordinary
//! reference interpreter; driving it with symbolic bitvector expressions
//! through the coroutine monad of [`choice`] gives a path explorer that
//! runs on any number of worker threads, asks a [`solver`] backend about
//! branch feasibility, and reports traps and assertion failures together
//! with concrete counterexample models.
//!
//! The usual entry points are [`wat::load`] followed by
//! [`interp::run_concrete`] or [`interp::run_symbolic`], or the
//! [`report`] helpers that the `wasym` command line tool is built on.

pub mod choice;
pub mod interp;
pub mod memory;
pub mod report;
pub mod solver;
pub mod trap;
pub mod values;
pub mod wat;

pub use trap::TrapKind;
pub use values::{Concrete, SymExpr, ValueType};
