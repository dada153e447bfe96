use std::sync::Arc;

use super::code::Program;
use super::machine::{Answer, EvalOutcome, Event, Limits, Pending, Thread};
use crate::solver::Model;
use crate::values::{Concrete, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("the program requests symbol {0} but no model was given")]
    NoModel(u32),
    #[error("the model has no value for symbol_{0}")]
    MissingSymbol(u32),
    #[error("symbol_{id} is {expected} in the program but {found} bits wide in the model")]
    WidthMismatch { id: u32, expected: ValueType, found: u8 },
}

/// How a concrete run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum ConcreteEnd {
    Outcome(EvalOutcome<Concrete>),
    /// An assumption did not hold, so the run is outside the explored space.
    Pruned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteRun {
    pub end: ConcreteEnd,
    /// Instructions executed.
    pub executed: u64,
}

/// Run `main` on machine integers. Symbols are read from `model`; without
/// a model, a program that requests a symbol is a configuration error.
///
/// This path never touches the scheduler or a solver.
pub fn run_concrete(prog: &Arc<Program>, fuel: u64, model: Option<&Model>) -> Result<ConcreteRun, ConfigError> {
    let mut thread: Thread<Concrete> = Thread::new(prog.clone(), Limits { fuel, yield_every: None });
    loop {
        let end = match thread.run() {
            Event::Done(o) => ConcreteEnd::Outcome(o),
            Event::Pruned => ConcreteEnd::Pruned,
            Event::Suspend(Pending::Fresh(ty)) => {
                let id = thread.symbols().len() as u32;
                let model = model.ok_or(ConfigError::NoModel(id))?;
                let (bits, width) = model.get(id).zip(model.width_of(id)).ok_or(ConfigError::MissingSymbol(id))?;
                if width != ty.bits() {
                    return Err(ConfigError::WidthMismatch { id, expected: ty, found: width });
                }
                thread.answer(Answer::Value(Concrete::from_bits(ty, bits)));
                continue;
            }
            Event::Suspend(Pending::Yield) => continue,
            Event::Suspend(p) => unreachable!("machine integers never need a decision: {p:?}"),
        };
        return Ok(ConcreteRun { end, executed: thread.executed() });
    }
}
