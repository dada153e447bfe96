//! The forkable cooperating coroutine monad and its multi-worker scheduler.
//!
//! A [`Coroutine`] is a description of a computation that runs in steps
//! against worker-local storage. Each step ends in a [`Status`]: a final
//! value, a yield back to the scheduler, a binary choice, or a stop. The
//! [`Scheduler`] keeps a pledged FIFO of suspended coroutines and drains it
//! with any number of worker threads.

mod coroutine;
mod queue;
mod scheduler;

pub use coroutine::{run_sequential, steps_run_on_this_thread, Coroutine, Priority, Status};
pub use queue::WorkQueue;
pub use scheduler::{run_scheduler, Closer, EngineError, Flow, Scheduler, SchedulerStats};
