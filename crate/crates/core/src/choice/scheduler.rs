use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use super::coroutine::{Coroutine, Status};
use super::queue::WorkQueue;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("worker {worker} failed: {message}")]
    Worker { worker: usize, message: String },
    #[error("{0}")]
    Internal(String),
}

/// Returned by the final-value callback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    /// Close the queue; remaining work is dropped.
    Halt,
}

#[derive(Debug, Default)]
struct Counters {
    steps: AtomicU64,
    choices: AtomicU64,
    yields: AtomicU64,
    finals: AtomicU64,
    stops: AtomicU64,
}

/// Read-only instrumentation of one scheduler run.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SchedulerStats {
    pub roots: u64,
    /// Coroutine steps run by workers.
    pub steps: u64,
    pub choices: u64,
    pub yields: u64,
    pub finals: u64,
    pub stops: u64,
    pub pushed: u64,
    pub closed: bool,
}

/// A work queue of coroutines plus the worker loop that drains it.
pub struct Scheduler<A, W> {
    queue: Arc<WorkQueue<Coroutine<A, W>>>,
    counters: Counters,
    roots: AtomicU64,
}

/// Handle that can stop a running scheduler from another thread.
#[derive(Clone)]
pub struct Closer<A, W>(Arc<WorkQueue<Coroutine<A, W>>>);

impl<A, W> Closer<A, W> {
    pub fn close(&self) {
        self.0.close()
    }
}

impl<A: Send + 'static, W: 'static> Default for Scheduler<A, W> {
    fn default() -> Self {
        Scheduler::new()
    }
}

impl<A: Send + 'static, W: 'static> Scheduler<A, W> {
    pub fn new() -> Scheduler<A, W> {
        Scheduler { queue: Arc::new(WorkQueue::new()), counters: Counters::default(), roots: AtomicU64::new(0) }
    }

    pub fn submit(&self, task: Coroutine<A, W>) {
        self.roots.fetch_add(1, Ordering::Relaxed);
        self.queue.push(task);
    }

    pub fn closer(&self) -> Closer<A, W> {
        Closer(Arc::clone(&self.queue))
    }

    /// Run `workers` threads over the queue until it drains or is closed.
    /// `on_final` is invoked on the worker that produced each value and may
    /// therefore run concurrently.
    pub fn run<I, F>(&self, workers: usize, wls_init: I, on_final: F) -> Result<SchedulerStats, EngineError>
    where
        I: Fn(usize) -> W + Sync,
        F: Fn(A, &mut W) -> Flow + Sync,
    {
        assert!(workers >= 1, "at least one worker is required");
        let failure: Mutex<Option<EngineError>> = Mutex::new(None);
        thread::scope(|scope| {
            for id in 0..workers {
                let (wls_init, on_final, failure) = (&wls_init, &on_final, &failure);
                scope.spawn(move || {
                    let outcome = panic::catch_unwind(AssertUnwindSafe(|| {
                        let mut wls = wls_init(id);
                        self.work(&mut wls, on_final);
                    }));
                    if let Err(payload) = outcome {
                        self.queue.close();
                        let message = panic_message(payload.as_ref());
                        let mut slot = failure.lock().unwrap_or_else(|e| e.into_inner());
                        slot.get_or_insert(EngineError::Worker { worker: id, message });
                    }
                });
            }
        });
        if let Some(err) = failure.into_inner().unwrap_or_else(|e| e.into_inner()) {
            return Err(err);
        }
        Ok(self.stats())
    }

    fn work<F>(&self, wls: &mut W, on_final: &F)
    where
        F: Fn(A, &mut W) -> Flow,
    {
        self.queue.work_while(|task, push| {
            self.counters.steps.fetch_add(1, Ordering::Relaxed);
            let status = task.run(wls);
            self.handle(status, wls, push, on_final);
        });
    }

    fn handle<F>(&self, status: Status<A, W>, wls: &mut W, push: &dyn Fn(Coroutine<A, W>), on_final: &F)
    where
        F: Fn(A, &mut W) -> Flow,
    {
        // Left-then-right depth first, as an explicit stack.
        let mut stack = vec![status];
        while let Some(st) = stack.pop() {
            match st {
                Status::Stop => {
                    self.counters.stops.fetch_add(1, Ordering::Relaxed);
                }
                Status::Now(x) => {
                    self.counters.finals.fetch_add(1, Ordering::Relaxed);
                    if on_final(x, wls) == Flow::Halt {
                        self.queue.close();
                    }
                }
                Status::Yield(_prio, k) => {
                    self.counters.yields.fetch_add(1, Ordering::Relaxed);
                    push(k);
                }
                Status::Choice(a, b) => {
                    self.counters.choices.fetch_add(1, Ordering::Relaxed);
                    stack.push(*b);
                    stack.push(*a);
                }
            }
        }
    }

    pub fn stats(&self) -> SchedulerStats {
        let c = &self.counters;
        let roots = self.roots.load(Ordering::Relaxed);
        SchedulerStats {
            roots,
            steps: c.steps.load(Ordering::Relaxed),
            choices: c.choices.load(Ordering::Relaxed),
            yields: c.yields.load(Ordering::Relaxed),
            finals: c.finals.load(Ordering::Relaxed),
            stops: c.stops.load(Ordering::Relaxed),
            pushed: self.queue.counts().0.saturating_sub(roots),
            closed: self.queue.is_closed(),
        }
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

/// Run `roots` to exhaustion on `workers` threads, calling `on_final` on
/// every final value.
pub fn run_scheduler<A, W, I, F>(
    roots: Vec<Coroutine<A, W>>,
    workers: usize,
    wls_init: I,
    on_final: F,
) -> Result<SchedulerStats, EngineError>
where
    A: Send + 'static,
    W: 'static,
    I: Fn(usize) -> W + Sync,
    F: Fn(A, &mut W) -> Flow + Sync,
{
    let sched = Scheduler::new();
    for r in roots {
        sched.submit(r);
    }
    sched.run(workers, wls_init, on_final)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::coroutine::Priority;

    #[test]
    fn single_leaf_is_delivered_once() {
        let hits = AtomicU64::new(0);
        let stats = run_scheduler(vec![Coroutine::<u32, ()>::ret(1)], 4, |_| (), |x, _| {
            assert_eq!(x, 1);
            hits.fetch_add(1, Ordering::SeqCst);
            Flow::Continue
        })
        .unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 1);
        assert_eq!(stats.finals, 1);
    }

    #[test]
    fn worker_panic_is_reported() {
        let root: Coroutine<u32, ()> = Coroutine::new(|_| panic!("boom"));
        let err = run_scheduler(vec![root], 2, |_| (), |_, _| Flow::Continue).unwrap_err();
        assert!(err.to_string().contains("boom"));
    }

    #[test]
    fn halt_closes_the_queue() {
        fn tree(d: u32) -> Coroutine<u32, ()> {
            if d == 0 {
                return Coroutine::ret(1);
            }
            Coroutine::<(), ()>::yield_now(Priority::default())
                .bind(move |()| Coroutine::choose(tree(d - 1), tree(d - 1)))
        }
        let hits = AtomicU64::new(0);
        let stats = run_scheduler(vec![tree(8)], 1, |_| (), |_, _| {
            hits.fetch_add(1, Ordering::SeqCst);
            Flow::Halt
        })
        .unwrap();
        assert!(stats.closed);
        assert!(hits.load(Ordering::SeqCst) < 256);
    }
}
