use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

/// Scheduling priority carried by yields. Only the default value is used;
/// the queue is FIFO and ignores it.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Priority(pub u32);

/// One step of a coroutine.
pub enum Status<A, W> {
    /// Final value.
    Now(A),
    /// Suspended: the continuation goes back to the scheduler.
    Yield(Priority, Coroutine<A, W>),
    /// Both sides must be handled.
    Choice(Box<Status<A, W>>, Box<Status<A, W>>),
    /// Pruned without a value.
    Stop,
}

impl<A: fmt::Debug, W> fmt::Debug for Status<A, W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Now(x) => f.debug_tuple("Now").field(x).finish(),
            Status::Yield(p, _) => f.debug_tuple("Yield").field(p).finish(),
            Status::Choice(a, b) => f.debug_tuple("Choice").field(a).field(b).finish(),
            Status::Stop => f.write_str("Stop"),
        }
    }
}

type StepFn<A, W> = dyn Fn(&mut W) -> Status<A, W> + Send + Sync;

/// A deferred computation step, parameterized by the worker-local storage
/// `W` it reads. Running a coroutine does not consume it.
pub struct Coroutine<A, W>(Arc<StepFn<A, W>>);

impl<A, W> Clone for Coroutine<A, W> {
    fn clone(&self) -> Self {
        Coroutine(Arc::clone(&self.0))
    }
}

thread_local! {
    static STEPS_RUN: Cell<u64> = const { Cell::new(0) };
}

/// Coroutine steps executed on the calling thread so far.
pub fn steps_run_on_this_thread() -> u64 {
    STEPS_RUN.with(|c| c.get())
}

impl<A: Send + 'static, W: 'static> Coroutine<A, W> {
    pub fn new(step: impl Fn(&mut W) -> Status<A, W> + Send + Sync + 'static) -> Self {
        Coroutine(Arc::new(step))
    }

    /// Execute one step.
    pub fn run(&self, wls: &mut W) -> Status<A, W> {
        STEPS_RUN.with(|c| c.set(c.get() + 1));
        (self.0)(wls)
    }

    pub fn ret(x: A) -> Self
    where
        A: Clone + Sync,
    {
        Coroutine::new(move |_| Status::Now(x.clone()))
    }

    pub fn stop() -> Self {
        Coroutine::new(|_| Status::Stop)
    }

    pub fn choose(a: Coroutine<A, W>, b: Coroutine<A, W>) -> Self {
        Coroutine::new(move |wls| Status::Choice(Box::new(a.run(wls)), Box::new(b.run(wls))))
    }

    pub fn bind<B: Send + 'static>(
        self,
        f: impl Fn(A) -> Coroutine<B, W> + Send + Sync + 'static,
    ) -> Coroutine<B, W> {
        bind_shared(self, Arc::new(f))
    }

    pub fn map<B: Send + 'static>(self, f: impl Fn(A) -> B + Send + Sync + 'static) -> Coroutine<B, W> {
        map_shared(self, Arc::new(f))
    }
}

fn map_shared<A: Send + 'static, B: Send + 'static, W: 'static>(
    m: Coroutine<A, W>,
    f: Arc<dyn Fn(A) -> B + Send + Sync>,
) -> Coroutine<B, W> {
    Coroutine::new(move |wls| map_status(m.run(wls), &f))
}

fn map_status<A: Send + 'static, B: Send + 'static, W: 'static>(
    status: Status<A, W>,
    f: &Arc<dyn Fn(A) -> B + Send + Sync>,
) -> Status<B, W> {
    match status {
        Status::Now(x) => Status::Now(f(x)),
        Status::Yield(prio, k) => Status::Yield(prio, map_shared(k, Arc::clone(f))),
        Status::Choice(a, b) => Status::Choice(Box::new(map_status(*a, f)), Box::new(map_status(*b, f))),
        Status::Stop => Status::Stop,
    }
}

impl<W: 'static> Coroutine<(), W> {
    pub fn yield_now(prio: Priority) -> Self {
        Coroutine::new(move |_| Status::Yield(prio, Coroutine::new(|_| Status::Now(()))))
    }
}

impl<W: 'static> Coroutine<bool, W> {
    /// Both continuations re-enter the queue: `false` for the parent,
    /// `true` for the child.
    pub fn fork(parent: Priority, child: Priority) -> Self {
        Coroutine::new(move |_| {
            Status::Choice(
                Box::new(Status::Yield(parent, Coroutine::new(|_| Status::Now(false)))),
                Box::new(Status::Yield(child, Coroutine::new(|_| Status::Now(true)))),
            )
        })
    }
}

impl<W: Clone + Send + Sync + 'static> Coroutine<W, W> {
    /// Read the running worker's storage.
    pub fn get_wls() -> Self {
        Coroutine::new(|wls: &mut W| Status::Now(wls.clone()))
    }
}

type BindFn<A, B, W> = dyn Fn(A) -> Coroutine<B, W> + Send + Sync;

fn bind_shared<A: Send + 'static, B: Send + 'static, W: 'static>(
    m: Coroutine<A, W>,
    f: Arc<BindFn<A, B, W>>,
) -> Coroutine<B, W> {
    Coroutine::new(move |wls| {
        let first = m.run(wls);
        unfold(first, &f, wls)
    })
}

fn unfold<A: Send + 'static, B: Send + 'static, W: 'static>(
    status: Status<A, W>,
    f: &Arc<BindFn<A, B, W>>,
    wls: &mut W,
) -> Status<B, W> {
    match status {
        Status::Now(x) => f(x).run(wls),
        Status::Yield(prio, k) => Status::Yield(prio, bind_shared(k, Arc::clone(f))),
        Status::Choice(a, b) => {
            let a = unfold(*a, f, wls);
            let b = unfold(*b, f, wls);
            Status::Choice(Box::new(a), Box::new(b))
        }
        Status::Stop => Status::Stop,
    }
}

/// Run a coroutine to completion on the current thread, depth first,
/// collecting its final values. This is the sequential reference the
/// parallel scheduler is checked against.
pub fn run_sequential<A: Send + 'static, W: 'static>(root: &Coroutine<A, W>, wls: &mut W) -> Vec<A> {
    let mut out = Vec::new();
    let mut pending = std::collections::VecDeque::new();
    pending.push_back(root.clone());
    while let Some(c) = pending.pop_front() {
        let mut stack = vec![c.run(wls)];
        while let Some(st) = stack.pop() {
            match st {
                Status::Now(x) => out.push(x),
                Status::Yield(_, k) => pending.push_back(k),
                Status::Choice(a, b) => {
                    stack.push(*b);
                    stack.push(*a);
                }
                Status::Stop => {}
            }
        }
    }
    out
}
