use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex, MutexGuard};

/// A synchronized FIFO with pledges.
///
/// A pledge announces that more elements may still be pushed. `pop` only
/// reports exhaustion once the buffer is empty and no pledge is held, so an
/// idle worker keeps waiting while any other worker is still processing an
/// element that might produce new work.
pub struct WorkQueue<T> {
    state: Mutex<State<T>>,
    wake: Condvar,
    pushed: AtomicU64,
    popped: AtomicU64,
}

struct State<T> {
    buf: VecDeque<T>,
    pledges: usize,
    closed: bool,
}

impl<T> Default for WorkQueue<T> {
    fn default() -> Self {
        WorkQueue::new()
    }
}

impl<T> WorkQueue<T> {
    pub fn new() -> WorkQueue<T> {
        WorkQueue {
            state: Mutex::new(State { buf: VecDeque::new(), pledges: 0, closed: false }),
            wake: Condvar::new(),
            pushed: AtomicU64::new(0),
            popped: AtomicU64::new(0),
        }
    }

    fn lock(&self) -> MutexGuard<'_, State<T>> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// No-op once the queue is closed.
    pub fn push(&self, x: T) {
        let mut st = self.lock();
        if st.closed {
            return;
        }
        st.buf.push_back(x);
        self.pushed.fetch_add(1, Ordering::Relaxed);
        drop(st);
        self.wake.notify_one();
    }

    /// Take the oldest element, blocking while the queue is empty but
    /// pledged. With `start_pledge`, a pledge is acquired atomically with
    /// the element.
    pub fn pop(&self, start_pledge: bool) -> Option<T> {
        let mut st = self.lock();
        loop {
            if st.closed {
                return None;
            }
            if let Some(x) = st.buf.pop_front() {
                if start_pledge {
                    st.pledges += 1;
                }
                self.popped.fetch_add(1, Ordering::Relaxed);
                return Some(x);
            }
            if st.pledges == 0 {
                drop(st);
                self.wake.notify_all();
                return None;
            }
            st = self.wake.wait(st).unwrap_or_else(|e| e.into_inner());
        }
    }

    pub fn make_pledge(&self) {
        self.lock().pledges += 1;
    }

    pub fn end_pledge(&self) {
        let mut st = self.lock();
        assert!(st.pledges > 0, "end_pledge without a pledge");
        st.pledges -= 1;
        let last = st.pledges == 0;
        drop(st);
        if last {
            self.wake.notify_all();
        }
    }

    /// Drop buffered work and wake every blocked `pop`.
    pub fn close(&self) {
        let mut st = self.lock();
        st.closed = true;
        st.buf.clear();
        drop(st);
        self.wake.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    pub fn pledges(&self) -> usize {
        self.lock().pledges
    }

    pub fn len(&self) -> usize {
        self.lock().buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total successful pushes and pops so far.
    pub fn counts(&self) -> (u64, u64) {
        (self.pushed.load(Ordering::Relaxed), self.popped.load(Ordering::Relaxed))
    }

    /// Pop elements until exhaustion, calling `body` on each with a
    /// push-back callback. A pledge is held for the duration of every call.
    pub fn work_while(&self, mut body: impl FnMut(T, &dyn Fn(T))) {
        struct Pledge<'a, T>(&'a WorkQueue<T>);
        impl<T> Drop for Pledge<'_, T> {
            fn drop(&mut self) {
                self.0.end_pledge();
            }
        }
        while let Some(x) = self.pop(true) {
            let _pledge = Pledge(self);
            body(x, &|y| self.push(y));
        }
    }
}
