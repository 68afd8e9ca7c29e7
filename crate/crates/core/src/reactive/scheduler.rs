use std::cell::{Cell, RefCell};
use std::collections::VecDeque;
use std::rc::Rc;

type Task = Box<dyn FnOnce()>;

/// Default bound on the number of deliveries processed by one drain.
pub const DEFAULT_MAX_EVENTS: usize = 1_000_000;

/// FIFO event loop shared by every subject of one engine.
///
/// Work scheduled while a drain is in progress is appended to the queue and
/// processed breadth-first, so a feedback chain never grows the call stack.
/// Each drain started from an idle loop is one *activation*. Idle tasks run
/// only when the main queue is empty, one at a time, in FIFO order.
#[derive(Clone)]
pub struct Scheduler {
    inner: Rc<Inner>,
}

struct Inner {
    queue: RefCell<VecDeque<Task>>,
    idle: RefCell<VecDeque<Task>>,
    draining: Cell<bool>,
    activation: Cell<u64>,
    max_events: Cell<usize>,
    overflowed: Cell<bool>,
    processed: Cell<u64>,
}

impl Default for Scheduler {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_EVENTS)
    }
}

impl Scheduler {
    pub fn new(max_events: usize) -> Self {
        Self {
            inner: Rc::new(Inner {
                queue: RefCell::new(VecDeque::new()),
                idle: RefCell::new(VecDeque::new()),
                draining: Cell::new(false),
                activation: Cell::new(0),
                max_events: Cell::new(max_events),
                overflowed: Cell::new(false),
                processed: Cell::new(0),
            }),
        }
    }

    pub fn schedule(&self, task: impl FnOnce() + 'static) {
        self.inner.queue.borrow_mut().push_back(Box::new(task));
        if !self.inner.draining.get() {
            self.drain();
        }
    }

    /// Queues a task behind all pending main work.
    pub fn schedule_idle(&self, task: impl FnOnce() + 'static) {
        self.inner.idle.borrow_mut().push_back(Box::new(task));
        if !self.inner.draining.get() {
            self.drain();
        }
    }

    /// Runs `f` as part of one activation: work it schedules is queued and
    /// drained only after `f` returns. Nested calls simply run `f`.
    pub fn hold<R>(&self, f: impl FnOnce() -> R) -> R {
        if self.inner.draining.get() {
            return f();
        }
        self.begin();
        let r = f();
        self.run_queue();
        r
    }

    fn begin(&self) {
        self.inner.draining.set(true);
        self.inner.activation.set(self.inner.activation.get() + 1);
    }

    fn drain(&self) {
        self.begin();
        self.run_queue();
    }

    fn run_queue(&self) {
        let inner = &self.inner;
        let max = inner.max_events.get();
        let mut count = 0usize;
        loop {
            let mut next = inner.queue.borrow_mut().pop_front();
            if next.is_none() {
                next = inner.idle.borrow_mut().pop_front();
            }
            let Some(task) = next else { break };
            task();
            count += 1;
            if count > max {
                inner.overflowed.set(true);
                inner.queue.borrow_mut().clear();
                inner.idle.borrow_mut().clear();
                break;
            }
        }
        inner.processed.set(inner.processed.get() + count as u64);
        inner.draining.set(false);
    }

    /// Identifier of the current (or most recent) drain.
    pub fn activation(&self) -> u64 {
        self.inner.activation.get()
    }

    pub fn is_draining(&self) -> bool {
        self.inner.draining.get()
    }

    pub fn set_max_events(&self, max: usize) {
        self.inner.max_events.set(max);
    }

    /// Returns and clears the overflow flag raised when a drain hit the bound.
    pub fn take_overflow(&self) -> bool {
        self.inner.overflowed.replace(false)
    }

    pub fn processed(&self) -> u64 {
        self.inner.processed.get()
    }

    pub fn same_as(&self, other: &Scheduler) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }
}
