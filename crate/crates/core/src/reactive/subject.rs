use std::cell::{Cell, RefCell};
use std::rc::Rc;

use super::{Notification, Scheduler, Sink, StreamHandle, Subscription};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Lifecycle {
    Open,
    Completed,
    Errored,
}

/// Multicasting relay: every pushed value goes to every subscriber that is
/// active at push time, exactly once, through the shared scheduler.
pub struct Subject<V> {
    inner: Rc<Inner<V>>,
}

impl<V> Clone for Subject<V> {
    fn clone(&self) -> Self {
        Self {
            inner: self.inner.clone(),
        }
    }
}

struct Inner<V> {
    observers: RefCell<Vec<(Rc<Cell<bool>>, Sink<V>)>>,
    latest: RefCell<Option<V>>,
    state: Cell<Lifecycle>,
    replay: bool,
    scheduler: Scheduler,
}

impl<V: Clone + 'static> Default for Subject<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V: Clone + 'static> Subject<V> {
    /// Subject with a private scheduler.
    pub fn new() -> Self {
        Self::with_scheduler(Scheduler::default())
    }

    pub fn with_scheduler(scheduler: Scheduler) -> Self {
        Self::build(scheduler, false)
    }

    /// Subject that hands its latest value to each new subscriber on subscription.
    pub fn recent(scheduler: Scheduler) -> Self {
        Self::build(scheduler, true)
    }

    fn build(scheduler: Scheduler, replay: bool) -> Self {
        Self {
            inner: Rc::new(Inner {
                observers: RefCell::new(Vec::new()),
                latest: RefCell::new(None),
                state: Cell::new(Lifecycle::Open),
                replay,
                scheduler,
            }),
        }
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.inner.scheduler
    }

    /// Most recently pushed value.
    pub fn latest(&self) -> Option<V> {
        self.inner.latest.borrow().clone()
    }

    pub fn has_latest(&self) -> bool {
        self.inner.latest.borrow().is_some()
    }

    /// Whether the latest value equals `v`, without cloning it.
    pub fn latest_is(&self, v: &V) -> bool
    where
        V: PartialEq,
    {
        self.inner.latest.borrow().as_ref() == Some(v)
    }

    pub fn is_closed(&self) -> bool {
        self.inner.state.get() != Lifecycle::Open
    }

    pub fn observer_count(&self) -> usize {
        self.inner
            .observers
            .borrow()
            .iter()
            .filter(|(f, _)| f.get())
            .count()
    }

    fn snapshot(&self) -> Vec<(Rc<Cell<bool>>, Sink<V>)> {
        let mut obs = self.inner.observers.borrow_mut();
        obs.retain(|(f, _)| f.get());
        obs.clone()
    }

    /// Multicasts `value`. Pushing into a completed subject is a fault.
    pub fn push(&self, value: V) -> Result<()> {
        if self.is_closed() {
            return Err(Error::Fault("push into a completed subject".into()));
        }
        *self.inner.latest.borrow_mut() = Some(value.clone());
        let targets = self.snapshot();
        if targets.is_empty() {
            return Ok(());
        }
        self.inner.scheduler.schedule(move || {
            for (flag, sink) in &targets {
                if flag.get() {
                    sink(Notification::Next(value.clone()));
                }
            }
        });
        Ok(())
    }

    /// Drops every observer without notifying it.
    pub(crate) fn detach_all(&self) {
        self.inner.observers.borrow_mut().clear();
    }

    pub fn complete(&self) {
        self.terminate(Lifecycle::Completed, Notification::Complete);
    }

    pub fn error(&self, e: Error) {
        self.terminate(Lifecycle::Errored, Notification::Error(e));
    }

    fn terminate(&self, state: Lifecycle, n: Notification<V>) {
        if self.is_closed() {
            return;
        }
        self.inner.state.set(state);
        let targets = self.snapshot();
        self.inner.observers.borrow_mut().clear();
        self.inner.scheduler.schedule(move || {
            for (flag, sink) in &targets {
                if flag.get() {
                    sink(n.clone());
                }
            }
        });
    }

    /// The subject viewed as a stream. Subscribing after completion yields a
    /// closed subscription whose callback never fires.
    pub fn stream(&self) -> StreamHandle<V> {
        let inner = Rc::downgrade(&self.inner);
        StreamHandle::new(move |sink| {
            let Some(inner) = inner.upgrade() else {
                return Subscription::closed();
            };
            if inner.state.get() != Lifecycle::Open {
                return Subscription::closed();
            }
            let sub = Subscription::new();
            inner.observers.borrow_mut().push((sub.flag(), sink.clone()));
            if inner.replay {
                let latest = inner.latest.borrow().clone();
                if let Some(v) = latest {
                    sink(Notification::Next(v));
                }
            }
            sub
        })
    }
}
