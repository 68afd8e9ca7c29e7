//! Minimal reactive-streams substrate.
//!
//! A [`StreamHandle`] is a lazy push collection: nothing runs until somebody
//! subscribes, and every subscription is an independent execution of the
//! operator chain. A [`Subject`] multicasts pushed values to its current
//! subscribers through a shared [`Scheduler`], which queues re-entrant pushes
//! and drains them in FIFO order.
//!
//! Operators live in [`ops`]: `map`, `try_map`, `tap`, `combine_latest`,
//! `with_latest_from`, `discontinue`, `settle`, `sum_latest` and `connect`.

mod scheduler;
mod subject;
pub mod ops;

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use crate::error::Error;

pub use scheduler::{Scheduler, DEFAULT_MAX_EVENTS};
pub use subject::Subject;

/// One event on a stream.
#[derive(Debug, Clone, PartialEq)]
pub enum Notification<V> {
    Next(V),
    Error(Error),
    Complete,
}

pub type Sink<V> = Rc<dyn Fn(Notification<V>)>;

/// Lazy, push-only stream of `V`.
pub struct StreamHandle<V> {
    on_subscribe: Rc<dyn Fn(Sink<V>) -> Subscription>,
}

impl<V> Clone for StreamHandle<V> {
    fn clone(&self) -> Self {
        Self {
            on_subscribe: self.on_subscribe.clone(),
        }
    }
}

impl<V: Clone + 'static> StreamHandle<V> {
    /// Builds a stream from its subscribe function. The function receives the
    /// downstream sink and returns the handle that tears the execution down.
    pub fn new(on_subscribe: impl Fn(Sink<V>) -> Subscription + 'static) -> Self {
        Self {
            on_subscribe: Rc::new(on_subscribe),
        }
    }

    /// Stream that never emits.
    pub fn never() -> Self {
        Self::new(|_| Subscription::closed())
    }

    /// Cold stream that emits `values` synchronously to each subscriber and completes.
    pub fn from_values(values: Vec<V>) -> Self {
        Self::new(move |sink| {
            for v in &values {
                sink(Notification::Next(v.clone()));
            }
            sink(Notification::Complete);
            Subscription::closed()
        })
    }

    /// Raw subscription; the sink sees every notification while active.
    pub fn subscribe_sink(&self, sink: Sink<V>) -> Subscription {
        let outer = Subscription::new();
        let flag = outer.flag();
        let closer = outer.clone();
        let guarded: Sink<V> = Rc::new(move |n: Notification<V>| {
            if !flag.get() {
                return;
            }
            let terminal = !matches!(n, Notification::Next(_));
            sink(n);
            if terminal {
                closer.unsubscribe();
            }
        });
        let inner = (self.on_subscribe)(guarded);
        if !inner.is_active() {
            outer.unsubscribe();
        }
        outer.add_teardown(move || inner.unsubscribe());
        outer
    }

    /// Subscribes an actor that is called once per emitted value.
    pub fn subscribe(&self, mut actor: impl FnMut(V) + 'static) -> Subscription {
        let actor = RefCell::new(move |v| actor(v));
        self.subscribe_sink(Rc::new(move |n| {
            if let Notification::Next(v) = n {
                (actor.borrow_mut())(v)
            }
        }))
    }

    /// Subscribes separate handlers for values, errors and completion.
    pub fn subscribe_all(
        &self,
        next: impl FnMut(V) + 'static,
        error: impl FnMut(Error) + 'static,
        complete: impl FnMut() + 'static,
    ) -> Subscription {
        let next = RefCell::new(next);
        let error = RefCell::new(error);
        let complete = RefCell::new(complete);
        self.subscribe_sink(Rc::new(move |n| match n {
            Notification::Next(v) => (next.borrow_mut())(v),
            Notification::Error(e) => (error.borrow_mut())(e),
            Notification::Complete => (complete.borrow_mut())(),
        }))
    }
}

/// Cancellable handle for one execution of a stream.
#[derive(Clone)]
pub struct Subscription {
    inner: Rc<SubscriptionInner>,
}

struct SubscriptionInner {
    active: Rc<Cell<bool>>,
    teardown: RefCell<Vec<Box<dyn FnOnce()>>>,
}

impl Default for Subscription {
    fn default() -> Self {
        Self::new()
    }
}

impl Subscription {
    pub fn new() -> Self {
        Self {
            inner: Rc::new(SubscriptionInner {
                active: Rc::new(Cell::new(true)),
                teardown: RefCell::new(Vec::new()),
            }),
        }
    }

    /// Already-finished subscription.
    pub fn closed() -> Self {
        let s = Self::new();
        s.inner.active.set(false);
        s
    }

    pub fn is_active(&self) -> bool {
        self.inner.active.get()
    }

    pub(crate) fn flag(&self) -> Rc<Cell<bool>> {
        self.inner.active.clone()
    }

    /// Registers work to run on cancellation; runs immediately if already closed.
    pub fn add_teardown(&self, f: impl FnOnce() + 'static) {
        if self.is_active() {
            self.inner.teardown.borrow_mut().push(Box::new(f));
        } else {
            f();
        }
    }

    pub fn unsubscribe(&self) {
        self.inner.active.set(false);
        let tasks: Vec<_> = self.inner.teardown.borrow_mut().drain(..).collect();
        for t in tasks {
            t();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cold_stream_replays_per_subscription() {
        let s = StreamHandle::from_values(vec![1, 2, 3]);
        let seen = Rc::new(RefCell::new(Vec::new()));
        let a = seen.clone();
        s.subscribe(move |v| a.borrow_mut().push(v));
        let b = seen.clone();
        s.subscribe(move |v| b.borrow_mut().push(v * 10));
        assert_eq!(*seen.borrow(), vec![1, 2, 3, 10, 20, 30]);
    }

    #[test]
    fn completion_closes_the_subscription() {
        let s = StreamHandle::from_values(vec![1]);
        let sub = s.subscribe(|_| {});
        assert!(!sub.is_active());
    }
}
