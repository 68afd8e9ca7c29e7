//! Stream operators. None of them mutates its source: every source stays
//! independently subscribable.

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use super::{Notification, Scheduler, Sink, StreamHandle, Subject, Subscription};
use crate::error::{Error, Result};

/// Applies `f` to every value.
pub fn map<A, B>(source: &StreamHandle<A>, f: impl Fn(A) -> B + 'static) -> StreamHandle<B>
where
    A: Clone + 'static,
    B: Clone + 'static,
{
    try_map(source, move |a| Ok(f(a)))
}

/// Like [`map`], but an `Err` from `f` becomes an error event that ends the
/// output stream. The source is unaffected.
pub fn try_map<A, B>(
    source: &StreamHandle<A>,
    f: impl Fn(A) -> Result<B> + 'static,
) -> StreamHandle<B>
where
    A: Clone + 'static,
    B: Clone + 'static,
{
    let source = source.clone();
    let f = Rc::new(f);
    StreamHandle::new(move |sink: Sink<B>| {
        let f = f.clone();
        let failed = Rc::new(Cell::new(false));
        source.subscribe_sink(Rc::new(move |n| {
            if failed.get() {
                return;
            }
            match n {
                Notification::Next(a) => match f(a) {
                    Ok(b) => sink(Notification::Next(b)),
                    Err(e) => {
                        failed.set(true);
                        sink(Notification::Error(e));
                    }
                },
                Notification::Error(e) => sink(Notification::Error(e)),
                Notification::Complete => sink(Notification::Complete),
            }
        }))
    })
}

/// Runs a side effect per value and forwards the value unchanged.
pub fn tap<A: Clone + 'static>(source: &StreamHandle<A>, f: impl Fn(&A) + 'static) -> StreamHandle<A> {
    map(source, move |a| {
        f(&a);
        a
    })
}

struct Latest<V> {
    values: Vec<Option<V>>,
    filled: usize,
    completed: usize,
}

/// Emits the tuple of latest values whenever any source emits, once every
/// source has emitted at least once. One tuple per individual update.
/// Completes when all sources complete; any source error is propagated.
pub fn combine_latest<V: Clone + 'static>(sources: Vec<StreamHandle<V>>) -> Result<StreamHandle<Vec<V>>> {
    if sources.is_empty() {
        return Err(Error::Precondition("combine_latest needs at least one source".into()));
    }
    Ok(StreamHandle::new(move |sink: Sink<Vec<V>>| {
        let k = sources.len();
        let state = Rc::new(RefCell::new(Latest {
            values: vec![None; k],
            filled: 0,
            completed: 0,
        }));
        let outer = Subscription::new();
        for (i, src) in sources.iter().enumerate() {
            let state = state.clone();
            let sink = sink.clone();
            let inner = src.subscribe_sink(Rc::new(move |n| match n {
                Notification::Next(v) => {
                    let ready = {
                        let mut st = state.borrow_mut();
                        if st.values[i].is_none() {
                            st.filled += 1;
                        }
                        st.values[i] = Some(v);
                        (st.filled == k).then(|| st.values.iter().map(|x| x.clone().unwrap()).collect())
                    };
                    if let Some(tuple) = ready {
                        sink(Notification::Next(tuple));
                    }
                }
                Notification::Error(e) => sink(Notification::Error(e)),
                Notification::Complete => {
                    let all = {
                        let mut st = state.borrow_mut();
                        st.completed += 1;
                        st.completed == k
                    };
                    if all {
                        sink(Notification::Complete);
                    }
                }
            }));
            outer.add_teardown(move || inner.unsubscribe());
        }
        outer
    }))
}

/// Emits `(value, latest_of_others)` whenever `source` emits, provided every
/// other stream has produced a value. Emissions of the others only refresh
/// the sampled state; they never trigger output.
pub fn with_latest_from<A, B>(source: &StreamHandle<A>, others: Vec<StreamHandle<B>>) -> StreamHandle<(A, Vec<B>)>
where
    A: Clone + 'static,
    B: Clone + 'static,
{
    let source = source.clone();
    StreamHandle::new(move |sink: Sink<(A, Vec<B>)>| {
        let k = others.len();
        let sampled: Rc<RefCell<Vec<Option<B>>>> = Rc::new(RefCell::new(vec![None; k]));
        let outer = Subscription::new();
        for (i, o) in others.iter().enumerate() {
            let sampled = sampled.clone();
            let sink = sink.clone();
            let inner = o.subscribe_sink(Rc::new(move |n| match n {
                Notification::Next(v) => sampled.borrow_mut()[i] = Some(v),
                Notification::Error(e) => sink(Notification::Error(e)),
                Notification::Complete => {}
            }));
            outer.add_teardown(move || inner.unsubscribe());
        }
        let inner = source.subscribe_sink(Rc::new(move |n| match n {
            Notification::Next(a) => {
                let snapshot: Option<Vec<B>> = sampled.borrow().iter().cloned().collect();
                if let Some(vals) = snapshot {
                    sink(Notification::Next((a, vals)));
                }
            }
            Notification::Error(e) => sink(Notification::Error(e)),
            Notification::Complete => sink(Notification::Complete),
        }));
        outer.add_teardown(move || inner.unsubscribe());
        outer
    })
}

/// Lets at most one value through per scheduler activation. Breaks feedback
/// loops where a stream would otherwise react to its own consequences within
/// the same drain.
pub fn discontinue<A: Clone + 'static>(source: &StreamHandle<A>, scheduler: &Scheduler) -> StreamHandle<A> {
    let source = source.clone();
    let scheduler = scheduler.clone();
    StreamHandle::new(move |sink: Sink<A>| {
        let last: Rc<Cell<Option<u64>>> = Rc::new(Cell::new(None));
        let scheduler = scheduler.clone();
        source.subscribe_sink(Rc::new(move |n| match n {
            Notification::Next(a) => {
                let now = scheduler.activation();
                if last.get() != Some(now) {
                    last.set(Some(now));
                    sink(Notification::Next(a));
                }
            }
            other => sink(other),
        }))
    })
}

/// Holds values until the scheduler is idle, then emits only the latest one.
pub fn settle<A: Clone + 'static>(source: &StreamHandle<A>, scheduler: &Scheduler) -> StreamHandle<A> {
    let source = source.clone();
    let scheduler = scheduler.clone();
    StreamHandle::new(move |sink: Sink<A>| {
        let pending: Rc<RefCell<Option<A>>> = Rc::new(RefCell::new(None));
        let scheduler = scheduler.clone();
        source.subscribe_sink(Rc::new(move |n| match n {
            Notification::Next(a) => {
                let queued = pending.borrow_mut().replace(a).is_some();
                if !queued {
                    let (pending, sink) = (pending.clone(), sink.clone());
                    scheduler.schedule_idle(move || {
                        let v = pending.borrow_mut().take();
                        if let Some(v) = v {
                            sink(Notification::Next(v));
                        }
                    });
                }
            }
            other => sink(other),
        }))
    })
}

/// Sum of the latest values of all sources: `map(combine_latest(..), sum)`.
pub fn sum_latest(sources: Vec<StreamHandle<f64>>) -> Result<StreamHandle<f64>> {
    Ok(map(&combine_latest(sources)?, |xs: Vec<f64>| xs.iter().sum()))
}

/// Subscribes `subject` to `source`: values are pushed into the subject,
/// errors and completion terminate it.
pub fn connect<V: Clone + 'static>(source: &StreamHandle<V>, subject: &Subject<V>) -> Subscription {
    let subject = subject.clone();
    source.subscribe_sink(Rc::new(move |n| match n {
        Notification::Next(v) => {
            let _ = subject.push(v);
        }
        Notification::Error(e) => subject.error(e),
        Notification::Complete => subject.complete(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collect<V: Clone + 'static>(s: &StreamHandle<V>) -> (Rc<RefCell<Vec<V>>>, Subscription) {
        let log = Rc::new(RefCell::new(Vec::new()));
        let l = log.clone();
        let sub = s.subscribe(move |v| l.borrow_mut().push(v));
        (log, sub)
    }

    #[test]
    fn map_squares_in_order() {
        let s = StreamHandle::from_values(vec![1, 2, 3]);
        let (log, _) = collect(&map(&s, |x| x * x));
        assert_eq!(*log.borrow(), vec![1, 4, 9]);
    }

    #[test]
    fn map_of_empty_is_empty() {
        let s = StreamHandle::<i32>::from_values(vec![]);
        let (log, _) = collect(&map(&s, |x| x + 1));
        assert!(log.borrow().is_empty());
    }

    #[test]
    fn failing_map_errors_and_leaves_source_alone() {
        let src = Subject::new();
        let m = try_map(&src.stream(), |x: i32| {
            if x == 2 {
                Err(Error::Fault("boom".into()))
            } else {
                Ok(x)
            }
        });
        let errors = Rc::new(Cell::new(0));
        let e2 = errors.clone();
        let out = Rc::new(RefCell::new(Vec::new()));
        let o2 = out.clone();
        let sub = m.subscribe_all(move |v| o2.borrow_mut().push(v), move |_| e2.set(e2.get() + 1), || {});
        let (direct, _) = collect(&src.stream());
        for v in 1..=3 {
            src.push(v).unwrap();
        }
        assert_eq!(*out.borrow(), vec![1]);
        assert_eq!(errors.get(), 1);
        assert!(!sub.is_active());
        assert_eq!(*direct.borrow(), vec![1, 2, 3]);
    }

    #[test]
    fn combine_latest_interleaving() {
        let a = Subject::new();
        let b = Subject::new();
        let c = combine_latest(vec![a.stream(), b.stream()]).unwrap();
        let (log, _) = collect(&c);
        a.push(1).unwrap();
        b.push(10).unwrap();
        a.push(2).unwrap();
        assert_eq!(*log.borrow(), vec![vec![1, 10], vec![2, 10]]);
    }

    #[test]
    fn combine_latest_single_source() {
        let s = StreamHandle::from_values(vec![5, 6]);
        let (log, _) = collect(&combine_latest(vec![s]).unwrap());
        assert_eq!(*log.borrow(), vec![vec![5], vec![6]]);
    }

    #[test]
    fn combine_latest_gates_on_silent_source() {
        let a = Subject::new();
        let b: Subject<i32> = Subject::new();
        let (log, _) = collect(&combine_latest(vec![a.stream(), b.stream()]).unwrap());
        a.push(1).unwrap();
        assert!(log.borrow().is_empty());
    }

    #[test]
    fn combine_latest_completes_when_all_complete() {
        let a = Subject::new();
        let b = Subject::new();
        let done = Rc::new(Cell::new(false));
        let d = done.clone();
        let _s = combine_latest(vec![a.stream(), b.stream()])
            .unwrap()
            .subscribe_all(|_: Vec<i32>| {}, |_| {}, move || d.set(true));
        a.complete();
        assert!(!done.get());
        b.complete();
        assert!(done.get());
    }

    #[test]
    fn combine_latest_propagates_errors() {
        let a: Subject<i32> = Subject::new();
        let got = Rc::new(Cell::new(false));
        let g = got.clone();
        let _s = combine_latest(vec![a.stream()])
            .unwrap()
            .subscribe_all(|_| {}, move |_| g.set(true), || {});
        a.error(Error::Fault("x".into()));
        assert!(got.get());
    }

    #[test]
    fn sum_latest_examples() {
        let a = Subject::new();
        let b = Subject::new();
        let (log, _) = collect(&sum_latest(vec![a.stream(), b.stream()]).unwrap());
        a.push(1.0).unwrap();
        b.push(2.0).unwrap();
        a.push(4.0).unwrap();
        assert_eq!(*log.borrow(), vec![3.0, 6.0]);
        assert!(matches!(sum_latest(vec![]), Err(Error::Precondition(_))));
    }

    #[test]
    fn with_latest_from_samples_without_triggering() {
        let a = Subject::new();
        let b = Subject::new();
        let (log, _) = collect(&with_latest_from(&a.stream(), vec![b.stream()]));
        a.push(1).unwrap();
        b.push(10).unwrap();
        b.push(11).unwrap();
        a.push(2).unwrap();
        assert_eq!(*log.borrow(), vec![(2, vec![11])]);
    }

    #[test]
    fn discontinue_breaks_self_feedback() {
        let sched = Scheduler::default();
        let s = Subject::with_scheduler(sched.clone());
        let fed = discontinue(&map(&s.stream(), |x: i32| x + 1), &sched);
        let back = s.clone();
        let seen = Rc::new(RefCell::new(Vec::new()));
        let l = seen.clone();
        let _sub = fed.subscribe(move |v| {
            l.borrow_mut().push(v);
            back.push(v).unwrap();
        });
        s.push(0).unwrap();
        assert_eq!(*seen.borrow(), vec![1]);
        s.push(10).unwrap();
        assert_eq!(*seen.borrow(), vec![1, 11]);
    }

    #[test]
    fn settle_emits_once_per_quiet_point() {
        let sched = Scheduler::default();
        let s = Subject::with_scheduler(sched.clone());
        let (log, _sub) = collect(&settle(&s.stream(), &sched));
        sched.hold(|| {
            for i in 0..5 {
                s.push(i).unwrap();
            }
        });
        s.push(9).unwrap();
        assert_eq!(*log.borrow(), vec![4, 9]);
    }

    #[test]
    fn chains_are_lazy() {
        let calls = Rc::new(Cell::new(0));
        let c = calls.clone();
        let src = Subject::new();
        let m = map(&src.stream(), move |x: i32| {
            c.set(c.get() + 1);
            x
        });
        let _combined = combine_latest(vec![m.clone(), m]).unwrap();
        src.push(1).unwrap();
        assert_eq!(calls.get(), 0);
    }

    #[test]
    fn feedback_through_subject_drains_fifo() {
        let sched = Scheduler::default();
        let s = Subject::with_scheduler(sched);
        let back = s.clone();
        let seen = Rc::new(RefCell::new(Vec::new()));
        let l = seen.clone();
        let _sub = s.stream().subscribe(move |v: u32| {
            l.borrow_mut().push(v);
            if v < 100_000 {
                back.push(v + 1).unwrap();
            }
        });
        s.push(0).unwrap();
        assert_eq!(seen.borrow().len(), 100_001);
    }
}
