//! Batch evaluation over independent items.
//!
//! With the `parallel` feature (default) [`map`] runs on the rayon pool;
//! without it, it is [`map_seq`]. Only independent work goes through here:
//! datasets, Monte Carlo replicas, random instances. Inference itself is
//! single-threaded.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_seq<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    map_seq(items, f)
}

/// `f(0), …, f(n - 1)`.
pub fn map_range<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    let idx: Vec<usize> = (0..n).collect();
    map(&idx, |&i| f(i))
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
