//! Reactive message passing for Bayesian inference on factor graphs.

pub mod error;
pub mod dist;
pub mod reactive;
pub mod model;
pub mod rules;
pub mod engine;
pub mod bench;
pub mod par;

pub use error::{Error, Result};
