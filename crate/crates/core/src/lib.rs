//! Boosted classifiers under noisy inference.
//!
//! Trains AdaBoost ensembles of decision stumps, models base-classifier
//! outputs sent over additive Gaussian channels, and allocates a transmit
//! power budget across classifiers by minimizing Markov, Chernoff and
//! Gaussian proxies of the final mismatch probability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod boost;
pub mod data;
pub mod error;
pub mod eval;
pub mod importance;
pub mod mathkit;
pub mod noise;
pub mod sign;

pub use error::{Error, Result};
pub use sign::Sign;
