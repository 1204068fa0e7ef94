//! Volatility-surface driven derivative pricing with Gaussian-process
//! surrogates.
//!
//! * [`volsurface`]: SVI slices, one-factor term structure, Dupire local variance
//! * [`analytics`]: Black–Scholes closed forms
//! * [`varswap`]: variance-swap fair strike by static replication
//! * [`fdsolver`]: Crank–Nicolson / PSOR solver for American and European options
//! * [`gpr`]: exact Gaussian-process regression with an RBF kernel
//! * [`dataset`]: sampling, ground-truth generation, CSV persistence and evaluation

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod fdsolver;
pub mod gpr;
pub mod varswap;
pub mod volsurface;

pub use error::{Error, Result};
pub use exec::Execution;
