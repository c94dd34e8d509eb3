//! Tabular curriculum Double Q-Learning for landing a multi-rotor vehicle on
//! a moving platform.
//!
//! The crate bundles a reduced-order flight simulation, closed-form
//! hyperparameter derivation, multiresolution state discretization, the
//! curriculum trainer and a Monte-Carlo evaluation harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod cli;
pub mod config;
pub mod curriculum;
pub mod discretization;
pub mod double_q;
pub mod error;
pub mod evaluation;
pub mod math;
pub mod observation;
pub mod platform;
pub mod reward;
pub mod rng;
pub mod vehicle;

pub use config::{Config, RunContext};
pub use error::{Error, Result};
