//! Transport model of a three-state repairable system (good, degraded,
//! failed) with elapsed-repair-time densities.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod control;
pub mod error;
pub mod fit;
pub mod history;
pub mod model;
pub mod open_loop;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{Grid, ModelParams, RateFamily, RepairRateSpec, SystemState};
