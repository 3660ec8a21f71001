//! Two-stage stochastic scheduling of a virtual power plant.
//!
//! First-stage decisions are day-ahead energy bids and reserve capacity
//! bids; the second stage dispatches the DER park over a radial feeder in
//! each price and operating scenario, settling reserve activations and
//! imbalances. The problem is solved either as one extensive-form LP or by
//! multi-cut Benders decomposition, under expected cost or CVaR.

// Index loops over parallel time series read better than zipped iterators,
// and `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod benders;
pub mod config;
pub mod der;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod horizon;
pub mod io;
pub mod market;
pub mod model;
pub mod scenario;
pub mod stochastic;
pub mod synthetic;

pub use error::{Result, VppError};
