//! Path forecasting, scenario ensembles and trading strategies for continuous
//! intraday electricity markets.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bands;
pub mod ensembles;
pub mod error;
pub mod features;
pub mod market_data;
pub mod metrics;
pub mod path_forecast;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod strategies;
pub mod svr;

pub use error::{Error, Result};
