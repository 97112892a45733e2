//! Neural least-squares Monte Carlo for portfolios of early-exercise claims.
//!
//! A single feed-forward network per exercise date learns the continuation
//! value of every instrument in a portfolio at once. The trained networks are
//! then used three ways:
//!
//! * as an exercise policy on fresh paths, giving a low-biased price with a
//!   Monte Carlo error bar ([`pricer`]);
//! * as a fast valuation device at a future horizon, giving the portfolio
//!   profit-and-loss distribution together with the per-instrument marginals
//!   from one simulation ([`pnl`]);
//! * as a backward (high-biased) value estimate at inception.
//!
//! Independent reference prices live in [`oracles`].
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. With `std`, path-level work runs on the rayon pool; results do
//! not depend on the number of workers.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod exec;
pub mod instruments;
pub mod lsm;
pub mod market;
pub mod math;
pub mod nn;
pub mod oracles;
pub mod pnl;
pub mod pricer;
pub mod rng;

pub use error::{Error, Result};
pub use instruments::{Instrument, PayoffKind, Portfolio};
pub use lsm::{LsmConfig, TrainedPolicy};
pub use market::{InnerFan, ModelParams, PathSet, TimeGrid};
pub use nn::{Activation, Network, TrainConfig};
pub use pnl::PnlDistribution;
pub use pricer::PricingResult;
