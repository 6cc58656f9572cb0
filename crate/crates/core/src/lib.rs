//! Counterfactual inference and optimization for rank-based (position) auctions.
//!
//! The crate is organised around the allocation rule of a rank-based auction in
//! quantile space. Given equilibrium bids from an incumbent all-pay or
//! first-price auction it estimates the per-agent revenue of any other
//! rank-based auction as a weighted order statistic of the bids, computes
//! revenue-optimal rank-based auctions by ironing the multi-unit revenue curve,
//! and reproduces Monte Carlo experiments on those estimators.
//!
//! Modules:
//! - [`alloc`]: position weights, multi-unit allocation rules and their mixtures.
//! - [`equilibrium`]: value distributions, equilibrium bids and exact revenues.
//! - [`estimator`]: the truncated weighted-order-statistic estimators.
//! - [`optimize`]: ironing by rank, rank reserves and optimal weights.
//! - [`simulate`]: the Monte Carlo harness.
//! - [`io`]: file formats shared with the command-line front end.

pub mod alloc;
pub mod equilibrium;
pub mod error;
pub mod estimator;
pub mod io;
pub mod optimize;
pub mod simulate;

mod numeric;

pub use error::{Error, Result};
