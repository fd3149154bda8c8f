//! Local moment estimation with honest subsampled kernels and simultaneous
//! confidence bands from the half-sample bootstrap.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. With `std` enabled, per-subsample and per-replicate work runs on
//! the rayon pool; results are assembled by index so output does not depend
//! on the number of worker threads.
//!
//! Layout:
//!
//! - [`data`]: datasets, schemas and query grids.
//! - [`kernels`]: subsample plans, honest trees, k-NN kernels, forest weights.
//! - [`moments`]: linear moment functions and the orthogonality checker.
//! - [`nuisance`]: first-stage forests for outcome regressions and propensity.
//! - [`estimator`]: the ratio solve of the weighted moment equation.
//! - [`bootstrap`]: bootstrap roots, studentization, critical values, bands.
//! - [`ustat`]: exact and Monte Carlo U-statistic diagnostics.
//! - [`sim`]: parametric data generating processes and coverage studies.
//! - [`pipeline`]: fit-to-band orchestration shared by `sim` and the CLI.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bootstrap;
pub mod data;
pub mod error;
pub mod estimator;
pub mod kernels;
pub mod moments;
pub mod nuisance;
pub mod pipeline;
pub mod seed;
pub mod sim;
pub mod ustat;

mod math;
mod par;

pub use error::{Error, Result};
