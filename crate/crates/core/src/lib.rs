//! Multivariate density estimation with mixtures of normals, implicit and
//! Archimedean copulas, and marginally adapted mixtures.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. Everything here is pure computation: file formats, the command
//! line front end and the parallel replication driver live in the `mixdens`
//! companion crate.
//!
//! Module map:
//! - [`math`]: special functions, SPD matrices, multivariate normal/t
//!   log-densities, root finding, quadrature and the seedable RNG contract.
//! - [`mixture`]: mixture-of-normals models fitted by stochastic
//!   approximation, with optional regression mean and BIC selection.
//! - [`copulas`]: normal, t, mixture-of-normals and Archimedean copulas.
//! - [`adapted`]: marginally adapted densities and their normalizing constant.
//! - [`evaluation`]: KL/L2 loss estimators, log-ratio tables and
//!   cross-validated log predictive scores.
//! - [`simulation`]: data-generating processes and the replication harness.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod adapted;
pub mod copulas;
mod data;
mod density;
mod error;
pub mod evaluation;
pub mod math;
pub mod mixture;
pub mod simulation;

pub use data::DataMatrix;
pub use density::{Density, MarginalizableDensity, SampleDensity, UnivariateDensity};
pub use error::{Error, Result};
pub use math::rng::RngStream;
