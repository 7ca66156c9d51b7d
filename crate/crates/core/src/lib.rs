//! Lp-norm spherical copulas for `1 <= p <= ∞`.
//!
//! The positive copula on `[0,1]^n` is the law of `R · U` where `U` is uniform
//! on the positive part of the Lp unit sphere and `R^p ~ Beta(n/p, 1 - (n-1)/p)`.
//! It exists iff `p >= n - 1`; at `p = n - 1` the radius is identically one.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`specfun`] | log-Gamma, digamma, incomplete Beta, Gamma/Beta/p-normal draws, [`RngStream`] |
//! | [`copula`] | existence, densities for all variants, radial law, correlation, L∞ family |
//! | [`sampler`] | exact batch generation, integer-p projection sampler |
//! | [`inference`] | boundary estimator `p*` and maximum likelihood |
//! | [`energy`] | generalized Gini mean difference and the swap local search |
//! | [`stats`] | KS statistics, Pearson correlation, means with standard errors |
//! | [`cli`] | the `lpcop` command-line tool |

// Reference constants are written with all published digits.
#![allow(clippy::excessive_precision)]

pub mod cli;
pub mod copula;
pub mod energy;
pub mod error;
pub mod inference;
pub mod sampler;
pub mod specfun;
pub mod stats;

pub use copula::{CopulaParams, RadialLaw, Shape, VariantTag};
pub use energy::{ConjectureReport, PermutationCoupling};
pub use error::{Error, Result};
pub use inference::{FitMethod, FitResult};
pub use sampler::SampleBatch;
pub use specfun::RngStream;
