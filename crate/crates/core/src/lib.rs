//! Small-time expansions for scalar SDEs driven by fractional Brownian
//! motion with Hurst index `H ∈ (1/2, 1)`.
//!
//! The crate computes expected iterated integrals `c_I` of mixed `dt`/`dB`
//! words, assembles expansions of `E[f(X_h)] − f(x)` on the lattice of
//! exponents `2mH + n`, and checks them against Monte Carlo estimators built
//! on an exact fBm sampler. Words are written innermost integral first.

// NaN must fail argument checks, so `!(x > 0.0)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeff;
pub mod error;
pub mod expansion;
pub mod expr;
pub mod fbm;
pub mod fmt;
pub mod gamma;
pub mod gaussian;
pub mod jet;
pub mod mc;
pub mod quad;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod variance;
pub mod word;

pub use error::{Error, ErrorKind, Result};
