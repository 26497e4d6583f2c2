//! Compressed-sensing recovery with denoising-based approximate message
//! passing (D-AMP) and its orthogonal variant (D-OAMP).
//!
//! The crate is organised around five modules:
//!
//! - [`operators`]: sensing operators (dense Gaussian, randomized partial DCT),
//!   orthonormal DCT, and the trace-normalized OAMP linear filter.
//! - [`denoisers`]: soft-threshold and LET kernel banks, external plugin
//!   denoisers, Monte-Carlo divergence, the divergence-free construction and
//!   SURE-optimal coefficients.
//! - [`recovery`]: the D-AMP and D-OAMP iteration loops.
//! - [`state_evolution`]: scalar recursions predicting per-iteration MSE.
//! - [`harness`]: image I/O, synthetic signals, metrics, experiment runs and
//!   CSV traces used by the `doamp` command-line tool.

pub mod denoisers;
mod error;
pub mod harness;
pub mod operators;
pub mod recovery;
pub mod rng;
pub mod state_evolution;

pub use error::{Error, Result};
