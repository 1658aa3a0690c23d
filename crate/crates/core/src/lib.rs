//! Cooperative spectrum sensing with energy detectors under noise uncertainty.
//!
//! The crate is split the way a sensing experiment is: [`analytic`] holds the
//! closed-form theory, [`simchan`] generates the radio environment,
//! [`detector`] runs per-CR energy detection (fixed threshold or the
//! dual-threshold scheme driven by a rolling history), [`fusion`] combines the
//! reports, and [`montecarlo`] ties it all together into ROC experiments.

// `!(x > 0.0)` style checks are deliberate: they reject NaN along with the
// out-of-range values. Quadrature nodes and rational coefficients are kept
// at the precision they are tabulated with.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod analytic;
pub mod error;
pub mod simchan;
pub mod detector;
pub mod fusion;
pub mod montecarlo;

pub use error::{Error, Result};
