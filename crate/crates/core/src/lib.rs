//! Learning-curve simulation toolkit.
//!
//! Measures how prediction accuracy (MSE / R-squared) evolves as predictor
//! variables accumulate under a multivariate-normal model:
//!
//! - [`randcorr`] samples correlation coefficients from configurable
//!   distributions and assembles raw correlation matrices.
//! - [`nearcorr`] repairs non-positive-definite matrices via Dykstra-corrected
//!   alternating projections onto the nearest correlation matrix.
//! - [`condvar`] computes conditional variances, both directly and through
//!   incremental one-variable Cholesky extensions.
//! - [`trajectory`] runs the full simulation, aggregates learning curves,
//!   classifies returns-to-scale regimes, and verifies the mean-zero
//!   R-squared recursion by Monte Carlo.
//! - [`cf`] is an SVD-style matrix-factorization recommender trained by SGD,
//!   with tiered fallback predictions for unseen users/items.
//! - [`mlens`] ingests MovieLens-format ratings and runs the checkpointed
//!   data-accumulation experiment.
//! - [`report`] defines the CSV table schemas shared by the CLI.

pub mod cf;
pub mod condvar;
pub mod error;
pub mod linalg;
pub mod mlens;
pub mod nearcorr;
pub mod randcorr;
pub mod report;
pub mod rng;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};
pub use rng::RngStream;
