//! Finite-sample confidence regions for incomplete structural models.
//!
//! The test statistic is a discrete optimal transport value between a
//! simulated latent sample and the sets of latent values that rationalize
//! each observation. Critical values come from independent latent samples
//! combined with every outcome the model predicts, so the test has exact
//! size whatever the (unmodeled) equilibrium selection.

pub mod assignment;
pub mod dataset;
pub mod entrygame;
pub mod error;
pub mod gaussian;
pub mod inference;
pub mod latent;
pub mod lp;
pub mod model;
pub mod normal;
pub mod region;
pub mod rng;

pub use error::{Error, Result};
