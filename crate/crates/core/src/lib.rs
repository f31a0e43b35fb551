//! Online caching with batched requests and untrusted predictions.
//!
//! The cache state is a fractional vector `x` in the capped simplex
//! `{x in [0,1]^N : sum x = k}`. Each timeslot a batch of requests arrives,
//! the policy pays `sum_i w_i r_i (1 - x_i)` and then moves to the next
//! state, optionally using a prediction of the next batch.

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod policies;
pub mod predictors;
pub mod simplex;
pub mod traces;

pub use error::{Error, Result};
