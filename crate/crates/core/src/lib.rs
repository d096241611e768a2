//! Statistical inference for M-estimators through approximate Newton steps
//! computed with stochastic gradients.

pub mod approx_newton;
pub mod cli;
pub mod error;
pub mod highdim;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod presets;
pub mod rng;
pub mod time_series;

pub use error::{Error, Result};
