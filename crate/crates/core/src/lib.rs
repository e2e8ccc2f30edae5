//! Censored-GEV ensemble model output statistics for precipitation.
//!
//! Ensemble forecasts are condensed into a few predictors, linked to the
//! parameters of a left-censored GEV, and the link coefficients are fitted
//! by minimizing the closed-form CRPS over a rolling training window.

pub mod config;
pub mod data;
pub mod error;
pub mod fit;
pub mod gev;
pub mod optim;
pub mod pipeline;
pub mod predictors;
pub mod special;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
