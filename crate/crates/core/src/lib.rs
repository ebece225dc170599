//! Fairness-aware survival modeling.
//!
//! The crate fits Cox proportional-hazards models, measures intra-group and
//! cross-group ranking bias over time under censoring, builds Rashomon sets
//! of near-optimal models by rejection sampling, and picks the fairest
//! near-optimal model with the Model Selection Index (MSI).

pub mod censorkm;
pub mod cli;
pub mod cohort;
pub mod coxfit;
pub mod error;
pub mod pipeline;
pub mod rankmetrics;
pub mod rashomon;
pub mod select;

pub use error::{Error, Result};
