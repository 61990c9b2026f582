//! Similarity-based weighting of external subgroup data for prediction
//! models fitted on a small target subgroup.
//!
//! External observations are weighted by their estimated probability of
//! belonging to the target subgroup, scaled by the inverse AUC of the model
//! that separates their subgroup from the target. The crate also contains
//! the simulation machinery used to study the approach and a .632+
//! bootstrap evaluation for real tabular data.

pub mod bootstrap;
pub mod dataset;
pub mod error;
pub mod glm;
pub mod harness;
pub mod io;
pub mod rng;
pub mod scm;
pub mod stats;
pub mod weights;

pub use dataset::Dataset;
pub use error::{Error, Result};
