//! Counterfactual bounds for partially specified structural causal models.

pub mod credible;
pub mod data;
pub mod em;
pub mod error;
pub mod factor;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod likelihood;
pub mod oracle;
pub mod query;
pub mod scm;

pub use error::{Error, Result};
