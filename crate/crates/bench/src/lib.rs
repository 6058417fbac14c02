//! Evaluation harness for the separation pipeline and its solver.

mod error;
pub mod external;
pub mod latdim_validation;
pub mod mixing;
pub mod montecarlo;
pub mod problems;
pub mod sir;
pub mod sources;

pub use error::{BenchError, Result};
