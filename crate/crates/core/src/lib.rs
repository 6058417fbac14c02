//! Blind source separation by probabilistic projection pursuit.
//!
//! Observations `x = mu + A s + eta` are whitened with a probabilistic PCA
//! fit, the latent dimension can be estimated from the eigenvalue
//! spectrum, and sources are extracted one at a time by maximizing a
//! negentropy contrast on the unit sphere before a joint refinement.

pub mod contrast;
pub mod data;
pub mod decompose;
mod error;
pub mod latdim;
pub mod prewhiten;
pub mod pursuit;
pub mod whiten;

pub use contrast::{
    compose, ConstraintSet, ContrastFn, Negentropy, ProblemFactory, ProjectionConstraint,
};
pub use data::DataMatrix;
pub use decompose::{decompose, decompose_with, DecomposeConfig, Decomposition};
pub use error::{CoreError, Result};
pub use latdim::{estimate_q, LatDimSummary};
pub use pursuit::{PursuitConfig, PursuitResult};
pub use whiten::{fit_ppca, fit_ppca_with, PpcaModel, SourceStats, WhitenConfig};
