//! Fisher-information regularized optimal transport on lattice grids.
//!
//! The transport problem between two histograms is posed in its dynamic
//! (flux/density path) form, regularized by β² times the discrete Fisher
//! information, and solved with a proximal Newton method whose steps come
//! from sparse KKT systems. The result is a smooth, strictly positive
//! density path together with an estimate of the squared Wasserstein-2
//! distance.

pub mod cli;
pub mod energy;
pub mod error;
pub mod feasible_init;
pub mod io;
pub mod lattice;
pub mod newton;
pub mod oracle;
pub mod recipes;
pub mod sparse;

pub use energy::{DensityPath, FluxPath, KineticRule, ProblemSpec, TimeGrid};
pub use error::{Error, Result};
pub use lattice::{GridSpec, Lattice};
pub use newton::{newton_solve, SolveResult, SolverConfig, Termination};
