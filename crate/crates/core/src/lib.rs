//! Simulation of reflecting stochastic differential equations on Euclidean
//! domains: deterministic Skorohod solvers for piecewise-linear drivers,
//! Wong-Zakai and drift-corrected Euler integrators, closed-form local-time
//! bounds, and a coupled Monte Carlo harness for strong-convergence studies.

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod paths;
pub mod rng;
pub mod sde;
pub mod skorokhod;
pub mod vecmath;

pub use error::{Error, Result};
pub use geometry::DomainSpec;
pub use paths::{SampledPath, TimeGrid};
pub use sde::{Coefficients, TrajectoryPair};
pub use skorokhod::SkorohodSolution;
