//! Composite convex optimization laboratory: FISTA variants, proximal gradient
//! and the AVD dynamic on problems with non-unique minimizers, plus numerical
//! checks of their rates and Lyapunov inequalities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod avd;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod problems;
pub mod solvers;
pub mod vecgeo;

pub use error::{Error, Result};
pub use problems::CompositeProblem;
pub use solvers::{Algorithm, SolverConfig, Trace};
pub use vecgeo::{ConvexSet, Vector};
