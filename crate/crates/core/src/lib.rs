//! Maximum hands-off control for linear time-invariant plants.
//!
//! The sparsest admissible control that steers `x' = Ax + Bu` from `x0` to the
//! origin in time `T` under `|u|_inf <= 1` is computed as an L1 (minimum-fuel)
//! optimal control. The horizon is split into `N` zero-order-hold intervals and
//! the resulting finite-dimensional L1 program is solved with a primal-dual
//! interior-point method followed by a reweighted-L1 polish that recovers a
//! sparse vertex of the optimal face.
//!
//! Module map:
//! - [`model`]: plant/problem/signal types, problem-file and CSV formats.
//! - [`discretize`]: matrix exponential, ZOH discretization, reachability data.
//! - [`solver`]: LP construction, interior point, polish, end-to-end [`solver::solve`].
//! - [`analysis`]: sparsity metrics, simulation, baselines, exhaustive L0 oracle.
//! - [`cli`]: command-line front end.

pub mod analysis;
pub mod cli;
pub mod discretize;
pub mod error;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
pub use model::{ControlProblem, ControlSignal, PlantModel, Trajectory};
