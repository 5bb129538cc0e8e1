//! Regularized relativistic Maxwell–Lorentz system in one space dimension:
//! mollified derivatives, delta-net point charges, two solvers and the
//! experiments that probe the ε → 0 behavior of the solutions.

pub mod analysis;
pub mod config;
pub mod deltanet;
pub mod error;
pub mod fields;
pub mod io;
pub mod mollifier;
pub mod nonlinearity;
pub mod quad;
pub mod regops;
pub mod scaling;
pub mod solver;
pub mod trajectories;

pub use analysis::{Field, Observable, Side, SweepResult, TestFunction2D, Verdict};
pub use config::RunConfig;
pub use deltanet::{DeltaNet, WidthRule};
pub use error::{Error, Result};
pub use fields::{FieldState, Grid, ModelParams, RunMeta, RunOutcome, SpacetimeSolution};
pub use mollifier::{Mollifier, MollifierKind, MollifierSpec};
pub use regops::RegDerivOperator;
pub use scaling::{ScalingFunction, ScalingKind};
pub use solver::{Method, SolverConfig};
pub use trajectories::Trajectory;
