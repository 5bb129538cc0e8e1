//! Shared fixtures for the benchmarks.

use regml_core::fields::{FieldState, Grid, ModelParams};
use regml_core::mollifier::{Mollifier, MollifierKind};
use regml_core::regops::RegDerivOperator;

/// Smooth Gaussian data on `[-8, 8]` with `n` points and a kernel of width `nu`.
pub fn gaussian_problem(n: usize, nu: f64) -> (RegDerivOperator, FieldState, ModelParams) {
    let grid = Grid::new(-8.0, 8.0, n).expect("valid grid");
    let op = RegDerivOperator::new(Mollifier::standard(MollifierKind::SymmetricBump), nu, &grid).expect("resolved kernel");
    let bump = grid.sample(|x| 0.1 * (-x * x).exp());
    let state = FieldState::new(0.0, bump.clone(), vec![0.0; grid.len()], bump).expect("matching lengths");
    (op, state, ModelParams { b0: 1.0, t_end: 0.1, eps: nu, q: 0.0 })
}
