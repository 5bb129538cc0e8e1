//! Regularized spatial derivative `D_h f = φ'_ν * f` and plain mollification
//! `φ_ν * f` as discrete convolutions on a uniform grid.
//!
//! Derivative weights are exact cell integrals of the scaled kernel,
//! `w_j = φ_ν(y_j + dx/2) - φ_ν(y_j - dx/2)` with `y_j = j dx`, i.e. the
//! kernel is sampled at cell midpoints. They telescope to zero, so constants
//! are annihilated up to round-off, and `Σ|w_j| ≤ ‖φ'‖₁/ν` by the triangle
//! inequality. Convolutions are evaluated as `(K * f)(x_i) = Σ_j w_j f(x_i - y_j)`
//! with zero padding outside the grid.

use crate::error::{Error, Result};
use crate::fields::Grid;
use crate::mollifier::Mollifier;
use crate::quad;

/// Minimum number of grid cells per kernel width.
pub const MIN_CELLS_PER_WIDTH: f64 = 4.0;

/// Weights at consecutive offsets `j_min, j_min + 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub j_min: isize,
    pub weights: Vec<f64>,
}

impl Stencil {
    pub fn j_max(&self) -> isize {
        self.j_min + self.weights.len() as isize - 1
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn abs_sum(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// `out[i] = Σ_j w_j f[i - j]`, zero padded.
    pub fn convolve_into(&self, f: &[f64], out: &mut [f64]) {
        let n = f.len() as isize;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let j = self.j_min + k as isize;
            let lo = j.max(0);
            let hi = (n + j).min(n);
            if lo >= hi {
                continue;
            }
            let (lo, hi) = (lo as usize, hi as usize);
            let src = &f[(lo as isize - j) as usize..(hi as isize - j) as usize];
            for (o, &s) in out[lo..hi].iter_mut().zip(src) {
                *o += w * s;
            }
        }
    }

    /// Indices whose stencil never reaches into the zero padding.
    pub fn interior(&self, n: usize) -> std::ops::Range<usize> {
        let lo = self.j_max().max(0) as usize;
        let hi = (n as isize + self.j_min.min(0)).max(0) as usize;
        lo..hi.max(lo)
    }
}

fn offset_range(m: &Mollifier, nu: f64, dx: f64) -> (isize, isize) {
    let (lo, hi) = m.support();
    let a = (nu * lo / dx).floor() as isize - 1;
    let b = (nu * hi / dx).ceil() as isize + 1;
    (a, b)
}

fn trim(j_min: isize, mut w: Vec<f64>) -> Stencil {
    let first = w.iter().position(|&v| v != 0.0).unwrap_or(0);
    let last = w.iter().rposition(|&v| v != 0.0).map_or(first, |p| p + 1);
    let weights = w.drain(first..last).collect();
    Stencil { j_min: j_min + first as isize, weights }
}

fn check_resolution(nu: f64, dx: f64) -> Result<()> {
    if !(nu.is_finite() && nu > 0.0) || nu < MIN_CELLS_PER_WIDTH * dx * (1.0 - 1e-12) {
        return Err(Error::UnderResolved { nu, dx });
    }
    Ok(())
}

fn derivative_stencil(m: &Mollifier, nu: f64, dx: f64) -> Stencil {
    let (a, b) = offset_range(m, nu, dx);
    let mut w: Vec<f64> = (a..=b)
        .map(|j| {
            let y = j as f64 * dx;
            m.eval_scaled(y + 0.5 * dx, nu) - m.eval_scaled(y - 0.5 * dx, nu)
        })
        .collect();
    let mut s = trim(a, std::mem::take(&mut w));
    // Project onto exact zero sum.
    let mean = s.sum() / s.len() as f64;
    s.weights.iter_mut().for_each(|v| *v -= mean);
    s
}

fn mollifier_stencil(m: &Mollifier, nu: f64, dx: f64) -> Stencil {
    let (a, b) = offset_range(m, nu, dx);
    let (s_lo, s_hi) = m.support();
    let w: Vec<f64> = (a..=b)
        .map(|j| {
            let y = j as f64 * dx;
            let lo = (y - 0.5 * dx).max(nu * s_lo);
            let hi = (y + 0.5 * dx).min(nu * s_hi);
            if lo >= hi {
                0.0
            } else {
                quad::integrate(|x| m.eval_scaled(x, nu), lo, hi, 1e-17, 1e-13)
            }
        })
        .collect();
    let mut s = trim(a, w);
    let total = s.sum();
    s.weights.iter_mut().for_each(|v| *v /= total);
    s
}

/// The regularized derivative `f ↦ φ'_ν * f` on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegDerivOperator {
    mollifier: Mollifier,
    nu: f64,
    grid: Grid,
    stencil: Stencil,
    norm_bound: f64,
}

impl RegDerivOperator {
    /// Fails unless the kernel spans at least four grid cells (`ν ≥ 4 dx`).
    pub fn new(mollifier: Mollifier, nu: f64, grid: &Grid) -> Result<Self> {
        check_resolution(nu, grid.dx())?;
        let stencil = derivative_stencil(&mollifier, nu, grid.dx());
        let norm_bound = mollifier.l1_norm_deriv() / nu;
        Ok(Self { mollifier, nu, grid: *grid, stencil, norm_bound })
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.mollifier
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// Continuum operator norm `‖φ'‖₁/ν` on `L∞`.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// `Σ|w_j|`, the exact `ℓ∞` norm of the discrete operator.
    pub fn discrete_norm(&self) -> f64 {
        self.stencil.abs_sum()
    }

    /// Largest RK4 step allowed by `dt ≤ 0.5 ν/‖φ'‖₁`.
    pub fn max_stable_dt(&self) -> f64 {
        0.5 / self.norm_bound
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        self.stencil.interior(self.grid.len())
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid.len()];
        self.apply_into(f, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.grid.len();
        if f.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: f.len() });
        }
        if out.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: out.len() });
        }
        self.stencil.convolve_into(f, out);
        Ok(())
    }
}

/// Plain mollification `f ↦ φ_ν * f` on a fixed grid; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Mollification {
    grid: Grid,
    stencil: Stencil,
}

impl Mollification {
    pub fn new(m: &Mollifier, nu: f64, grid: &Grid) -> Result<Self> {
        check_resolution(nu, grid.dx())?;
        Ok(Self { grid: *grid, stencil: mollifier_stencil(m, nu, grid.dx()) })
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.len();
        if f.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: f.len() });
        }
        let mut out = vec![0.0; n];
        self.stencil.convolve_into(f, &mut out);
        Ok(out)
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        self.stencil.interior(self.grid.len())
    }
}

/// One-shot `φ_ν * f`.
pub fn mollify(m: &Mollifier, nu: f64, grid: &Grid, f: &[f64]) -> Result<Vec<f64>> {
    Mollification::new(m, nu, grid)?.apply(f)
}
