//! Uniform grids, single-time field triples and spacetime solution records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mollifier::MollifierSpec;
use crate::nonlinearity::sqrt1p_sq;
use crate::quad;
use crate::scaling::ScalingFunction;

pub const MIN_GRID_POINTS: usize = 16;

/// Fraction of grid points at each end watched by the contamination check.
pub const BOUNDARY_FRACTION: f64 = 0.05;
/// Boundary values above this multiple of the interior maximum flag a run.
pub const BOUNDARY_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidGrid(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if n < MIN_GRID_POINTS {
            return Err(Error::InvalidGrid(format!("n = {n} < {MIN_GRID_POINTS}")));
        }
        Ok(Self { x_min, x_max, n, dx: (x_max - x_min) / (n - 1) as f64 })
    }

    /// Grid on `[x_min, x_max]` whose spacing is at most `dx`.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::InvalidGrid(format!("dx = {dx} must be positive")));
        }
        let cells = ((x_max - x_min) / dx - 1e-9).ceil().max(1.0) as usize;
        Self::new(x_min, x_max, cells + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n).map(|i| f(self.x(i))).collect()
    }

    /// Index of the first grid point with `x >= x0`.
    pub fn first_at_or_after(&self, x0: f64) -> usize {
        let k = ((x0 - self.x_min) / self.dx - 1e-9).ceil();
        k.clamp(0.0, self.n as f64) as usize
    }

    /// Index one past the last grid point with `x <= x0`.
    pub fn end_at_or_before(&self, x0: f64) -> usize {
        let k = ((x0 - self.x_min) / self.dx + 1e-9).floor() + 1.0;
        k.clamp(0.0, self.n as f64) as usize
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }
}

/// `(E, u, σ)` on a grid at time `t`; σ is the transformed density `ρ sqrt(1 + u²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl FieldState {
    pub fn zeros(n: usize, t: f64) -> Self {
        Self { t, e: vec![0.0; n], u: vec![0.0; n], sigma: vec![0.0; n] }
    }

    pub fn new(t: f64, e: Vec<f64>, u: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if e.len() != u.len() || u.len() != sigma.len() {
            return Err(Error::LengthMismatch { expected: e.len(), got: u.len().max(sigma.len()) });
        }
        Ok(Self { t, e, u, sigma })
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn check_len(&self, grid: &Grid) -> Result<()> {
        for v in [&self.e, &self.u, &self.sigma] {
            if v.len() != grid.len() {
                return Err(Error::LengthMismatch { expected: grid.len(), got: v.len() });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().chain(&self.u).chain(&self.sigma).all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("field state at t = {}", self.t)))
        }
    }

    /// `max(|E|, |u|, |σ|)` over the grid.
    pub fn sup_norm(&self) -> f64 {
        self.e
            .iter()
            .chain(&self.u)
            .chain(&self.sigma)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|(1 + u²) - sqrt(1 + u²)²|`, a round-off probe for the
    /// velocity normalization.
    pub fn restrict_velocity_norm(&self) -> f64 {
        self.u
            .iter()
            .map(|&u| {
                let s = sqrt1p_sq(u);
                ((1.0 + u * u) - s * s).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Trapezoidal integral of σ.
    pub fn total_charge(&self, grid: &Grid) -> f64 {
        quad::trapezoid(&self.sigma, grid.dx())
    }

    /// True when `|E|+|u|+|σ|` in the outer 5% of points on either side
    /// exceeds `1e-8` times its interior maximum.
    pub fn boundary_contaminated(&self) -> bool {
        let n = self.len();
        let band = ((n as f64 * BOUNDARY_FRACTION).ceil() as usize).max(1);
        let mag = |i: usize| self.e[i].abs() + self.u[i].abs() + self.sigma[i].abs();
        let interior = (band..n.saturating_sub(band)).map(mag).fold(0.0, f64::max);
        let edge = (0..band).chain(n.saturating_sub(band)..n).map(mag).fold(0.0, f64::max);
        if interior == 0.0 {
            return edge > 0.0;
        }
        edge > BOUNDARY_REL_TOL * interior
    }
}

/// Physical parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Constant magnetic field.
    pub b0: f64,
    /// Time horizon; runs cover `[0, T]` (or `[-T, 0]` backwards).
    pub t_end: f64,
    pub eps: f64,
    /// Point-charge strength.
    pub q: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("time horizon T = {} must be positive", self.t_end)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps = {} must be positive", self.eps)));
        }
        if !self.b0.is_finite() || !self.q.is_finite() {
            return Err(Error::Config("B0 and q must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    /// `max|V|` exceeded `guard_factor` times the a-priori bound.
    GuardAbort { t: f64, sup: f64, limit: f64 },
    Overflow { t: f64 },
}

impl RunOutcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunOutcome::Completed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardStats {
    pub subintervals: usize,
    pub max_iterations: usize,
    pub total_iterations: usize,
    pub final_update: f64,
}

/// Everything needed to interpret (and rerun) a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub eps: f64,
    /// Realized kernel width `h(ε)`.
    pub nu: f64,
    pub mollifier: MollifierSpec,
    pub scaling: Option<ScalingFunction>,
    pub params: ModelParams,
    pub solver: String,
    pub dt: f64,
    pub save_every: usize,
    pub a_priori_bound: f64,
    pub guard_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeSolution {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub states: Vec<FieldState>,
    pub meta: RunMeta,
    pub outcome: RunOutcome,
    pub boundary_contaminated: bool,
    pub picard: Option<PicardStats>,
}

impl SpacetimeSolution {
    /// Wraps externally prescribed states (no solver involved), e.g. analytic
    /// fields for trajectory or pairing checks. Times must be increasing.
    pub fn prescribed(grid: Grid, states: Vec<FieldState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidGrid("no states".into()));
        }
        for s in &states {
            s.check_len(&grid)?;
            s.check_finite()?;
        }
        if states.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidGrid("state times must increase".into()));
        }
        let span = states.last().unwrap().t - states[0].t;
        let mut sol = Self {
            grid,
            times: Vec::new(),
            states: Vec::new(),
            meta: RunMeta {
                eps: 1.0,
                nu: 0.0,
                mollifier: MollifierSpec::standard(crate::mollifier::MollifierKind::SymmetricBump),
                scaling: None,
                params: ModelParams { b0: 0.0, t_end: span.max(f64::MIN_POSITIVE), eps: 1.0, q: 0.0 },
                solver: "prescribed".into(),
                dt: 0.0,
                save_every: 1,
                a_priori_bound: f64::INFINITY,
                guard_factor: 1.0,
            },
            outcome: RunOutcome::Completed,
            boundary_contaminated: false,
            picard: None,
        };
        for s in states {
            sol.push(s);
        }
        Ok(sol)
    }

    pub fn push(&mut self, state: FieldState) {
        if state.boundary_contaminated() {
            self.boundary_contaminated = true;
        }
        self.times.push(state.t);
        self.states.push(state);
    }

    pub fn is_forward(&self) -> bool {
        self.times.len() < 2 || self.times[1] > self.times[0]
    }

    /// Earliest and latest saved times.
    pub fn time_window(&self) -> (f64, f64) {
        let a = self.times.first().copied().unwrap_or(0.0);
        let b = self.times.last().copied().unwrap_or(0.0);
        (a.min(b), a.max(b))
    }

    pub fn last(&self) -> Option<&FieldState> {
        self.states.last()
    }

    /// Largest `max(|E|,|u|,|σ|)` over all saved states.
    pub fn sup_norm(&self) -> f64 {
        self.states.iter().map(FieldState::sup_norm).fold(0.0, f64::max)
    }
}
