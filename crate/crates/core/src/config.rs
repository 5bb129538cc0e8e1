//! Run configuration (TOML) and the translation from a configuration plus
//! an ε value into a ready-to-solve problem.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::{Field, Observable, Side, TestFunction2D};
use crate::deltanet::{DeltaNet, WidthRule};
use crate::error::{Error, Result};
use crate::fields::{FieldState, Grid, ModelParams, SpacetimeSolution};
use crate::mollifier::{Mollifier, MollifierKind, MollifierSpec};
use crate::regops::{RegDerivOperator, MIN_CELLS_PER_WIDTH};
use crate::scaling::ScalingFunction;
use crate::solver::{self, SolverConfig};

/// Grid refinements a sweep may apply before giving up.
pub const MAX_REFINEMENTS: u32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    /// Spacing; exactly one of `dx` and `n` must be given.
    #[serde(default)]
    pub dx: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        match (self.dx, self.n) {
            (Some(dx), None) => Grid::with_spacing(self.x_min, self.x_max, dx),
            (None, Some(n)) => Grid::new(self.x_min, self.x_max, n),
            _ => Err(Error::Config("grid: give exactly one of dx and n".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub b0: f64,
    pub t_end: f64,
    pub eps: f64,
    /// Point-charge strength; also the mass of a delta-net initial density.
    #[serde(default = "one")]
    pub q: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierConfig {
    pub kind: MollifierKind,
    #[serde(default)]
    pub s_lo: Option<f64>,
    #[serde(default)]
    pub s_hi: Option<f64>,
}

impl MollifierConfig {
    pub fn spec(&self) -> MollifierSpec {
        let (lo, hi) = self.kind.default_support();
        MollifierSpec { kind: self.kind, s_lo: self.s_lo.unwrap_or(lo), s_hi: self.s_hi.unwrap_or(hi) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    #[default]
    Zero,
    /// `(0, 0, q ρ^ε)` with `ρ^ε` a delta net of the given profile.
    DeltaNet {
        #[serde(default = "symmetric")]
        profile: MollifierKind,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        width: WidthRule,
    },
    /// `amp · exp(-((x - center)/width)²)` in each field.
    Gaussian {
        #[serde(default)]
        e_amp: f64,
        #[serde(default)]
        u_amp: f64,
        #[serde(default)]
        sigma_amp: f64,
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        width: f64,
    },
}

fn symmetric() -> MollifierKind {
    MollifierKind::SymmetricBump
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedTarget {
    /// `q ∫ψ(t, t) dt`, the pairing of a charge moving on `x = t`.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Value(f64),
    Named(NamedTarget),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    pub name: String,
    pub field: Field,
    pub center: (f64, f64),
    pub radii: (f64, f64),
    #[serde(default)]
    pub target: Option<Target>,
    #[serde(default)]
    pub support_x0: Option<f64>,
}

impl ObservableConfig {
    pub fn resolve(&self, q: f64) -> Result<Observable> {
        let psi = TestFunction2D { center: self.center, radii: self.radii };
        psi.validate()?;
        let target = self.target.map(|t| match t {
            Target::Value(v) => v,
            Target::Named(NamedTarget::Diagonal) => q * psi.diagonal_integral(),
        });
        Ok(Observable { name: self.name.clone(), field: self.field, psi, target, support_x0: self.support_x0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
    #[serde(default)]
    pub observables: Vec<ObservableConfig>,
    /// Halve `dx` per member until kernel and delta width are resolved.
    #[serde(default = "yes")]
    pub refine_grid: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportConfig {
    pub x0: f64,
    #[serde(default = "right")]
    pub side: Side,
    /// Tolerance on the relative sup; defaults to `1e-8`.
    #[serde(default)]
    pub tol: Option<f64>,
    /// ε values to probe; defaults to `model.eps`.
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
}

fn right() -> Side {
    Side::Right
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareLinConfig {
    /// Charges to run; each replaces `model.q`.
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowUpConfig {
    pub eps: Vec<f64>,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "default_window")]
    pub window: f64,
}

fn default_window() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// `(t₀, x₀)` pairs.
    pub starts: Vec<(f64, f64)>,
    /// Defaults to `model.t_end`.
    #[serde(default)]
    pub r_end: Option<f64>,
    /// Defaults to the save step of the solve.
    #[serde(default)]
    pub dr: Option<f64>,
    #[serde(default = "yes")]
    pub reparam_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckScalingConfig {
    #[serde(default = "default_p")]
    pub p: Vec<u32>,
    #[serde(default = "default_eps_hi")]
    pub eps_hi: f64,
    #[serde(default = "default_eps_lo")]
    pub eps_lo: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Schedules to test; defaults to the run's `[scaling]`.
    #[serde(default)]
    pub candidates: Vec<ScalingFunction>,
}

fn default_p() -> Vec<u32> {
    vec![1, 2]
}
fn default_eps_hi() -> f64 {
    1e-3
}
fn default_eps_lo() -> f64 {
    1e-12
}
fn default_points() -> usize {
    10
}

impl Default for CheckScalingConfig {
    fn default() -> Self {
        Self { p: default_p(), eps_hi: default_eps_hi(), eps_lo: default_eps_lo(), points: default_points(), candidates: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub mollifier: MollifierConfig,
    pub scaling: ScalingFunction,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub support: Option<SupportConfig>,
    #[serde(default)]
    pub compare_lin: Option<CompareLinConfig>,
    #[serde(default)]
    pub blowup: Option<BlowUpConfig>,
    #[serde(default)]
    pub trajectories: Option<TrajectoryConfig>,
    #[serde(default)]
    pub check_scaling: Option<CheckScalingConfig>,
}

/// Everything a single solve needs.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub grid: Grid,
    pub op: RegDerivOperator,
    pub initial: FieldState,
    pub params: ModelParams,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn params(&self, eps: f64) -> ModelParams {
        ModelParams { b0: self.model.b0, t_end: self.model.t_end, eps, q: self.model.q }
    }

    pub fn mollifier(&self) -> Result<Mollifier> {
        Mollifier::from_spec(&self.mollifier.spec())
    }

    pub fn delta_net(&self) -> Result<Option<DeltaNet>> {
        match self.initial {
            InitialConfig::DeltaNet { profile, center, width } => Ok(Some(DeltaNet::new(profile, center, width, self.model.q)?)),
            _ => Ok(None),
        }
    }

    /// The configured grid, or with `refine` the coarsest halving of it that
    /// resolves the kernel width and delta-net width at `eps`.
    pub fn grid_for(&self, eps: f64, refine: bool) -> Result<Grid> {
        let base = self.grid.build()?;
        if !refine {
            return Ok(base);
        }
        let nu = self.scaling.h(eps)?;
        let mut need = nu;
        if let Some(net) = self.delta_net()? {
            need = need.min(net.width(eps));
        }
        let mut dx = base.dx();
        for _ in 0..=MAX_REFINEMENTS {
            if need >= MIN_CELLS_PER_WIDTH * dx * (1.0 - 1e-12) {
                return if dx == base.dx() { Ok(base) } else { Grid::with_spacing(base.x_min(), base.x_max(), dx) };
            }
            dx /= 2.0;
        }
        Err(Error::UnderResolved { nu: need, dx })
    }

    pub fn initial_state(&self, eps: f64, grid: &Grid) -> Result<FieldState> {
        let mut s = FieldState::zeros(grid.len(), 0.0);
        match self.initial {
            InitialConfig::Zero => {}
            InitialConfig::DeltaNet { .. } => {
                let net = self.delta_net()?.expect("delta-net initial data");
                net.check_resolved(eps, grid)?;
                s.sigma = net.sample(eps, grid)?;
            }
            InitialConfig::Gaussian { e_amp, u_amp, sigma_amp, center, width } => {
                if !(width > 0.0) {
                    return Err(Error::Config(format!("initial: gaussian width {width} must be positive")));
                }
                let g = |x: f64| (-((x - center) / width).powi(2)).exp();
                s.e = grid.sample(|x| e_amp * g(x));
                s.u = grid.sample(|x| u_amp * g(x));
                s.sigma = grid.sample(|x| sigma_amp * g(x));
            }
        }
        s.check_finite()?;
        Ok(s)
    }

    pub fn setup(&self, eps: f64, refine: bool) -> Result<RunSetup> {
        let params = self.params(eps);
        params.validate()?;
        let grid = self.grid_for(eps, refine)?;
        let nu = self.scaling.h(eps)?;
        let op = RegDerivOperator::new(self.mollifier()?, nu, &grid)?;
        let initial = self.initial_state(eps, &grid)?;
        Ok(RunSetup { grid, op, initial, params })
    }

    /// Builds and solves the problem at `eps`.
    pub fn run(&self, eps: f64, refine: bool) -> Result<SpacetimeSolution> {
        let s = self.setup(eps, refine)?;
        solver::solve(&s.initial, &self.solver, &s.op, &s.params, Some(self.scaling))
    }

    pub fn sweep_observables(&self) -> Result<Vec<Observable>> {
        match &self.sweep {
            Some(sw) => sw.observables.iter().map(|o| o.resolve(self.model.q)).collect(),
            None => Ok(Vec::new()),
        }
    }

    /// Checks every precondition that can be checked without solving and
    /// returns one message per violation, prefixed by the module concerned.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut push = |module: &str, e: Error| errs.push(format!("{module}: {e}"));

        let grid = match self.grid.build() {
            Ok(g) => Some(g),
            Err(e) => {
                push("fields", e);
                None
            }
        };
        if let Err(e) = self.params(self.model.eps).validate() {
            push("fields", e);
        }
        let moll = match self.mollifier() {
            Ok(m) => Some(m),
            Err(e) => {
                push("mollifier", e);
                None
            }
        };
        if let Err(e) = ScalingFunction::new(self.scaling.kind, self.scaling.c, self.scaling.exponent) {
            push("scaling", e);
        }
        if let Err(e) = self.solver.validate() {
            push("solver", e);
        }
        let net = match self.delta_net() {
            Ok(n) => n,
            Err(e) => {
                push("deltanet", e);
                None
            }
        };

        // The single-ε run on the configured grid.
        let nu = match self.scaling.h(self.model.eps) {
            Ok(nu) => Some(nu),
            Err(e) => {
                push("scaling", e);
                None
            }
        };
        if let (Some(g), Some(m), Some(nu)) = (&grid, &moll, nu) {
            match RegDerivOperator::new(m.clone(), nu, g) {
                Ok(op) => {
                    if let Err(e) = self.solver.check_step_bound(&op) {
                        push("solver", e);
                    }
                }
                Err(e) => push("regops", e),
            }
        }
        if let (Some(g), Some(n)) = (&grid, &net) {
            if let Err(e) = n.check_resolved(self.model.eps, g) {
                push("deltanet", e);
            }
        }
        if let InitialConfig::Gaussian { width, .. } = self.initial {
            if !(width > 0.0) {
                push("fields", Error::Config(format!("gaussian width {width} must be positive")));
            }
        }

        if let Some(sw) = &self.sweep {
            if sw.eps.is_empty() || sw.eps.windows(2).any(|w| w[1] >= w[0]) {
                push("analysis", Error::Config("sweep eps schedule must be non-empty and strictly decreasing".into()));
            }
            for &eps in &sw.eps {
                if let Err(e) = self.grid_for(eps, sw.refine_grid).and_then(|g| {
                    let op = RegDerivOperator::new(self.mollifier()?, self.scaling.h(eps)?, &g)?;
                    if let Some(n) = &net {
                        n.check_resolved(eps, &g)?;
                    }
                    self.solver.check_step_bound(&op)
                }) {
                    push("analysis", Error::Config(format!("sweep member eps = {eps}: {e}")));
                }
            }
            for o in &sw.observables {
                if let Err(e) = o.resolve(self.model.q) {
                    push("analysis", e);
                }
            }
        }
        if let Some(sp) = &self.support {
            if let Some(g) = &grid {
                if !g.contains(sp.x0) {
                    push("analysis", Error::Config(format!("support probe x0 = {} outside the grid", sp.x0)));
                }
            }
        }
        if let Some(b) = &self.blowup {
            if b.eps.is_empty() || !(b.window > 0.0) {
                push("analysis", Error::Config("blowup needs a non-empty eps list and a positive window".into()));
            }
        }
        if let Some(cl) = &self.compare_lin {
            if cl.q.is_empty() {
                push("analysis", Error::Config("compare_lin needs at least one q".into()));
            }
            if !matches!(self.initial, InitialConfig::DeltaNet { .. }) {
                push("analysis", Error::Config("compare_lin needs delta_net initial data".into()));
            }
        }
        if let Some(tr) = &self.trajectories {
            if tr.starts.is_empty() {
                push("trajectories", Error::Config("no trajectory starts".into()));
            }
            if let Some(dr) = tr.dr {
                if !(dr > 0.0) {
                    push("trajectories", Error::Config(format!("dr = {dr} must be positive")));
                }
            }
            if self.solver.backward {
                push("trajectories", Error::Config("trajectories need a forward solve".into()));
            }
        }
        if let Some(cs) = &self.check_scaling {
            if cs.points < 4 || !(cs.eps_hi > cs.eps_lo && cs.eps_lo > 0.0) {
                push("scaling", Error::Config("check_scaling needs points >= 4 and eps_hi > eps_lo > 0".into()));
            }
            for c in &cs.candidates {
                if let Err(e) = ScalingFunction::new(c.kind, c.c, c.exponent) {
                    push("scaling", e);
                }
            }
        }
        errs
    }
}
