//! Time integration of the regularized system
//!
//! ```text
//! ∂t E + D_h E               = σ (1 - a(u))
//! ∂t u + D_h sqrt(1 + u²)    = E + B₀ a(u)
//! ∂t σ + D_h (σ a(u))        = 0
//! ```
//!
//! Because `D_h` is bounded (norm `‖φ'‖₁/ν`) the system is an ODE in the
//! grid values. Two independent integrators are provided: classical RK4
//! (method of lines) and Picard iteration on the integrated form, chained
//! over short subintervals on which it contracts.
//!
//! `D_h` annihilates constants, so the `u` flux is evaluated as
//! `D_h (sqrt(1 + u²) - 1)`. This matters with zero padding: the flux tends
//! to one, not zero, far from the charge.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldState, ModelParams, PicardStats, RunMeta, RunOutcome, SpacetimeSolution};
use crate::nonlinearity::{a, sqrt1p_sq_m1};
use crate::regops::RegDerivOperator;
use crate::scaling::ScalingFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(alias = "rk4")]
    LinesRk4,
    Picard,
}

impl Method {
    pub fn id(self) -> &'static str {
        match self {
            Method::LinesRk4 => "lines_rk4",
            Method::Picard => "picard",
        }
    }
}

/// Picard subintervals are sized from the runs' Lipschitz scale with this factor.
pub const PICARD_HORIZON_FACTOR: f64 = 0.25;
/// Consecutive growing updates that count as non-contraction.
pub const PICARD_GROWTH_STRIKES: usize = 5;
/// Default ratio between the RK4 step and the Picard quadrature step.
pub const PICARD_DEFAULT_REFINE: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Time step. Defaults to the stability bound (RK4) or a sixteenth of it (Picard).
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max_iter")]
    pub picard_max_iter: usize,
    /// Overrides the contraction horizon `0.25 / (‖φ'‖₁/ν + 2 + |B₀|)`.
    #[serde(default)]
    pub picard_horizon: Option<f64>,
    #[serde(default = "default_save_every")]
    pub save_every: usize,
    #[serde(default = "default_guard_factor")]
    pub guard_factor: f64,
    /// Integrate over `[-T, 0]` instead of `[0, T]`.
    #[serde(default)]
    pub backward: bool,
}

fn default_picard_tol() -> f64 {
    1e-10
}
fn default_picard_max_iter() -> usize {
    200
}
fn default_save_every() -> usize {
    1
}
fn default_guard_factor() -> f64 {
    10.0
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::LinesRk4,
            dt: None,
            picard_tol: default_picard_tol(),
            picard_max_iter: default_picard_max_iter(),
            picard_horizon: None,
            save_every: default_save_every(),
            guard_factor: default_guard_factor(),
            backward: false,
        }
    }
}

impl SolverConfig {
    pub fn rk4() -> Self {
        Self::default()
    }

    pub fn picard() -> Self {
        Self { method: Method::Picard, ..Self::default() }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_save_every(mut self, k: usize) -> Self {
        self.save_every = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidSolver(format!("dt = {dt} must be positive")));
            }
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidSolver("picard_tol must be positive".into()));
        }
        if self.picard_max_iter == 0 || self.save_every == 0 {
            return Err(Error::InvalidSolver("picard_max_iter and save_every must be >= 1".into()));
        }
        if !(self.guard_factor >= 1.0) {
            return Err(Error::InvalidSolver(format!("guard_factor = {} must be >= 1", self.guard_factor)));
        }
        if let Some(h) = self.picard_horizon {
            if !(h > 0.0) {
                return Err(Error::InvalidSolver("picard_horizon must be positive".into()));
            }
        }
        Ok(())
    }

    /// Requested step, before it is shrunk to divide `T` evenly.
    pub fn nominal_dt(&self, op: &RegDerivOperator) -> f64 {
        match (self.dt, self.method) {
            (Some(dt), _) => dt,
            (None, Method::LinesRk4) => op.max_stable_dt(),
            (None, Method::Picard) => op.max_stable_dt() / PICARD_DEFAULT_REFINE,
        }
    }

    /// Checks the RK4 step bound `dt ≤ 0.5 ν/‖φ'‖₁`.
    pub fn check_step_bound(&self, op: &RegDerivOperator) -> Result<()> {
        let dt = self.nominal_dt(op);
        let bound = op.max_stable_dt();
        if self.method == Method::LinesRk4 && dt > bound * (1.0 + 1e-12) {
            return Err(Error::StepBound { dt, bound });
        }
        Ok(())
    }
}

/// Number of equal steps of size at most `dt` covering `t_end`.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    ((t_end / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Time derivatives `(Ė, u̇, σ̇)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Scratch buffers for repeated right-hand-side evaluations.
struct Workspace {
    au: Vec<f64>,
    tmp: Vec<f64>,
    conv: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self { au: vec![0.0; n], tmp: vec![0.0; n], conv: vec![0.0; n] }
    }
}

/// Evaluates the right-hand side for a packed state `[E | u | σ]` into `out`.
fn rhs_packed(v: &[f64], op: &RegDerivOperator, b0: f64, ws: &mut Workspace, out: &mut [f64]) {
    let n = ws.au.len();
    let (e, rest) = v.split_at(n);
    let (u, sigma) = rest.split_at(n);
    let (oe, orest) = out.split_at_mut(n);
    let (ou, os) = orest.split_at_mut(n);
    let st = op.stencil();

    for (au, &ui) in ws.au.iter_mut().zip(u) {
        *au = a(ui);
    }

    st.convolve_into(e, &mut ws.conv);
    for i in 0..n {
        oe[i] = -ws.conv[i] + sigma[i] * (1.0 - ws.au[i]);
    }

    for (t, &ui) in ws.tmp.iter_mut().zip(u) {
        *t = sqrt1p_sq_m1(ui);
    }
    st.convolve_into(&ws.tmp, &mut ws.conv);
    for i in 0..n {
        ou[i] = -ws.conv[i] + e[i] + b0 * ws.au[i];
    }

    for i in 0..n {
        ws.tmp[i] = sigma[i] * ws.au[i];
    }
    st.convolve_into(&ws.tmp, &mut ws.conv);
    for i in 0..n {
        os[i] = -ws.conv[i];
    }
}

fn pack(s: &FieldState) -> Vec<f64> {
    let mut v = Vec::with_capacity(3 * s.len());
    v.extend_from_slice(&s.e);
    v.extend_from_slice(&s.u);
    v.extend_from_slice(&s.sigma);
    v
}

fn unpack(v: &[f64], t: f64) -> FieldState {
    let n = v.len() / 3;
    FieldState { t, e: v[..n].to_vec(), u: v[n..2 * n].to_vec(), sigma: v[2 * n..].to_vec() }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// `(Ė, u̇, σ̇)` at `state`.
pub fn rhs(state: &FieldState, op: &RegDerivOperator, params: &ModelParams) -> Result<Rates> {
    state.check_len(op.grid())?;
    let n = state.len();
    let mut out = vec![0.0; 3 * n];
    rhs_packed(&pack(state), op, params.b0, &mut Workspace::new(n), &mut out);
    if !all_finite(&out) {
        return Err(Error::NonFinite(format!("overflow at t = {}", state.t)));
    }
    let r = unpack(&out, state.t);
    Ok(Rates { e: r.e, u: r.u, sigma: r.sigma })
}

/// Gronwall-type a-priori bound on `max(|E|,|u|,|σ|)` over the horizon,
/// `(‖V₀‖∞ + T(L + |B₀|)) exp(3T(L + 1))` with `L = ‖φ'‖₁/ν`.
pub fn a_priori_bound(initial: &FieldState, op: &RegDerivOperator, params: &ModelParams) -> f64 {
    let l = op.norm_bound();
    let t = params.t_end;
    (initial.sup_norm() + t * (l + params.b0.abs())) * (3.0 * t * (l + 1.0)).exp()
}

/// Subinterval length on which Picard iteration is expected to contract.
pub fn contraction_horizon(op: &RegDerivOperator, b0: f64) -> f64 {
    PICARD_HORIZON_FACTOR / (op.norm_bound() + 2.0 + b0.abs())
}

fn new_solution(initial: &FieldState, op: &RegDerivOperator, params: &ModelParams, cfg: &SolverConfig, dt: f64, bound: f64) -> SpacetimeSolution {
    SpacetimeSolution {
        grid: *op.grid(),
        times: Vec::new(),
        states: Vec::new(),
        meta: RunMeta {
            eps: params.eps,
            nu: op.nu(),
            mollifier: op.mollifier().spec(),
            scaling: None,
            params: *params,
            solver: cfg.method.id().to_string(),
            dt,
            save_every: cfg.save_every,
            a_priori_bound: bound,
            guard_factor: cfg.guard_factor,
        },
        outcome: RunOutcome::Completed,
        boundary_contaminated: initial.boundary_contaminated(),
        picard: None,
    }
}

fn preflight(initial: &FieldState, cfg: &SolverConfig, op: &RegDerivOperator, params: &ModelParams) -> Result<()> {
    cfg.validate()?;
    params.validate()?;
    initial.check_len(op.grid())?;
    initial.check_finite()
}

/// Solves with classical RK4 on the method-of-lines system.
///
/// Runtime failures (overflow, guard breach) end the run early; the states
/// saved so far are kept and [`SpacetimeSolution::outcome`] says why.
pub fn solve_lines(initial: &FieldState, cfg: &SolverConfig, op: &RegDerivOperator, params: &ModelParams) -> Result<SpacetimeSolution> {
    if cfg.method != Method::LinesRk4 {
        return Err(Error::InvalidSolver("solve_lines needs method = lines_rk4".into()));
    }
    preflight(initial, cfg, op, params)?;
    cfg.check_step_bound(op)?;

    let steps = step_count(params.t_end, cfg.nominal_dt(op));
    let dt_abs = params.t_end / steps as f64;
    let dt = if cfg.backward { -dt_abs } else { dt_abs };
    let bound = a_priori_bound(initial, op, params);
    let limit = cfg.guard_factor * bound;

    let mut sol = new_solution(initial, op, params, cfg, dt_abs, bound);
    let mut v = pack(initial);
    let n3 = v.len();
    let t0 = initial.t;
    sol.push(unpack(&v, t0));

    let mut ws = Workspace::new(n3 / 3);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n3], vec![0.0; n3], vec![0.0; n3], vec![0.0; n3]);
    let mut stage = vec![0.0; n3];

    for step in 1..=steps {
        rhs_packed(&v, op, params.b0, &mut ws, &mut k1);
        for i in 0..n3 {
            stage[i] = v[i] + 0.5 * dt * k1[i];
        }
        rhs_packed(&stage, op, params.b0, &mut ws, &mut k2);
        for i in 0..n3 {
            stage[i] = v[i] + 0.5 * dt * k2[i];
        }
        rhs_packed(&stage, op, params.b0, &mut ws, &mut k3);
        for i in 0..n3 {
            stage[i] = v[i] + dt * k3[i];
        }
        rhs_packed(&stage, op, params.b0, &mut ws, &mut k4);
        for i in 0..n3 {
            v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        let t = t0 + step as f64 * dt;
        if !all_finite(&v) {
            sol.outcome = RunOutcome::Overflow { t };
            return Ok(sol);
        }
        let s = sup(&v);
        if s > limit {
            sol.push(unpack(&v, t));
            sol.outcome = RunOutcome::GuardAbort { t, sup: s, limit };
            return Ok(sol);
        }
        if step % cfg.save_every == 0 || step == steps {
            sol.push(unpack(&v, t));
        }
    }
    Ok(sol)
}

/// Result of Picard iteration on one subinterval.
#[derive(Debug, Clone, PartialEq)]
pub struct SubintervalSolve {
    /// Packed states at the `m + 1` quadrature nodes, first one the start value.
    pub nodes: Vec<Vec<f64>>,
    pub iterations: usize,
    pub final_update: f64,
}

/// Fixed-point iteration `V ← V(t₀) + ∫_{t₀}^{t} F(V) dτ` on `m` trapezoid
/// steps of size `dt`, starting from the constant-in-time guess.
fn picard_packed(start: &[f64], m: usize, dt: f64, op: &RegDerivOperator, b0: f64, tol: f64, max_iter: usize, t0: f64) -> Result<SubintervalSolve> {
    let n3 = start.len();
    let mut ws = Workspace::new(n3 / 3);
    let mut nodes = vec![start.to_vec(); m + 1];
    let mut rates = vec![vec![0.0; n3]; m + 1];
    let mut next = vec![vec![0.0; n3]; m + 1];
    let mut prev_update = f64::INFINITY;
    let mut strikes = 0;
    let t1 = t0 + m as f64 * dt;

    for iter in 1..=max_iter {
        for (node, r) in nodes.iter().zip(rates.iter_mut()) {
            rhs_packed(node, op, b0, &mut ws, r);
        }
        next[0].copy_from_slice(start);
        let mut update = 0.0f64;
        for j in 1..=m {
            let (done, todo) = next.split_at_mut(j);
            let (prev, cur) = (&done[j - 1], &mut todo[0]);
            for i in 0..n3 {
                cur[i] = prev[i] + 0.5 * dt * (rates[j - 1][i] + rates[j][i]);
                update = update.max((cur[i] - nodes[j][i]).abs());
            }
        }
        std::mem::swap(&mut nodes, &mut next);
        if !update.is_finite() {
            return Err(Error::PicardNonContraction { t0, t1 });
        }
        if update < tol {
            return Ok(SubintervalSolve { nodes, iterations: iter, final_update: update });
        }
        if update > prev_update {
            strikes += 1;
            if strikes >= PICARD_GROWTH_STRIKES {
                return Err(Error::PicardNonContraction { t0, t1 });
            }
        } else {
            strikes = 0;
        }
        prev_update = update;
        if iter == max_iter {
            return Err(Error::PicardMaxIter { max_iter, t0, t1, update });
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Picard iteration on a single subinterval of `m` steps, exposed for
/// contraction studies.
pub fn picard_subinterval(start: &FieldState, m: usize, dt: f64, cfg: &SolverConfig, op: &RegDerivOperator, b0: f64) -> Result<SubintervalSolve> {
    start.check_len(op.grid())?;
    picard_packed(&pack(start), m.max(1), dt, op, b0, cfg.picard_tol, cfg.picard_max_iter, start.t)
}

/// Solves the integrated system by Picard iteration, chaining subintervals
/// no longer than the contraction horizon.
pub fn solve_picard(initial: &FieldState, cfg: &SolverConfig, op: &RegDerivOperator, params: &ModelParams) -> Result<SpacetimeSolution> {
    if cfg.method != Method::Picard {
        return Err(Error::InvalidSolver("solve_picard needs method = picard".into()));
    }
    preflight(initial, cfg, op, params)?;

    let steps = step_count(params.t_end, cfg.nominal_dt(op));
    let dt_abs = params.t_end / steps as f64;
    let dt = if cfg.backward { -dt_abs } else { dt_abs };
    let horizon = cfg.picard_horizon.unwrap_or_else(|| contraction_horizon(op, params.b0));
    let per_sub = ((horizon / dt_abs) + 1e-9).floor().max(1.0) as usize;
    let bound = a_priori_bound(initial, op, params);
    let limit = cfg.guard_factor * bound;

    let mut sol = new_solution(initial, op, params, cfg, dt_abs, bound);
    let mut stats = PicardStats { subintervals: 0, max_iterations: 0, total_iterations: 0, final_update: 0.0 };
    let t0 = initial.t;
    let mut v = pack(initial);
    sol.push(unpack(&v, t0));

    let mut done = 0;
    while done < steps {
        let m = per_sub.min(steps - done);
        let ts = t0 + done as f64 * dt;
        let sub = picard_packed(&v, m, dt, op, params.b0, cfg.picard_tol, cfg.picard_max_iter, ts)?;
        stats.subintervals += 1;
        stats.total_iterations += sub.iterations;
        stats.max_iterations = stats.max_iterations.max(sub.iterations);
        stats.final_update = stats.final_update.max(sub.final_update);

        for (j, node) in sub.nodes.iter().enumerate().skip(1) {
            let k = done + j;
            let t = t0 + k as f64 * dt;
            if !all_finite(node) {
                sol.outcome = RunOutcome::Overflow { t };
                sol.picard = Some(stats);
                return Ok(sol);
            }
            let s = sup(node);
            if s > limit {
                sol.push(unpack(node, t));
                sol.outcome = RunOutcome::GuardAbort { t, sup: s, limit };
                sol.picard = Some(stats);
                return Ok(sol);
            }
            if k % cfg.save_every == 0 || k == steps {
                sol.push(unpack(node, t));
            }
        }
        v.clone_from(&sub.nodes[m]);
        done += m;
    }
    sol.picard = Some(stats);
    Ok(sol)
}

/// Dispatches on `cfg.method` and records the scaling schedule in the metadata.
pub fn solve(initial: &FieldState, cfg: &SolverConfig, op: &RegDerivOperator, params: &ModelParams, scaling: Option<ScalingFunction>) -> Result<SpacetimeSolution> {
    let mut sol = match cfg.method {
        Method::LinesRk4 => solve_lines(initial, cfg, op, params)?,
        Method::Picard => solve_picard(initial, cfg, op, params)?,
    };
    sol.meta.scaling = scaling;
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub amplitude: f64,
    /// Lipschitz constant of the discrete right-hand side in the sup norm.
    pub gronwall_rate: f64,
    pub times: Vec<f64>,
    pub differences: Vec<f64>,
    pub envelope: Vec<f64>,
    pub within_envelope: bool,
}

/// Runs the solver from `initial` and from `initial` plus uniform noise of
/// size `amplitude`, and compares the separation with `amplitude · e^{C|t|}`.
pub fn uniqueness_probe(initial: &FieldState, cfg: &SolverConfig, op: &RegDerivOperator, params: &ModelParams, amplitude: f64, seed: u64) -> Result<UniquenessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturbed = initial.clone();
    for v in perturbed.e.iter_mut().chain(perturbed.u.iter_mut()).chain(perturbed.sigma.iter_mut()) {
        *v += amplitude * rng.random_range(-1.0..=1.0);
    }
    let a = solve(initial, cfg, op, params, None)?;
    let b = solve(&perturbed, cfg, op, params, None)?;
    let l = op.norm_bound();
    let s = a.states.iter().chain(&b.states).map(|st| sup(&st.sigma)).fold(0.0, f64::max);
    let rate = (l + 2.0 + s).max(l + 1.0 + params.b0.abs()).max(l * (1.0 + s));

    let mut report = UniquenessReport {
        amplitude,
        gronwall_rate: rate,
        times: Vec::new(),
        differences: Vec::new(),
        envelope: Vec::new(),
        within_envelope: true,
    };
    for (sa, sb) in a.states.iter().zip(&b.states) {
        let d = sup(&pack(sa).iter().zip(pack(sb)).map(|(x, y)| x - y).collect::<Vec<_>>());
        let env = amplitude * (rate * (sa.t - initial.t).abs()).exp();
        report.within_envelope &= d <= env * (1.0 + 1e-9);
        report.times.push(sa.t);
        report.differences.push(d);
        report.envelope.push(env);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use crate::mollifier::{Mollifier, MollifierKind};

    fn setup(kind: MollifierKind, nu: f64, grid: &Grid) -> RegDerivOperator {
        RegDerivOperator::new(Mollifier::standard(kind), nu, grid).unwrap()
    }

    fn params(b0: f64, t_end: f64) -> ModelParams {
        ModelParams { b0, t_end, eps: 0.1, q: 0.0 }
    }

    fn smooth_state(g: &Grid, amp: f64) -> FieldState {
        FieldState {
            t: 0.0,
            e: g.sample(|x| amp * (-x * x).exp()),
            u: g.sample(|x| 0.5 * amp * (-(x - 0.3).powi(2)).exp()),
            sigma: g.sample(|x| amp * (-x * x).exp()),
        }
    }

    #[test]
    fn zero_state_has_zero_rates() {
        let g = Grid::new(-2.0, 2.0, 201).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let r = rhs(&FieldState::zeros(g.len(), 0.0), &op, &params(5.0, 1.0)).unwrap();
        for v in r.e.iter().chain(&r.u).chain(&r.sigma) {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn zero_velocity_reduces_e_rate() {
        let g = Grid::new(-2.0, 2.0, 401).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let mut s = FieldState::zeros(g.len(), 0.0);
        s.e = g.sample(|x| (2.0 * x).sin() * (-x * x).exp());
        s.sigma = g.sample(|x| (-4.0 * x * x).exp());
        let r = rhs(&s, &op, &params(3.0, 1.0)).unwrap();
        let de = op.apply(&s.e).unwrap();
        for i in 0..g.len() {
            assert!((r.e[i] - (-de[i] + s.sigma[i])).abs() < 1e-14);
        }
    }

    /// Straight-line re-implementation: per-point convolution sums with the
    /// textbook `sqrt(1+u²)` flux, no packing or scratch buffers.
    fn rhs_oracle(s: &FieldState, op: &RegDerivOperator, b0: f64) -> Rates {
        let n = s.len();
        let st = op.stencil();
        let conv = |f: &dyn Fn(usize) -> f64, i: usize| -> f64 {
            let mut acc = 0.0;
            for (k, w) in st.weights.iter().enumerate() {
                let j = i as isize - (st.j_min + k as isize);
                if j >= 0 && (j as usize) < n {
                    acc += w * f(j as usize);
                }
            }
            acc
        };
        let av = |y: f64| y / (1.0 + y * y).sqrt();
        let mut r = Rates { e: vec![0.0; n], u: vec![0.0; n], sigma: vec![0.0; n] };
        for i in 0..n {
            r.e[i] = -conv(&|j| s.e[j], i) + s.sigma[i] * (1.0 - av(s.u[i]));
            r.u[i] = -conv(&|j| (1.0 + s.u[j] * s.u[j]).sqrt(), i) + s.e[i] + b0 * av(s.u[i]);
            r.sigma[i] = -conv(&|j| s.sigma[j] * av(s.u[j]), i);
        }
        r
    }

    #[test]
    fn rhs_matches_independent_evaluation() {
        let g = Grid::new(-3.0, 3.0, 601).unwrap();
        let op = setup(MollifierKind::LeftBump, 0.08, &g);
        let s = smooth_state(&g, 0.7);
        let r = rhs(&s, &op, &params(1.3, 1.0)).unwrap();
        let o = rhs_oracle(&s, &op, 1.3);
        // The oracle's sqrt(1+u²) flux differs from the shifted one only by
        // D_h applied to a constant, which vanishes away from the padding.
        for i in op.interior() {
            assert!((r.e[i] - o.e[i]).abs() < 1e-12);
            assert!((r.u[i] - o.u[i]).abs() < 1e-10);
            assert!((r.sigma[i] - o.sigma[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::new(-2.0, 2.0, 201).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let sol = solve_lines(&FieldState::zeros(g.len(), 0.0), &SolverConfig::rk4(), &op, &params(5.0, 1.0)).unwrap();
        assert!(sol.outcome.is_completed());
        assert!(sol.states.iter().all(|s| s.sup_norm() == 0.0));
        assert!((sol.times.last().unwrap() - 1.0).abs() < 1e-12);

        let p = solve_picard(&FieldState::zeros(g.len(), 0.0), &SolverConfig::picard(), &op, &params(5.0, 1.0)).unwrap();
        let stats = p.picard.unwrap();
        assert_eq!(stats.max_iterations, 1);
        assert!(p.states.iter().all(|s| s.sup_norm() == 0.0));
    }

    #[test]
    fn step_bound_enforced() {
        let g = Grid::new(-2.0, 2.0, 201).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let cfg = SolverConfig::rk4().with_dt(op.max_stable_dt() * 1.01);
        let err = solve_lines(&FieldState::zeros(g.len(), 0.0), &cfg, &op, &params(0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::StepBound { .. }));
    }

    #[test]
    fn rk4_is_fourth_order() {
        // Oracle: Richardson ratio between dt, dt/2 and dt/4 runs.
        let g = Grid::new(-6.0, 6.0, 601).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let s0 = smooth_state(&g, 0.3);
        let p = params(1.0, 0.5);
        let run = |dt: f64| solve_lines(&s0, &SolverConfig::rk4().with_dt(dt), &op, &p).unwrap();
        let (a, b, c) = (run(0.025), run(0.0125), run(0.00625));
        let diff = |x: &SpacetimeSolution, y: &SpacetimeSolution| {
            sup(&pack(x.last().unwrap()).iter().zip(pack(y.last().unwrap())).map(|(p, q)| p - q).collect::<Vec<_>>())
        };
        let ratio = diff(&a, &b) / diff(&b, &c);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn backward_run_returns_to_start() {
        let g = Grid::new(-6.0, 6.0, 601).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let s0 = smooth_state(&g, 0.2);
        let p = params(0.5, 0.3);
        let fwd = solve_lines(&s0, &SolverConfig::rk4().with_dt(0.005), &op, &p).unwrap();
        let mut end = fwd.last().unwrap().clone();
        end.t = 0.0;
        let cfg = SolverConfig { backward: true, ..SolverConfig::rk4().with_dt(0.005) };
        let back = solve_lines(&end, &cfg, &op, &p).unwrap();
        assert!(back.times.windows(2).all(|w| w[1] < w[0]));
        let d = sup(&pack(back.last().unwrap()).iter().zip(pack(&s0)).map(|(x, y)| x - y).collect::<Vec<_>>());
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn picard_agrees_with_rk4_on_smooth_data() {
        let g = Grid::new(-6.0, 6.0, 601).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let s0 = smooth_state(&g, 0.1);
        let p = params(1.0, 0.2);
        let rk = solve_lines(&s0, &SolverConfig::rk4().with_dt(0.0125), &op, &p).unwrap();
        let pc = solve_picard(&s0, &SolverConfig::picard().with_dt(0.0125 / 16.0).with_save_every(16), &op, &p).unwrap();
        assert_eq!(rk.times.len(), pc.times.len());
        for (a, b) in rk.states.iter().zip(&pc.states) {
            assert!((a.t - b.t).abs() < 1e-12);
            let d = sup(&pack(a).iter().zip(pack(b)).map(|(x, y)| x - y).collect::<Vec<_>>());
            assert!(d < 1e-5, "t = {} diff {d}", a.t);
        }
    }

    #[test]
    fn picard_iterations_grow_with_horizon() {
        let g = Grid::new(-6.0, 6.0, 601).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let s0 = smooth_state(&g, 0.1);
        let tc = contraction_horizon(&op, 1.0);
        let cfg = SolverConfig { picard_max_iter: 500, ..SolverConfig::picard() };
        let iters: Vec<usize> = [0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|&f| {
                let m = 16;
                picard_subinterval(&s0, m, f * tc / m as f64, &cfg, &op, 1.0).unwrap().iterations
            })
            .collect();
        assert!(iters.windows(2).all(|w| w[1] >= w[0]), "{iters:?}");
        assert!(iters[3] > iters[0], "{iters:?}");
    }

    #[test]
    fn picard_reports_non_contraction() {
        let g = Grid::new(-6.0, 6.0, 601).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let mut s0 = smooth_state(&g, 0.5);
        // High-frequency data excites the stiff part of D_h.
        s0.e = g.sample(|x| (60.0 * x).sin() * (-x * x).exp());
        let tc = contraction_horizon(&op, 1.0);
        let cfg = SolverConfig { picard_max_iter: 500, ..SolverConfig::picard() };
        let err = picard_subinterval(&s0, 256, 100.0 * tc / 256.0, &cfg, &op, 1.0).unwrap_err();
        assert!(matches!(err, Error::PicardNonContraction { .. } | Error::PicardMaxIter { .. }), "{err}");
        let capped = SolverConfig { picard_max_iter: 3, ..SolverConfig::picard() };
        let err = picard_subinterval(&s0, 8, tc / 8.0, &capped, &op, 1.0).unwrap_err();
        assert!(matches!(err, Error::PicardMaxIter { max_iter: 3, .. }));
    }

    #[test]
    fn a_priori_bound_shape() {
        let g = Grid::new(-2.0, 2.0, 201).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let z = FieldState::zeros(g.len(), 0.0);
        let l = op.norm_bound();
        let b = a_priori_bound(&z, &op, &params(0.0, 0.5));
        assert!((b - 0.5 * l * (1.5 * (l + 1.0)).exp()).abs() < 1e-9 * b);
        let s = smooth_state(&g, 1.0);
        let base = a_priori_bound(&s, &op, &params(1.0, 0.5));
        assert!(a_priori_bound(&s, &op, &params(1.0, 0.6)) > base);
        assert!(a_priori_bound(&s, &op, &params(-2.0, 0.5)) > base);
        assert!(a_priori_bound(&smooth_state(&g, 2.0), &op, &params(1.0, 0.5)) > base);
    }

    #[test]
    fn completed_run_respects_a_priori_bound() {
        let g = Grid::new(-6.0, 6.0, 601).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let s0 = smooth_state(&g, 1.0);
        let p = params(1.0, 0.5);
        let bound = a_priori_bound(&s0, &op, &p);
        assert!(SolverConfig { guard_factor: 0.5, ..SolverConfig::rk4() }.validate().is_err());
        let sol = solve_lines(&s0, &SolverConfig::rk4(), &op, &p).unwrap();
        assert!(sol.outcome.is_completed());
        assert!(sol.sup_norm() < bound);
        assert_eq!(sol.meta.a_priori_bound, bound);
    }

    #[test]
    fn charge_and_transport_invariants() {
        let g = Grid::new(-8.0, 8.0, 801).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let s0 = smooth_state(&g, 0.3);
        let sol = solve_lines(&s0, &SolverConfig::rk4(), &op, &params(1.0, 0.5)).unwrap();
        let q0 = s0.total_charge(&g);
        for s in &sol.states {
            assert!((s.total_charge(&g) - q0).abs() <= 1e-6 * q0);
        }
        // Q = σ - D_h E evolves by RK4 on Q' = -D_h Q exactly.
        let q_of = |s: &FieldState| {
            let de = op.apply(&s.e).unwrap();
            s.sigma.iter().zip(de).map(|(a, b)| a - b).collect::<Vec<f64>>()
        };
        let mut q = q_of(&s0);
        let dt = sol.meta.dt;
        for s in sol.states.iter().skip(1) {
            let f = |v: &[f64]| op.apply(v).unwrap().into_iter().map(|x| -x).collect::<Vec<f64>>();
            let add = |v: &[f64], k: &[f64], h: f64| v.iter().zip(k).map(|(a, b)| a + h * b).collect::<Vec<f64>>();
            let k1 = f(&q);
            let k2 = f(&add(&q, &k1, dt / 2.0));
            let k3 = f(&add(&q, &k2, dt / 2.0));
            let k4 = f(&add(&q, &k3, dt));
            for i in 0..q.len() {
                q[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let qs = q_of(s);
            assert!(sup(&qs.iter().zip(&q).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-10);
        }
    }

    #[test]
    fn perturbations_stay_in_gronwall_envelope() {
        let g = Grid::new(-4.0, 4.0, 401).unwrap();
        let op = setup(MollifierKind::SymmetricBump, 0.1, &g);
        let r = uniqueness_probe(&smooth_state(&g, 0.5), &SolverConfig::rk4(), &op, &params(1.0, 0.5), 1e-10, 7).unwrap();
        assert!(r.within_envelope, "{r:?}");
        assert!(r.differences[0] > 0.0 && r.differences[0] <= 1e-10);
    }
}
