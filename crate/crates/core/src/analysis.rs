//! Probes on completed solutions: test-function pairings, support
//! confinement, the transport residual of `Q = σ - D_h E`, ε-sweeps with
//! Cauchy verdicts, the linearized closed-form reference and the blow-up
//! probe for `σ a(u)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldState, RunOutcome, SpacetimeSolution};
use crate::mollifier::Mollifier;
use crate::nonlinearity::a;
use crate::quad;
use crate::regops::RegDerivOperator;

/// Smooth bump `exp(1 - 1/(1 - r²))`, `r² = ((t-t₀)/r_t)² + ((x-x₀)/r_x)²`,
/// equal to 1 at its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction2D {
    /// `(t₀, x₀)`.
    pub center: (f64, f64),
    /// `(r_t, r_x)`.
    pub radii: (f64, f64),
}

impl TestFunction2D {
    pub fn new(t0: f64, x0: f64, rt: f64, rx: f64) -> Result<Self> {
        let f = Self { center: (t0, x0), radii: (rt, rx) };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let (t0, x0) = self.center;
        let (rt, rx) = self.radii;
        if !(rt > 0.0 && rx > 0.0 && t0.is_finite() && x0.is_finite() && rt.is_finite() && rx.is_finite()) {
            return Err(Error::Config(format!("test function radii ({rt}, {rx}) must be positive")));
        }
        Ok(())
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.center.0 - self.radii.0, self.center.0 + self.radii.0)
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.center.1 - self.radii.1, self.center.1 + self.radii.1)
    }

    fn r2(&self, t: f64, x: f64) -> f64 {
        let st = (t - self.center.0) / self.radii.0;
        let sx = (x - self.center.1) / self.radii.1;
        st * st + sx * sx
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let r2 = self.r2(t, x);
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - r2)).exp()
        }
    }

    /// `∂ψ/∂(r²)`.
    fn dr2(&self, t: f64, x: f64) -> f64 {
        let r2 = self.r2(t, x);
        if r2 >= 1.0 {
            0.0
        } else {
            let d = 1.0 - r2;
            -(1.0 - 1.0 / d).exp() / (d * d)
        }
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        self.dr2(t, x) * 2.0 * (t - self.center.0) / (self.radii.0 * self.radii.0)
    }

    pub fn dx(&self, t: f64, x: f64) -> f64 {
        self.dr2(t, x) * 2.0 * (x - self.center.1) / (self.radii.1 * self.radii.1)
    }

    /// `∫ ψ(t, t) dt`, the pairing of `δ(t - x)`.
    pub fn diagonal_integral(&self) -> f64 {
        let (a, b) = self.t_range();
        quad::integrate(|t| self.eval(t, t), a, b, 1e-14, 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    E,
    U,
    Sigma,
    /// `σ - D_h E`.
    Q,
}

/// Rebuilds the run's regularized derivative from its metadata.
pub fn operator_for(sol: &SpacetimeSolution) -> Result<RegDerivOperator> {
    RegDerivOperator::new(Mollifier::from_spec(&sol.meta.mollifier)?, sol.meta.nu, &sol.grid)
}

/// `Q = σ - D_h E`.
pub fn q_field(state: &FieldState, op: &RegDerivOperator) -> Result<Vec<f64>> {
    let de = op.apply(&state.e)?;
    Ok(state.sigma.iter().zip(de).map(|(s, d)| s - d).collect())
}

fn field_values(state: &FieldState, field: Field, op: Option<&RegDerivOperator>) -> Result<Vec<f64>> {
    Ok(match field {
        Field::E => state.e.clone(),
        Field::U => state.u.clone(),
        Field::Sigma => state.sigma.clone(),
        Field::Q => q_field(state, op.expect("operator built for Q"))?,
    })
}

/// States ordered by increasing time.
fn chronological(sol: &SpacetimeSolution) -> Vec<&FieldState> {
    let mut v: Vec<&FieldState> = sol.states.iter().collect();
    v.sort_by(|a, b| a.t.total_cmp(&b.t));
    v
}

/// `∫∫ field · ψ dx dt` by trapezoidal quadrature over the grid and the saved times.
pub fn pair(sol: &SpacetimeSolution, field: Field, psi: &TestFunction2D) -> Result<f64> {
    psi.validate()?;
    let (tmin, tmax) = sol.time_window();
    let (ta, tb) = psi.t_range();
    let (xa, xb) = psi.x_range();
    let slack = 1e-12 * (1.0 + tmax.abs().max(tmin.abs()));
    if ta < tmin - slack || tb > tmax + slack {
        return Err(Error::OutsideWindow { t: if ta < tmin { ta } else { tb }, x: psi.center.1 });
    }
    if xa < sol.grid.x_min() || xb > sol.grid.x_max() {
        return Err(Error::OutsideWindow { t: psi.center.0, x: if xa < sol.grid.x_min() { xa } else { xb } });
    }
    let op = if field == Field::Q { Some(operator_for(sol)?) } else { None };
    let g = &sol.grid;
    let lo = g.first_at_or_after(xa);
    let hi = g.end_at_or_before(xb);
    let states = chronological(sol);
    let mut ts = Vec::with_capacity(states.len());
    let mut slices = Vec::with_capacity(states.len());
    for s in states {
        ts.push(s.t);
        if s.t < ta || s.t > tb {
            slices.push(0.0);
            continue;
        }
        let f = field_values(s, field, op.as_ref())?;
        // ψ vanishes at the ends of its support, so interior weights suffice.
        let acc: f64 = (lo..hi).map(|i| f[i] * psi.eval(s.t, g.x(i))).sum();
        slices.push(acc * g.dx());
    }
    Ok(quad::trapezoid_nonuniform(&ts, &slices))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `{x ≥ x₀}`.
    Right,
    /// `{x ≤ x₀}`.
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Triple {
    pub e: f64,
    pub u: f64,
    pub sigma: f64,
}

impl Triple {
    pub fn max(&self) -> f64 {
        self.e.max(self.u).max(self.sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub x0: f64,
    pub side: Side,
    /// Largest magnitudes on the probed half-line over all saved states.
    pub sup: Triple,
    /// Largest magnitudes anywhere.
    pub global_max: Triple,
    /// `sup / global_max` per field (0 when the field vanishes).
    pub relative: Triple,
}

/// Per-field sup over `{x ≥ x₀}` (or `{x ≤ x₀}`) and all saved times.
pub fn support_probe(sol: &SpacetimeSolution, x0: f64, side: Side) -> Result<SupportReport> {
    let g = &sol.grid;
    if !g.contains(x0) {
        return Err(Error::OutsideWindow { t: sol.time_window().0, x: x0 });
    }
    let range = match side {
        Side::Right => g.first_at_or_after(x0)..g.len(),
        Side::Left => 0..g.end_at_or_before(x0),
    };
    let mut sup = Triple::default();
    let mut all = Triple::default();
    let upd = |m: &mut f64, v: &[f64], r: std::ops::Range<usize>| {
        *m = v[r].iter().fold(*m, |acc, x| acc.max(x.abs()));
    };
    for s in &sol.states {
        upd(&mut sup.e, &s.e, range.clone());
        upd(&mut sup.u, &s.u, range.clone());
        upd(&mut sup.sigma, &s.sigma, range.clone());
        upd(&mut all.e, &s.e, 0..s.len());
        upd(&mut all.u, &s.u, 0..s.len());
        upd(&mut all.sigma, &s.sigma, 0..s.len());
    }
    let rel = |s: f64, m: f64| if m > 0.0 { s / m } else { 0.0 };
    Ok(SupportReport {
        x0,
        side,
        sup,
        global_max: all,
        relative: Triple { e: rel(sup.e, all.e), u: rel(sup.u, all.u), sigma: rel(sup.sigma, all.sigma) },
    })
}

/// `max |∂t Q + D_h Q|` over interior grid points and interior saved times,
/// with `∂t` the three-point centered difference on the save grid.
pub fn transport_residual(sol: &SpacetimeSolution) -> Result<f64> {
    let op = operator_for(sol)?;
    transport_residual_with(sol, &op)
}

pub fn transport_residual_with(sol: &SpacetimeSolution, op: &RegDerivOperator) -> Result<f64> {
    let states = chronological(sol);
    if states.len() < 3 {
        return Err(Error::InvalidSolver("transport residual needs at least three saved states".into()));
    }
    let save_dt = states.windows(2).map(|w| w[1].t - w[0].t).fold(0.0, f64::max);
    let limit = op.nu() / 4.0;
    if save_dt > limit * (1.0 + 1e-9) {
        return Err(Error::SaveGridTooCoarse { save_dt, limit });
    }
    let n = sol.grid.len();
    let inner = op.interior();
    // Q already carries one application of D_h, so stay two stencil widths in.
    let (lo, hi) = (2 * inner.start, n.saturating_sub(2 * (n - inner.end)));
    let qs: Vec<Vec<f64>> = states.iter().map(|s| q_field(s, op)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for k in 1..qs.len() - 1 {
        let h1 = states[k].t - states[k - 1].t;
        let h2 = states[k + 1].t - states[k].t;
        let dq = op.apply(&qs[k])?;
        for i in lo..hi {
            let qt = (h1 * h1 * qs[k + 1][i] - h2 * h2 * qs[k - 1][i] + (h2 * h2 - h1 * h1) * qs[k][i]) / (h1 * h2 * (h1 + h2));
            worst = worst.max((qt + dq[i]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Converging,
    Diverging { reason: String },
    Inconclusive,
}

/// One pairing tracked across an ε-sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub name: String,
    pub field: Field,
    pub psi: TestFunction2D,
    /// Value the pairing would need to approach for the expected limit
    /// (e.g. `q ∫ψ(t,t)dt` for a charge on the light line).
    #[serde(default)]
    pub target: Option<f64>,
    /// Start of the half-line `{x ≥ x₀}` that must stay field-free for the
    /// support obstruction; defaults to the left edge of `ψ`.
    #[serde(default)]
    pub support_x0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableResult {
    pub name: String,
    pub field: Field,
    pub target: Option<f64>,
    /// ε values of the runs that completed, in schedule order.
    pub eps: Vec<f64>,
    pub pairings: Vec<f64>,
    /// `|p(ε_{i+1}) - p(ε_i)|`.
    pub increments: Vec<f64>,
    /// Largest relative field magnitude found on `{x ≥ support_x0}`.
    pub support_leak: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub eps: f64,
    pub completed: bool,
    /// `None` when the run could not be set up or solved at all.
    pub outcome: Option<RunOutcome>,
    pub message: Option<String>,
    pub boundary_contaminated: bool,
    pub a_priori_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub eps_schedule: Vec<f64>,
    pub runs: Vec<SweepRun>,
    pub observables: Vec<ObservableResult>,
}

/// Relative leak allowed before a half-line counts as occupied.
pub const SUPPORT_TOL: f64 = 1e-8;
/// Pairings this far (relative) from the target count as bounded away from it.
pub const OBSTRUCTION_GAP: f64 = 0.5;

/// Three-valued verdict on a pairing sequence.
///
/// A known target that every pairing misses by at least half its size while
/// the fields stay off the test function's half-line is an obstruction.
/// Otherwise increments that are all negligible or strictly decreasing over
/// the last (up to) three steps mean converging; increments growing over
/// at least three steps mean diverging.
pub fn classify(pairings: &[f64], target: Option<f64>, confined: Option<bool>) -> Verdict {
    if let (Some(tg), Some(true)) = (target, confined) {
        if tg != 0.0 && !pairings.is_empty() && pairings.iter().all(|p| (p - tg).abs() >= OBSTRUCTION_GAP * tg.abs()) {
            return Verdict::Diverging { reason: "support obstruction".into() };
        }
    }
    if pairings.len() < 2 {
        return Verdict::Inconclusive;
    }
    let inc: Vec<f64> = pairings.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let scale = pairings.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    if inc.iter().all(|d| *d <= 1e-12 * scale) {
        return Verdict::Converging;
    }
    let tail = &inc[inc.len().saturating_sub(3)..];
    if tail.windows(2).all(|w| w[1] < w[0]) {
        return Verdict::Converging;
    }
    if tail.len() >= 3 && tail.windows(2).all(|w| w[1] > w[0]) {
        return Verdict::Diverging { reason: "increments growing".into() };
    }
    Verdict::Inconclusive
}

/// Runs `run(ε)` for every ε (in parallel on the current rayon pool), pairs
/// each observable and classifies the sequences. Failed runs are reported and
/// dropped from the pairing sequences.
pub fn limit_sweep<F>(schedule: &[f64], observables: &[Observable], run: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<SpacetimeSolution> + Sync,
{
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] >= w[0]) || schedule.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("eps schedule must be positive and strictly decreasing".into()));
    }
    for o in observables {
        o.psi.validate()?;
    }
    type Row = (SweepRun, Option<Vec<(f64, f64)>>);
    let rows: Vec<Row> = schedule
        .par_iter()
        .map(|&eps| {
            let failed = |msg: String, sol: Option<&SpacetimeSolution>| SweepRun {
                eps,
                completed: false,
                outcome: sol.map(|s| s.outcome.clone()),
                message: Some(msg),
                boundary_contaminated: sol.is_some_and(|s| s.boundary_contaminated),
                a_priori_bound: sol.map(|s| s.meta.a_priori_bound),
            };
            let sol = match run(eps) {
                Ok(s) => s,
                Err(e) => return (failed(e.to_string(), None), None),
            };
            if !sol.outcome.is_completed() {
                return (failed(format!("{:?}", sol.outcome), Some(&sol)), None);
            }
            let mut vals = Vec::with_capacity(observables.len());
            for o in observables {
                let p = match pair(&sol, o.field, &o.psi) {
                    Ok(p) => p,
                    Err(e) => return (failed(e.to_string(), Some(&sol)), None),
                };
                let x0 = o.support_x0.unwrap_or(o.psi.x_range().0);
                let leak = match support_probe(&sol, x0, Side::Right) {
                    Ok(r) => r.relative.max(),
                    Err(e) => return (failed(e.to_string(), Some(&sol)), None),
                };
                vals.push((p, leak));
            }
            let ok = SweepRun {
                eps,
                completed: true,
                outcome: Some(RunOutcome::Completed),
                message: None,
                boundary_contaminated: sol.boundary_contaminated,
                a_priori_bound: Some(sol.meta.a_priori_bound),
            };
            (ok, Some(vals))
        })
        .collect();

    let mut results = Vec::with_capacity(observables.len());
    for (k, o) in observables.iter().enumerate() {
        let mut eps = Vec::new();
        let mut pairings = Vec::new();
        let mut leak = 0.0f64;
        for (r, vals) in &rows {
            if let Some(v) = vals {
                eps.push(r.eps);
                pairings.push(v[k].0);
                leak = leak.max(v[k].1);
            }
        }
        let increments = pairings.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let confined = if pairings.is_empty() { None } else { Some(leak <= SUPPORT_TOL) };
        results.push(ObservableResult {
            name: o.name.clone(),
            field: o.field,
            target: o.target,
            verdict: classify(&pairings, o.target, confined),
            eps,
            pairings,
            increments,
            support_leak: confined.map(|_| leak),
        });
    }
    Ok(SweepResult {
        eps_schedule: schedule.to_vec(),
        runs: rows.into_iter().map(|(r, _)| r).collect(),
        observables: results,
    })
}

fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Closed-form solution of the linearized problem with a point charge `q`
/// at the origin: `E = q(H(x) - H(x-t))`, `u = q(t-x)(H(x) - H(x-t))`,
/// with `H(0) = 1/2`. Returns `(E, u)`.
pub fn linearized_reference(q: f64, t: f64, x: f64) -> (f64, f64) {
    let w = heaviside(x) - heaviside(x - t);
    (q * w, q * (t - x) * w)
}

/// The linearized charge `σ = q δ(x)` as a pairing: `q ∫ψ(t, 0) dt`.
pub fn linearized_sigma_pairing(q: f64, psi: &TestFunction2D) -> f64 {
    let (a, b) = psi.t_range();
    q * quad::integrate(|t| psi.eval(t, 0.0), a, b, 1e-14, 1e-12)
}

/// Both sides of the weak forms of `∂t E + ∂x E = σ` and `∂t u = E` for the
/// closed-form reference (the σ equation `∂t σ = 0` holds identically).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakForm {
    /// `-∫∫ E (ψ_t + ψ_x)`.
    pub e_lhs: f64,
    /// `q ∫ ψ(t, 0) dt`.
    pub e_rhs: f64,
    /// `-∫∫ u ψ_t`.
    pub u_lhs: f64,
    /// `∫∫ E ψ`.
    pub u_rhs: f64,
}

impl WeakForm {
    pub fn max_residual(&self) -> f64 {
        (self.e_lhs - self.e_rhs).abs().max((self.u_lhs - self.u_rhs).abs())
    }
}

/// Integrates `g(t, x)` over the wedge `0 < x < t` intersected with the
/// support box of `ψ`, by nested adaptive quadrature.
fn wedge_integral<G: Fn(f64, f64) -> f64>(psi: &TestFunction2D, g: G) -> f64 {
    let (ta, tb) = psi.t_range();
    let (xa, xb) = psi.x_range();
    let inner = |t: f64| {
        let lo = xa.max(0.0);
        let hi = xb.min(t);
        if hi <= lo {
            0.0
        } else {
            quad::integrate(|x| g(t, x), lo, hi, 1e-15, 1e-13)
        }
    };
    quad::integrate_split(inner, ta.max(0.0), tb.max(0.0), &[xa, xb], 1e-14, 1e-12)
}

/// Weak-form sides for `ψ` supported in `t > 0`, computed from the closed
/// form by quadrature.
pub fn linearized_weak_form(q: f64, psi: &TestFunction2D) -> Result<WeakForm> {
    psi.validate()?;
    if psi.t_range().0 <= 0.0 {
        return Err(Error::Config("test function must be supported in t > 0".into()));
    }
    Ok(WeakForm {
        e_lhs: -q * wedge_integral(psi, |t, x| psi.dt(t, x) + psi.dx(t, x)),
        e_rhs: linearized_sigma_pairing(q, psi),
        u_lhs: -q * wedge_integral(psi, |t, x| (t - x) * psi.dt(t, x)),
        u_rhs: q * wedge_integral(psi, |t, x| psi.eval(t, x)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedComparison {
    pub q: f64,
    pub times: Vec<f64>,
    /// `‖E_ε(t) - E_ref(t)‖_{L¹}` per saved time.
    pub err_e: Vec<f64>,
    pub err_u: Vec<f64>,
    pub max_err_e: f64,
    pub max_err_u: f64,
}

/// L¹-in-space distance from the linearized closed form at every saved time.
pub fn compare_linearized(sol: &SpacetimeSolution, q: f64) -> LinearizedComparison {
    let g = &sol.grid;
    let mut out = LinearizedComparison { q, times: vec![], err_e: vec![], err_u: vec![], max_err_e: 0.0, max_err_u: 0.0 };
    for s in chronological(sol) {
        let (mut de, mut du) = (vec![0.0; g.len()], vec![0.0; g.len()]);
        for i in 0..g.len() {
            let (e, u) = linearized_reference(q, s.t, g.x(i));
            de[i] = (s.e[i] - e).abs();
            du[i] = (s.u[i] - u).abs();
        }
        let (ee, eu) = (quad::trapezoid(&de, g.dx()), quad::trapezoid(&du, g.dx()));
        out.max_err_e = out.max_err_e.max(ee);
        out.max_err_u = out.max_err_u.max(eu);
        out.times.push(s.t);
        out.err_e.push(ee);
        out.err_u.push(eu);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowUpRow {
    pub eps: f64,
    /// `max |σ a(u)|` over saved times and `|x - center| ≤ window`.
    pub peak: f64,
    pub peak_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowUpReport {
    pub center: f64,
    pub window: f64,
    pub rows: Vec<BlowUpRow>,
    /// Least-squares slope of `ln peak` against `ln(1/ε)` over rows with a
    /// positive peak; `None` with fewer than two such rows.
    pub exponent: Option<f64>,
}

/// Peak of the product term `σ a(u)` near `center`, per run, with a power-law fit.
pub fn blow_up_probe(runs: &[SpacetimeSolution], center: f64, window: f64) -> BlowUpReport {
    let mut rows: Vec<BlowUpRow> = runs
        .iter()
        .map(|sol| {
            let g = &sol.grid;
            let lo = g.first_at_or_after(center - window);
            let hi = g.end_at_or_before(center + window);
            let mut row = BlowUpRow { eps: sol.meta.eps, peak: 0.0, peak_time: 0.0 };
            for s in &sol.states {
                for i in lo..hi {
                    let v = (s.sigma[i] * a(s.u[i])).abs();
                    if v > row.peak {
                        row.peak = v;
                        row.peak_time = s.t;
                    }
                }
            }
            row
        })
        .collect();
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.peak > 0.0).map(|r| ((1.0 / r.eps).ln(), r.peak.ln())).collect();
    let exponent = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    BlowUpReport { center, window, rows, exponent }
}
