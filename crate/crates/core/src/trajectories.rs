//! World lines of charged particles through a solved velocity field,
//! `ẇ(r) = a(u(r, w(r)))`, `w(t₀) = x₀`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::SpacetimeSolution;
use crate::nonlinearity::{a, sqrt1p_sq};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `(t₀, x₀)`.
    pub origin: (f64, f64),
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    /// The path would have left the solution window; samples stop before it.
    pub exited: bool,
}

impl Trajectory {
    /// `max |Δw/Δr|` over consecutive samples.
    pub fn max_speed(&self) -> f64 {
        self.r
            .windows(2)
            .zip(self.w.windows(2))
            .map(|(r, w)| ((w[1] - w[0]) / (r[1] - r[0])).abs())
            .fold(0.0, f64::max)
    }
}

/// Bilinear interpolation of `u` in `(t, x)` from the saved states.
pub struct VelocitySampler<'a> {
    sol: &'a SpacetimeSolution,
}

impl<'a> VelocitySampler<'a> {
    pub fn new(sol: &'a SpacetimeSolution) -> Result<Self> {
        if sol.states.is_empty() {
            return Err(Error::Config("solution has no saved states".into()));
        }
        if sol.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("trajectories need a forward solution".into()));
        }
        Ok(Self { sol })
    }

    /// Largest spacing of the save grid.
    pub fn save_dt(&self) -> f64 {
        self.sol.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn contains(&self, t: f64, x: f64) -> bool {
        let ts = &self.sol.times;
        t >= ts[0] && t <= ts[ts.len() - 1] && self.sol.grid.contains(x)
    }

    /// `u(t, x)`, or `None` outside the window.
    pub fn u(&self, t: f64, x: f64) -> Option<f64> {
        if !self.contains(t, x) {
            return None;
        }
        let ts = &self.sol.times;
        let g = &self.sol.grid;
        let k = ts.partition_point(|&s| s <= t).clamp(1, ts.len().max(2) - 1) - 1;
        let (k1, lam) = if ts.len() == 1 { (0, 0.0) } else { (k + 1, (t - ts[k]) / (ts[k + 1] - ts[k])) };
        let pos = ((x - g.x_min()) / g.dx()).clamp(0.0, (g.len() - 1) as f64);
        let i = (pos.floor() as usize).min(g.len() - 2);
        let mu = pos - i as f64;
        let at = |s: usize| (1.0 - mu) * self.sol.states[s].u[i] + mu * self.sol.states[s].u[i + 1];
        Some((1.0 - lam) * at(k) + lam * at(k1))
    }
}

fn check_request(s: &VelocitySampler, start: (f64, f64), r_end: f64, dr: f64) -> Result<()> {
    if !s.contains(start.0, start.1) {
        return Err(Error::OutsideWindow { t: start.0, x: start.1 });
    }
    if !(dr > 0.0 && r_end > start.0) {
        return Err(Error::Config(format!("need dr > 0 and r_end > t0 (dr = {dr}, r_end = {r_end}, t0 = {})", start.0)));
    }
    let save_dt = s.save_dt();
    if save_dt > dr * (1.0 + 1e-9) {
        return Err(Error::SaveGridTooCoarse { save_dt, limit: dr });
    }
    Ok(())
}

/// RK4 in `r` from `start` to `r_end` with step at most `dr`.
pub fn integrate_world_line(sol: &SpacetimeSolution, start: (f64, f64), r_end: f64, dr: f64) -> Result<Trajectory> {
    let s = VelocitySampler::new(sol)?;
    check_request(&s, start, r_end, dr)?;
    let steps = ((r_end - start.0) / dr - 1e-9).ceil().max(1.0) as usize;
    let h = (r_end - start.0) / steps as f64;
    let f = |r: f64, w: f64| s.u(r, w).map(a);

    let mut tr = Trajectory { origin: start, r: vec![start.0], w: vec![start.1], exited: false };
    let mut w = start.1;
    for k in 0..steps {
        let r = start.0 + k as f64 * h;
        let next = (|| {
            let k1 = f(r, w)?;
            let k2 = f(r + 0.5 * h, w + 0.5 * h * k1)?;
            let k3 = f(r + 0.5 * h, w + 0.5 * h * k2)?;
            let k4 = f(r + h, w + h * k3)?;
            Some(w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        })();
        match next {
            Some(v) if s.contains(r + h, v) => {
                w = v;
                tr.r.push(start.0 + (k + 1) as f64 * h);
                tr.w.push(w);
            }
            _ => {
                tr.exited = true;
                break;
            }
        }
    }
    Ok(tr)
}

/// Integrates several starts concurrently; each entry fails independently.
pub fn integrate_many(sol: &SpacetimeSolution, starts: &[(f64, f64)], r_end: f64, dr: f64) -> Vec<Result<Trajectory>> {
    starts.par_iter().map(|&st| integrate_world_line(sol, st, r_end, dr)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReparamCheck {
    /// Largest `|w(r) - z₁(z₀⁻¹(r))|` over the compared samples.
    pub max_diff: f64,
    pub compared: usize,
}

/// Integrates the arclength-type system `ż₀ = sqrt(1 + u²)`, `ż₁ = u(z)` in
/// `s` with step `dr`, resamples it at the `r` samples of the direct world
/// line by cubic Hermite interpolation (slope `a(u)`), and reports the
/// largest disagreement.
pub fn reparam_cross_check(sol: &SpacetimeSolution, start: (f64, f64), r_end: f64, dr: f64) -> Result<ReparamCheck> {
    let direct = integrate_world_line(sol, start, r_end, dr)?;
    let s = VelocitySampler::new(sol)?;
    let f = |z: (f64, f64)| s.u(z.0, z.1).map(|u| (sqrt1p_sq(u), u));

    let mut nodes = vec![(start.0, start.1, a(s.u(start.0, start.1).unwrap()))];
    let mut z = (start.0, start.1);
    while z.0 < r_end {
        let step = (|| {
            let k1 = f(z)?;
            let k2 = f((z.0 + 0.5 * dr * k1.0, z.1 + 0.5 * dr * k1.1))?;
            let k3 = f((z.0 + 0.5 * dr * k2.0, z.1 + 0.5 * dr * k2.1))?;
            let k4 = f((z.0 + dr * k3.0, z.1 + dr * k3.1))?;
            let nz = (
                z.0 + dr / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                z.1 + dr / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            );
            Some((nz, a(s.u(nz.0, nz.1)?)))
        })();
        match step {
            Some((nz, slope)) => {
                z = nz;
                nodes.push((z.0, z.1, slope));
            }
            None => break,
        }
    }

    let mut out = ReparamCheck { max_diff: 0.0, compared: 0 };
    let mut j = 0;
    for (&r, &w) in direct.r.iter().zip(&direct.w) {
        while j + 1 < nodes.len() && nodes[j + 1].0 < r {
            j += 1;
        }
        if j + 1 >= nodes.len() {
            break;
        }
        let (r0, w0, m0) = nodes[j];
        let (r1, w1, m1) = nodes[j + 1];
        let h = r1 - r0;
        let tau = (r - r0) / h;
        let (t2, t3) = (tau * tau, tau * tau * tau);
        let wi = (2.0 * t3 - 3.0 * t2 + 1.0) * w0 + (t3 - 2.0 * t2 + tau) * h * m0 + (-2.0 * t3 + 3.0 * t2) * w1 + (t3 - t2) * h * m1;
        out.max_diff = out.max_diff.max((wi - w).abs());
        out.compared += 1;
    }
    Ok(out)
}
