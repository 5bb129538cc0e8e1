//! Strict delta nets: ε-families of bumps with shrinking support, unit
//! integral and uniformly bounded absolute integral. They generate the
//! point-charge initial density `σ₀ = q ρ^ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid, BOUNDARY_FRACTION};
use crate::mollifier::{Mollifier, MollifierKind};
use crate::quad;

/// `w(ε) = scale · ε^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthRule {
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "one")]
    pub exponent: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for WidthRule {
    fn default() -> Self {
        Self { scale: 1.0, exponent: 1.0 }
    }
}

impl WidthRule {
    pub fn width(&self, eps: f64) -> f64 {
        self.scale * eps.powf(self.exponent)
    }
}

/// Any ε-indexed family of densities that claims to approximate δ at `center`.
pub trait DeltaFamily {
    fn center(&self) -> f64;
    /// `ρ^ε(x)`.
    fn density(&self, eps: f64, x: f64) -> f64;
    /// Closed interval containing `supp ρ^ε`.
    fn support(&self, eps: f64) -> (f64, f64);
    /// Points where `ρ^ε` is not smooth or changes monotonicity; used as
    /// quadrature break points.
    fn breaks(&self, _eps: f64) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaNet {
    profile: Mollifier,
    pub center: f64,
    pub width_rule: WidthRule,
    /// Total charge `q`.
    pub mass: f64,
}

impl DeltaNet {
    pub fn new(profile: MollifierKind, center: f64, width_rule: WidthRule, mass: f64) -> Result<Self> {
        if !(width_rule.scale > 0.0 && width_rule.exponent > 0.0) {
            return Err(Error::Config(format!(
                "delta-net width rule needs positive scale and exponent, got {width_rule:?}"
            )));
        }
        Ok(Self { profile: Mollifier::standard(profile), center, width_rule, mass })
    }

    pub fn profile(&self) -> &Mollifier {
        &self.profile
    }

    pub fn width(&self, eps: f64) -> f64 {
        self.width_rule.width(eps)
    }

    /// Checks that the profile is resolved and sits inside the grid margin.
    pub fn check_resolved(&self, eps: f64, grid: &Grid) -> Result<()> {
        let w = self.width(eps);
        if w < 4.0 * grid.dx() * (1.0 - 1e-12) {
            return Err(Error::ProfileUnderResolved { w, dx: grid.dx() });
        }
        let (lo, hi) = self.support(eps);
        let margin = BOUNDARY_FRACTION * (grid.x_max() - grid.x_min());
        if lo < grid.x_min() + margin || hi > grid.x_max() - margin {
            return Err(Error::Config(format!(
                "delta-net support [{lo}, {hi}] reaches the outer 5% of the grid [{}, {}]",
                grid.x_min(),
                grid.x_max()
            )));
        }
        Ok(())
    }

    /// `q ρ^ε` on the grid, rescaled so its trapezoidal mass is exactly `q`.
    pub fn sample(&self, eps: f64, grid: &Grid) -> Result<Vec<f64>> {
        self.check_resolved(eps, grid)?;
        if self.mass == 0.0 {
            return Ok(vec![0.0; grid.len()]);
        }
        let raw = grid.sample(|x| self.density(eps, x));
        let m = quad::trapezoid(&raw, grid.dx());
        if !(m > 0.0) {
            return Err(Error::ProfileUnderResolved { w: self.width(eps), dx: grid.dx() });
        }
        let k = self.mass / m;
        Ok(raw.into_iter().map(|v| v * k).collect())
    }
}

impl DeltaFamily for DeltaNet {
    fn center(&self) -> f64 {
        self.center
    }

    fn density(&self, eps: f64, x: f64) -> f64 {
        self.profile.eval_scaled(x - self.center, self.width(eps))
    }

    fn support(&self, eps: f64) -> (f64, f64) {
        let (lo, hi) = self.profile.support();
        let w = self.width(eps);
        (self.center + w * lo, self.center + w * hi)
    }

    fn breaks(&self, eps: f64) -> Vec<f64> {
        vec![self.center + self.width(eps) * self.profile.center()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictRow {
    pub eps: f64,
    /// `max |x - center|` over the support.
    pub support_radius: f64,
    pub mass: f64,
    pub abs_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictReport {
    pub rows: Vec<StrictRow>,
    pub supports_shrink: bool,
    pub unit_mass: bool,
    pub abs_mass_bounded: bool,
    pub pass: bool,
}

pub const MASS_TOL: f64 = 1e-8;

fn integrate_family<F: DeltaFamily + ?Sized, G: Fn(f64) -> f64>(fam: &F, eps: f64, g: G) -> f64 {
    let (lo, hi) = fam.support(eps);
    quad::integrate_split(g, lo, hi, &fam.breaks(eps), 1e-14, 1e-12)
}

/// Checks the three strict-delta-net conditions along a decreasing ε schedule,
/// with `abs_bound` the uniform bound demanded of `∫|ρ^ε|`.
pub fn verify_strict<F: DeltaFamily + ?Sized>(fam: &F, schedule: &[f64], abs_bound: f64) -> StrictReport {
    let rows: Vec<StrictRow> = schedule
        .iter()
        .map(|&eps| {
            let (lo, hi) = fam.support(eps);
            StrictRow {
                eps,
                support_radius: (fam.center() - lo).abs().max((hi - fam.center()).abs()),
                mass: integrate_family(fam, eps, |x| fam.density(eps, x)),
                abs_mass: integrate_family(fam, eps, |x| fam.density(eps, x).abs()),
            }
        })
        .collect();
    let supports_shrink = rows.windows(2).all(|w| w[1].support_radius < w[0].support_radius);
    let unit_mass = rows.iter().all(|r| (r.mass - 1.0).abs() <= MASS_TOL);
    let abs_mass_bounded = rows.iter().all(|r| r.abs_mass <= abs_bound + MASS_TOL);
    StrictReport {
        pass: supports_shrink && unit_mass && abs_mass_bounded,
        rows,
        supports_shrink,
        unit_mass,
        abs_mass_bounded,
    }
}

/// `|∫ ρ^ε ψ - ψ(center)|`.
pub fn delta_pairing_error<F: DeltaFamily + ?Sized, P: Fn(f64) -> f64>(fam: &F, eps: f64, psi: P) -> f64 {
    let v = integrate_family(fam, eps, |x| fam.density(eps, x) * psi(x));
    (v - psi(fam.center())).abs()
}
