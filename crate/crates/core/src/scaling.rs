//! Width schedules `h(ε)` coupling the kernel width to the regularization
//! parameter, and a finite-grid check of the growth condition
//! `exp(h(ε)^-p) = O(ε^-k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `e^{-e}`: below this the double logarithm `ln ln(1/ε)` exceeds one.
pub const LOGLOG_EPS_MAX: f64 = 0.065_988_035_845_312_53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingKind {
    /// `h(ε) = c / ln(ln(1/ε))`.
    #[serde(alias = "log_log")]
    LogLog,
    /// `h(ε) = c ε^exponent`.
    #[serde(alias = "power")]
    PowerLaw,
    /// `h(ε) = c`.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFunction {
    pub kind: ScalingKind,
    pub c: f64,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn default_exponent() -> f64 {
    1.0
}

impl ScalingFunction {
    pub fn new(kind: ScalingKind, c: f64, exponent: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidScaling(format!("prefactor c = {c} must be positive")));
        }
        if kind == ScalingKind::PowerLaw && !(exponent > 0.0 && exponent <= 1.0) {
            return Err(Error::InvalidScaling(format!(
                "power-law exponent {exponent} must lie in (0, 1]"
            )));
        }
        Ok(Self { kind, c, exponent })
    }

    pub fn log_log(c: f64) -> Self {
        Self::new(ScalingKind::LogLog, c, 1.0).expect("positive c")
    }

    pub fn power_law(c: f64, exponent: f64) -> Result<Self> {
        Self::new(ScalingKind::PowerLaw, c, exponent)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(ScalingKind::Constant, c, 1.0).expect("positive c")
    }

    /// Re-runs the constructor checks; useful after deserialization.
    pub fn validated(self) -> Result<Self> {
        Self::new(self.kind, self.c, self.exponent)
    }

    fn kind_name(&self) -> &'static str {
        match self.kind {
            ScalingKind::LogLog => "log_log",
            ScalingKind::PowerLaw => "power_law",
            ScalingKind::Constant => "constant",
        }
    }

    pub fn check_admissible(&self, eps: f64) -> Result<()> {
        let bad = |bound: &str| {
            Err(Error::InadmissibleEps { kind: self.kind_name(), eps, bound: bound.to_string() })
        };
        if !(eps.is_finite() && eps > 0.0) {
            return bad("eps must be positive and finite");
        }
        if self.kind == ScalingKind::LogLog && eps >= LOGLOG_EPS_MAX {
            return bad("log_log requires eps < e^-e ~ 0.0659");
        }
        Ok(())
    }

    /// `h(ε)`.
    pub fn h(&self, eps: f64) -> Result<f64> {
        self.check_admissible(eps)?;
        Ok(match self.kind {
            ScalingKind::LogLog => self.c / (1.0 / eps).ln().ln(),
            ScalingKind::PowerLaw => self.c * eps.powf(self.exponent),
            ScalingKind::Constant => self.c,
        })
    }

    pub fn verify_growth_condition(&self, p: u32, eps_grid: &[f64]) -> Result<GrowthReport> {
        verify_growth_condition(self, p, eps_grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub eps: f64,
    pub h: f64,
    /// `h(ε)^-p / ln(1/ε)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub scaling: ScalingFunction,
    pub p: u32,
    pub rows: Vec<GrowthRow>,
    pub k_estimate: f64,
    pub satisfied: bool,
}

pub const MIN_GROWTH_GRID: usize = 4;

/// Tabulates `r(ε) = h(ε)^-p / ln(1/ε)` over a decreasing ε grid.
///
/// `exp(h^-p) ≤ C ε^-k` is equivalent to `r(ε)` staying below `k` (up to a
/// constant), so the condition is declared satisfied when `r` does not grow
/// over the small-ε half of the grid and ends no higher than it started.
pub fn verify_growth_condition(s: &ScalingFunction, p: u32, eps_grid: &[f64]) -> Result<GrowthReport> {
    if eps_grid.len() < MIN_GROWTH_GRID {
        return Err(Error::GridTooShort { len: eps_grid.len(), min: MIN_GROWTH_GRID });
    }
    if p == 0 {
        return Err(Error::InvalidScaling("growth exponent p must be >= 1".into()));
    }
    if eps_grid.windows(2).any(|w| !(w[1] < w[0])) || eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::UnsortedGrid);
    }
    let rows = eps_grid
        .iter()
        .map(|&eps| {
            let h = s.h(eps)?;
            let ratio = h.powi(-(p as i32)) / (1.0 / eps).ln();
            Ok(GrowthRow { eps, h, ratio })
        })
        .collect::<Result<Vec<_>>>()?;

    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let k_estimate = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = &ratios[ratios.len() / 2..];
    let tail_non_increasing = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let satisfied = k_estimate.is_finite()
        && tail_non_increasing
        && ratios[ratios.len() - 1] <= ratios[0] * (1.0 + 1e-12);

    Ok(GrowthReport { scaling: *s, p, rows, k_estimate, satisfied })
}

/// `n` logarithmically spaced values from `hi` down to `lo`.
pub fn log_grid_decreasing(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    let (a, b) = (hi.ln(), lo.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_at_exp_minus_e_squared_is_half() {
        let s = ScalingFunction::log_log(1.0);
        let eps = (-std::f64::consts::E.powi(2)).exp();
        assert!((s.h(eps).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn loglog_at_1e_minus_6() {
        let s = ScalingFunction::log_log(1.0);
        let oracle = 1.0 / (6.0 * std::f64::consts::LN_10).ln();
        assert!((s.h(1e-6).unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn power_identity() {
        let s = ScalingFunction::power_law(1.0, 1.0).unwrap();
        assert!((s.h(0.01).unwrap() - 0.01).abs() < 1e-16);
    }

    #[test]
    fn inadmissible_eps_rejected() {
        let s = ScalingFunction::log_log(1.0);
        let e = s.h(0.1).unwrap_err();
        assert!(e.to_string().contains("e^-e"));
        assert!(s.h(0.0659).is_ok());
        assert!(ScalingFunction::constant(1.0).h(-1.0).is_err());
        assert!(ScalingFunction::power_law(1.0, 1.5).is_err());
        assert!(ScalingFunction::new(ScalingKind::Constant, 0.0, 1.0).is_err());
    }

    #[test]
    fn monotone_on_sorted_grids() {
        let grid = log_grid_decreasing(0.05, 1e-14, 40);
        for s in [
            ScalingFunction::log_log(2.0),
            ScalingFunction::power_law(0.5, 0.3).unwrap(),
            ScalingFunction::constant(0.1),
        ] {
            let hs: Vec<f64> = grid.iter().map(|&e| s.h(e).unwrap()).collect();
            assert!(hs.windows(2).all(|w| w[1] <= w[0]), "{s:?}");
            assert!(hs.iter().all(|&h| h > 0.0));
        }
    }

    #[test]
    fn growth_condition_classification() {
        let grid = log_grid_decreasing(1e-3, 1e-12, 10);
        let ll = ScalingFunction::log_log(1.0).verify_growth_condition(1, &grid).unwrap();
        assert!(ll.satisfied);
        assert!(ll.rows.last().unwrap().ratio <= ll.rows[0].ratio);

        let c = ScalingFunction::constant(1.0).verify_growth_condition(1, &grid).unwrap();
        assert!(c.satisfied);
        assert!(c.rows.last().unwrap().ratio < 0.04);

        let pw = ScalingFunction::power_law(1.0, 1.0).unwrap();
        let r = pw.verify_growth_condition(1, &grid).unwrap();
        assert!(!r.satisfied);
        // Oracle: r(ε) = 1/(ε ln(1/ε)).
        for row in &r.rows {
            let oracle = 1.0 / (row.eps * (1.0 / row.eps).ln());
            assert!((row.ratio - oracle).abs() < 1e-10 * oracle);
        }
    }

    #[test]
    fn loglog_ratio_eventually_decreasing() {
        let grid = log_grid_decreasing(1e-4, 1e-30, 12);
        for p in 1..=3 {
            let r = ScalingFunction::log_log(1.0).verify_growth_condition(p, &grid).unwrap();
            assert!(r.rows.last().unwrap().ratio <= r.rows[0].ratio, "p = {p}");
        }
    }

    #[test]
    fn growth_grid_errors() {
        let s = ScalingFunction::constant(1.0);
        assert!(matches!(
            s.verify_growth_condition(1, &[1e-3, 1e-4, 1e-5]),
            Err(Error::GridTooShort { .. })
        ));
        assert!(matches!(
            s.verify_growth_condition(1, &[1e-3, 1e-2, 1e-5, 1e-6]),
            Err(Error::UnsortedGrid)
        ));
    }
}
