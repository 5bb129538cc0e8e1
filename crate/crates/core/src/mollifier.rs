//! Compactly supported smooth bumps with unit integral.
//!
//! Every mollifier is the classical profile `exp(-1/(1-y^2))` on `(-1, 1)`,
//! mapped affinely onto its support `[s_lo, s_hi]` and normalized to unit
//! mass. One-sided kernels differ from the symmetric one only by where that
//! support sits relative to the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

const NORM_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MollifierKind {
    #[serde(alias = "symmetric")]
    SymmetricBump,
    /// Support in `(-inf, 0]`.
    #[serde(alias = "left")]
    LeftBump,
    /// Support in `[0, inf)`.
    #[serde(alias = "right")]
    RightBump,
}

impl MollifierKind {
    /// The support used when a config only names the kind.
    pub fn default_support(self) -> (f64, f64) {
        match self {
            MollifierKind::SymmetricBump => (-1.0, 1.0),
            MollifierKind::LeftBump => (-1.0, 0.0),
            MollifierKind::RightBump => (0.0, 1.0),
        }
    }
}

/// Serializable description `{kind, s_lo, s_hi}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub kind: MollifierKind,
    pub s_lo: f64,
    pub s_hi: f64,
}

impl MollifierSpec {
    pub fn standard(kind: MollifierKind) -> Self {
        let (s_lo, s_hi) = kind.default_support();
        Self { kind, s_lo, s_hi }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mollifier {
    kind: MollifierKind,
    s_lo: f64,
    s_hi: f64,
    norm_const: f64,
    moment1: f64,
    l1_deriv: f64,
}

/// Unnormalized profile on the reference interval.
#[inline]
fn profile(y: f64) -> f64 {
    let s = 1.0 - y * y;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// d/dy of [`profile`].
#[inline]
fn profile_deriv(y: f64) -> f64 {
    let s = 1.0 - y * y;
    if s <= 0.0 {
        0.0
    } else {
        let e = (-1.0 / s).exp();
        if e == 0.0 {
            0.0
        } else {
            -2.0 * y * e / (s * s)
        }
    }
}

impl Mollifier {
    pub fn new(kind: MollifierKind, s_lo: f64, s_hi: f64) -> Result<Self> {
        let bad = |reason| Err(Error::InvalidSupport { lo: s_lo, hi: s_hi, reason });
        if !s_lo.is_finite() || !s_hi.is_finite() {
            return bad("support must be bounded");
        }
        if s_lo >= s_hi {
            return bad("support must be nonempty (s_lo < s_hi)");
        }
        match kind {
            MollifierKind::LeftBump if s_hi > 0.0 => return bad("left bump needs s_hi <= 0"),
            MollifierKind::RightBump if s_lo < 0.0 => return bad("right bump needs s_lo >= 0"),
            _ => {}
        }

        let half = 0.5 * (s_hi - s_lo);
        let raw_mass = half * quad::integrate(profile, -1.0, 1.0, 0.0, NORM_REL_TOL);
        let mut m = Mollifier {
            kind,
            s_lo,
            s_hi,
            norm_const: 1.0 / raw_mass,
            moment1: 0.0,
            l1_deriv: 0.0,
        };
        let mid = m.center();
        // x φ(x) is integrated about the midpoint so that symmetric kernels give an exact zero.
        m.moment1 = mid
            + quad::integrate(|x| (x - mid) * m.eval(x), s_lo, s_hi, 1e-15, NORM_REL_TOL);
        // The profile is unimodal with its mode at the midpoint, where φ' changes sign.
        m.l1_deriv =
            quad::integrate_split(|x| m.eval_deriv(x).abs(), s_lo, s_hi, &[mid], 1e-15, NORM_REL_TOL);
        Ok(m)
    }

    pub fn from_spec(spec: &MollifierSpec) -> Result<Self> {
        Self::new(spec.kind, spec.s_lo, spec.s_hi)
    }

    pub fn standard(kind: MollifierKind) -> Self {
        let (lo, hi) = kind.default_support();
        Self::new(kind, lo, hi).expect("standard supports are valid")
    }

    pub fn spec(&self) -> MollifierSpec {
        MollifierSpec { kind: self.kind, s_lo: self.s_lo, s_hi: self.s_hi }
    }

    pub fn kind(&self) -> MollifierKind {
        self.kind
    }

    pub fn support(&self) -> (f64, f64) {
        (self.s_lo, self.s_hi)
    }

    pub fn support_len(&self) -> f64 {
        self.s_hi - self.s_lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.s_lo + self.s_hi)
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// First moment `∫ x φ(x) dx`.
    pub fn moment1(&self) -> f64 {
        self.moment1
    }

    #[inline]
    fn reference(&self, x: f64) -> f64 {
        (2.0 * x - (self.s_lo + self.s_hi)) / (self.s_hi - self.s_lo)
    }

    /// φ(x); exactly zero outside the support.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.s_lo || x >= self.s_hi {
            return 0.0;
        }
        self.norm_const * profile(self.reference(x))
    }

    /// φ'(x); exactly zero outside the support.
    #[inline]
    pub fn eval_deriv(&self, x: f64) -> f64 {
        if x <= self.s_lo || x >= self.s_hi {
            return 0.0;
        }
        self.norm_const * profile_deriv(self.reference(x)) * 2.0 / (self.s_hi - self.s_lo)
    }

    /// φ_ν(x) = φ(x/ν)/ν.
    #[inline]
    pub fn eval_scaled(&self, x: f64, nu: f64) -> f64 {
        self.eval(x / nu) / nu
    }

    /// (φ_ν)'(x) = φ'(x/ν)/ν².
    #[inline]
    pub fn eval_deriv_scaled(&self, x: f64, nu: f64) -> f64 {
        self.eval_deriv(x / nu) / (nu * nu)
    }

    /// ‖φ'‖_{L¹}.
    pub fn l1_norm_deriv(&self) -> f64 {
        self.l1_deriv
    }

    /// Largest value of φ, attained at the midpoint of the support.
    pub fn peak(&self) -> f64 {
        self.eval(self.center())
    }
}
