//! The relativistic velocity map `a(y) = y / sqrt(1 + y²)` and friends.
//!
//! All three functions go through `hypot`, so they stay finite for
//! `|y|` far beyond the point where `y²` overflows.

use crate::error::{Error, Result};

/// `sqrt(1 + y²)`.
#[inline]
pub fn sqrt1p_sq(y: f64) -> f64 {
    1.0f64.hypot(y)
}

/// `sqrt(1 + y²) - 1` without cancellation near `y = 0`.
#[inline]
pub fn sqrt1p_sq_m1(y: f64) -> f64 {
    let s = sqrt1p_sq(y);
    if y.abs() <= 1.0 {
        y * y / (s + 1.0)
    } else {
        s - 1.0
    }
}

/// `a(y) = y / sqrt(1 + y²)`, with `|a| < 1`.
#[inline]
pub fn a(y: f64) -> f64 {
    y / sqrt1p_sq(y)
}

/// `a'(y) = (1 + y²)^{-3/2}`, in `(0, 1]`.
#[inline]
pub fn a_prime(y: f64) -> f64 {
    let s = sqrt1p_sq(y);
    1.0 / (s * s * s)
}

fn finite(y: f64) -> Result<f64> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFinite(format!("nonlinearity argument {y}")))
    }
}

pub fn try_a(y: f64) -> Result<f64> {
    finite(y).map(a)
}

pub fn try_a_prime(y: f64) -> Result<f64> {
    finite(y).map(a_prime)
}

pub fn try_sqrt1p_sq(y: f64) -> Result<f64> {
    finite(y).map(sqrt1p_sq)
}
