//! Path-metric arithmetic used by the trellis and the oracle.

use std::fmt::Debug;
use std::ops::{Add, Sub};

/// Scalar type for negative-log path metrics.
///
/// `from_level` converts event levels and `mu`; `from_cost` converts
/// transition costs and `sigma`. Both return `None` when the value cannot be
/// represented exactly (only [`ExactCost`] ever refuses).
pub trait Cost:
    Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Debug + Send + Sync + 'static
{
    const ZERO: Self;
    fn from_level(v: f64) -> Option<Self>;
    fn from_cost(v: f64) -> Option<Self>;
    /// `(x - mu)^2`.
    fn squared_error(x: Self, mu: Self) -> Self;
    fn to_f64(self) -> f64;
}

impl Cost for f64 {
    const ZERO: Self = 0.0;

    #[inline]
    fn from_level(v: f64) -> Option<Self> {
        Some(v)
    }

    #[inline]
    fn from_cost(v: f64) -> Option<Self> {
        Some(v)
    }

    #[inline(always)]
    fn squared_error(x: Self, mu: Self) -> Self {
        let d = x - mu;
        d * d
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Exact fixed-point metric: an `i128` count of `2^-32` units.
///
/// Levels must lie on the `2^-16` grid so squared differences land exactly on
/// the `2^-32` grid; costs must lie on the `2^-32` grid. Within those domains
/// every add, subtract and square is exact, which makes this the widened
/// precision mode for equivalence checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactCost(i128);

const COST_BITS: i32 = 32;
const LEVEL_BITS: i32 = 16;
const MAX_MAGNITUDE: f64 = 1.0e18;

impl ExactCost {
    pub fn raw(self) -> i128 {
        self.0
    }

    fn on_grid(v: f64, bits: i32) -> Option<Self> {
        if !v.is_finite() || v.abs() > MAX_MAGNITUDE {
            return None;
        }
        let scaled = v * 2f64.powi(bits);
        if scaled.fract() != 0.0 {
            return None;
        }
        Some(Self((scaled as i128) << (COST_BITS - bits)))
    }

    /// Rounds `v` to the nearest level-grid value (`2^-16`).
    pub fn quantize_level(v: f64) -> f64 {
        (v * 2f64.powi(LEVEL_BITS)).round() / 2f64.powi(LEVEL_BITS)
    }

    /// Rounds `v` to the nearest cost-grid value (`2^-32`).
    pub fn quantize_cost(v: f64) -> f64 {
        (v * 2f64.powi(COST_BITS)).round() / 2f64.powi(COST_BITS)
    }
}

impl Add for ExactCost {
    type Output = Self;
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for ExactCost {
    type Output = Self;
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Cost for ExactCost {
    const ZERO: Self = Self(0);

    fn from_level(v: f64) -> Option<Self> {
        Self::on_grid(v, LEVEL_BITS)
    }

    fn from_cost(v: f64) -> Option<Self> {
        Self::on_grid(v, COST_BITS)
    }

    #[inline(always)]
    fn squared_error(x: Self, mu: Self) -> Self {
        // Both operands are multiples of 2^16 units, so the shift is exact.
        let half = (x.0 - mu.0) >> (COST_BITS - LEVEL_BITS);
        Self(half.checked_mul(half).expect("exact metric overflow"))
    }

    fn to_f64(self) -> f64 {
        self.0 as f64 / 2f64.powi(COST_BITS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_square_matches_rational_value() {
        let x = ExactCost::from_level(3.25).unwrap();
        let mu = ExactCost::from_level(1.5 + 1.0 / 65536.0).unwrap();
        let d = 3.25 - (1.5 + 1.0 / 65536.0);
        assert_eq!(ExactCost::squared_error(x, mu).to_f64(), d * d);
    }

    #[test]
    fn off_grid_values_are_refused() {
        assert!(ExactCost::from_level(0.1).is_none());
        assert!(ExactCost::from_cost(f64::NAN).is_none());
        assert!(ExactCost::from_cost(2f64.powi(-32)).is_some());
        assert!(ExactCost::from_level(2f64.powi(-17)).is_none());
        assert_eq!(ExactCost::from_level(ExactCost::quantize_level(0.1)).map(|c| c.to_f64()), Some(ExactCost::quantize_level(0.1)));
    }

    #[test]
    fn exact_arithmetic_is_associative() {
        let a = ExactCost::from_cost(ExactCost::quantize_cost(1e6 + 0.3)).unwrap();
        let b = ExactCost::from_cost(ExactCost::quantize_cost(1e-7)).unwrap();
        let c = ExactCost::from_cost(ExactCost::quantize_cost(-0.7)).unwrap();
        assert_eq!((a + b) + c, a + (b + c));
        assert_eq!((a - b) + b, a);
    }
}
