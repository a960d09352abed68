//! Real scalar abstraction shared by `f64` and the jet types.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::special::SpecialFn;

/// Arithmetic contract for everything a field can be evaluated at.
///
/// Fields are written once, generically over `S: Scalar`, and then evaluated
/// at plain `f64` points, at `Jet<f64>` seeds (first and second partials) or at
/// nested jets when derivatives of derived quantities are needed.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn cst(c: f64) -> Self;
    /// Underlying real value with all derivative information dropped.
    fn value(&self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn atan(self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn powi(self, n: i32) -> Self;
    fn special(self, f: &SpecialFn) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
    fn recip(self) -> Self {
        Self::one() / self
    }
    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }
    fn sinh(self) -> Self {
        (self.exp() - (-self).exp()) * 0.5
    }
    fn cosh(self) -> Self {
        (self.exp() + (-self).exp()) * 0.5
    }
    /// Four-quadrant arctangent of `self / x`.
    ///
    /// Written as the base angle plus the arctangent of the rotated ratio, which
    /// is smooth at the base point and therefore valid for every jet level.
    fn atan2(self, x: Self) -> Self {
        let (a0, b0) = (self.value(), x.value());
        let base = a0.atan2(b0);
        let num = self * b0 - x * a0;
        let den = x * b0 + self * a0;
        (num / den).atan() + base
    }
}

impl Scalar for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn special(self, f: &SpecialFn) -> Self {
        f.eval_f64(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
}
