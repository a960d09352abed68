//! Complex numbers over an arbitrary real [`Scalar`].
//!
//! `num_complex::Complex<T>` requires `T: Float` for its transcendental
//! functions, which jets do not implement, so the handful of operations the
//! case-B normal forms need are written here.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cx<S> {
    pub re: S,
    pub im: S,
}

impl<S: Scalar> Cx<S> {
    pub fn new(re: S, im: S) -> Self {
        Cx { re, im }
    }

    pub fn real(re: S) -> Self {
        Cx { re, im: S::zero() }
    }

    pub fn cst(re: f64, im: f64) -> Self {
        Cx { re: S::cst(re), im: S::cst(im) }
    }

    pub fn conj(self) -> Self {
        Cx { re: self.re, im: -self.im }
    }

    pub fn norm_sqr(self) -> S {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, c: f64) -> Self {
        Cx { re: self.re * c, im: self.im * c }
    }

    pub fn exp(self) -> Self {
        let r = self.re.exp();
        Cx { re: r * self.im.cos(), im: r * self.im.sin() }
    }

    /// Principal logarithm.
    pub fn ln(self) -> Self {
        Cx { re: self.norm_sqr().ln() * 0.5, im: self.im.atan2(self.re) }
    }

    /// Principal power `self^p` for real `p`.
    pub fn powf(self, p: f64) -> Self {
        (self.ln().scale(p)).exp()
    }

    pub fn sin(self) -> Self {
        Cx {
            re: self.re.sin() * self.im.cosh(),
            im: self.re.cos() * self.im.sinh(),
        }
    }

    pub fn recip(self) -> Self {
        let n = self.norm_sqr();
        Cx { re: self.re / n, im: -self.im / n }
    }
}

impl<S: Scalar> Add for Cx<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Cx { re: self.re + o.re, im: self.im + o.im }
    }
}

impl<S: Scalar> Sub for Cx<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Cx { re: self.re - o.re, im: self.im - o.im }
    }
}

impl<S: Scalar> Neg for Cx<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Cx { re: -self.re, im: -self.im }
    }
}

impl<S: Scalar> Mul for Cx<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Cx {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

impl<S: Scalar> Div for Cx<S> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_ln_roundtrip() {
        let z = Cx::<f64>::cst(0.7, -1.3);
        let w = z.ln().exp();
        assert!((w.re - 0.7).abs() < 1e-15 && (w.im + 1.3).abs() < 1e-15);
    }

    #[test]
    fn sin_matches_identity() {
        let z = Cx::<f64>::cst(0.4, 0.9);
        let s = z.sin();
        // sin z = (e^{iz} − e^{−iz}) / 2i
        let iz = Cx::<f64>::cst(-0.9, 0.4);
        let d = iz.exp() - (-iz).exp();
        let r = d / Cx::cst(0.0, 2.0);
        assert!((s.re - r.re).abs() < 1e-15 && (s.im - r.im).abs() < 1e-15);
    }

    #[test]
    fn power_of_positive_real() {
        let z = Cx::<f64>::cst(4.0, 0.0).powf(0.5);
        assert!((z.re - 2.0).abs() < 1e-15 && z.im.abs() < 1e-15);
    }
}
