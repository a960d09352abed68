//! Second-order truncated Taylor jets in two variables.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::scalar::Scalar;
use crate::special::SpecialFn;

/// Value and all partials up to total order two with respect to (x, y).
///
/// `T` is itself a [`Scalar`], so `Jet<Jet<f64>>` carries mixed derivatives up
/// to order four; this is how derivatives of Christoffel symbols are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    pub v: T,
    pub dx: T,
    pub dy: T,
    pub dxx: T,
    pub dxy: T,
    pub dyy: T,
}

pub type Scalar2Jet = Jet<f64>;

impl<T: Scalar> Jet<T> {
    pub fn constant(c: T) -> Self {
        let z = T::zero();
        Jet { v: c, dx: z, dy: z, dxx: z, dxy: z, dyy: z }
    }

    /// Seed for the coordinate x.
    pub fn x(x: T) -> Self {
        Jet { dx: T::one(), ..Self::constant(x) }
    }

    /// Seed for the coordinate y.
    pub fn y(y: T) -> Self {
        Jet { dy: T::one(), ..Self::constant(y) }
    }

    /// The gradient `(dx, dy)`.
    pub fn grad(&self) -> [T; 2] {
        [self.dx, self.dy]
    }

    /// Partial derivative in direction `i` (0 = x, 1 = y).
    pub fn d(&self, i: usize) -> T {
        if i == 0 {
            self.dx
        } else {
            self.dy
        }
    }

    /// Second partial `∂_i ∂_j`.
    pub fn dd(&self, i: usize, j: usize) -> T {
        match (i, j) {
            (0, 0) => self.dxx,
            (1, 1) => self.dyy,
            _ => self.dxy,
        }
    }

    /// Composition `f ∘ self` given `f`, `f'`, `f''` at `self.v`.
    pub fn compose(self, f0: T, f1: T, f2: T) -> Self {
        Jet {
            v: f0,
            dx: f1 * self.dx,
            dy: f1 * self.dy,
            dxx: f1 * self.dxx + f2 * self.dx * self.dx,
            dxy: f1 * self.dxy + f2 * self.dx * self.dy,
            dyy: f1 * self.dyy + f2 * self.dy * self.dy,
        }
    }

    fn map(self, f: impl Fn(T) -> T) -> Self {
        Jet {
            v: f(self.v),
            dx: f(self.dx),
            dy: f(self.dy),
            dxx: f(self.dxx),
            dxy: f(self.dxy),
            dyy: f(self.dyy),
        }
    }
}

impl<T: Scalar> Add for Jet<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Jet {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl<T: Scalar> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<T: Scalar> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|t| -t)
    }
}

impl<T: Scalar> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self, o);
        Jet {
            v: a.v * b.v,
            dx: a.dx * b.v + a.v * b.dx,
            dy: a.dy * b.v + a.v * b.dy,
            dxx: a.dxx * b.v + a.dx * b.dx * 2.0 + a.v * b.dxx,
            dxy: a.dxy * b.v + a.dx * b.dy + a.dy * b.dx + a.v * b.dxy,
            dyy: a.dyy * b.v + a.dy * b.dy * 2.0 + a.v * b.dyy,
        }
    }
}

impl<T: Scalar> Div for Jet<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<T: Scalar> Add<f64> for Jet<T> {
    type Output = Self;
    fn add(mut self, c: f64) -> Self {
        self.v = self.v + c;
        self
    }
}

impl<T: Scalar> Sub<f64> for Jet<T> {
    type Output = Self;
    fn sub(mut self, c: f64) -> Self {
        self.v = self.v - c;
        self
    }
}

impl<T: Scalar> Mul<f64> for Jet<T> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.map(|t| t * c)
    }
}

impl<T: Scalar> Div<f64> for Jet<T> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        self.map(|t| t / c)
    }
}

impl<T: Scalar> AddAssign for Jet<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> SubAssign for Jet<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> MulAssign for Jet<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Scalar> Scalar for Jet<T> {
    fn cst(c: f64) -> Self {
        Self::constant(T::cst(c))
    }
    fn value(&self) -> f64 {
        self.v.value()
    }
    fn recip(self) -> Self {
        let r = self.v.recip();
        self.compose(r, -(r * r), r * r * r * 2.0)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e)
    }
    fn ln(self) -> Self {
        let r = self.v.recip();
        self.compose(self.v.ln(), r, -(r * r))
    }
    fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.compose(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.compose(c, -s, -c)
    }
    fn tan(self) -> Self {
        let t = self.v.tan();
        let sec2 = t * t + 1.0;
        self.compose(t, sec2, sec2 * t * 2.0)
    }
    fn atan(self) -> Self {
        let r = (self.v * self.v + 1.0).recip();
        self.compose(self.v.atan(), r, -(self.v * r * r * 2.0))
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let d1 = s.recip() * 0.5;
        self.compose(s, d1, -(d1 / self.v) * 0.5)
    }
    fn powf(self, p: f64) -> Self {
        let f0 = self.v.powf(p);
        let f1 = self.v.powf(p - 1.0) * p;
        let f2 = self.v.powf(p - 2.0) * (p * (p - 1.0));
        self.compose(f0, f1, f2)
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => return Self::one(),
            1 => return self,
            2 => return self * self,
            _ => {}
        }
        let f0 = self.v.powi(n);
        let f1 = self.v.powi(n - 1) * n as f64;
        let f2 = self.v.powi(n - 2) * (n as f64 * (n as f64 - 1.0));
        self.compose(f0, f1, f2)
    }
    fn special(self, f: &SpecialFn) -> Self {
        let f0 = self.v.special(f);
        let d = f.derivative(Jet::x(self.v));
        self.compose(f0, d.v, d.dx)
    }
}
