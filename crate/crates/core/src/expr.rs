//! Expression trees for scalar fields of (x, y).
//!
//! Fields are stored as small immutable trees and evaluated generically, so the
//! same catalog formula serves plain values, jets and nested jets.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::complex::Cx;
use crate::jet::Jet;
use crate::scalar::Scalar;
use crate::special::SpecialFn;

#[derive(Clone)]
pub struct Expr(Arc<Node>);

enum Node {
    X,
    Y,
    Const(f64),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Powf(Expr, f64),
    Powi(Expr, i32),
    Exp(Expr),
    Ln(Expr),
    Sin(Expr),
    Cos(Expr),
    Tan(Expr),
    Atan(Expr),
    Sqrt(Expr),
    Abs(Expr),
    Special(Expr, SpecialFn),
    Re(CExpr),
    Im(CExpr),
    /// First or second derivative of a special function at the argument.
    SpecialD(Expr, SpecialFn, u8),
}

impl Expr {
    fn node(n: Node) -> Self {
        Expr(Arc::new(n))
    }
    pub fn x() -> Self {
        Self::node(Node::X)
    }
    pub fn y() -> Self {
        Self::node(Node::Y)
    }
    pub fn c(v: f64) -> Self {
        Self::node(Node::Const(v))
    }
    pub fn zero() -> Self {
        Self::c(0.0)
    }
    pub fn powf(self, p: f64) -> Self {
        Self::node(Node::Powf(self, p))
    }
    pub fn powi(self, n: i32) -> Self {
        Self::node(Node::Powi(self, n))
    }
    pub fn exp(self) -> Self {
        Self::node(Node::Exp(self))
    }
    pub fn ln(self) -> Self {
        Self::node(Node::Ln(self))
    }
    pub fn sin(self) -> Self {
        Self::node(Node::Sin(self))
    }
    pub fn cos(self) -> Self {
        Self::node(Node::Cos(self))
    }
    pub fn tan(self) -> Self {
        Self::node(Node::Tan(self))
    }
    pub fn atan(self) -> Self {
        Self::node(Node::Atan(self))
    }
    pub fn sqrt(self) -> Self {
        Self::node(Node::Sqrt(self))
    }
    pub fn abs(self) -> Self {
        Self::node(Node::Abs(self))
    }
    pub fn special(self, f: SpecialFn) -> Self {
        Self::node(Node::Special(self, f))
    }
    pub fn re(z: CExpr) -> Self {
        Self::node(Node::Re(z))
    }
    pub fn im(z: CExpr) -> Self {
        Self::node(Node::Im(z))
    }
    /// `∂f/∂x`.
    pub fn dx(self) -> Self {
        self.diff(0)
    }
    /// `∂f/∂y`.
    pub fn dy(self) -> Self {
        self.diff(1)
    }

    /// Symbolic partial derivative in direction 0 (x) or 1 (y).
    ///
    /// Special functions may be differentiated twice.
    pub fn diff(&self, i: usize) -> Self {
        let d = |a: &Expr| a.diff(i);
        match &*self.0 {
            Node::X => Expr::c(if i == 0 { 1.0 } else { 0.0 }),
            Node::Y => Expr::c(if i == 1 { 1.0 } else { 0.0 }),
            Node::Const(_) => Expr::zero(),
            Node::Add(a, b) => d(a) + d(b),
            Node::Sub(a, b) => d(a) - d(b),
            Node::Mul(a, b) => d(a) * b.clone() + a.clone() * d(b),
            Node::Div(a, b) => (d(a) * b.clone() - a.clone() * d(b)) / b.clone().powi(2),
            Node::Neg(a) => -d(a),
            Node::Powf(a, p) => *p * a.clone().powf(p - 1.0) * d(a),
            Node::Powi(a, 0) => {
                let _ = a;
                Expr::zero()
            }
            Node::Powi(a, n) => *n as f64 * a.clone().powi(n - 1) * d(a),
            Node::Exp(a) => self.clone() * d(a),
            Node::Ln(a) => d(a) / a.clone(),
            Node::Sin(a) => a.clone().cos() * d(a),
            Node::Cos(a) => -(a.clone().sin() * d(a)),
            Node::Tan(a) => (1.0 + self.clone().powi(2)) * d(a),
            Node::Atan(a) => d(a) / (1.0 + a.clone().powi(2)),
            Node::Sqrt(a) => d(a) / (2.0 * self.clone()),
            Node::Abs(a) => a.clone() * d(a) / self.clone(),
            Node::Special(a, f) => Self::node(Node::SpecialD(a.clone(), f.clone(), 1)) * d(a),
            Node::SpecialD(a, f, 1) => Self::node(Node::SpecialD(a.clone(), f.clone(), 2)) * d(a),
            Node::SpecialD(_, f, _) => panic!("third derivative of {} is not available", f.name()),
            Node::Re(z) => Expr::re(z.diff(i)),
            Node::Im(z) => Expr::im(z.diff(i)),
        }
    }

    /// Constant value, if the tree is a literal.
    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn eval<S: Scalar>(&self, x: S, y: S) -> S {
        match &*self.0 {
            Node::X => x,
            Node::Y => y,
            Node::Const(c) => S::cst(*c),
            Node::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Node::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Node::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Node::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Node::Neg(a) => -a.eval(x, y),
            Node::Powf(a, p) => a.eval(x, y).powf(*p),
            Node::Powi(a, n) => a.eval(x, y).powi(*n),
            Node::Exp(a) => a.eval(x, y).exp(),
            Node::Ln(a) => a.eval(x, y).ln(),
            Node::Sin(a) => a.eval(x, y).sin(),
            Node::Cos(a) => a.eval(x, y).cos(),
            Node::Tan(a) => a.eval(x, y).tan(),
            Node::Atan(a) => a.eval(x, y).atan(),
            Node::Sqrt(a) => a.eval(x, y).sqrt(),
            Node::Abs(a) => a.eval(x, y).abs(),
            Node::Special(a, f) => a.eval(x, y).special(f),
            Node::Re(z) => z.eval(x, y).re,
            Node::Im(z) => z.eval(x, y).im,
            Node::SpecialD(a, f, 1) => f.derivative(a.eval(x, y)),
            Node::SpecialD(a, f, _) => f.derivative(Jet::x(a.eval(x, y))).dx,
        }
    }

    pub fn at(&self, x: f64, y: f64) -> f64 {
        self.eval(x, y)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::X => write!(f, "x"),
            Node::Y => write!(f, "y"),
            Node::Const(c) => write!(f, "{c}"),
            Node::Add(a, b) => write!(f, "({a:?} + {b:?})"),
            Node::Sub(a, b) => write!(f, "({a:?} - {b:?})"),
            Node::Mul(a, b) => write!(f, "{a:?}*{b:?}"),
            Node::Div(a, b) => write!(f, "{a:?}/{b:?}"),
            Node::Neg(a) => write!(f, "-{a:?}"),
            Node::Powf(a, p) => write!(f, "{a:?}^{p}"),
            Node::Powi(a, n) => write!(f, "{a:?}^{n}"),
            Node::Exp(a) => write!(f, "exp({a:?})"),
            Node::Ln(a) => write!(f, "ln({a:?})"),
            Node::Sin(a) => write!(f, "sin({a:?})"),
            Node::Cos(a) => write!(f, "cos({a:?})"),
            Node::Tan(a) => write!(f, "tan({a:?})"),
            Node::Atan(a) => write!(f, "atan({a:?})"),
            Node::Sqrt(a) => write!(f, "sqrt({a:?})"),
            Node::Abs(a) => write!(f, "|{a:?}|"),
            Node::Special(a, s) => write!(f, "{}({a:?})", s.name()),
            Node::Re(z) => write!(f, "Re({z:?})"),
            Node::Im(z) => write!(f, "Im({z:?})"),
            Node::SpecialD(a, s, k) => write!(f, "{}{}({a:?})", s.name(), "'".repeat(*k as usize)),
        }
    }
}

macro_rules! real_ops {
    ($tr:ident, $m:ident, $node:ident) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                Expr::node(Node::$node(self, o))
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, o: &Expr) -> Expr {
                Expr::node(Node::$node(self.clone(), o.clone()))
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, o: f64) -> Expr {
                Expr::node(Node::$node(self, Expr::c(o)))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                Expr::node(Node::$node(Expr::c(self), o))
            }
        }
    };
}

real_ops!(Add, add, Add);
real_ops!(Sub, sub, Sub);
real_ops!(Mul, mul, Mul);
real_ops!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::node(Node::Neg(self))
    }
}

/// Complex expression in z = x + iy and z̄.
#[derive(Clone)]
pub struct CExpr(Arc<CNode>);

enum CNode {
    Z,
    Zbar,
    Const(f64, f64),
    Real(Expr),
    Add(CExpr, CExpr),
    Sub(CExpr, CExpr),
    Mul(CExpr, CExpr),
    Div(CExpr, CExpr),
    Neg(CExpr),
    Powf(CExpr, f64),
    Exp(CExpr),
    Sin(CExpr),
    Conj(CExpr),
}

impl CExpr {
    fn node(n: CNode) -> Self {
        CExpr(Arc::new(n))
    }
    pub fn z() -> Self {
        Self::node(CNode::Z)
    }
    pub fn zbar() -> Self {
        Self::node(CNode::Zbar)
    }
    pub fn c(re: f64, im: f64) -> Self {
        Self::node(CNode::Const(re, im))
    }
    /// `e^{iφ}`.
    pub fn phase(phi: f64) -> Self {
        Self::c(phi.cos(), phi.sin())
    }
    pub fn real(e: Expr) -> Self {
        Self::node(CNode::Real(e))
    }
    pub fn powf(self, p: f64) -> Self {
        Self::node(CNode::Powf(self, p))
    }
    pub fn exp(self) -> Self {
        Self::node(CNode::Exp(self))
    }
    pub fn sin(self) -> Self {
        Self::node(CNode::Sin(self))
    }
    pub fn conj(self) -> Self {
        Self::node(CNode::Conj(self))
    }

    /// Symbolic partial derivative in direction 0 (x) or 1 (y).
    pub fn diff(&self, i: usize) -> Self {
        let d = |a: &CExpr| a.diff(i);
        let unit = if i == 0 { CExpr::c(1.0, 0.0) } else { CExpr::c(0.0, 1.0) };
        match &*self.0 {
            CNode::Z => unit,
            CNode::Zbar => unit.conj(),
            CNode::Const(..) => CExpr::c(0.0, 0.0),
            CNode::Real(e) => CExpr::real(e.diff(i)),
            CNode::Add(a, b) => d(a) + d(b),
            CNode::Sub(a, b) => d(a) - d(b),
            CNode::Mul(a, b) => d(a) * b.clone() + a.clone() * d(b),
            CNode::Div(a, b) => (d(a) * b.clone() - a.clone() * d(b)) / (b.clone() * b.clone()),
            CNode::Neg(a) => -d(a),
            CNode::Powf(a, p) => *p * a.clone().powf(p - 1.0) * d(a),
            CNode::Exp(a) => self.clone() * d(a),
            CNode::Sin(a) => (a.clone() + std::f64::consts::FRAC_PI_2).sin() * d(a),
            CNode::Conj(a) => d(a).conj(),
        }
    }

    pub fn eval<S: Scalar>(&self, x: S, y: S) -> Cx<S> {
        match &*self.0 {
            CNode::Z => Cx::new(x, y),
            CNode::Zbar => Cx::new(x, -y),
            CNode::Const(a, b) => Cx::cst(*a, *b),
            CNode::Real(e) => Cx::real(e.eval(x, y)),
            CNode::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            CNode::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            CNode::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            CNode::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            CNode::Neg(a) => -a.eval(x, y),
            CNode::Powf(a, p) => a.eval(x, y).powf(*p),
            CNode::Exp(a) => a.eval(x, y).exp(),
            CNode::Sin(a) => a.eval(x, y).sin(),
            CNode::Conj(a) => a.eval(x, y).conj(),
        }
    }
}

impl fmt::Debug for CExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            CNode::Z => write!(f, "z"),
            CNode::Zbar => write!(f, "zbar"),
            CNode::Const(a, b) => write!(f, "({a}{b:+}i)"),
            CNode::Real(e) => write!(f, "{e:?}"),
            CNode::Add(a, b) => write!(f, "({a:?} + {b:?})"),
            CNode::Sub(a, b) => write!(f, "({a:?} - {b:?})"),
            CNode::Mul(a, b) => write!(f, "{a:?}*{b:?}"),
            CNode::Div(a, b) => write!(f, "{a:?}/{b:?}"),
            CNode::Neg(a) => write!(f, "-{a:?}"),
            CNode::Powf(a, p) => write!(f, "{a:?}^{p}"),
            CNode::Exp(a) => write!(f, "exp({a:?})"),
            CNode::Sin(a) => write!(f, "sin({a:?})"),
            CNode::Conj(a) => write!(f, "conj({a:?})"),
        }
    }
}

macro_rules! complex_ops {
    ($tr:ident, $m:ident, $node:ident) => {
        impl $tr for CExpr {
            type Output = CExpr;
            fn $m(self, o: CExpr) -> CExpr {
                CExpr::node(CNode::$node(self, o))
            }
        }
        impl $tr<f64> for CExpr {
            type Output = CExpr;
            fn $m(self, o: f64) -> CExpr {
                CExpr::node(CNode::$node(self, CExpr::c(o, 0.0)))
            }
        }
        impl $tr<CExpr> for f64 {
            type Output = CExpr;
            fn $m(self, o: CExpr) -> CExpr {
                CExpr::node(CNode::$node(CExpr::c(self, 0.0), o))
            }
        }
    };
}

complex_ops!(Add, add, Add);
complex_ops!(Sub, sub, Sub);
complex_ops!(Mul, mul, Mul);
complex_ops!(Div, div, Div);

impl Neg for CExpr {
    type Output = CExpr;
    fn neg(self) -> CExpr {
        CExpr::node(CNode::Neg(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_jet() {
        let e = Expr::x() * Expr::x() * Expr::y() + 3.0 * Expr::y();
        let j = e.eval(Jet::x(2.0), Jet::y(5.0));
        assert_eq!(j.v, 35.0);
        assert_eq!(j.dx, 20.0);
        assert_eq!(j.dy, 7.0);
        assert_eq!(j.dxx, 10.0);
        assert_eq!(j.dxy, 4.0);
        assert_eq!(j.dyy, 0.0);
    }

    #[test]
    fn symbolic_derivative_matches_jet() {
        let e = (Expr::x() * Expr::y()).sin();
        let d = e.clone().dx();
        let j = d.eval(Jet::x(0.4), Jet::y(0.9));
        let c = f64::cos(0.36);
        let s = f64::sin(0.36);
        assert!((j.v - 0.9 * c).abs() < 1e-15);
        assert!((j.dy - (c - 0.36 * s)).abs() < 1e-15);
        assert!((j.dxx + 0.9f64.powi(3) * c).abs() < 1e-15);
    }

    #[test]
    fn complex_square_real_part() {
        let z2 = CExpr::z() * CExpr::z();
        let e = Expr::re(z2.clone());
        let f = Expr::im(z2);
        assert_eq!(e.at(2.0, 3.0), -5.0);
        assert_eq!(f.at(2.0, 3.0), 12.0);
    }

    #[test]
    fn complex_derivative() {
        // ∂_y Re(z³) = −6xy, ∂_x Im(sin z) = −sin x sinh y
        let e = Expr::re(CExpr::z() * CExpr::z() * CExpr::z()).dy();
        assert!((e.at(0.7, 1.3) + 6.0 * 0.7 * 1.3).abs() < 1e-14);
        let s = Expr::im(CExpr::z().sin()).dx();
        assert!((s.at(0.7, 1.3) + 0.7f64.sin() * 1.3f64.sinh()).abs() < 1e-14);
    }

    #[test]
    fn special_second_derivative() {
        let f = SpecialFn::Erf;
        let e = Expr::x().special(f).dx().dx();
        let x = 0.6f64;
        let want = -4.0 * x / std::f64::consts::PI.sqrt() * (-x * x).exp();
        assert!((e.at(x, 0.0) - want).abs() < 1e-14);
    }
}
