//! Special functions needed by the C.8 / C.9 normal forms.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::jet::{Jet, Scalar2Jet};
use crate::scalar::Scalar;

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialError {
    #[error("quadrature did not reach tolerance {tol:e} within {max_sub} subdivisions")]
    QuadratureFailure { tol: f64, max_sub: usize },
    #[error("argument {y} outside the branch domain of {name}")]
    Domain { name: &'static str, y: f64 },
}

/// Special functions in one variable.
///
/// Every variant has an elementary (or lower-level special) derivative, which is
/// what [`SpecialFn::derivative`] returns; jets use it for all derivative slots.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SpecialFn {
    Erf,
    Erfi,
    /// `∫_base^y e^{−(3λ/2) atan s} (s²+1)^{−exponent} ds`.
    YLambda { lambda: f64, base: f64, exponent: f64 },
    /// `∫_base^y e^{3/(2s)} |s|^{−3/2} ds`, one branch of `s ≠ 0`.
    YQuad { base: f64 },
    /// Closed-form solution of `y² Y₁'' − ½(y−3) Y₁' + ½ Y₁ = 0` on `y > 0` or `y < 0`.
    Y1 { positive: bool },
}

/// Exponent of `(s²+1)` in the C.9 integrand that makes the Ξ-ODE hold.
pub const Y_LAMBDA_EXPONENT: f64 = 0.75;
/// Exponent as printed next to the C.9a row of the normal-form table.
pub const Y_LAMBDA_EXPONENT_TABLE: f64 = 0.25;

impl SpecialFn {
    pub fn y_lambda(lambda: f64) -> Self {
        SpecialFn::YLambda { lambda, base: 1.0, exponent: Y_LAMBDA_EXPONENT }
    }

    pub fn y_quad(positive: bool) -> Self {
        SpecialFn::YQuad { base: if positive { 1.0 } else { -1.0 } }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpecialFn::Erf => "erf",
            SpecialFn::Erfi => "erfi",
            SpecialFn::YLambda { .. } => "Y_lambda_quadrature",
            SpecialFn::YQuad { .. } => "Y_quadrature",
            SpecialFn::Y1 { .. } => "Y1_ode",
        }
    }

    /// First derivative as a generic expression in `u`.
    pub fn derivative<S: Scalar>(&self, u: S) -> S {
        match *self {
            SpecialFn::Erf => (-(u * u)).exp() * TWO_OVER_SQRT_PI,
            SpecialFn::Erfi => (u * u).exp() * TWO_OVER_SQRT_PI,
            SpecialFn::YLambda { lambda, exponent, .. } => {
                y_lambda_integrand(lambda, exponent, u)
            }
            SpecialFn::YQuad { .. } => y_quad_integrand(u),
            SpecialFn::Y1 { positive } => {
                let c = (6.0 * PI).sqrt();
                if positive {
                    (u.recip() * 1.5).sqrt().special(&SpecialFn::Erfi) * c
                } else {
                    -((-u).recip() * 1.5).sqrt().special(&SpecialFn::Erf) * c
                }
            }
        }
    }

    pub fn try_eval(&self, y: f64) -> Result<f64, SpecialError> {
        match *self {
            SpecialFn::Erf => Ok(erf(y)),
            SpecialFn::Erfi => Ok(erfi(y)),
            SpecialFn::YLambda { lambda, base, exponent } => {
                integrate(|s| y_lambda_integrand(lambda, exponent, s), base, y)
            }
            SpecialFn::YQuad { base } => {
                if y == 0.0 || y.signum() != base.signum() {
                    return Err(SpecialError::Domain { name: "Y_quadrature", y });
                }
                integrate(y_quad_integrand, base, y)
            }
            SpecialFn::Y1 { positive } => {
                if (y > 0.0) != positive || y == 0.0 {
                    return Err(SpecialError::Domain { name: "Y1_ode", y });
                }
                let c = (6.0 * PI).sqrt();
                let a = (1.5 / y.abs()).sqrt();
                let tail = 6.0 * y.abs().sqrt() * (1.5 / y).exp();
                Ok(if positive {
                    c * (y - 3.0) * erfi(a) + tail
                } else {
                    -c * (y - 3.0) * erf(a) + tail
                })
            }
        }
    }

    /// Value at a real point; NaN when [`Self::try_eval`] fails.
    pub fn eval_f64(&self, y: f64) -> f64 {
        self.try_eval(y).unwrap_or(f64::NAN)
    }
}

/// Value and first two derivatives of `f` at `y`.
pub fn special_fn_eval(f: &SpecialFn, y: f64) -> Result<Scalar2Jet, SpecialError> {
    let v = f.try_eval(y)?;
    let d = f.derivative(Jet::x(y));
    Ok(Jet { v, dx: d.v, dy: 0.0, dxx: d.dx, dxy: 0.0, dyy: 0.0 })
}

/// `y² Y₁'' − ½(y−3) Y₁' + ½ Y₁` for the closed-form `Y₁` on the given branch.
pub fn y1_ode_residual(positive: bool, y: f64) -> Result<f64, SpecialError> {
    let j = special_fn_eval(&SpecialFn::Y1 { positive }, y)?;
    Ok(y * y * j.dxx - 0.5 * (y - 3.0) * j.dx + 0.5 * j.v)
}

/// `(y²+1) Ξ'' − ½(y−3λ) Ξ' + ½ Ξ` with `Ξ = −2(y²+1) Υ' + (y−3λ) Υ` and `Υ = Y_λ`.
///
/// Ξ'' needs three derivatives of `Υ`; the last two come from differentiating
/// the integrand with a jet.
pub fn xi_ode_residual(f: &SpecialFn, y: f64) -> Result<f64, SpecialError> {
    let SpecialFn::YLambda { lambda, .. } = *f else {
        return Err(SpecialError::Domain { name: "Xi_ode", y });
    };
    let u0 = f.try_eval(y)?;
    let d = f.derivative(Jet::x(y));
    let (u1, u2, u3) = (d.v, d.dx, d.dxx);
    let q = y * y + 1.0;
    let a = y - 3.0 * lambda;
    let xi0 = -2.0 * q * u1 + a * u0;
    let xi1 = -4.0 * y * u1 - 2.0 * q * u2 + u0 + a * u1;
    let xi2 = -4.0 * u1 - 4.0 * y * u2 - 4.0 * y * u2 - 2.0 * q * u3 + u1 + u1 + a * u2;
    Ok(q * xi2 - 0.5 * a * xi1 + 0.5 * xi0)
}

fn y_lambda_integrand<S: Scalar>(lambda: f64, exponent: f64, s: S) -> S {
    (s.atan() * (-1.5 * lambda)).exp() / (s * s + 1.0).powf(exponent)
}

fn y_quad_integrand<S: Scalar>(s: S) -> S {
    (s.recip() * 1.5).exp() / s.abs().powf(1.5)
}

pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let a = x.abs();
    let r = if a < 3.0 {
        // e^{-x²} Σ 2^n x^{2n+1} / (2n+1)!!, all terms positive.
        let x2 = 2.0 * a * a;
        let mut term = a;
        let mut sum = a;
        let mut n = 0.0;
        while term > 1e-17 * sum {
            term *= x2 / (2.0 * n + 3.0);
            sum += term;
            n += 1.0;
        }
        TWO_OVER_SQRT_PI * (-a * a).exp() * sum
    } else {
        1.0 - erfc_cf(a)
    };
    r.copysign(x)
}

/// erfc for `x ≥ 3` by the Laplace continued fraction (modified Lentz).
fn erfc_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64 * 0.5;
        d = x + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = x + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

pub fn erfi(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let a = x.abs();
    let r = if a < 7.0 {
        let x2 = a * a;
        let mut pw = a;
        let mut sum = a;
        let mut n = 0.0;
        loop {
            n += 1.0;
            pw *= x2 / n;
            let term = pw / (2.0 * n + 1.0);
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
        }
        TWO_OVER_SQRT_PI * sum
    } else {
        // e^{x²}/(x√π) Σ (2k−1)!!/(2x²)^k, truncated at the smallest term.
        let inv = 1.0 / (2.0 * a * a);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let next = term * (2.0 * k as f64 - 1.0) * inv;
            if next > term || next < 1e-17 * sum {
                break;
            }
            term = next;
            sum += term;
        }
        (a * a).exp() / (a * PI.sqrt()) * sum
    };
    r.copysign(x)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS[7] * fc;
    let mut g = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let s = f(c - h * GK_NODES[i]) + f(c + h * GK_NODES[i]);
        k += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

const QUAD_TOL: f64 = 1e-14;
const QUAD_MAX_SUB: usize = 400;

/// Adaptive Gauss–Kronrod (7, 15) quadrature of `f` over `[a, b]` (either order).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64, SpecialError> {
    if a == b {
        return Ok(0.0);
    }
    let (total0, err0) = gk15(&f, a, b);
    let mut pieces = vec![(a, b, total0, err0)];
    for _ in 0..QUAD_MAX_SUB {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            break;
        }
        if err <= QUAD_TOL * total.abs().max(1.0) {
            return Ok(total);
        }
        let (i, _) = pieces
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .3.total_cmp(&q.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        let (l, le) = gk15(&f, lo, mid);
        let (r, re) = gk15(&f, mid, hi);
        pieces.push((lo, mid, l, le));
        pieces.push((mid, hi, r, re));
    }
    Err(SpecialError::QuadratureFailure { tol: QUAD_TOL, max_sub: QUAD_MAX_SUB })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_values() {
        // Values from Abramowitz & Stegun table 7.1 and mpmath.
        assert_eq!(erf(0.0), 0.0);
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((erf(2.0) - 0.995_322_265_018_952_7).abs() < 1e-15);
        assert!((erf(3.5) - 0.999_999_256_901_627_7).abs() < 1e-15);
        assert!((erf(-1.0) + 0.842_700_792_949_714_9).abs() < 1e-15);
    }

    #[test]
    fn erfi_reference_values() {
        assert_eq!(erfi(0.0), 0.0);
        assert!((erfi(0.5) / 0.614_952_094_696_510_98 - 1.0).abs() < 1e-14);
        assert!((erfi(1.0) / 1.650_425_758_797_542_8 - 1.0).abs() < 1e-14);
        assert!((erfi(2.0) / 18.564_802_414_575_553 - 1.0).abs() < 1e-14);
        assert!((erfi(6.0) / 4.112_751_455_828_238_7e14 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn erf_branches_meet_smoothly() {
        let below = erf(3.0 - 1e-12);
        let above = erf(3.0 + 1e-12);
        assert!((below - above).abs() < 1e-14);
        // d ln erfi/dx = 2e^{x²}/(√π erfi x) ≈ 2x near the switch.
        let (below, above) = (erfi(7.0 - 1e-12), erfi(7.0 + 1e-12));
        let dlog = 2.0 * 49.0f64.exp() / (PI.sqrt() * erfi(7.0));
        assert!((above / below - 1.0 - dlog * 2e-12).abs() < 1e-13);
    }

    #[test]
    fn quadrature_polynomial_and_reversal() {
        let v = integrate(|s| s * s, 0.0, 3.0).unwrap();
        assert!((v - 9.0).abs() < 1e-13);
        let w = integrate(|s| s * s, 3.0, 0.0).unwrap();
        assert!((w + 9.0).abs() < 1e-13);
    }

    #[test]
    fn y_lambda_integrand_is_derivative() {
        let f = SpecialFn::y_lambda(0.5);
        for y in [-2.0, 0.0, 1.0] {
            let j = special_fn_eval(&f, y).unwrap();
            let q = (-0.75 * f64::atan(y)).exp() / (y * y + 1.0).powf(0.75);
            assert!((j.dx - q).abs() < 1e-15);
        }
    }

    #[test]
    fn y1_derivative_matches_difference_quotient() {
        for (pos, y) in [(true, 0.9), (true, 2.5), (false, -0.7), (false, -3.0)] {
            let f = SpecialFn::Y1 { positive: pos };
            let h = 1e-5;
            let fd = (f.eval_f64(y + h) - f.eval_f64(y - h)) / (2.0 * h);
            let an = special_fn_eval(&f, y).unwrap().dx;
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{pos} {y}: {fd} {an}");
        }
    }

    #[test]
    fn y_quad_rejects_wrong_branch() {
        assert!(SpecialFn::y_quad(true).try_eval(-0.5).is_err());
        assert!(SpecialFn::y_quad(false).try_eval(0.0).is_err());
    }
}
