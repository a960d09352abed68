//! The linear action of a projective vector field on the metrization space.
//!
//! Coefficient vectors `u` always refer to a basis `(σ1, σ2)` (or `(σ1, σ2, σ3)`)
//! of solutions. A [`LieAction`] stores the matrix `M` with
//! `ℒ_X(Σ u_i σ_i) = Σ (M u)_i σ_i`; the pullback along the flow of `X` is then
//! `u ↦ exp(tM) u`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::Serialize;
use thiserror::Error;

use crate::expr::Expr;
use crate::geometry::{lie_derivative_sigma, Chart, Point, SigmaField, VectorField2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetrizationError {
    #[error("the Lie derivative matrix vanishes (norm {norm:e})")]
    ZeroAction { norm: f64 },
    #[error("the Lie derivative matrix is nilpotent; no rescaling of X reaches a normal form")]
    NilpotentAction,
    #[error("({u1}, {u2}) lies in an eigenspace of the Lie derivative (homothetic symmetry)")]
    OnEigenspace { u1: f64, u2: f64 },
    #[error("exceptional point θ = {theta}, φ = {phi}: projective symmetry is homothetic; {row}")]
    ExceptionalPoint { theta: f64, phi: f64, row: String },
    #[error("angle out of range: {0}")]
    AngleOutOfRange(String),
    #[error("no projective field of degree {degree} reproduces the eigenvalues (residual {residual:e})")]
    NoSolution { degree: usize, residual: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LieCase {
    I,
    II,
    III,
}

/// Column of the distinguished-coordinate table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OrbitCase {
    I,
    II,
    III0,
    IIILambda,
}

/// Classified action of `ℒ_X` on a 2-dimensional solution space.
///
/// `basis` has the normal-form basis vectors as columns, written in the
/// coefficients of the input basis: `basis⁻¹ · (scale·m) · basis = normal_matrix()`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LieAction {
    pub m: Matrix2<f64>,
    pub case: LieCase,
    pub lambda: f64,
    /// Factor by which X is rescaled.
    pub scale: f64,
    pub basis: Matrix2<f64>,
}

const REPEATED_ROOT_TOL: f64 = 1e-10;
const DIAGONALIZABLE_TOL: f64 = 1e-9;
const ZERO_TOL: f64 = 1e-14;
/// Tolerance used when comparing orbital invariants.
pub const ORBIT_TOL: f64 = 1e-9;

impl LieAction {
    /// Action already in normal form.
    pub fn normal(case: LieCase, lambda: f64) -> Self {
        let mut a = LieAction { m: Matrix2::identity(), case, lambda, scale: 1.0, basis: Matrix2::identity() };
        a.m = a.normal_matrix();
        a
    }

    /// Normal form of the action: I `diag(λ, 1)`, II `[[1, 0], [1, 1]]`,
    /// III `[[λ, −1], [1, λ]]`.
    ///
    /// Case II is stored as the transpose of the printed Jordan block so that
    /// `exp(tN)` reproduces the pullback `(e^t u1, e^t (t u1 + u2))`.
    pub fn normal_matrix(&self) -> Matrix2<f64> {
        match self.case {
            LieCase::I => Matrix2::new(self.lambda, 0.0, 0.0, 1.0),
            LieCase::II => Matrix2::new(1.0, 0.0, 1.0, 1.0),
            LieCase::III => Matrix2::new(self.lambda, -1.0, 1.0, self.lambda),
        }
    }

    pub fn orbit_case(&self) -> OrbitCase {
        match self.case {
            LieCase::I => OrbitCase::I,
            LieCase::II => OrbitCase::II,
            LieCase::III if self.lambda.abs() < 1e-12 => OrbitCase::III0,
            LieCase::III => OrbitCase::IIILambda,
        }
    }

    /// Coefficients in the normal-form basis of a vector given in the input basis.
    pub fn to_normal(&self, u: [f64; 2]) -> [f64; 2] {
        let inv = self.basis.try_inverse().expect("normal-form basis is invertible");
        let v = inv * nalgebra::Vector2::new(u[0], u[1]);
        [v[0], v[1]]
    }

    pub fn from_normal(&self, u: [f64; 2]) -> [f64; 2] {
        let v = self.basis * nalgebra::Vector2::new(u[0], u[1]);
        [v[0], v[1]]
    }
}

pub fn classify(m: Matrix2<f64>) -> Result<LieAction, MetrizationError> {
    let norm = m.norm();
    if norm < ZERO_TOL {
        return Err(MetrizationError::ZeroAction { norm });
    }
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr - 4.0 * det;
    let id = Matrix2::identity();

    if disc.abs() < REPEATED_ROOT_TOL * norm * norm {
        let mu = 0.5 * tr;
        if mu.abs() < 1e-8 * norm {
            return Err(MetrizationError::NilpotentAction);
        }
        if (m - id * mu).norm() < DIAGONALIZABLE_TOL * norm {
            return Ok(LieAction { m, case: LieCase::I, lambda: 1.0, scale: 1.0 / mu, basis: id });
        }
        let scale = 1.0 / mu;
        let nm = m * scale - id;
        let c0 = nm.column(0).norm();
        let c1 = nm.column(1).norm();
        let p1 = if c0 >= c1 { nalgebra::Vector2::new(1.0, 0.0) } else { nalgebra::Vector2::new(0.0, 1.0) };
        let p2 = nm * p1;
        return Ok(LieAction { m, case: LieCase::II, lambda: 1.0, scale, basis: Matrix2::from_columns(&[p1, p2]) });
    }

    if disc > 0.0 {
        let r = disc.sqrt();
        // Larger root first, the other from the product to avoid cancellation.
        let e1 = 0.5 * (tr + if tr >= 0.0 { r } else { -r });
        let e2 = if e1 == 0.0 { 0.0 } else { det / e1 };
        let (small, big) = if e1.abs() <= e2.abs() { (e1, e2) } else { (e2, e1) };
        let (lambda, scale, first, second) = if small.abs() < 1e-12 * norm {
            (0.0, 1.0 / big, small, big)
        } else {
            (big / small, 1.0 / small, big, small)
        };
        let p1 = eigenvector(&m, first);
        let p2 = eigenvector(&m, second);
        return Ok(LieAction { m, case: LieCase::I, lambda, scale, basis: Matrix2::from_columns(&[p1, p2]) });
    }

    let alpha = 0.5 * tr;
    let beta = 0.5 * (-disc).sqrt();
    let sign = if alpha < 0.0 { -1.0 } else { 1.0 };
    let scale = sign / beta;
    let lambda = alpha.abs() / beta;
    let p1 = nalgebra::Vector2::new(1.0, 0.0);
    let p2 = (m * scale - id * lambda) * p1;
    Ok(LieAction { m, case: LieCase::III, lambda, scale, basis: Matrix2::from_columns(&[p1, p2]) })
}

fn eigenvector(m: &Matrix2<f64>, mu: f64) -> nalgebra::Vector2<f64> {
    let a = m - Matrix2::identity() * mu;
    // Kernel of a rank-one 2×2 matrix: orthogonal to its dominant row.
    let r0 = a.row(0);
    let r1 = a.row(1);
    let r = if r0.norm() >= r1.norm() { r0 } else { r1 };
    let v = nalgebra::Vector2::new(-r[1], r[0]);
    v / v.norm()
}

/// `exp(tN) u` for the normal form `N`.
pub fn pullback_flow(action: &LieAction, u: [f64; 2], t: f64) -> [f64; 2] {
    let l = action.lambda;
    match action.case {
        LieCase::I => [(l * t).exp() * u[0], t.exp() * u[1]],
        LieCase::II => {
            let e = t.exp();
            [e * u[0], e * (t * u[0] + u[1])]
        }
        LieCase::III => {
            let e = (l * t).exp();
            let (s, c) = t.sin_cos();
            [e * (c * u[0] - s * u[1]), e * (s * u[0] + c * u[1])]
        }
    }
}

/// Distinguished coordinates of a point of the essential metrizability space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitCoords {
    pub s: f64,
    pub u: f64,
    pub case: OrbitCase,
    pub component: usize,
}

pub fn component_count(action: &LieAction) -> usize {
    match action.orbit_case() {
        OrbitCase::I => 4,
        OrbitCase::II => 2,
        OrbitCase::III0 | OrbitCase::IIILambda => 1,
    }
}

fn quadrant(u1: f64, u2: f64) -> usize {
    match (u1 > 0.0, u2 > 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

fn wrap_tau(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// `(s, u)` with `u` flow-invariant and `s ↦ s + t` under [`pullback_flow`].
///
/// | case  | s                    | u                          |
/// |-------|----------------------|----------------------------|
/// | I     | ln\|u2\|             | \|u1\| / \|u2\|^λ          |
/// | II    | ln\|u1\|             | e^{u2/u1} / \|u1\|         |
/// | III0  | atan2(u2, u1) mod 2π | u1² + u2²                  |
/// | IIIλ  | ln(u1² + u2²) / 2λ   | (s − atan2(u2, u1)) mod 2π |
pub fn distinguished_coords(u: [f64; 2], action: &LieAction) -> Result<OrbitCoords, MetrizationError> {
    let [u1, u2] = u;
    let on_eig = Err(MetrizationError::OnEigenspace { u1, u2 });
    let case = action.orbit_case();
    let l = action.lambda;
    let (s, v, component) = match case {
        OrbitCase::I => {
            if u1 == 0.0 || u2 == 0.0 {
                return on_eig;
            }
            (u2.abs().ln(), u1.abs() / u2.abs().powf(l), quadrant(u1, u2))
        }
        OrbitCase::II => {
            if u1 == 0.0 {
                return on_eig;
            }
            (u1.abs().ln(), (u2 / u1).exp() / u1.abs(), usize::from(u1 < 0.0))
        }
        OrbitCase::III0 => {
            if u1 == 0.0 && u2 == 0.0 {
                return on_eig;
            }
            (wrap_tau(u2.atan2(u1)), u1 * u1 + u2 * u2, 0)
        }
        OrbitCase::IIILambda => {
            if u1 == 0.0 && u2 == 0.0 {
                return on_eig;
            }
            let s = (u1 * u1 + u2 * u2).ln() / (2.0 * l);
            (s, wrap_tau(s - u2.atan2(u1)), 0)
        }
    };
    Ok(OrbitCoords { s, u: v, case, component })
}

/// Inverse of [`distinguished_coords`]: coefficients in the normal-form basis.
pub fn coeffs_from_distinguished(c: &OrbitCoords, lambda: f64) -> [f64; 2] {
    let (s, u) = (c.s, c.u);
    match c.case {
        OrbitCase::I => {
            let (e1, e2) = match c.component {
                0 => (1.0, 1.0),
                1 => (-1.0, 1.0),
                2 => (-1.0, -1.0),
                _ => (1.0, -1.0),
            };
            [e1 * u * (lambda * s).exp(), e2 * s.exp()]
        }
        OrbitCase::II => {
            let e = if c.component == 0 { 1.0 } else { -1.0 };
            [e * s.exp(), e * s.exp() * (s + u.ln())]
        }
        OrbitCase::III0 => {
            let r = u.sqrt();
            [r * s.cos(), r * s.sin()]
        }
        OrbitCase::IIILambda => {
            let r = (lambda * s).exp();
            [r * (s - u).cos(), r * (s - u).sin()]
        }
    }
}

/// σ field with distinguished coordinates `c`; `basis` is the normal-form basis.
pub fn sigma_from_distinguished(c: &OrbitCoords, action: &LieAction, basis: (&SigmaField, &SigmaField)) -> SigmaField {
    let [a, b] = coeffs_from_distinguished(c, action.lambda);
    SigmaField::Combination(vec![(a, basis.0.clone()), (b, basis.1.clone())])
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= ORBIT_TOL * a.abs().max(b.abs()).max(1e-300)
}

/// Whether `p` and `q` (normal-form coefficients) lie on the same flow orbit.
pub fn orbit_equivalent(p: [f64; 2], q: [f64; 2], action: &LieAction) -> bool {
    let zero = |u: [f64; 2]| u[0] == 0.0 && u[1] == 0.0;
    if zero(p) || zero(q) {
        return zero(p) && zero(q);
    }
    let same_sign = |a: f64, b: f64| a * b > 0.0;
    match action.orbit_case() {
        OrbitCase::I => {
            let l = action.lambda;
            match (p[0] == 0.0, p[1] == 0.0, q[0] == 0.0, q[1] == 0.0) {
                (true, _, true, _) => same_sign(p[1], q[1]),
                (_, true, _, true) => same_sign(p[0], q[0]),
                (false, false, false, false) => {
                    same_sign(p[1], q[1]) && close(p[0] / p[1].abs().powf(l), q[0] / q[1].abs().powf(l))
                }
                _ => false,
            }
        }
        OrbitCase::II => match (p[0] == 0.0, q[0] == 0.0) {
            (true, true) => same_sign(p[1], q[1]),
            (false, false) => {
                // ln of the invariant; e^{u2/u1} under- or overflows near the eigenline
                let lu = |u: [f64; 2]| u[1] / u[0] - u[0].abs().ln();
                let (a, b) = (lu(p), lu(q));
                same_sign(p[0], q[0]) && (a - b).abs() <= ORBIT_TOL * a.abs().max(b.abs()).max(1.0)
            }
            _ => false,
        },
        OrbitCase::III0 => close(p[0] * p[0] + p[1] * p[1], q[0] * q[0] + q[1] * q[1]),
        OrbitCase::IIILambda => {
            let a = distinguished_coords(p, action).map(|c| c.u);
            let b = distinguished_coords(q, action).map(|c| c.u);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    let d = (a - b).rem_euclid(TAU);
                    d.min(TAU - d) <= ORBIT_TOL * TAU
                }
                _ => false,
            }
        }
    }
}

/// Invariants `F_ij = |u_i|^{λ_j} / |u_j|^{λ_i}` of a diagonal action with
/// eigenvalues `λ_i`, for all `i < j`.
pub fn mobility_invariants(u: &[f64], lambdas: &[f64]) -> Vec<((usize, usize), f64)> {
    let n = u.len().min(lambdas.len());
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push(((i, j), u[i].abs().powf(lambdas[j]) / u[j].abs().powf(lambdas[i])));
        }
    }
    out
}

/// Eigenvalues of `ℒ_X` on the generators σ1, σ2, σ3 of the degree-3 family.
pub const DOM3_EIGENVALUES: [f64; 3] = [-5.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0];

/// Pullback `(e^{−5t/3} u1, e^{−2t/3} u2, e^{4t/3} u3)` on the degree-3 family.
pub fn dom3_pullback(u: [f64; 3], t: f64) -> [f64; 3] {
    let e = DOM3_EIGENVALUES;
    [(e[0] * t).exp() * u[0], (e[1] * t).exp() * u[1], (e[2] * t).exp() * u[2]]
}

const ANGLE_TOL: f64 = 1e-9;

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() < ANGLE_TOL
}

/// Coefficient rows of `(σ, σ̄, σ̂)` in the basis `(σ1, σ2, σ3)`.
pub fn spherical_coefficients(theta: f64, phi: f64) -> [[f64; 3]; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [[st * cp, st * sp, ct], [ct * cp, ct * sp, -st], [-sp, cp, 0.0]]
}

fn combination_label(c: [f64; 3]) -> String {
    let mut parts = Vec::new();
    for (i, v) in c.iter().enumerate() {
        let v = if v.abs() < 1e-12 { 0.0 } else { *v };
        if v == 0.0 {
            continue;
        }
        let name = format!("σ{}", i + 1);
        let term = if near(v, 1.0) {
            name
        } else if near(v, -1.0) {
            format!("-{name}")
        } else {
            format!("{v}·{name}")
        };
        parts.push(term);
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ").replace("+ -", "- ")
    }
}

/// The homothetic point at `(θ, φ)`, if any, as its basis identification.
///
/// At `θ = 0` the row is reported with `φ` kept symbolic, as the angle is free there.
pub fn exceptional_point(theta: f64, phi: f64) -> Option<String> {
    let phi = phi.rem_euclid(TAU);
    let pole = near(theta, 0.0) || near(theta, PI);
    let equator = near(theta, FRAC_PI_2)
        && [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2, TAU].iter().any(|p| near(phi, *p));
    if !(pole || equator) {
        return None;
    }
    if pole {
        let (name, s3, bar) = if near(theta, 0.0) {
            ("0", "σ3", "cos(φ)σ1 + sin(φ)σ2")
        } else {
            ("π", "-σ3", "-cos(φ)σ1 - sin(φ)σ2")
        };
        return Some(format!("σ[{name},φ] = {s3}, σ̄[{name},φ] = {bar}, σ̂[{name},φ] = -sin(φ)σ1 + cos(φ)σ2"));
    }
    let c = spherical_coefficients(FRAC_PI_2, phi);
    let pname = ["0", "π/2", "π", "3π/2", "0"];
    let idx = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2, TAU].iter().position(|p| near(phi, *p)).unwrap_or(0);
    let a = format!("[π/2,{}]", pname[idx]);
    Some(format!(
        "σ{a} = {}, σ̄{a} = {}, σ̂{a} = {}",
        combination_label(c[0]),
        combination_label(c[1]),
        combination_label(c[2])
    ))
}

/// Ellipsoidal parametrization of the essential metrizability space of the
/// degree-3 family: `(e^{−5r/3} sinθ cosφ, e^{−2r/3} sinθ sinφ, e^{4r/3} cosθ)`.
pub fn dom3_parametrize(r: f64, theta: f64, phi: f64) -> Result<[f64; 3], MetrizationError> {
    if !(0.0..=PI).contains(&theta) || !theta.is_finite() || !phi.is_finite() {
        return Err(MetrizationError::AngleOutOfRange(format!("θ = {theta} must lie in [0, π]")));
    }
    if let Some(row) = exceptional_point(theta, phi) {
        return Err(MetrizationError::ExceptionalPoint { theta, phi, row });
    }
    let c = spherical_coefficients(theta, phi)[0];
    Ok(dom3_pullback(c, r))
}

/// Projective field recovered by [`recover_projective_field`].
#[derive(Clone, Debug)]
pub struct RecoveredField {
    pub field: VectorField2,
    /// `max_k max_p ‖ℒ_X σ_k − λ_k σ_k‖ / ‖σ_k‖` on the collocation grid.
    pub residual: f64,
    /// Polynomial coefficients `(component, a, b, c)` of `c x^a y^b`.
    pub coefficients: Vec<(usize, usize, usize, f64)>,
}

fn monomials(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for d in 0..=degree {
        for a in (0..=d).rev() {
            out.push((a, d - a));
        }
    }
    out
}

fn monomial(a: usize, b: usize) -> Expr {
    let mut e = Expr::c(1.0);
    let xa = if a == 0 { None } else { Some(Expr::x().powi(a as i32)) };
    let yb = if b == 0 { None } else { Some(Expr::y().powi(b as i32)) };
    match (xa, yb) {
        (Some(p), Some(q)) => e = p * q,
        (Some(p), None) => e = p,
        (None, Some(q)) => e = q,
        (None, None) => {}
    }
    e
}

fn finite3(v: [f64; 3]) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Least-squares recovery of a polynomial projective field `X` with
/// `ℒ_X σ_k = λ_k σ_k`, collocated on a 7×7 grid of `chart`.
pub fn recover_projective_field(
    basis: &[SigmaField],
    eigs: &[f64],
    chart: Chart,
    degree: usize,
) -> Result<RecoveredField, MetrizationError> {
    let mons = monomials(degree);
    let nu = 2 * mons.len();
    let fields: Vec<VectorField2> = (0..nu)
        .map(|k| {
            let (a, b) = mons[k % mons.len()];
            if k < mons.len() {
                VectorField2::new(monomial(a, b), Expr::zero())
            } else {
                VectorField2::new(Expr::zero(), monomial(a, b))
            }
        })
        .collect();
    let points: Vec<Point> = chart
        .grid(7)
        .into_iter()
        .filter(|p| basis.iter().all(|s| finite3(s.at(*p)) && s.det_at(*p).abs() > 0.0))
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for p in &points {
        for (s, lam) in basis.iter().zip(eigs) {
            let sv = s.at(*p);
            let w = 1.0 / (sv[0].abs() + sv[1].abs() + sv[2].abs());
            let cols: Vec<[f64; 3]> = fields.iter().map(|f| lie_derivative_sigma(s, f).at(*p)).collect();
            for c in 0..3 {
                rows.push(cols.iter().map(|v| v[c] * w).collect());
                rhs.push(lam * sv[c] * w);
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), nu, |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    let norms: Vec<f64> = (0..nu).map(|j| a.column(j).norm().max(1e-300)).collect();
    let mut scaled = a.clone();
    for (j, n) in norms.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / n);
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let sol = svd.solve(&b, 1e-12 * smax).map_err(|_| MetrizationError::NoSolution { degree, residual: f64::INFINITY })?;
    let coef: Vec<f64> = (0..nu).map(|j| sol[j] / norms[j]).collect();

    let cmax = coef.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut coefficients = Vec::new();
    let mut comp = [Expr::zero(), Expr::zero()];
    for (k, c) in coef.iter().enumerate() {
        if c.abs() <= 1e-12 * cmax {
            continue;
        }
        let i = usize::from(k >= mons.len());
        let (a, b) = mons[k % mons.len()];
        coefficients.push((i, a, b, *c));
        comp[i] = comp[i].clone() + *c * monomial(a, b);
    }
    let [cx, cy] = comp;
    let field = VectorField2::new(cx, cy);

    let mut residual = 0.0f64;
    for p in &points {
        for (s, lam) in basis.iter().zip(eigs) {
            let sv = s.at(*p);
            let lv = lie_derivative_sigma(s, &field).at(*p);
            let num = (0..3).map(|c| (lv[c] - lam * sv[c]).powi(2)).sum::<f64>().sqrt();
            let den = (0..3).map(|c| sv[c].powi(2)).sum::<f64>().sqrt();
            residual = residual.max(num / den);
        }
    }
    if !(residual <= 1e-6) {
        return Err(MetrizationError::NoSolution { degree, residual });
    }
    Ok(RecoveredField { field, residual, coefficients })
}
