//! Geodesic and quotient-ODE integration, drift monitors, and the
//! superintegrable trajectory pipeline.

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{christoffel, metric_from_sigma, Chart, GeomError, Metric2, Point, ProjConn, QuadraticForm2, SigmaField};
use crate::jet::Jet;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynError {
    #[error("trajectory left the chart or regular region at t = {t}, last valid state {state:?}")]
    LeftChart { t: f64, state: Vec<f64> },
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("no real root at x = {x} (discriminant {disc})")]
    NoRealRoot { x: f64, disc: f64 },
    #[error("vertical tangent: 2x − c̃1 = {gap} at x = {x}")]
    AtVerticalTangent { x: f64, gap: f64 },
    #[error("initial point is not on the trajectory (residual {residual})")]
    NotOnCurve { residual: f64 },
    #[error("k = 0 is a degenerate null parametrization")]
    DegenerateLevel,
    #[error("ẋ² = k(2x − c̃1)/(x² + y)² is negative at the initial point")]
    ImaginaryVelocity,
    #[error("more than {0} turning points")]
    TooManyTurningPoints(usize),
    #[error("null initial velocity for a monitor dividing by g(γ̇, γ̇)")]
    NullVelocity,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// Uniform output samples after the initial one.
    pub samples: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions { rtol: 1e-10, atol: 1e-10, h_init: 1e-3, h_min: 1e-14, max_steps: 2_000_000, samples: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeodesicState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub xd: f64,
    pub yd: f64,
}

impl GeodesicState {
    pub fn new(t: f64, x: f64, y: f64, xd: f64, yd: f64) -> Self {
        GeodesicState { t, x, y, xd, yd }
    }
    pub fn point(&self) -> Point {
        [self.x, self.y]
    }
    pub fn velocity(&self) -> [f64; 2] {
        [self.xd, self.yd]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuotientState {
    pub x: f64,
    pub y: f64,
    pub yx: f64,
}

impl QuotientState {
    pub fn new(x: f64, y: f64, yx: f64) -> Self {
        QuotientState { x, y, yx }
    }
    pub fn point(&self) -> Point {
        [self.x, self.y]
    }
}

/// Samples of a run plus the reason it stopped early, if any.
#[derive(Clone, Debug)]
pub struct Run<T> {
    pub samples: Vec<T>,
    pub stop: Option<DynError>,
}

impl<T> Run<T> {
    pub fn into_result(self) -> Result<Vec<T>, DynError> {
        match self.stop {
            None => Ok(self.samples),
            Some(e) => Err(e),
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const PI_ALPHA: f64 = 0.17;
const PI_BETA: f64 = 0.04;
/// Steps shorter than this fraction of the span that still leave the domain end the run.
const BOUNDARY_FRACTION: f64 = 1e-9;

/// Integrate `y' = f(t, y)` from `t0`, stepping exactly onto every time in
/// `outputs` (monotone, in the direction of integration). `f` returns `None`
/// outside its domain.
pub fn dopri<const N: usize, F>(mut f: F, t0: f64, y0: [f64; N], outputs: &[f64], opts: &IntegratorOptions) -> (Vec<(f64, [f64; N])>, Option<DynError>)
where
    F: FnMut(f64, &[f64; N]) -> Option<[f64; N]>,
{
    let mut out = vec![(t0, y0)];
    let Some(t_end) = outputs.last().copied() else { return (out, None) };
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs().max(f64::MIN_POSITIVE);
    let Some(mut k1) = f(t0, &y0) else {
        return (out, Some(DynError::LeftChart { t: t0, state: y0.to_vec() }));
    };
    let (mut t, mut y) = (t0, y0);
    let mut h = opts.h_init.min(span);
    let mut err_prev = 1.0f64;
    let mut next = 0usize;
    let mut steps = 0usize;
    while next < outputs.len() {
        if (outputs[next] - t) * dir <= 0.0 {
            out.push((t, y));
            next += 1;
            continue;
        }
        steps += 1;
        if steps > opts.max_steps {
            return (out, Some(DynError::StepUnderflow { t, h }));
        }
        let to_target = (outputs[next] - t).abs();
        let hit = h >= to_target;
        let hs = if hit { to_target } else { h };
        let step = try_step(&mut f, t, &y, &k1, hs * dir);
        let Some((yn, kn, errv)) = step else {
            if hs < BOUNDARY_FRACTION * span {
                return (out, Some(DynError::LeftChart { t, state: y.to_vec() }));
            }
            h = hs * 0.5;
            continue;
        };
        let mut acc = 0.0;
        for i in 0..N {
            let sc = opts.atol + opts.rtol * y[i].abs().max(yn[i].abs());
            acc += (errv[i] / sc).powi(2);
        }
        let err = (acc / N as f64).sqrt();
        if !err.is_finite() {
            h = hs * 0.2;
            continue;
        }
        if err <= 1.0 {
            t = if hit { outputs[next] } else { t + hs * dir };
            y = yn;
            k1 = kn;
            let fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-PI_ALPHA) * err_prev.powf(PI_BETA) };
            err_prev = err.max(1e-4);
            h = hs * fac.clamp(0.2, 5.0);
            if hit {
                h = h.max(opts.h_init.min(span));
            }
        } else {
            h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
        if h < opts.h_min {
            return (out, Some(DynError::StepUnderflow { t, h }));
        }
    }
    (out, None)
}

type Stage<const N: usize> = ([f64; N], [f64; N], [f64; N]);

fn try_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Option<Stage<N>>
where
    F: FnMut(f64, &[f64; N]) -> Option<[f64; N]>,
{
    let mut k = [[0.0; N]; 7];
    k[0] = *k1;
    for s in 1..7 {
        let mut ys = *y;
        for i in 0..N {
            let mut acc = 0.0;
            for j in 0..s {
                acc += A[s][j] * k[j][i];
            }
            ys[i] += h * acc;
        }
        k[s] = f(t + C[s] * h, &ys)?;
        if s == 6 {
            let mut err = [0.0; N];
            for i in 0..N {
                let mut e = 0.0;
                for j in 0..7 {
                    e += E[j] * k[j][i];
                }
                err[i] = h * e;
            }
            return Some((ys, k[6], err));
        }
    }
    unreachable!()
}

fn uniform(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (1..=n).map(|i| if i == n { t1 } else { t0 + (t1 - t0) * i as f64 / n as f64 }).collect()
}

fn geodesic_rhs(g: &Metric2, u: &[f64; 4]) -> Option<[f64; 4]> {
    let p = [u[0], u[1]];
    if !g.chart.contains(p) {
        return None;
    }
    let gam = christoffel(g, p).ok()?.gamma;
    let v = [u[2], u[3]];
    let mut acc = [0.0; 2];
    for (k, a) in acc.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                *a -= gam[k][i][j] * v[i] * v[j];
            }
        }
    }
    let r = [u[2], u[3], acc[0], acc[1]];
    r.iter().all(|c| c.is_finite()).then_some(r)
}

/// Geodesic with explicit output times.
pub fn integrate_geodesic_at(g: &Metric2, s0: GeodesicState, times: &[f64], opts: &IntegratorOptions) -> Run<GeodesicState> {
    if !g.is_regular(s0.point()) {
        return Run { samples: vec![], stop: Some(DynError::LeftChart { t: s0.t, state: vec![s0.x, s0.y, s0.xd, s0.yd] }) };
    }
    let (pts, stop) = dopri(|_, u| geodesic_rhs(g, u), s0.t, [s0.x, s0.y, s0.xd, s0.yd], times, opts);
    Run { samples: pts.into_iter().map(|(t, u)| GeodesicState::new(t, u[0], u[1], u[2], u[3])).collect(), stop }
}

/// Solve `ẍ^k + Γ^k_ij ẋ^i ẋ^j = 0` from `s0` to `t1`, sampled uniformly.
pub fn integrate_geodesic(g: &Metric2, s0: GeodesicState, t1: f64, opts: &IntegratorOptions) -> Run<GeodesicState> {
    integrate_geodesic_at(g, s0, &uniform(s0.t, t1, opts.samples), opts)
}

/// Quotient ODE with explicit output abscissae.
pub fn integrate_quotient_at(pc: &ProjConn, chart: Chart, q0: QuotientState, xs: &[f64], opts: &IntegratorOptions) -> Run<QuotientState> {
    let rhs = |x: f64, u: &[f64; 2]| -> Option<[f64; 2]> {
        let p = [x, u[0]];
        if !chart.contains(p) {
            return None;
        }
        let f = pc.at(p).ok()?;
        let yx = u[1];
        let r = [yx, f[0] + yx * (f[1] + yx * (f[2] + yx * f[3]))];
        r.iter().all(|c| c.is_finite()).then_some(r)
    };
    if rhs(q0.x, &[q0.y, q0.yx]).is_none() {
        return Run { samples: vec![], stop: Some(DynError::LeftChart { t: q0.x, state: vec![q0.y, q0.yx] }) };
    }
    let (pts, stop) = dopri(rhs, q0.x, [q0.y, q0.yx], xs, opts);
    Run { samples: pts.into_iter().map(|(x, u)| QuotientState::new(x, u[0], u[1])).collect(), stop }
}

/// Solve `y_xx = f0 + f1 y_x + f2 y_x² + f3 y_x³` from `q0` to `x1`.
pub fn integrate_quotient(pc: &ProjConn, chart: Chart, q0: QuotientState, x1: f64, opts: &IntegratorOptions) -> Run<QuotientState> {
    integrate_quotient_at(pc, chart, q0, &uniform(q0.x, x1, opts.samples), opts)
}

/// A function monitored along a trajectory.
pub struct IntegralMonitor<T> {
    pub name: String,
    pub evaluator: Box<dyn Fn(&T) -> f64>,
    /// Drift above this bound flags the run.
    pub bound: f64,
}

impl<T> IntegralMonitor<T> {
    pub fn new(name: impl Into<String>, bound: f64, evaluator: impl Fn(&T) -> f64 + 'static) -> Self {
        IntegralMonitor { name: name.into(), evaluator: Box::new(evaluator), bound }
    }
}

/// Energy `g(γ̇, γ̇)`.
pub fn energy_monitor(g: &Metric2, bound: f64) -> IntegralMonitor<GeodesicState> {
    let g = g.clone();
    IntegralMonitor::new("H", bound, move |s: &GeodesicState| g.quadratic(s.point(), s.velocity()).unwrap_or(f64::NAN))
}

/// `K(γ̇, γ̇)` for a quadratic form `K`.
pub fn quadratic_monitor(name: impl Into<String>, k: &QuadraticForm2, bound: f64) -> IntegralMonitor<GeodesicState> {
    let k = k.clone();
    IntegralMonitor::new(name, bound, move |s: &GeodesicState| {
        let h = k.at(s.point());
        h[0] * s.xd * s.xd + 2.0 * h[1] * s.xd * s.yd + h[2] * s.yd * s.yd
    })
}

/// `K(γ̇, γ̇)/g(γ̇, γ̇)` along a geodesic; rejects null initial velocities.
pub fn ratio_monitor(name: impl Into<String>, k: &QuadraticForm2, g: &Metric2, s0: &GeodesicState, bound: f64) -> Result<IntegralMonitor<GeodesicState>, DynError> {
    let gv = g.quadratic(s0.point(), s0.velocity())?;
    let gm = g.at(s0.point())?;
    let scale = gm.iter().fold(0.0f64, |m, c| m.max(c.abs())) * (s0.xd.abs() + s0.yd.abs()).powi(2);
    if gv.abs() <= 1e-10 * scale {
        return Err(DynError::NullVelocity);
    }
    let (k, g) = (k.clone(), g.clone());
    Ok(IntegralMonitor::new(name, bound, move |s: &GeodesicState| {
        let h = k.at(s.point());
        let num = h[0] * s.xd * s.xd + 2.0 * h[1] * s.xd * s.yd + h[2] * s.yd * s.yd;
        num / g.quadratic(s.point(), s.velocity()).unwrap_or(f64::NAN)
    }))
}

#[derive(Clone, Debug, Serialize)]
pub struct Drift {
    pub name: String,
    pub reference: f64,
    /// `max |value − reference| / max(|reference|, 1)`.
    pub drift: f64,
    pub bound: f64,
    pub flagged: bool,
}

/// Drift of each monitor relative to its value at the first sample.
pub fn monitor<T>(traj: &[T], monitors: &[IntegralMonitor<T>]) -> Vec<Drift> {
    monitors
        .iter()
        .map(|m| {
            let reference = traj.first().map(|s| (m.evaluator)(s)).unwrap_or(f64::NAN);
            let scale = reference.abs().max(1.0);
            let mut drift = 0.0f64;
            for s in traj {
                let d = ((m.evaluator)(s) - reference).abs() / scale;
                drift = if d.is_nan() { f64::INFINITY } else { drift.max(d) };
            }
            if !reference.is_finite() {
                drift = f64::INFINITY;
            }
            Drift { name: m.name.clone(), reference, drift, bound: m.bound, flagged: !(drift <= m.bound) }
        })
        .collect()
}

/// Quotient integrals `(Ĩ1, Ĩ2)` of the superintegrable class for `g = (x² + y) dx dy`.
pub fn superintegrable_quotient_integrals(x: f64, y: f64, yx: f64) -> [f64; 2] {
    let f = x * x + y;
    [
        (2.0 * x * yx - f) / yx,
        (9.0 * f * yx * yx - 4.0 * x * (x * x + 9.0 * y) * yx + 12.0 * y * f) / yx,
    ]
}

/// `c̃1, c̃2` of the quotient integrals and the Hamiltonian level `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryConstants {
    pub c1: f64,
    pub c2: f64,
    pub k: f64,
}

impl TrajectoryConstants {
    pub fn new(c1: f64, c2: f64, k: f64) -> Self {
        TrajectoryConstants { c1, c2, k }
    }

    /// Quotient constants `c̃i = ci / k` from the levels of `H`, `I1`, `I2`.
    pub fn from_levels(k: f64, i1: f64, i2: f64) -> Self {
        TrajectoryConstants { c1: i1 / k, c2: i2 / k, k }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn other(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

/// A point on the algebraic trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub y: f64,
    /// `(x² + y)/(2x − c̃1)`.
    pub yx: f64,
    /// Relative mismatch between `yx` and `−P_x/P_y`; zero where `P_y` vanishes.
    pub slope_residual: f64,
}

/// `(b, c0)` of `9y² + b y + c0`.
fn quadratic_coeffs(c: &TrajectoryConstants, x: f64) -> (f64, f64) {
    let (c1, c2) = (c.c1, c.c2);
    let b = -6.0 * x * x - 12.0 * c1 * x + 12.0 * c1 * c1;
    let c0 = x.powi(4) + 4.0 * c1 * x.powi(3) - 2.0 * c2 * x + c1 * c2;
    (b, c0)
}

/// Left-hand side of the algebraic trajectory equation.
pub fn trajectory_polynomial(c: &TrajectoryConstants, x: f64, y: f64) -> f64 {
    let (b, c0) = quadratic_coeffs(c, x);
    9.0 * y * y + b * y + c0
}

/// Both roots `(plus, minus)` in y.
pub fn trajectory_roots(c: &TrajectoryConstants, x: f64) -> Result<(f64, f64), DynError> {
    let (b, _) = quadratic_coeffs(c, x);
    // b² − 36 c0 factors as 36 (2x − c̃1)(c̃2 − 4c̃1³); the factored form avoids
    // cancellation near double roots.
    let q = (2.0 * x - c.c1) * (c.c2 - 4.0 * c.c1.powi(3));
    if q < 0.0 {
        return Err(DynError::NoRealRoot { x, disc: 36.0 * q });
    }
    let r = 6.0 * q.sqrt();
    Ok(((-b + r) / 18.0, (-b - r) / 18.0))
}

/// The selected root of the algebraic trajectory equation at `x`.
pub fn trajectory_solve(c: &TrajectoryConstants, x: f64, branch: Branch) -> Result<CurvePoint, DynError> {
    let gap = 2.0 * x - c.c1;
    if gap.abs() < 1e-12 * (1.0 + x.abs() + c.c1.abs()) {
        return Err(DynError::AtVerticalTangent { x, gap });
    }
    let (p, m) = trajectory_roots(c, x)?;
    let y = if branch == Branch::Plus { p } else { m };
    Ok(curve_point(c, x, y))
}

/// The root closest to `prev`.
pub fn trajectory_solve_auto(c: &TrajectoryConstants, x: f64, prev: f64) -> Result<(CurvePoint, Branch), DynError> {
    let (p, m) = trajectory_roots(c, x)?;
    let branch = if (p - prev).abs() <= (m - prev).abs() { Branch::Plus } else { Branch::Minus };
    Ok((trajectory_solve(c, x, branch)?, branch))
}

fn curve_point(c: &TrajectoryConstants, x: f64, y: f64) -> CurvePoint {
    let yx = (x * x + y) / (2.0 * x - c.c1);
    let (b, _) = quadratic_coeffs(c, x);
    let py = 18.0 * y + b;
    let px = 4.0 * x.powi(3) + 12.0 * c.c1 * x * x - 12.0 * x * y - 12.0 * c.c1 * y - 2.0 * c.c2;
    let scale = 18.0 * y.abs() + b.abs();
    let slope_residual = if py.abs() > 1e-6 * scale {
        let implicit = -px / py;
        (implicit - yx).abs() / yx.abs().max(1.0)
    } else {
        0.0
    };
    CurvePoint { y, yx, slope_residual }
}

/// A sample of the reparametrized trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParamSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub xd: f64,
    pub yd: f64,
    pub branch: Branch,
}

pub const MAX_TURNING_POINTS: usize = 16;
const TURN_GAP: f64 = 1e-10;
const FOLD_OFFSET: f64 = 1e-8;
const SINGULAR_GAP: f64 = 1e-7;

/// Proper-time parametrization along the algebraic trajectory through
/// `(x0, y0)`, integrating `ẋ = ±√(k(2x − c̃1))/(x² + y(x))` with `y(x)` read
/// off the curve. `forward` picks the initial sign of `ẋ`.
pub fn reparametrize(c: &TrajectoryConstants, x0: f64, y0: f64, t1: f64, forward: bool, opts: &IntegratorOptions) -> Result<Run<ParamSample>, DynError> {
    if c.k == 0.0 {
        return Err(DynError::DegenerateLevel);
    }
    let res = trajectory_polynomial(c, x0, y0);
    let (b, c0) = quadratic_coeffs(c, x0);
    let scale = 9.0 * y0 * y0 + (b * y0).abs() + c0.abs();
    if res.abs() > 1e-8 * scale.max(1.0) {
        return Err(DynError::NotOnCurve { residual: res });
    }
    if c.k * (2.0 * x0 - c.c1) <= 0.0 {
        return Err(DynError::ImaginaryVelocity);
    }
    let (_, mut branch) = trajectory_solve_auto(c, x0, y0)?;
    let sign = if forward { 1.0 } else { -1.0 } * (x0 * x0 + y0).signum();
    let times = uniform(0.0, t1, opts.samples);
    let mut samples = Vec::with_capacity(times.len() + 1);
    let mut flips = 0usize;
    let (mut t, mut x) = (0.0, x0);
    let mut pending: &[f64] = &times;
    let record = |t: f64, x: f64, branch: Branch, sign: f64, out: &mut Vec<ParamSample>| -> Result<(), DynError> {
        let cp = trajectory_solve(c, x, branch)?;
        let f = x * x + cp.y;
        let xd = sign * (c.k * (2.0 * x - c.c1)).max(0.0).sqrt() / f;
        out.push(ParamSample { t, x, y: cp.y, xd, yd: xd * cp.yx, branch });
        Ok(())
    };
    record(0.0, x0, branch, sign, &mut samples)?;
    loop {
        let rhs = |_: f64, u: &[f64; 1]| -> Option<[f64; 1]> {
            let q = c.k * (2.0 * u[0] - c.c1);
            if q <= 0.0 {
                return None;
            }
            let cp = trajectory_solve(c, u[0], branch).ok()?;
            let f = u[0] * u[0] + cp.y;
            // x² + y = 0 is the singular locus of the metric
            if f.abs() <= SINGULAR_GAP * (1.0 + u[0] * u[0] + cp.y.abs()) {
                return None;
            }
            let v = sign * q.sqrt() / f;
            v.is_finite().then_some([v])
        };
        let (pts, stop) = dopri(rhs, t, [x], pending, opts);
        let consumed = pts.len() - 1;
        for (ti, u) in pts.iter().skip(1) {
            record(*ti, u[0], branch, sign, &mut samples)?;
        }
        pending = &pending[consumed..];
        let Some(err) = stop else { break };
        let (tl, xl) = match &err {
            DynError::LeftChart { t, state } if (c.k * (2.0 * state[0] - c.c1)).abs() <= TURN_GAP.max(1e-6 * c.k.abs()) => (*t, state[0]),
            _ => return Ok(Run { samples, stop: Some(err) }),
        };
        flips += 1;
        if flips > MAX_TURNING_POINTS {
            return Ok(Run { samples, stop: Some(DynError::TooManyTurningPoints(MAX_TURNING_POINTS)) });
        }
        // The fold x = c̃1/2 lies on x² + y = 0. There |ẋ| tends to 3√(k/D),
        // D = c̃2 − 4c̃1³, and x(t) has a corner; x² + y changes sign between
        // the branches, so switching branch alone reverses ẋ. The right-hand
        // side has a square-root singularity at the fold, so integration
        // restarts a distance FOLD_OFFSET past it.
        let xs = c.c1 / 2.0;
        let speed = 3.0 * (c.k / (c.c2 - 4.0 * c.c1.powi(3))).abs().sqrt();
        let dir = (pending[0] - tl).signum();
        let t_fold = tl + dir * (xl - xs).abs() / speed;
        let delta = FOLD_OFFSET * (1.0 + xs.abs());
        t = t_fold + dir * delta / speed;
        x = xs + delta * (xl - xs).signum();
        let before = branch;
        branch = branch.other();
        while let Some(&tn) = pending.first() {
            if (tn - tl) * dir > (t - tl) * dir {
                break;
            }
            let d = (speed * (tn - t_fold).abs()).max(1e-3 * delta);
            let b = if (tn - t_fold) * dir < 0.0 { before } else { branch };
            record(tn, xs + d * (xl - xs).signum(), b, sign, &mut samples)?;
            pending = &pending[1..];
        }
        if pending.is_empty() {
            break;
        }
    }
    Ok(Run { samples, stop: None })
}

fn inv2<S: Scalar>(g: [S; 3]) -> [S; 3] {
    let det = g[0] * g[2] - g[1] * g[1];
    [g[2] / det, -g[1] / det, g[0] / det]
}

fn det2<S: Scalar>(g: [S; 3]) -> S {
    g[0] * g[2] - g[1] * g[1]
}

/// `(H, I, J)` and their gradients in `(x, y, px, py)`, i.e. the 4×3 Jacobian.
pub fn integrals_jacobian(sigmas: (&SigmaField, &SigmaField, &SigmaField), p: Point, momenta: [f64; 2], chart: Chart) -> Result<[[f64; 3]; 4], GeomError> {
    let metrics = [sigmas.0, sigmas.1, sigmas.2].map(|s| metric_from_sigma(s, chart));
    for m in &metrics {
        m.at(p)?;
    }
    let (jx, jy) = (Jet::x(p[0]), Jet::y(p[1]));
    let g = metrics[0].eval(jx, jy);
    let gi = inv2(g);
    let dg = det2(g);
    let [px, py] = momenta;
    let mut cols = [[0.0; 4]; 3];
    for (c, m) in metrics.iter().enumerate() {
        // Contravariant coefficients of the integral:
        // H: ½ g⁻¹, others: (det g/det ḡ)^{2/3} g⁻¹ ḡ g⁻¹.
        let q = if c == 0 {
            [gi[0] * 0.5, gi[1] * 0.5, gi[2] * 0.5]
        } else {
            let b = m.eval(jx, jy);
            let f = (dg / det2(b)).abs().powf(2.0 / 3.0);
            let gm = [[gi[0], gi[1]], [gi[1], gi[2]]];
            let bm = [[b[0], b[1]], [b[1], b[2]]];
            let mut r = [[Jet::constant(0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for a in 0..2 {
                        for bb in 0..2 {
                            r[i][j] += gm[i][a] * bm[a][bb] * gm[bb][j];
                        }
                    }
                }
            }
            [r[0][0] * f, r[0][1] * f, r[1][1] * f]
        };
        let val = q[0] * (px * px) + q[1] * (2.0 * px * py) + q[2] * (py * py);
        cols[c] = [val.dx, val.dy, 2.0 * (q[0].v * px + q[1].v * py), 2.0 * (q[1].v * px + q[2].v * py)];
    }
    let mut a = [[0.0; 3]; 4];
    for r in 0..4 {
        for c in 0..3 {
            a[r][c] = cols[c][r];
        }
    }
    Ok(a)
}

/// Numerical rank of the Jacobian of `(H, I, J)`; singular values below
/// `1e−8 σ_max` count as zero.
pub fn independence_rank(sigmas: (&SigmaField, &SigmaField, &SigmaField), p: Point, momenta: [f64; 2], chart: Chart) -> Result<usize, GeomError> {
    let a = integrals_jacobian(sigmas, p, momenta, chart)?;
    Ok(numerical_rank(&a))
}

pub fn numerical_rank(a: &[[f64; 3]; 4]) -> usize {
    // Columns are rescaled first: H, I, J carry unrelated overall factors.
    let mut m = DMatrix::from_fn(4, 3, |r, c| a[r][c]);
    for c in 0..3 {
        let n = m.column(c).norm();
        if n > 0.0 {
            m.column_mut(c).scale_mut(1.0 / n);
        }
    }
    let sv = m.svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > 1e-8 * smax).count()
}

/// Velocity `g⁻¹ p` of momenta `p` at `q`.
pub fn velocity_from_momenta(g: &Metric2, q: Point, p: [f64; 2]) -> Result<[f64; 2], GeomError> {
    let c = g.at(q)?;
    let m = Matrix2::new(c[0], c[1], c[1], c[2]);
    let v = m.try_inverse().ok_or(GeomError::SingularMetric { x: q[0], y: q[1], det: 0.0 })? * Vector2::new(p[0], p[1]);
    Ok([v[0], v[1]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_line() {
        let run = integrate_geodesic(&Metric2::flat().with_chart(Chart::new(-5.0, 5.0, -5.0, 5.0)), GeodesicState::new(0.0, 0.0, 0.0, 1.0, 1.0), 2.0, &IntegratorOptions::default());
        let last = *run.into_result().unwrap().last().unwrap();
        assert!((last.x - 2.0).abs() < 1e-10 && (last.y - 2.0).abs() < 1e-10);
    }

    #[test]
    fn exponential_decay_accuracy() {
        let (pts, stop) = dopri(|_, u: &[f64; 1]| Some([-u[0]]), 0.0, [1.0], &[1.0, 2.0], &IntegratorOptions::default());
        assert!(stop.is_none());
        assert!((pts[2].1[0] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn double_root() {
        let c = TrajectoryConstants::new(0.0, 0.0, 1.0);
        for x in [0.5, 1.0, -2.0] {
            let p = trajectory_solve(&c, x, Branch::Plus).unwrap();
            assert!((p.y - x * x / 3.0).abs() < 1e-12);
            assert!((p.yx - 2.0 * x / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_discriminant() {
        // disc(x) vanishes at x = c̃1/2 and changes sign there.
        let c = TrajectoryConstants::new(1.0, 3.0, 1.0);
        let ok = [0.3, 0.7].iter().any(|x| trajectory_solve(&c, *x, Branch::Plus).is_err());
        assert!(ok);
    }

    #[test]
    fn rank_of_zero_matrix() {
        assert_eq!(numerical_rank(&[[0.0; 3]; 4]), 0);
    }
}
