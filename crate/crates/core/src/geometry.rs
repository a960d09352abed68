//! Metrics, projective connections, σ-fields and the operations between them.

use nalgebra::Matrix2;
use rand::Rng;
use thiserror::Error;

use crate::expr::Expr;
use crate::jet::Jet;
use crate::scalar::Scalar;
use crate::special::SpecialError;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("metric is singular at ({x}, {y}): det = {det:e}")]
    SingularMetric { x: f64, y: f64, det: f64 },
    #[error("sigma field is degenerate at ({x}, {y}): det = {det:e}")]
    DegenerateSigma { x: f64, y: f64, det: f64 },
    #[error("direction y_x = {yx} is null for the metric at ({x}, {y})")]
    NullDirection { x: f64, y: f64, yx: f64 },
    #[error("vertical tangent: |xd| = {xd:e}")]
    VerticalTangent { xd: f64 },
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// Relative threshold below which a 2×2 determinant counts as zero.
pub const DET_TOL: f64 = 1e-12;

fn det_is_tiny(a: f64, b: f64, d: f64, det: f64) -> bool {
    let scale = (a * d).abs() + b * b;
    !det.is_finite() || det.abs() <= DET_TOL * scale || scale == 0.0
}

/// Closed axis-aligned rectangle; used as the sampling domain of a field.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Chart {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Chart {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Chart { x: [x0, x1], y: [y0, y1] }
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x[0] && p[0] <= self.x[1] && p[1] >= self.y[0] && p[1] <= self.y[1]
    }

    pub fn center(&self) -> Point {
        [0.5 * (self.x[0] + self.x[1]), 0.5 * (self.y[0] + self.y[1])]
    }

    pub fn uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        [rng.gen_range(self.x[0]..=self.x[1]), rng.gen_range(self.y[0]..=self.y[1])]
    }

    /// `n × n` grid of interior points (cell centres).
    pub fn grid(&self, n: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let u = (i as f64 + 0.5) / n as f64;
                let v = (j as f64 + 0.5) / n as f64;
                out.push([
                    self.x[0] + u * (self.x[1] - self.x[0]),
                    self.y[0] + v * (self.y[1] - self.y[0]),
                ]);
            }
        }
        out
    }
}

/// Minimum distance to a declared singular locus accepted by the samplers.
pub const LOCUS_MARGIN: f64 = 1e-2;
/// Smallest `|det g| / max|g_ij|²` accepted for metrics built from σ, whose
/// degeneracy locus `det σ = 0` is not known symbolically.
pub const SIGMA_DET_MARGIN: f64 = 1e-3;

/// First-order distance estimate `|f| / |∇f|` to the zero set of `f`.
pub fn locus_distance(f: &Expr, p: Point) -> f64 {
    let j = f.eval(Jet::x(p[0]), Jet::y(p[1]));
    let g = j.dx.hypot(j.dy);
    if !j.v.is_finite() {
        return 0.0;
    }
    if g == 0.0 {
        return if j.v == 0.0 { 0.0 } else { f64::INFINITY };
    }
    j.v.abs() / g
}

#[derive(Clone, Debug)]
enum MetricSrc {
    Explicit([Expr; 3]),
    Sigma(Box<SigmaField>),
}

/// Symmetric (0,2)-tensor field `g11 dx² + 2 g12 dx dy + g22 dy²`.
#[derive(Clone, Debug)]
pub struct Metric2 {
    src: MetricSrc,
    pub chart: Chart,
    /// Functions whose zero sets bound the domain of validity.
    pub singular: Vec<Expr>,
    pub label: String,
}

impl Metric2 {
    pub fn explicit(label: impl Into<String>, g: [Expr; 3], chart: Chart, singular: Vec<Expr>) -> Self {
        Metric2 { src: MetricSrc::Explicit(g), chart, singular, label: label.into() }
    }

    /// Diagonal metric `a dx² + b dy²`.
    pub fn diagonal(label: impl Into<String>, a: Expr, b: Expr, chart: Chart) -> Self {
        Self::explicit(label, [a, Expr::zero(), b], chart, vec![])
    }

    pub fn flat() -> Self {
        Self::diagonal("flat", Expr::c(1.0), Expr::c(1.0), Chart::new(-1.0, 1.0, -1.0, 1.0))
    }

    pub fn with_chart(mut self, chart: Chart) -> Self {
        self.chart = chart;
        self
    }

    pub fn with_singular(mut self, s: Vec<Expr>) -> Self {
        self.singular = s;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Explicit component formulas, when the metric is given in closed form.
    pub fn formulas(&self) -> Option<&[Expr; 3]> {
        match &self.src {
            MetricSrc::Explicit(g) => Some(g),
            MetricSrc::Sigma(_) => None,
        }
    }

    /// Components `(g11, g12, g22)` at a generic scalar point.
    pub fn eval<S: Scalar>(&self, x: S, y: S) -> [S; 3] {
        match &self.src {
            MetricSrc::Explicit(g) => [g[0].eval(x, y), g[1].eval(x, y), g[2].eval(x, y)],
            MetricSrc::Sigma(s) => metric_of_sigma(s.eval(x, y)),
        }
    }

    fn eval_plain<S: Scalar>(&self, x: S, y: S) -> [S; 3] {
        match &self.src {
            MetricSrc::Explicit(g) => [g[0].eval(x, y), g[1].eval(x, y), g[2].eval(x, y)],
            MetricSrc::Sigma(s) => metric_of_sigma(s.eval_plain(x, y)),
        }
    }

    /// Components at `p`, with the nondegeneracy check.
    pub fn at(&self, p: Point) -> Result<[f64; 3], GeomError> {
        if let MetricSrc::Sigma(s) = &self.src {
            let [a, b, d] = s.eval(p[0], p[1]);
            let det = a * d - b * b;
            if det_is_tiny(a, b, d, det) {
                return Err(GeomError::DegenerateSigma { x: p[0], y: p[1], det });
            }
        }
        let g = self.eval(p[0], p[1]);
        let det = g[0] * g[2] - g[1] * g[1];
        if det_is_tiny(g[0], g[1], g[2], det) {
            return Err(GeomError::SingularMetric { x: p[0], y: p[1], det });
        }
        Ok(g)
    }

    pub fn det_at(&self, p: Point) -> Result<f64, GeomError> {
        let g = self.at(p)?;
        Ok(g[0] * g[2] - g[1] * g[1])
    }

    /// `g(v, v)` at `p`.
    pub fn quadratic(&self, p: Point, v: [f64; 2]) -> Result<f64, GeomError> {
        let g = self.at(p)?;
        Ok(g[0] * v[0] * v[0] + 2.0 * g[1] * v[0] * v[1] + g[2] * v[1] * v[1])
    }

    /// True if `p` is in the chart, away from the singular locus and
    /// the metric is finite and nondegenerate there.
    pub fn is_regular(&self, p: Point) -> bool {
        self.chart.contains(p)
            && self.singular.iter().all(|f| locus_distance(f, p) >= LOCUS_MARGIN)
            && self.at(p).map(|g| g.iter().all(|c| c.is_finite()) && self.nondegenerate(g)).unwrap_or(false)
    }

    fn nondegenerate(&self, g: [f64; 3]) -> bool {
        match self.src {
            MetricSrc::Sigma(_) => {
                let n = g.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                (g[0] * g[2] - g[1] * g[1]).abs() >= SIGMA_DET_MARGIN * n * n
            }
            _ => true,
        }
    }

    /// Uniform samples from the chart, rejecting irregular points.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Point> {
        let mut out = Vec::with_capacity(n);
        let mut tries = 0usize;
        while out.len() < n && tries < 1000 * n.max(1) {
            tries += 1;
            let p = self.chart.uniform(rng);
            if self.is_regular(p) {
                out.push(p);
            }
        }
        out
    }
}

/// Weighted symmetric (2,0)-tensor field σ^{ij}.
#[derive(Clone, Debug)]
pub enum SigmaField {
    Explicit([Expr; 3]),
    FromMetric(Box<Metric2>),
    /// Σ cₖ σₖ.
    Combination(Vec<(f64, SigmaField)>),
    /// Weighted Lie derivative ℒ_X σ.
    Lie(Box<SigmaField>, VectorField2),
}

fn sigma_of_components<S: Scalar>([a, b, d]: [S; 3]) -> [S; 3] {
    let det = a * d - b * b;
    let f = det.abs().powf(1.0 / 3.0) / det;
    [d * f, -b * f, a * f]
}

fn metric_of_sigma<S: Scalar>([a, b, d]: [S; 3]) -> [S; 3] {
    let det = a * d - b * b;
    let k = (det * det.abs()).recip();
    [d * k, -b * k, a * k]
}

/// Weight coefficient of σ in the Lie derivative, `2/(N+1)` with `N = 2`.
pub const SIGMA_WEIGHT: f64 = 2.0 / 3.0;

impl SigmaField {
    pub fn eval<S: Scalar>(&self, x: S, y: S) -> [S; 3] {
        match self {
            SigmaField::Explicit(s) => [s[0].eval(x, y), s[1].eval(x, y), s[2].eval(x, y)],
            SigmaField::FromMetric(g) => sigma_of_components(g.eval(x, y)),
            SigmaField::Combination(terms) => {
                let mut acc = [S::zero(); 3];
                for (c, s) in terms {
                    let v = s.eval(x, y);
                    for k in 0..3 {
                        acc[k] += v[k] * *c;
                    }
                }
                acc
            }
            SigmaField::Lie(s, xf) => {
                let (jx, jy) = (Jet::x(x), Jet::y(y));
                let sj = s.eval_plain(jx, jy);
                let xj = xf.eval(jx, jy);
                let m = [[sj[0], sj[1]], [sj[1], sj[2]]];
                let div = xj[0].dx + xj[1].dy;
                let out = |i: usize, j: usize| {
                    let mut r = m[i][j].v * div * SIGMA_WEIGHT;
                    for a in 0..2 {
                        r += xj[a].v * m[i][j].d(a);
                        r -= m[a][j].v * xj[i].d(a);
                        r -= m[i][a].v * xj[j].d(a);
                    }
                    r
                };
                [out(0, 0), out(0, 1), out(1, 1)]
            }
        }
    }

    /// [`Self::eval`] for fields without nested Lie derivatives. Kept separate
    /// so that jet types do not grow without bound during monomorphization.
    fn eval_plain<S: Scalar>(&self, x: S, y: S) -> [S; 3] {
        match self {
            SigmaField::Explicit(s) => [s[0].eval(x, y), s[1].eval(x, y), s[2].eval(x, y)],
            SigmaField::FromMetric(g) => sigma_of_components(g.eval_plain(x, y)),
            SigmaField::Combination(terms) => {
                let mut acc = [S::zero(); 3];
                for (c, s) in terms {
                    let v = s.eval_plain(x, y);
                    for k in 0..3 {
                        acc[k] += v[k] * *c;
                    }
                }
                acc
            }
            SigmaField::Lie(..) => panic!("nested Lie derivatives of σ are not supported"),
        }
    }

    pub fn at(&self, p: Point) -> [f64; 3] {
        self.eval(p[0], p[1])
    }

    pub fn det_at(&self, p: Point) -> f64 {
        let s = self.at(p);
        s[0] * s[2] - s[1] * s[1]
    }

    pub fn scaled(self, c: f64) -> Self {
        SigmaField::Combination(vec![(c, self)])
    }
}

/// Vector field `X¹ ∂x + X² ∂y`.
#[derive(Clone, Debug)]
pub struct VectorField2 {
    pub x: Expr,
    pub y: Expr,
}

impl VectorField2 {
    pub fn new(x: Expr, y: Expr) -> Self {
        VectorField2 { x, y }
    }

    pub fn zero() -> Self {
        Self::new(Expr::zero(), Expr::zero())
    }

    pub fn eval<S: Scalar>(&self, x: S, y: S) -> [S; 2] {
        [self.x.eval(x, y), self.y.eval(x, y)]
    }
}

/// Christoffel symbols `gamma[k][i][j] = Γ^k_{ij}` at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Christoffel2 {
    pub gamma: [[[f64; 2]; 2]; 2],
}

impl Christoffel2 {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[k][i][j]
    }
}

/// Levi-Civita Christoffel symbols at a generic scalar point.
pub fn christoffel_generic<S: Scalar>(g: &Metric2, x: S, y: S) -> [[[S; 2]; 2]; 2] {
    let c = g.eval(Jet::x(x), Jet::y(y));
    let m = [[c[0], c[1]], [c[1], c[2]]];
    let det = c[0].v * c[2].v - c[1].v * c[1].v;
    let inv = [[c[2].v / det, -c[1].v / det], [-c[1].v / det, c[0].v / det]];
    let mut out = [[[S::zero(); 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in i..2 {
                let mut s = S::zero();
                for l in 0..2 {
                    s += inv[k][l] * (m[l][j].d(i) + m[l][i].d(j) - m[i][j].d(l));
                }
                out[k][i][j] = s * 0.5;
                out[k][j][i] = out[k][i][j];
            }
        }
    }
    out
}

pub fn christoffel(g: &Metric2, p: Point) -> Result<Christoffel2, GeomError> {
    g.at(p)?;
    Ok(Christoffel2 { gamma: christoffel_generic(g, p[0], p[1]) })
}

/// The projective connection `y'' = f0 + f1 y' + f2 y'² + f3 y'³`.
#[derive(Clone, Debug)]
pub enum ProjConn {
    Explicit([Expr; 4]),
    FromMetric(Box<Metric2>),
}

impl ProjConn {
    pub fn zero() -> Self {
        ProjConn::Explicit([Expr::zero(), Expr::zero(), Expr::zero(), Expr::zero()])
    }

    pub fn eval<S: Scalar>(&self, x: S, y: S) -> [S; 4] {
        match self {
            ProjConn::Explicit(f) => [f[0].eval(x, y), f[1].eval(x, y), f[2].eval(x, y), f[3].eval(x, y)],
            ProjConn::FromMetric(g) => {
                let c = christoffel_generic(g, x, y);
                [
                    -c[1][0][0],
                    c[0][0][0] - c[1][0][1] * 2.0,
                    -(c[1][1][1] - c[0][0][1] * 2.0),
                    c[0][1][1],
                ]
            }
        }
    }

    pub fn at(&self, p: Point) -> Result<[f64; 4], GeomError> {
        if let ProjConn::FromMetric(g) = self {
            g.at(p)?;
        }
        Ok(self.eval(p[0], p[1]))
    }

    /// Right-hand side `f0 + f1 yx + f2 yx² + f3 yx³`.
    pub fn rhs(&self, p: Point, yx: f64) -> f64 {
        let f = self.eval(p[0], p[1]);
        f[0] + yx * (f[1] + yx * (f[2] + yx * f[3]))
    }
}

pub fn proj_conn_from_metric(g: &Metric2) -> ProjConn {
    ProjConn::FromMetric(Box::new(g.clone()))
}

pub fn sigma_from_metric(g: &Metric2) -> SigmaField {
    SigmaField::FromMetric(Box::new(g.clone()))
}

/// Inverse of [`sigma_from_metric`]: `g = σ⁻¹ / |det σ|`.
pub fn metric_from_sigma(s: &SigmaField, chart: Chart) -> Metric2 {
    Metric2 { src: MetricSrc::Sigma(Box::new(s.clone())), chart, singular: vec![], label: "from_sigma".into() }
}

/// The four left-hand sides of the 2D metrizability system together with the
/// largest absolute summand of each, used as a relative scale.
#[derive(Clone, Copy, Debug)]
pub struct MetrizabilityResidual {
    pub r: [f64; 4],
    pub scale: [f64; 4],
}

impl MetrizabilityResidual {
    pub fn max_abs(&self) -> f64 {
        self.r.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest residual over the largest summand of the whole system.
    pub fn max_rel(&self) -> f64 {
        let s = self.scale.iter().fold(0.0f64, |m, v| m.max(*v));
        let r = self.max_abs();
        if r == 0.0 {
            0.0
        } else {
            r / s.max(f64::MIN_POSITIVE)
        }
    }
}

pub fn metrizability_residual(pc: &ProjConn, s: &SigmaField, p: Point) -> MetrizabilityResidual {
    let f = pc.eval(p[0], p[1]);
    let sj = s.eval(Jet::x(p[0]), Jet::y(p[1]));
    let (s11, s12, s22) = (sj[0], sj[1], sj[2]);
    let third = 1.0 / 3.0;
    let terms: [Vec<f64>; 4] = [
        vec![s22.dx, -2.0 * third * f[1] * s22.v, -2.0 * f[0] * s12.v],
        vec![
            s22.dy,
            -2.0 * s12.dx,
            -4.0 * third * f[2] * s22.v,
            -2.0 * third * f[1] * s12.v,
            2.0 * f[0] * s11.v,
        ],
        vec![
            -2.0 * s12.dy,
            s11.dx,
            -2.0 * f[3] * s22.v,
            2.0 * third * f[2] * s12.v,
            4.0 * third * f[1] * s11.v,
        ],
        vec![s11.dy, 2.0 * f[3] * s12.v, 2.0 * third * f[2] * s11.v],
    ];
    let mut r = [0.0; 4];
    let mut scale = [0.0; 4];
    for k in 0..4 {
        r[k] = terms[k].iter().sum();
        scale[k] = terms[k].iter().fold(0.0f64, |m, t| m.max(t.abs()));
    }
    MetrizabilityResidual { r, scale }
}

/// Value of a Benenti tensor `L(g, ḡ)` at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Benenti2 {
    pub l: Matrix2<f64>,
}

impl Benenti2 {
    /// Largest entry of `g L − (g L)ᵀ`.
    pub fn self_adjointness_defect(&self, g: [f64; 3]) -> f64 {
        let gm = Matrix2::new(g[0], g[1], g[1], g[2]);
        let gl = gm * self.l;
        (gl - gl.transpose()).abs().max()
    }
}

pub fn benenti(g: &Metric2, gbar: &Metric2, p: Point) -> Result<Benenti2, GeomError> {
    let a = g.at(p)?;
    let b = gbar.at(p)?;
    let gm = Matrix2::new(a[0], a[1], a[1], a[2]);
    let bm = Matrix2::new(b[0], b[1], b[1], b[2]);
    let f = (bm.determinant() / gm.determinant()).abs().powf(1.0 / 3.0);
    let binv = bm.try_inverse().ok_or(GeomError::SingularMetric { x: p[0], y: p[1], det: 0.0 })?;
    Ok(Benenti2 { l: binv * gm * f })
}

/// Covariant symmetric 2-tensor field h_ij.
#[derive(Clone, Debug)]
pub enum QuadraticForm2 {
    Explicit([Expr; 3]),
    Metric(Box<Metric2>),
    /// `(det g / det ḡ)^{2/3} ḡ`, a Killing tensor of `g` when `g` and `ḡ` are projectively equivalent.
    Topalov(Box<Metric2>, Box<Metric2>),
    /// `X_(i;j) − (2/3) div X g_ij`.
    FromProjectiveField(Box<Metric2>, VectorField2),
    Scaled(f64, Box<QuadraticForm2>),
}

impl QuadraticForm2 {
    pub fn eval<S: Scalar>(&self, x: S, y: S) -> [S; 3] {
        match self {
            QuadraticForm2::Explicit(h) => [h[0].eval(x, y), h[1].eval(x, y), h[2].eval(x, y)],
            QuadraticForm2::Metric(g) => g.eval(x, y),
            QuadraticForm2::Topalov(g, gb) => {
                let a = g.eval(x, y);
                let b = gb.eval(x, y);
                let r = (a[0] * a[2] - a[1] * a[1]) / (b[0] * b[2] - b[1] * b[1]);
                let f = r.abs().powf(2.0 / 3.0);
                [b[0] * f, b[1] * f, b[2] * f]
            }
            QuadraticForm2::FromProjectiveField(g, xf) => h_from_projective_field(g, xf, x, y),
            QuadraticForm2::Scaled(c, q) => {
                let v = q.eval(x, y);
                [v[0] * *c, v[1] * *c, v[2] * *c]
            }
        }
    }

    pub fn at(&self, p: Point) -> [f64; 3] {
        self.eval(p[0], p[1])
    }

    pub fn scaled(self, c: f64) -> Self {
        QuadraticForm2::Scaled(c, Box::new(self))
    }
}

fn h_from_projective_field<S: Scalar>(g: &Metric2, xf: &VectorField2, x: S, y: S) -> [S; 3] {
    let (jx, jy) = (Jet::x(x), Jet::y(y));
    let c = g.eval(jx, jy);
    let m = [[c[0], c[1]], [c[1], c[2]]];
    let xv = xf.eval(jx, jy);
    let gam = christoffel_generic(g, x, y);
    let mut div = S::zero();
    for i in 0..2 {
        div += xv[i].d(i);
        for j in 0..2 {
            div += xv[j].v * gam[i][i][j];
        }
    }
    let sym = |i: usize, j: usize| {
        let mut s = S::zero();
        for a in 0..2 {
            s += xv[a].d(j) * m[a][i].v + xv[a].v * m[a][i].d(j);
            s += xv[a].d(i) * m[a][j].v + xv[a].v * m[a][j].d(i);
            for k in 0..2 {
                s -= xv[a].v * m[a][k].v * gam[k][j][i] * 2.0;
            }
        }
        s * 0.5 - div * m[i][j].v * SIGMA_WEIGHT
    };
    [sym(0, 0), sym(0, 1), sym(1, 1)]
}

pub fn killing_from_projective_field(g: &Metric2, x: &VectorField2) -> QuadraticForm2 {
    QuadraticForm2::FromProjectiveField(Box::new(g.clone()), x.clone())
}

/// Components (111, 112, 122, 222) of the symmetrized covariant derivative ∇_(k K_ij).
pub fn killing_residual(g: &Metric2, k: &QuadraticForm2, p: Point) -> Result<[f64; 4], GeomError> {
    let gam = christoffel(g, p)?.gamma;
    let kj = k.eval(Jet::x(p[0]), Jet::y(p[1]));
    let km = [[kj[0], kj[1]], [kj[1], kj[2]]];
    let nabla = |a: usize, i: usize, j: usize| {
        let mut s = km[i][j].d(a);
        for b in 0..2 {
            s -= gam[b][a][i] * km[b][j].v + gam[b][a][j] * km[i][b].v;
        }
        s
    };
    Ok([
        nabla(0, 0, 0),
        (2.0 * nabla(0, 0, 1) + nabla(1, 0, 0)) / 3.0,
        (nabla(0, 1, 1) + 2.0 * nabla(1, 0, 1)) / 3.0,
        nabla(1, 1, 1),
    ])
}

/// `(h11 + 2 h12 yx + h22 yx²) / (g11 + 2 g12 yx + g22 yx²)`.
pub fn rational_integral(h: &QuadraticForm2, g: &Metric2, p: Point, yx: f64) -> Result<f64, GeomError> {
    let gv = g.at(p)?;
    let hv = h.at(p);
    let den = gv[0] + 2.0 * gv[1] * yx + gv[2] * yx * yx;
    let scale = gv[0].abs() + 2.0 * (gv[1] * yx).abs() + (gv[2] * yx * yx).abs();
    if den.abs() < 1e-10 * scale {
        return Err(GeomError::NullDirection { x: p[0], y: p[1], yx });
    }
    Ok((hv[0] + 2.0 * hv[1] * yx + hv[2] * yx * yx) / den)
}

/// Result of [`projective_field_residual`].
#[derive(Clone, Copy, Debug)]
pub struct ProjectiveFieldResidual {
    /// Max-norm of `ℒ_X Γ^i_jk − µ_j δ^i_k − µ_k δ^i_j`.
    pub residual: f64,
    pub mu: [f64; 2],
    /// Max-norm of `ℒ_X Γ` itself, for relative comparisons.
    pub scale: f64,
}

pub fn projective_field_residual(g: &Metric2, xf: &VectorField2, p: Point) -> Result<ProjectiveFieldResidual, GeomError> {
    g.at(p)?;
    let gam = christoffel_generic(g, Jet::x(p[0]), Jet::y(p[1]));
    let xv = xf.eval(Jet::x(p[0]), Jet::y(p[1]));
    let mut lg = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let mut s = xv[i].dd(j, k);
                for a in 0..2 {
                    s += xv[a].v * gam[i][j][k].d(a);
                    s -= gam[a][j][k].v * xv[i].d(a);
                    s += gam[i][a][k].v * xv[a].d(j);
                    s += gam[i][j][a].v * xv[a].d(k);
                }
                lg[i][j][k] = s;
            }
        }
    }
    let mut mu = [0.0; 2];
    for j in 0..2 {
        mu[j] = (lg[0][0][j] + lg[1][1][j]) / 3.0;
    }
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let r = lg[i][j][k] - mu[j] * delta(i, k) - mu[k] * delta(i, j);
                residual = residual.max(r.abs());
                scale = scale.max(lg[i][j][k].abs());
            }
        }
    }
    Ok(ProjectiveFieldResidual { residual, mu, scale })
}

pub fn lie_derivative_sigma(s: &SigmaField, x: &VectorField2) -> SigmaField {
    SigmaField::Lie(Box::new(s.clone()), x.clone())
}

/// Projection of a parametrized curve's 2-jet to `(x, y, y_x, y_xx)`.
pub fn jet_project(_t: f64, x: f64, y: f64, xd: f64, yd: f64, xdd: f64, ydd: f64) -> Result<[f64; 4], GeomError> {
    if xd.abs() < 1e-12 {
        return Err(GeomError::VerticalTangent { xd: xd.abs() });
    }
    Ok([x, y, yd / xd, (ydd * xd - xdd * yd) / (xd * xd * xd)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere() -> Metric2 {
        let s = Expr::y().sin();
        Metric2::diagonal("sphere", s.clone() * s, Expr::c(1.0), Chart::new(-1.0, 1.0, 0.5, 2.5))
    }

    #[test]
    fn flat_christoffel_vanishes() {
        let c = christoffel(&Metric2::flat(), [0.2, -0.4]).unwrap();
        assert!(c.gamma.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn sphere_christoffel_by_hand() {
        let (x, y) = (0.3, 1.0);
        let c = christoffel(&sphere(), [x, y]).unwrap();
        let (s, co) = (f64::sin(y), f64::cos(y));
        assert!((c.get(1, 0, 0) + s * co).abs() < 1e-15);
        assert!((c.get(0, 0, 1) - co / s).abs() < 1e-15);
        assert!((c.get(0, 1, 0) - co / s).abs() < 1e-15);
        for (k, i, j) in [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 1)] {
            assert_eq!(c.get(k, i, j), 0.0);
        }
    }

    #[test]
    fn singular_metric_is_reported() {
        let g = Metric2::diagonal("deg", Expr::x(), Expr::c(1.0), Chart::new(-1.0, 1.0, -1.0, 1.0));
        assert!(matches!(christoffel(&g, [0.0, 0.3]), Err(GeomError::SingularMetric { .. })));
    }

    #[test]
    fn sigma_of_sphere_at_half() {
        let y = std::f64::consts::FRAC_PI_6;
        let s = sigma_from_metric(&sphere()).at([0.0, y]);
        assert!((s[0] - 0.25f64.powf(1.0 / 3.0) * 4.0).abs() < 1e-14);
        assert!((s[0] - 2.519_842_099_789_746).abs() < 1e-12);
        assert!((s[2] - 0.629_960_524_947_436_6).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn jet_project_arithmetic() {
        assert_eq!(jet_project(0.0, 1.0, 2.0, 1.0, 0.0, 0.0, 0.0).unwrap(), [1.0, 2.0, 0.0, 0.0]);
        assert_eq!(jet_project(0.0, 0.0, 0.0, 2.0, 4.0, 0.0, 8.0).unwrap(), [0.0, 0.0, 2.0, 2.0]);
        assert!(jet_project(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0).is_err());
    }
}
