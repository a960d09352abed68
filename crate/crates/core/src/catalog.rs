//! Normal-form metrics with one essential projective vector field, the Dini
//! pairs, the degree-3 family and the round sphere.
//!
//! Metric components follow `g = g11 dx² + 2 g12 dx dy + g22 dy²`, so a printed
//! term `A dx dy` contributes `g12 = A/2`. Complex normal forms
//! `P dz² + Q dz̄²` are expanded with `z = x + iy`:
//! `g11 = P + Q`, `g12 = i(P − Q)`, `g22 = −(P + Q)`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::Serialize;
use thiserror::Error;

use crate::expr::{CExpr, Expr};
use crate::geometry::{metric_from_sigma, sigma_from_metric, Chart, Metric2, Point, ProjConn, SigmaField, VectorField2};
use crate::metrization::{exceptional_point, recover_projective_field, spherical_coefficients, RecoveredField, DOM3_EIGENVALUES};
use crate::special::SpecialFn;

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("unknown catalog label `{0}`")]
    UnknownLabel(String),
    #[error("parameter `{param}` is not used by `{label}`")]
    UnknownParam { label: String, param: String },
    #[error("invalid parameters for {label}: {constraint}")]
    BadParam { label: String, constraint: String },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub range: &'static str,
}

const fn ps(name: &'static str, default: f64, range: &'static str) -> ParamSpec {
    ParamSpec { name, default, range }
}

const XI: &str = "(0,1) ∪ (1,4]";
const H: &str = "h ≠ 0, h ≤ 1";
const PM1: &str = "{-1, 1}";
const KAPPA: &str = "κ ≠ 0";
const KAPPA_POS: &str = "κ > 0";
const PHI: &str = "[0, π), C = e^{iφ}";
const THETA: &str = "[0, 2π)";
const LAMBDA_POS: &str = "λ > 0";

/// Static description of a catalog label.
#[derive(Clone, Debug, Serialize)]
pub struct EntrySchema {
    pub label: &'static str,
    pub params: Vec<ParamSpec>,
    pub chart: Chart,
    pub singular_locus: &'static str,
    /// Dini type of the pair (A Liouville, B complex Liouville, C Jordan block).
    pub dini_type: Option<char>,
    /// Row of the normal-form table the entry implements.
    pub table_row: &'static str,
    pub notes: &'static str,
    pub projective_field: bool,
}

struct Def {
    label: &'static str,
    params: &'static [ParamSpec],
    chart: Chart,
    singular: &'static str,
    dini: Option<char>,
    row: &'static str,
    notes: &'static str,
    field: bool,
}

const CHART_B: Chart = Chart::new(0.5, 1.5, 0.3, 1.0);
const CHART_DOM3: Chart = Chart::new(1.0, 2.0, 0.5, 1.5);
/// Clears `det σ[1, 0.7] = 0`, which crosses `CHART_DOM3`.
const CHART_SPHERICAL: Chart = Chart::new(1.0, 1.3, 1.0, 1.5);

const DEFS: &[Def] = &[
    Def {
        label: "sphere",
        params: &[],
        chart: Chart::new(-1.0, 1.0, 0.5, 2.6),
        singular: "sin y = 0",
        dini: None,
        row: "round sphere",
        notes: "sin²y dx² + dy² with projective field sin²y cos x ∂y",
        field: true,
    },
    Def {
        label: "flat",
        params: &[],
        chart: Chart::new(-1.0, 1.0, -1.0, 1.0),
        singular: "none",
        dini: None,
        row: "flat plane",
        notes: "dx² + dy² with the homothety x∂x + y∂y",
        field: true,
    },
    Def {
        label: "dini.liouville",
        params: &[ps("eps", 1.0, PM1)],
        chart: Chart::new(-0.5, 0.5, -1.0, 0.5),
        singular: "X = Y, X = 0, Y = 0",
        dini: Some('A'),
        row: "Dini A, g1",
        notes: "(X−Y)(dx² + ε dy²); default X = x + 2, Y = y − 1",
        field: false,
    },
    Def {
        label: "dini.liouville.g2",
        params: &[ps("eps", 1.0, PM1)],
        chart: Chart::new(-0.5, 0.5, -1.0, 0.5),
        singular: "X = Y, X = 0, Y = 0",
        dini: Some('A'),
        row: "Dini A, g2",
        notes: "(1/X − 1/Y)(dx²/X + ε dy²/Y); default X = x + 2, Y = y − 1",
        field: false,
    },
    Def {
        label: "dini.complex",
        params: &[],
        chart: CHART_B,
        singular: "Im h = 0",
        dini: Some('B'),
        row: "Dini B, g1",
        notes: "(h̄ − h)(dz̄² − dz²); default h = z²",
        field: false,
    },
    Def {
        label: "dini.complex.g2",
        params: &[],
        chart: CHART_B,
        singular: "Im h = 0, h = 0",
        dini: Some('B'),
        row: "Dini B, g2",
        notes: "(1/h̄ − 1/h)(dz̄²/h̄ − dz²/h); default h = z²",
        field: false,
    },
    Def {
        label: "dini.jordan",
        params: &[],
        chart: Chart::new(0.0, 1.0, 1.5, 2.5),
        singular: "1 + x Y' = 0",
        dini: Some('C'),
        row: "Dini C, g1",
        notes: "(1 + xY') dx dy; default Y = y − 1",
        field: false,
    },
    Def {
        label: "dini.jordan.g2",
        params: &[],
        chart: Chart::new(0.0, 1.0, 1.5, 2.5),
        singular: "1 + x Y' = 0, Y = 0",
        dini: Some('C'),
        row: "Dini C, g2",
        notes: "(1 + xY')/Y⁴ (−2Y dx dy + (1 + xY') dy²); default Y = y − 1",
        field: false,
    },
    Def {
        label: "A.1",
        params: &[ps("xi", 0.5, XI), ps("h", 0.5, H), ps("eps", 1.0, PM1), ps("rho", 1.0, PM1), ps("kappa", 1.0, KAPPA)],
        chart: Chart::new(0.0, 1.0, 0.0, 1.0),
        singular: "e^{ξx} = h e^{ξy}, 1 + ϱ h e^{ξy} = 0, 1 + ϱ e^{ξx} = 0",
        dini: Some('A'),
        row: "A.1",
        notes: "ξ=2: h ≠ −ε, −4ε; ξ=3, ε=−1: |h| ≠ 1; ξ=4: h ≠ 1; h=−1: ϱ=1; h=1, ε=1: κ>0",
        field: false,
    },
    Def {
        label: "A.2",
        params: &[ps("h", 0.5, H), ps("kappa", 1.0, KAPPA)],
        chart: Chart::new(0.5, 1.0, 1.5, 2.5),
        singular: "x = 0, y = 0, y = x",
        dini: Some('A'),
        row: "A.2",
        notes: "h = 1 requires κ > 0",
        field: false,
    },
    Def {
        label: "A.3a",
        params: &[ps("lambda", 0.1, LAMBDA_POS), ps("h", 0.3, "0 ≠ h ≤ 1, |h| ≤ e^{−3λπ}"), ps("theta", 0.3, THETA)],
        chart: Chart::new(0.2, 0.8, 1.5, 2.2),
        singular: "sin(y − x) = 0, sin(x + θ) = 0, sin(y + θ) = 0",
        dini: Some('A'),
        row: "A.3a",
        notes: "|h| = e^{−3λπ} requires θ ∈ [0, π)",
        field: false,
    },
    Def {
        label: "A.3b",
        params: &[ps("h", 0.5, "0 ≠ h ≤ 1, h ≠ ±1"), ps("kappa", 1.0, KAPPA_POS)],
        chart: Chart::new(0.5, 1.0, 1.5, 2.2),
        singular: "sin x = 0, sin y = 0, sin(y − x) = 0",
        dini: Some('A'),
        row: "A.3b",
        notes: "λ = 0 member of the A.3 family",
        field: false,
    },
    Def {
        label: "B.4",
        params: &[ps("xi", 0.5, XI), ps("phi", 0.5, PHI), ps("kappa", 1.0, KAPPA)],
        chart: CHART_B,
        singular: "Im(C z^ξ) = 0, 1 + C z^ξ = 0",
        dini: Some('B'),
        row: "B.4",
        notes: "ξ=2: C ≠ ±1; ξ=3: C² ≠ ±1; ξ=4: C ≠ 1; complex arithmetic, real part stored",
        field: false,
    },
    Def {
        label: "B.5",
        params: &[ps("phi", 0.5, PHI), ps("kappa", 1.0, KAPPA_POS)],
        chart: CHART_B,
        singular: "y = 0, z = 0",
        dini: Some('B'),
        row: "B.5",
        notes: "complex arithmetic, real part stored",
        field: false,
    },
    Def {
        label: "B.6a",
        params: &[ps("lambda", 0.1, LAMBDA_POS), ps("phi", 0.5, PHI), ps("theta", 0.3, THETA)],
        chart: CHART_B,
        singular: "y = 0",
        dini: Some('B'),
        row: "B.6a",
        notes: "complex arithmetic, real part stored",
        field: false,
    },
    Def {
        label: "B.6b",
        params: &[ps("phi", 0.5, "(0, π), C ≠ 1"), ps("kappa", 1.0, KAPPA_POS)],
        chart: CHART_B,
        singular: "y = 0",
        dini: Some('B'),
        row: "B.6b",
        notes: "λ = 0 member of the B.6 family; complex arithmetic, real part stored",
        field: false,
    },
    Def {
        label: "C.7",
        params: &[ps("xi", 2.0, "(0,1) ∪ (1,4], ξ ≠ 1/2"), ps("rho", 1.0, PM1), ps("kappa", 1.0, KAPPA)],
        chart: Chart::new(0.0, 1.0, 1.2, 2.0),
        singular: "y = ϱ, y^{1/ξ} + x = 0",
        dini: Some('C'),
        row: "C.7",
        notes: "",
        field: false,
    },
    Def {
        label: "C.8",
        params: &[
            ps("kappa", 1.0, KAPPA),
            ps("branch", 1.0, "{-1, 1}: sign of y"),
            ps("repr", 1.0, "{0, 1}: 0 quadrature, 1 erf/erfi closed form"),
        ],
        chart: Chart::new(2.0, 3.0, 0.8, 1.5),
        singular: "y = 0, Y(y) + x = 0",
        dini: Some('C'),
        row: "C.8",
        notes: "Y(y) = ∫ e^{3/(2s)} |s|^{−3/2} ds from base ±1; erf/erfi representation: \
                y>0: Y = −√(2π/3)[erfi(√(3/(2y))) − erfi(√(3/2))], \
                y<0: Y = √(2π/3)[erf(√(3/(2|y|))) − erf(√(3/2))]; \
                branch −1 uses the chart y ∈ [−1.5, −0.5]",
        field: false,
    },
    Def {
        label: "C.9a",
        params: &[ps("lambda", 0.5, LAMBDA_POS), ps("theta", 0.3, THETA)],
        chart: Chart::new(1.0, 2.0, 0.5, 1.5),
        singular: "Y_λ(y) + x = 0",
        dini: Some('C'),
        row: "C.9a",
        notes: "Y_λ(y) = ∫_1^y e^{−(3λ/2) atan s} (s²+1)^{−3/4} ds by adaptive quadrature",
        field: false,
    },
    Def {
        label: "C.9b",
        params: &[ps("kappa", 1.0, KAPPA_POS)],
        chart: Chart::new(1.0, 2.0, 0.5, 1.5),
        singular: "Y_0(y) + x = 0",
        dini: Some('C'),
        row: "C.9b",
        notes: "Y_0(y) = ∫_1^y (s²+1)^{−3/4} ds by adaptive quadrature",
        field: false,
    },
    Def {
        label: "dom3.nf1",
        params: &[ps("kappa", 1.0, KAPPA), ps("eps", 1.0, PM1)],
        chart: Chart::new(1.0, 2.0, 1.5, 2.5),
        singular: "y = ε, y² + x = 0",
        dini: None,
        row: "degree-3 normal form 1",
        notes: "lies in span(σ1, σ2) of the generators; recovered projective field attached",
        field: true,
    },
    Def {
        label: "dom3.nf2",
        params: &[ps("kappa", 1.0, KAPPA), ps("eps", 1.0, PM1)],
        chart: CHART_DOM3,
        singular: "F(0, ε; x, y) = 0, y² + x = 0",
        dini: None,
        row: "degree-3 normal form 2",
        notes: "ε = −1 uses the chart y ∈ [−1.5, −0.5]",
        field: false,
    },
    Def {
        label: "dom3.nf3",
        params: &[ps("kappa", 1.0, KAPPA), ps("eps", 1.0, PM1), ps("c", 0.5, "real")],
        chart: CHART_DOM3,
        singular: "F(ε, c; x, y) = 0, y² + x = 0",
        dini: None,
        row: "degree-3 normal form 3",
        notes: "",
        field: false,
    },
    Def {
        label: "dom3.g1",
        params: &[ps("swap", 0.0, "{0, 1}: exchange x and y")],
        chart: CHART_DOM3,
        singular: "y² + x = 0",
        dini: None,
        row: "generator g1",
        notes: "(y² + x) dx dy; recovered projective field attached",
        field: true,
    },
    Def {
        label: "dom3.g2",
        params: &[ps("swap", 0.0, "{0, 1}: exchange x and y")],
        chart: CHART_DOM3,
        singular: "y = 0, y² + x = 0",
        dini: None,
        row: "generator g2",
        notes: "−2(y² + x)/y³ dx dy + (y² + x)²/y⁴ dy²",
        field: true,
    },
    Def {
        label: "dom3.g3",
        params: &[ps("swap", 0.0, "{0, 1}: exchange x and y")],
        chart: CHART_DOM3,
        singular: "3x = y², y² + x = 0",
        dini: None,
        row: "generator g3",
        notes: "(y² + x)/(3x − y²)⁶ (9(y² + x) dx² − 4y(9x + y²) dx dy + 12x(y² + x) dy²)",
        field: true,
    },
    Def {
        label: "dom3.spherical",
        params: &[ps("theta", 1.0, "[0, π]"), ps("phi", 0.7, "[0, 2π)")],
        chart: CHART_SPHERICAL,
        singular: "det σ = 0, y² + x = 0",
        dini: None,
        row: "spherical normal form σ[θ, φ]",
        notes: "σ = sinθ cosφ σ1 + sinθ sinφ σ2 + cosθ σ3; six homothetic points rejected",
        field: true,
    },
];

fn def(label: &str) -> Option<&'static Def> {
    DEFS.iter().find(|d| d.label == label)
}

fn schema_of(d: &Def) -> EntrySchema {
    EntrySchema {
        label: d.label,
        params: d.params.to_vec(),
        chart: d.chart,
        singular_locus: d.singular,
        dini_type: d.dini,
        table_row: d.row,
        notes: d.notes,
        projective_field: d.field,
    }
}

/// Every catalog label in a fixed order.
pub fn list() -> Vec<EntrySchema> {
    DEFS.iter().map(schema_of).collect()
}

pub fn schema(label: &str) -> Option<EntrySchema> {
    def(label).map(schema_of)
}

/// A constructed catalog entry.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub label: String,
    pub params: Params,
    pub metric: Metric2,
    pub projective_field: Option<VectorField2>,
    pub dini_partner: Option<String>,
    pub dini_type: Option<char>,
    /// Imaginary parts of the complex components (case B); zero on the real slice.
    pub imaginary_parts: Vec<Expr>,
    /// Special functions entering the metric.
    pub special: Vec<SpecialFn>,
    pub notes: String,
}

impl CatalogEntry {
    pub fn imaginary_residual(&self, p: Point) -> f64 {
        self.imaginary_parts.iter().fold(0.0, |m, e| m.max(e.at(p[0], p[1]).abs()))
    }
}

const EQ_TOL: f64 = 1e-12;

fn eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EQ_TOL
}

struct Checker<'a> {
    p: &'a Params,
    bad: Vec<String>,
}

impl<'a> Checker<'a> {
    fn get(&self, k: &str) -> f64 {
        self.p[k]
    }
    fn need(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.bad.push(msg.into());
        }
    }
    fn xi(&mut self) {
        let xi = self.get("xi");
        self.need(xi > 0.0 && xi <= 4.0 && !eq(xi, 1.0), format!("ξ ∈ (0,1) ∪ (1,4] (got ξ = {xi})"));
    }
    fn h(&mut self) {
        let h = self.get("h");
        self.need(h != 0.0 && h <= 1.0, format!("0 ≠ h ≤ 1 (got h = {h})"));
    }
    fn pm1(&mut self, k: &str, sym: &str) {
        let v = self.get(k);
        self.need(v == 1.0 || v == -1.0, format!("{sym} ∈ {{±1}} (got {sym} = {v})"));
    }
    fn kappa(&mut self) {
        let k = self.get("kappa");
        self.need(k != 0.0 && k.is_finite(), format!("κ ≠ 0 (got κ = {k})"));
    }
    fn kappa_pos(&mut self) {
        let k = self.get("kappa");
        self.need(k > 0.0 && k.is_finite(), format!("κ > 0 (got κ = {k})"));
    }
    fn phi(&mut self) {
        let p = self.get("phi");
        self.need((0.0..PI).contains(&p), format!("C = e^{{iφ}} with φ ∈ [0, π) (got φ = {p})"));
    }
    fn theta(&mut self) {
        let t = self.get("theta");
        self.need((0.0..TAU).contains(&t), format!("θ ∈ [0, 2π) (got θ = {t})"));
    }
    fn lambda_pos(&mut self) {
        let l = self.get("lambda");
        self.need(l > 0.0 && l.is_finite(), format!("λ > 0 (got λ = {l})"));
    }
    fn flag(&mut self, k: &str, allowed: &[f64]) {
        let v = self.get(k);
        self.need(allowed.contains(&v), format!("{k} ∈ {allowed:?} (got {v})"));
    }
}

fn validate(label: &str, p: &Params) -> Result<(), CatalogError> {
    let mut c = Checker { p, bad: Vec::new() };
    match label {
        "dini.liouville" | "dini.liouville.g2" => c.pm1("eps", "ε"),
        "A.1" => {
            c.xi();
            c.h();
            c.pm1("eps", "ε");
            c.pm1("rho", "ϱ");
            c.kappa();
            let (xi, h, e, r, k) = (c.get("xi"), c.get("h"), c.get("eps"), c.get("rho"), c.get("kappa"));
            if eq(xi, 2.0) {
                c.need(!eq(h, -e), "if ξ = 2: h ≠ −ε");
                c.need(!eq(h, -4.0 * e), "if ξ = 2: h ≠ −4ε");
            }
            if eq(xi, 3.0) && e == -1.0 {
                c.need(!eq(h.abs(), 1.0), "if ξ = 3 and ε = −1: |h| ≠ 1");
            }
            if eq(xi, 4.0) {
                c.need(!eq(h, 1.0), "if ξ = 4: h ≠ 1");
            }
            if eq(h, -1.0) {
                c.need(r == 1.0, "if h = −1: ϱ = 1");
            }
            if eq(h, 1.0) && e == 1.0 {
                c.need(k > 0.0, "if h = 1 and ε = 1: κ > 0");
            }
        }
        "A.2" => {
            c.h();
            c.kappa();
            if eq(c.get("h"), 1.0) {
                let k = c.get("kappa");
                c.need(k > 0.0, "if h = 1: κ > 0");
            }
        }
        "A.3a" => {
            c.lambda_pos();
            c.h();
            c.theta();
            let (l, h, t) = (c.get("lambda"), c.get("h"), c.get("theta"));
            let bound = (-3.0 * l * PI).exp();
            c.need(h.abs() <= bound * (1.0 + EQ_TOL), format!("|h| ≤ e^{{−3λπ}} = {bound}"));
            if (h.abs() - bound).abs() <= EQ_TOL * bound {
                c.need((0.0..PI).contains(&t), "if |h| = e^{−3λπ}: θ ∈ [0, π)");
            }
        }
        "A.3b" => {
            c.h();
            c.kappa_pos();
            let h = c.get("h");
            c.need(!eq(h.abs(), 1.0), "if λ = 0: h ≠ ±1");
        }
        "B.4" => {
            c.xi();
            c.phi();
            c.kappa();
            let (xi, phi) = (c.get("xi"), c.get("phi"));
            if eq(xi, 2.0) {
                c.need(!eq(phi, 0.0) && !eq(phi, PI), "if ξ = 2: C ≠ ±1");
            }
            if eq(xi, 3.0) {
                c.need(!eq(phi, 0.0) && !eq(phi, PI / 2.0), "if ξ = 3: C² ≠ ±1");
            }
            if eq(xi, 4.0) {
                c.need(!eq(phi, 0.0), "if ξ = 4: C ≠ 1");
            }
        }
        "B.5" => {
            c.phi();
            c.kappa_pos();
        }
        "B.6a" => {
            c.lambda_pos();
            c.phi();
            c.theta();
        }
        "B.6b" => {
            c.phi();
            c.kappa_pos();
            let phi = c.get("phi");
            c.need(!eq(phi, 0.0), "if λ = 0: C ≠ 1");
        }
        "C.7" => {
            c.xi();
            c.pm1("rho", "ϱ");
            c.kappa();
            let xi = c.get("xi");
            c.need(!eq(xi, 0.5), "ξ ≠ 1/2");
        }
        "C.8" => {
            c.kappa();
            c.flag("branch", &[1.0, -1.0]);
            c.flag("repr", &[0.0, 1.0]);
        }
        "C.9a" => {
            c.lambda_pos();
            c.theta();
        }
        "C.9b" => c.kappa_pos(),
        "dom3.nf1" | "dom3.nf2" => {
            c.kappa();
            c.pm1("eps", "ε");
        }
        "dom3.nf3" => {
            c.kappa();
            c.pm1("eps", "ε");
            let v = c.get("c");
            c.need(v.is_finite(), "c ∈ ℝ");
        }
        "dom3.g1" | "dom3.g2" | "dom3.g3" => c.flag("swap", &[0.0, 1.0]),
        "dom3.spherical" => {
            let (t, f) = (c.get("theta"), c.get("phi"));
            c.need((0.0..=PI).contains(&t), format!("θ ∈ [0, π] (got θ = {t})"));
            c.need((0.0..TAU).contains(&f), format!("φ ∈ [0, 2π) (got φ = {f})"));
            if let Some(row) = exceptional_point(t, f) {
                c.bad.push(format!("homothetic exceptional point, projective symmetry is not essential: {row}"));
            }
        }
        _ => {}
    }
    if c.bad.is_empty() {
        Ok(())
    } else {
        Err(CatalogError::BadParam { label: label.into(), constraint: c.bad.join("; ") })
    }
}

fn resolve(d: &Def, given: &Params) -> Result<Params, CatalogError> {
    for k in given.keys() {
        if !d.params.iter().any(|p| p.name == k) {
            return Err(CatalogError::UnknownParam { label: d.label.into(), param: k.clone() });
        }
    }
    Ok(d.params.iter().map(|p| (p.name.to_string(), *given.get(p.name).unwrap_or(&p.default))).collect())
}

/// Build the entry `label` with `params` (missing ones take their defaults).
pub fn make(label: &str, params: &Params) -> Result<CatalogEntry, CatalogError> {
    let d = def(label).ok_or_else(|| CatalogError::UnknownLabel(label.into()))?;
    let p = resolve(d, params)?;
    validate(label, &p)?;
    let mut e = build(d, &p);
    e.params = p;
    Ok(e)
}

pub fn make_default(label: &str) -> Result<CatalogEntry, CatalogError> {
    make(label, &Params::new())
}

fn entry(d: &Def, metric: Metric2) -> CatalogEntry {
    CatalogEntry {
        label: d.label.into(),
        params: Params::new(),
        metric,
        projective_field: None,
        dini_partner: None,
        dini_type: d.dini,
        imaginary_parts: vec![],
        special: vec![],
        notes: d.notes.into(),
    }
}

fn x() -> Expr {
    Expr::x()
}
fn y() -> Expr {
    Expr::y()
}
fn c(v: f64) -> Expr {
    Expr::c(v)
}

/// Real components and imaginary residues of `P dz² + Q dz̄²`.
pub fn complex_metric(p: CExpr, q: CExpr) -> ([Expr; 3], Vec<Expr>) {
    let sum = p.clone() + q.clone();
    let diff = p - q;
    let g = [Expr::re(sum.clone()), -Expr::im(diff.clone()), -Expr::re(sum.clone())];
    (g, vec![Expr::im(sum), Expr::re(diff)])
}

fn z() -> CExpr {
    CExpr::z()
}
fn zb() -> CExpr {
    CExpr::zbar()
}

/// Dini pair of Liouville type for one-variable functions `X(x)`, `Y(y)`.
pub fn dini_liouville(xf: Expr, yf: Expr, eps: f64, chart: Chart) -> (Metric2, Metric2) {
    let d = &xf - &yf;
    let g1 = Metric2::explicit("dini.liouville", [d.clone(), c(0.0), eps * d.clone()], chart, vec![d.clone(), xf.clone(), yf.clone()]);
    let f = 1.0 / xf.clone() - 1.0 / yf.clone();
    let g2 = Metric2::explicit(
        "dini.liouville.g2",
        [&f / &xf, c(0.0), eps * (&f / &yf)],
        chart,
        vec![d, xf, yf],
    );
    (g1, g2)
}

/// Dini pair of complex Liouville type for a holomorphic `h(z)`; the
/// second element of each pair holds the imaginary residues.
pub fn dini_complex(h: CExpr, chart: Chart) -> ((Metric2, Vec<Expr>), (Metric2, Vec<Expr>)) {
    let hb = h.clone().conj();
    let d = hb.clone() - h.clone();
    let (g1, i1) = complex_metric(-d.clone(), d.clone());
    let e = 1.0 / hb.clone() - 1.0 / h.clone();
    let (g2, i2) = complex_metric(-(e.clone() / h.clone()), e / hb);
    let locus = vec![Expr::im(h.clone())];
    (
        (Metric2::explicit("dini.complex", g1, chart, locus.clone()), i1),
        (Metric2::explicit("dini.complex.g2", g2, chart, vec![Expr::im(h.clone()), Expr::re(h.clone() * h.conj())]), i2),
    )
}

/// Dini pair of Jordan-block type for a one-variable `Y(y)`.
pub fn dini_jordan(yf: Expr, chart: Chart) -> (Metric2, Metric2) {
    let a = 1.0 + x() * yf.clone().dy();
    let g1 = Metric2::explicit("dini.jordan", [c(0.0), 0.5 * a.clone(), c(0.0)], chart, vec![a.clone()]);
    let y4 = yf.clone().powi(4);
    let g2 = Metric2::explicit(
        "dini.jordan.g2",
        [c(0.0), -(&a * &yf) / y4.clone(), (&a * &a) / y4],
        chart,
        vec![a, yf],
    );
    (g1, g2)
}

/// `(u, v) ↦ components in (x, y)`; with `swap` the formula's first variable is `y`.
fn oriented(swap: bool, f: impl Fn(Expr, Expr) -> [Expr; 3]) -> [Expr; 3] {
    if swap {
        let [a, b, d] = f(y(), x());
        [d, b, a]
    } else {
        f(x(), y())
    }
}

/// Generator `g_k` (k = 1, 2, 3) of the degree-3 family, in the variables `(u, v)`.
fn generator(k: usize, u: Expr, v: Expr) -> [Expr; 3] {
    let f = v.clone() * v.clone() + u.clone();
    match k {
        1 => [c(0.0), 0.5 * f, c(0.0)],
        2 => [c(0.0), -(&f / &v.clone().powi(3)), (&f * &f) / v.powi(4)],
        _ => {
            let pre = &f / &(3.0 * u.clone() - v.clone() * v.clone()).powi(6);
            [
                &pre * &(9.0 * f.clone()),
                &pre * &(-2.0 * v.clone() * (9.0 * u.clone() + v.clone() * v.clone())),
                &pre * &(12.0 * u * f),
            ]
        }
    }
}

fn generator_loci(k: usize, swap: bool) -> Vec<Expr> {
    let (u, v) = if swap { (y(), x()) } else { (x(), y()) };
    let f = v.clone() * v.clone() + u.clone();
    match k {
        1 => vec![f],
        2 => vec![f, v],
        _ => vec![f, 3.0 * u - v.clone() * v],
    }
}

fn swapped_chart(ch: Chart, swap: bool) -> Chart {
    if swap {
        Chart { x: ch.y, y: ch.x }
    } else {
        ch
    }
}

/// Generator metric `dom3.g{k}`.
pub fn dom3_generator(k: usize, swap: bool) -> Metric2 {
    Metric2::explicit(
        format!("dom3.g{k}"),
        oriented(swap, |u, v| generator(k, u, v)),
        swapped_chart(CHART_DOM3, swap),
        generator_loci(k, swap),
    )
}

/// `(σ1, σ2, σ3)` of the degree-3 generators.
pub fn dom3_basis(swap: bool) -> [SigmaField; 3] {
    [1, 2, 3].map(|k| sigma_from_metric(&dom3_generator(k, swap)))
}

/// Projective field of the degree-3 family recovered from its eigenvalues on the generators.
pub fn dom3_projective_field(swap: bool) -> RecoveredField {
    let basis = dom3_basis(swap);
    let chart = swapped_chart(CHART_DOM3, swap);
    let mut last = None;
    for degree in 1..=3 {
        match recover_projective_field(&basis, &DOM3_EIGENVALUES, chart, degree) {
            Ok(r) => return r,
            Err(e) => last = Some(e),
        }
    }
    panic!("projective field of the degree-3 family not recovered: {last:?}")
}

/// `(σ, σ̄, σ̂)` at `(θ, φ)` as combinations of the generators' σ fields.
pub fn spherical_sigma(theta: f64, phi: f64) -> (SigmaField, SigmaField, SigmaField) {
    let basis = dom3_basis(false);
    let rows = spherical_coefficients(theta, phi);
    let comb = |r: [f64; 3]| SigmaField::Combination(r.iter().zip(basis.iter()).map(|(a, s)| (*a, s.clone())).collect());
    (comb(rows[0]), comb(rows[1]), comb(rows[2]))
}

/// Projective connection of the round sphere, written out.
pub fn sphere_proj_conn() -> ProjConn {
    let (s, co) = (y().sin(), y().cos());
    ProjConn::Explicit([&s * &co, c(0.0), 2.0 * (co / s), c(0.0)])
}

/// Projective connection of the superintegrable class in the orientation
/// `g = (x² + y) dx dy`: `f1 = 2x/(x²+y)`, `f2 = −1/(x²+y)`.
pub fn superintegrable_proj_conn() -> ProjConn {
    let f = x() * x() + y();
    ProjConn::Explicit([c(0.0), 2.0 * x() / f.clone(), -1.0 / f, c(0.0)])
}

/// The sphere's rational integral `(sin³y cos x cos y + sin²y sin x y_x)/(sin²y + y_x²)`.
pub fn sphere_rational_integral(p: Point, yx: f64) -> f64 {
    let (s, co) = p[1].sin_cos();
    (s.powi(3) * p[0].cos() * co + s * s * p[0].sin() * yx) / (s * s + yx * yx)
}

fn y_of_c8(branch: f64, repr: f64) -> (Expr, SpecialFn) {
    let pos = branch > 0.0;
    if repr == 0.0 {
        let f = SpecialFn::y_quad(pos);
        (y().special(f.clone()), f)
    } else {
        let k = (2.0 * PI / 3.0).sqrt();
        let a = 1.5f64.sqrt();
        if pos {
            let e = -k * ((1.5 / y()).sqrt().special(SpecialFn::Erfi) - crate::special::erfi(a));
            (e, SpecialFn::Erfi)
        } else {
            let e = k * ((1.5 / (-y())).sqrt().special(SpecialFn::Erf) - crate::special::erf(a));
            (e, SpecialFn::Erf)
        }
    }
}

/// `F(ζ, c; x, y)` of the degree-3 normal forms.
fn dom3_f(zeta: f64, cc: f64) -> Expr {
    let (x1, y1) = (x(), y());
    let y2 = y1.clone().powi(2);
    let y3 = y1.clone().powi(3);
    let y4 = y1.clone().powi(4);
    y1.clone().powi(6) - 9.0 * x1.clone() * y4.clone() + 27.0 * x1.clone().powi(2) * y2.clone()
        - 27.0 * x1.clone().powi(3)
        + 4.0 * cc * cc
        - (36.0 * x1.clone() * y1.clone() + 4.0 * y3) * cc
        + (18.0 * x1.clone() * y2.clone() - 5.0 * y4 - 9.0 * x1.clone().powi(2) - 8.0 * cc * y1) * zeta
        + 4.0 * zeta * zeta * y2
}

fn build(d: &Def, p: &Params) -> CatalogEntry {
    let g = |k: &str| p[k];
    let ch = d.chart;
    match d.label {
        "sphere" => {
            let s = y().sin();
            let m = Metric2::explicit("sphere", [&s * &s, c(0.0), c(1.0)], ch, vec![s.clone()]);
            let mut e = entry(d, m);
            e.projective_field = Some(VectorField2::new(c(0.0), &s * &s * x().cos()));
            e
        }
        "flat" => {
            let mut e = entry(d, Metric2::flat());
            e.projective_field = Some(VectorField2::new(x(), y()));
            e
        }
        "dini.liouville" | "dini.liouville.g2" => {
            let (g1, g2) = dini_liouville(x() + 2.0, y() - 1.0, g("eps"), ch);
            let first = d.label == "dini.liouville";
            let mut e = entry(d, if first { g1 } else { g2 });
            e.dini_partner = Some(if first { "dini.liouville.g2" } else { "dini.liouville" }.into());
            e
        }
        "dini.complex" | "dini.complex.g2" => {
            let ((g1, i1), (g2, i2)) = dini_complex(z() * z(), ch);
            let first = d.label == "dini.complex";
            let (m, im) = if first { (g1, i1) } else { (g2, i2) };
            let mut e = entry(d, m);
            e.imaginary_parts = im;
            e.dini_partner = Some(if first { "dini.complex.g2" } else { "dini.complex" }.into());
            e
        }
        "dini.jordan" | "dini.jordan.g2" => {
            let (g1, g2) = dini_jordan(y() - 1.0, ch);
            let first = d.label == "dini.jordan";
            let mut e = entry(d, if first { g1 } else { g2 });
            e.dini_partner = Some(if first { "dini.jordan.g2" } else { "dini.jordan" }.into());
            e
        }
        "A.1" => {
            let (xi, h, eps, rho, k) = (g("xi"), g("h"), g("eps"), g("rho"), g("kappa"));
            let ex = (xi * x()).exp();
            let ey = (xi * y()).exp();
            let num = &ex - &(h * ey.clone());
            let a = 1.0 + rho * h * ey;
            let b = 1.0 + rho * ex;
            let g11 = k * (&num * &(2.0 * x()).exp()) / (&a * &(&b * &b));
            let g22 = k * eps * (&num * &(2.0 * y()).exp()) / (&(&a * &a) * &b);
            entry(d, Metric2::explicit("A.1", [g11, c(0.0), g22], ch, vec![num, a, b]))
        }
        "A.2" => {
            let (h, k) = (g("h"), g("kappa"));
            let d0 = y() - x();
            let g11 = k * (&d0 * &(-3.0 * x()).exp()) / (x() * x() * y());
            let g22 = k * h * (&d0 * &(-3.0 * y()).exp()) / (x() * y() * y());
            entry(d, Metric2::explicit("A.2", [g11, c(0.0), g22], ch, vec![x(), y(), d0]))
        }
        "A.3a" => {
            let (l, h, t) = (g("lambda"), g("h"), g("theta"));
            let sx = (x() + t).sin();
            let sy = (y() + t).sin();
            let pre = (y() - x()).sin() / (&sy * &sx);
            let g11 = &pre * &((-3.0 * l * x()).exp() / sx.clone());
            let g22 = &pre * &(h * (-3.0 * l * y()).exp() / sy.clone());
            entry(d, Metric2::explicit("A.3a", [g11, c(0.0), g22], ch, vec![(y() - x()).sin(), sx, sy]))
        }
        "A.3b" => {
            let (h, k) = (g("h"), g("kappa"));
            let (sx, sy) = (x().sin(), y().sin());
            let pre = k * (y() - x()).sin() / (&sy * &sx);
            let g11 = &pre / &sx;
            let g22 = &pre * &(h / sy.clone());
            entry(d, Metric2::explicit("A.3b", [g11, c(0.0), g22], ch, vec![sx, sy, (y() - x()).sin()]))
        }
        "B.4" => {
            let (xi, phi, k) = (g("xi"), g("phi"), g("kappa"));
            let cz = CExpr::phase(phi) * z().powf(xi);
            let czb = cz.clone().conj();
            let n = cz.clone() - czb.clone();
            let a = 1.0 + czb;
            let b = 1.0 + cz.clone();
            let pp = k * n.clone() / (a.clone() * b.clone() * b.clone());
            let qq = -k * n / (a.clone() * a * b.clone());
            let (m, im) = complex_metric(pp, qq);
            let mut e = entry(d, Metric2::explicit("B.4", m, ch, vec![Expr::im(cz), Expr::re(b.clone() * b.conj())]));
            e.imaginary_parts = im;
            e
        }
        "B.5" => {
            let (phi, k) = (g("phi"), g("kappa"));
            let cc = CExpr::phase(phi);
            let d0 = zb() - z();
            let pp = k * d0.clone() * cc.clone() * (-3.0 * z()).exp() / (z() * z() * zb());
            let qq = -k * d0 * cc.conj() * (-3.0 * zb()).exp() / (z() * zb() * zb());
            let (m, im) = complex_metric(pp, qq);
            let mut e = entry(d, Metric2::explicit("B.5", m, ch, vec![y(), x() * x() + y() * y()]));
            e.imaginary_parts = im;
            e
        }
        "B.6a" => {
            let (l, phi, t) = (g("lambda"), g("phi"), g("theta"));
            let cc = CExpr::phase(phi);
            let sz = (z() + t).sin();
            let szb = (zb() + t).sin();
            let pre = (zb() - z()).sin() / (szb.clone() * sz.clone());
            let pp = pre.clone() * cc.clone() * (-3.0 * l * z()).exp() / sz;
            let qq = -(pre * cc.conj() * (-3.0 * l * zb()).exp() / szb);
            let (m, im) = complex_metric(pp, qq);
            let mut e = entry(d, Metric2::explicit("B.6a", m, ch, vec![y()]));
            e.imaginary_parts = im;
            e
        }
        "B.6b" => {
            let (phi, k) = (g("phi"), g("kappa"));
            let cc = CExpr::phase(phi);
            let (sz, szb) = (z().sin(), zb().sin());
            let pre = k * (zb() - z()).sin() / (szb.clone() * sz.clone());
            let pp = pre.clone() * cc.clone() / sz;
            let qq = -(pre * cc.conj() / szb);
            let (m, im) = complex_metric(pp, qq);
            let mut e = entry(d, Metric2::explicit("B.6b", m, ch, vec![y()]));
            e.imaginary_parts = im;
            e
        }
        "C.7" => {
            let (xi, rho, k) = (g("xi"), g("rho"), g("kappa"));
            let f = y().powf(1.0 / xi) + x();
            let w = y() - rho;
            let g12 = -k * f.clone() / w.clone().powi(3);
            let g22 = k * (&f * &f) / w.clone().powi(4);
            entry(d, Metric2::explicit("C.7", [c(0.0), g12, g22], ch, vec![w, f]))
        }
        "C.8" => {
            let (k, branch, repr) = (g("kappa"), g("branch"), g("repr"));
            let (yy, sf) = y_of_c8(branch, repr);
            let f = yy + x();
            let chart = if branch > 0.0 { ch } else { Chart::new(2.0, 3.0, -1.5, -0.5) };
            let mut e = entry(d, Metric2::explicit("C.8", [c(0.0), 0.5 * k * f.clone(), c(0.0)], chart, vec![y(), f]));
            e.special = vec![sf];
            e
        }
        "C.9a" | "C.9b" => {
            let (l, pre) = if d.label == "C.9a" { (g("lambda"), (g("lambda") * g("theta")).exp()) } else { (0.0, g("kappa")) };
            let sf = SpecialFn::y_lambda(l);
            let f = y().special(sf.clone()) + x();
            let mut e = entry(d, Metric2::explicit(d.label, [c(0.0), 0.5 * pre * f.clone(), c(0.0)], ch, vec![f]));
            e.special = vec![sf];
            e
        }
        "dom3.nf1" => {
            let (k, eps) = (g("kappa"), g("eps"));
            let f = y() * y() + x();
            let w = y() - eps;
            let g12 = -k * f.clone() / w.clone().powi(3);
            let g22 = k * (&f * &f) / w.clone().powi(4);
            let mut e = entry(d, Metric2::explicit("dom3.nf1", [c(0.0), g12, g22], ch, vec![w, f]));
            e.projective_field = Some(dom3_projective_field(false).field);
            e
        }
        "dom3.nf2" | "dom3.nf3" => {
            let (k, eps) = (g("kappa"), g("eps"));
            let f = y() * y() + x();
            let (ff, mid, last) = if d.label == "dom3.nf2" {
                let mid = y().powi(3) + 9.0 * x() * y() - 2.0 * eps;
                (dom3_f(0.0, eps), mid, 12.0 * x())
            } else {
                let cc = g("c");
                let mid = y().powi(3) + 2.0 * eps * y() + 9.0 * x() * y() - 2.0 * cc;
                (dom3_f(eps, cc), mid, 4.0 * (eps + 3.0 * x()))
            };
            let pre = k / (&ff * &ff);
            let f2 = &f * &f;
            let g11 = &pre * &(9.0 * f2.clone());
            let g12 = &pre * &(-(mid * f.clone()));
            let g22 = &pre * &(last * f2);
            let chart = if d.label == "dom3.nf2" && eps < 0.0 { Chart::new(1.0, 2.0, -1.5, -0.5) } else { ch };
            entry(d, Metric2::explicit(d.label, [g11, g12, g22], chart, vec![ff, f]))
        }
        "dom3.g1" | "dom3.g2" | "dom3.g3" => {
            let k = (d.label.as_bytes()[6] - b'0') as usize;
            let swap = g("swap") == 1.0;
            let mut e = entry(d, dom3_generator(k, swap));
            e.projective_field = Some(dom3_projective_field(swap).field);
            e
        }
        "dom3.spherical" => {
            let (s, _, _) = spherical_sigma(g("theta"), g("phi"));
            let m = metric_from_sigma(&s, ch).with_label("dom3.spherical").with_singular(generator_loci(3, false));
            let mut e = entry(d, m);
            e.projective_field = Some(dom3_projective_field(false).field);
            e
        }
        other => unreachable!("catalog label {other} has no constructor"),
    }
}
