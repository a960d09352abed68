use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Matrix2;
use projconn::catalog::{self, make, spherical_sigma, CatalogEntry, Params};
use projconn::dynamics::*;
use projconn::geometry::{
    killing_from_projective_field, killing_residual, lie_derivative_sigma, metrizability_residual, proj_conn_from_metric, projective_field_residual,
    rational_integral, sigma_from_metric,
};
use projconn::metrization::{self, component_count, dom3_parametrize, exceptional_point, LieAction, OrbitCase, DOM3_EIGENVALUES};
use projconn::special::{xi_ode_residual, y1_ode_residual, SpecialFn};
use projconn::{Chart, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::report::{emit, plot_script, to_json, Check, Csv, Report};
use crate::{resolve_seed, CatalogArgs, CheckArgs, ClassifyArgs, EntryArgs, GeodesicArgs, QuotientArgs, RunArgs, SuperArgs};

#[derive(Debug)]
pub enum CliError {
    /// Usage or configuration problem; exit code 2.
    Config(String),
    Io(anyhow::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.into())
    }
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

type CmdResult = Result<bool, CliError>;

fn arity(flag: &str, v: &[f64], n: usize) -> Result<(), CliError> {
    if v.len() == n {
        Ok(())
    } else {
        Err(config(format!("--{flag} takes {n} comma-separated numbers, got {}", v.len())))
    }
}

const METRIZABILITY_TOL: f64 = 1e-9;
const FIELD_TOL: f64 = 1e-6;
const IMAGINARY_TOL: f64 = 1e-12;
const SPECIAL_TOL: f64 = 1e-7;
const EIGEN_TOL: f64 = 1e-6;
const LEVEL_TOL: f64 = 1e-6;
const GENERATOR_CHART: Chart = Chart::new(1.0, 2.0, 0.5, 1.5);

/// Maximum that turns NaN into +∞.
fn worst(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::INFINITY
    } else {
        a.max(b)
    }
}

fn params_of(a: &EntryArgs) -> Result<Params, CliError> {
    let mut p: Params = a.params.iter().cloned().collect();
    let named = [("xi", a.xi), ("h", a.h), ("kappa", a.kappa), ("eps", a.eps), ("rho", a.rho), ("lambda", a.lambda), ("theta", a.theta), ("phi", a.phi)];
    for (k, v) in named {
        if let Some(v) = v {
            p.insert(k.to_string(), v);
        }
    }
    let phase = match (a.c_unit, a.c_phase) {
        (Some(_), Some(_)) => return Err(config("--C and --c-phase are exclusive")),
        (Some(c), None) if c == 1.0 => Some(0.0),
        (Some(c), None) if c == -1.0 => Some(PI),
        (Some(c), None) => return Err(config(format!("--C takes ±1 (got {c}); use --c-phase for C = e^(iφ)"))),
        (None, p) => p,
    };
    if let Some(f) = phase {
        if p.insert("phi".into(), f).is_some() {
            return Err(config("the phase of C was given twice"));
        }
    }
    Ok(p)
}

fn build(a: &EntryArgs) -> Result<CatalogEntry, CliError> {
    let mut e = make(&a.label, &params_of(a)?).map_err(config)?;
    if let Some(c) = &a.chart {
        arity("chart", c, 4)?;
        if !(c[0] < c[1] && c[2] < c[3]) {
            return Err(config(format!("chart {c:?} is empty")));
        }
        e.metric = e.metric.with_chart(Chart::new(c[0], c[1], c[2], c[3]));
    }
    Ok(e)
}

fn echo<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).unwrap_or(Value::Null)
}

fn finish(mut r: Report, start: Instant, out: Option<&Path>) -> CmdResult {
    r.finish(start.elapsed().as_secs_f64());
    emit(&to_json(&r), out)?;
    Ok(r.pass)
}

pub fn catalog(a: &CatalogArgs) -> CmdResult {
    let entries: Vec<_> = match &a.label {
        Some(l) => vec![catalog::schema(l).ok_or_else(|| config(format!("unknown catalog label `{l}`")))?],
        None => catalog::list(),
    };
    emit(&to_json(&json!({ "schema": crate::report::SCHEMA, "count": entries.len(), "entries": entries })), None)?;
    Ok(true)
}

/// Eigenvalues of `ℒ_X` on the generators' σ fields, fitted on a grid, and the
/// worst residual `‖ℒ_X σk − λk σk‖ / ‖σk‖`.
fn dom3_eigen(swap: bool) -> ([f64; 3], f64) {
    let r = catalog::dom3_projective_field(swap);
    let chart = if swap { Chart { x: GENERATOR_CHART.y, y: GENERATOR_CHART.x } } else { GENERATOR_CHART };
    let mut lam = [0.0; 3];
    let mut resid = 0.0f64;
    for (k, s) in catalog::dom3_basis(swap).iter().enumerate() {
        let l = lie_derivative_sigma(s, &r.field);
        let pts = chart.grid(6);
        let (mut num, mut den) = (0.0, 0.0);
        for p in &pts {
            let (a, b) = (l.at(*p), s.at(*p));
            for i in 0..3 {
                num += a[i] * b[i];
                den += b[i] * b[i];
            }
        }
        lam[k] = num / den;
        for p in &pts {
            let (a, b) = (l.at(*p), s.at(*p));
            let n = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..3 {
                resid = worst(resid, (a[i] - lam[k] * b[i]).abs() / n);
            }
        }
    }
    (lam, resid)
}

pub fn check(a: &CheckArgs) -> CmdResult {
    let start = Instant::now();
    let e = build(&a.entry)?;
    let seed = resolve_seed(a.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = &e.metric;
    let pts = g.sample(a.npoints, &mut rng);
    let mut r = Report::new("check", echo(a));

    let pc = proj_conn_from_metric(g);
    let sig = sigma_from_metric(g);
    let m = pts.iter().map(|p| metrizability_residual(&pc, &sig, *p).max_rel()).fold(0.0, worst);
    r.push(Check::below("metrizability", m, METRIZABILITY_TOL));

    if let Some(x) = &e.projective_field {
        let k = killing_from_projective_field(g, x);
        let (mut pf, mut kr) = (0.0f64, 0.0f64);
        for p in &pts {
            pf = worst(pf, projective_field_residual(g, x, *p).map(|v| v.residual / v.scale.max(1.0)).unwrap_or(f64::INFINITY));
            let ks = k.at(*p).iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
            let res = killing_residual(g, &k, *p).map(|v| v.iter().fold(0.0f64, |m, c| m.max(c.abs())) / ks).unwrap_or(f64::INFINITY);
            kr = worst(kr, res);
        }
        r.push(Check::below("projective_field", pf, FIELD_TOL));
        r.push(Check::below("killing", kr, FIELD_TOL));
    }

    if !e.imaginary_parts.is_empty() {
        let mut im = 0.0f64;
        for p in &pts {
            let scale = g.at(*p).map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs()))).unwrap_or(1.0).max(1.0);
            im = worst(im, e.imaginary_residual(*p) / scale);
        }
        r.push(Check::below("imaginary_part", im, IMAGINARY_TOL));
    }

    if e.label == "C.8" {
        let positive = g.chart.y[0] > 0.0;
        let v = pts.iter().map(|p| y1_ode_residual(positive, p[1]).map(f64::abs).unwrap_or(f64::INFINITY)).fold(0.0, worst);
        r.push(Check::below("y1_ode", v, SPECIAL_TOL));
    }
    for f in &e.special {
        if let SpecialFn::YLambda { .. } = f {
            let v = pts.iter().map(|p| xi_ode_residual(f, p[1]).map(f64::abs).unwrap_or(f64::INFINITY)).fold(0.0, worst);
            r.push(Check::below("xi_ode", v, SPECIAL_TOL));
        }
    }

    if e.label.starts_with("dom3.g") {
        let (lam, resid) = dom3_eigen(e.params.get("swap") == Some(&1.0));
        let err = (0..3).map(|k| (lam[k] - DOM3_EIGENVALUES[k]).abs()).fold(0.0, worst);
        r.push(Check::below("recovered_field_eigen_residual", resid, EIGEN_TOL));
        r.push(Check::below("eigenvalue_error", err, EIGEN_TOL));
    }

    r.data = json!({ "label": e.label, "params": e.params, "chart": g.chart, "seed": seed, "points": pts });
    finish(r, start, a.out.as_deref())
}

fn options(run: &RunArgs) -> Result<IntegratorOptions, CliError> {
    if run.samples == 0 || !(run.rtol > 0.0 && run.atol > 0.0) {
        return Err(config("samples, rtol and atol must be positive"));
    }
    Ok(IntegratorOptions { rtol: run.rtol, atol: run.atol, samples: run.samples, ..IntegratorOptions::default() })
}

fn stop_info(stop: &Option<DynError>) -> Value {
    match stop {
        None => Value::Null,
        Some(DynError::LeftChart { t, state }) => json!({ "error": "LeftChart", "t": t, "state": state }),
        Some(e) => json!({ "error": e.to_string() }),
    }
}

fn write_csv(csv: &Csv, header: &[&str], run: &RunArgs, x: usize, ys: &[usize]) -> Result<(), CliError> {
    csv.write(&run.out)?;
    if run.emit_plot_script {
        std::fs::write(run.out.with_extension("gp"), plot_script(&run.out, header, x, ys))?;
    }
    Ok(())
}

pub fn geodesic(a: &GeodesicArgs) -> CmdResult {
    let start = Instant::now();
    let e = build(&a.entry)?;
    let g = &e.metric;
    let opts = options(&a.run)?;
    arity("ic", &a.ic, 4)?;
    let s0 = GeodesicState::new(0.0, a.ic[0], a.ic[1], a.ic[2], a.ic[3]);
    if !g.chart.contains(s0.point()) || !g.is_regular(s0.point()) {
        return Err(config(format!("initial point {:?} is outside the chart {:?} or on the singular locus", s0.point(), g.chart)));
    }
    let run = integrate_geodesic(g, s0, a.t1, &opts);
    let mut monitors = vec![energy_monitor(g, a.run.gate)];
    if let Some(x) = &e.projective_field {
        monitors.push(quadratic_monitor("I_X", &killing_from_projective_field(g, x), a.run.gate));
    }
    let names: Vec<String> = monitors.iter().map(|m| m.name.clone()).collect();
    let mut header = vec!["t", "x", "y", "xd", "yd"];
    header.extend(names.iter().map(String::as_str));
    let mut csv = Csv::new(&header);
    for s in &run.samples {
        let mut row = vec![Some(s.t), Some(s.x), Some(s.y), Some(s.xd), Some(s.yd)];
        row.extend(monitors.iter().map(|m| Some((m.evaluator)(s))));
        csv.row(&row);
    }
    let drifts = monitor(&run.samples, &monitors);
    let mut r = Report::new("geodesic", echo(a));
    for d in &drifts {
        r.push(Check::below(format!("drift_{}", d.name), d.drift, d.bound));
    }
    write_csv(&csv, &header, &a.run, 1, &[2])?;
    r.data = json!({ "label": e.label, "chart": g.chart, "samples": run.samples.len(), "drift": drifts, "stop": stop_info(&run.stop), "csv": a.run.out });
    finish(r, start, a.run.report.as_deref())
}

/// The superintegrable orientation `g = (x² + y) dx dy`.
fn is_superintegrable(e: &CatalogEntry) -> bool {
    e.label == "dom3.g1" && e.params.get("swap") == Some(&1.0)
}

pub fn quotient(a: &QuotientArgs) -> CmdResult {
    let start = Instant::now();
    let e = build(&a.entry)?;
    let g = e.metric.clone();
    let opts = options(&a.run)?;
    arity("ic", &a.ic, 3)?;
    let q0 = QuotientState::new(a.ic[0], a.ic[1], a.ic[2]);
    if !g.chart.contains(q0.point()) || !g.is_regular(q0.point()) {
        return Err(config(format!("initial point {:?} is outside the chart {:?} or on the singular locus", q0.point(), g.chart)));
    }
    let pc = proj_conn_from_metric(&g);
    let run = integrate_quotient(&pc, g.chart, q0, a.x1, &opts);
    let mut monitors: Vec<IntegralMonitor<QuotientState>> = vec![];
    if let Some(x) = &e.projective_field {
        let k = killing_from_projective_field(&g, x);
        let g = g.clone();
        monitors.push(IntegralMonitor::new("I_X", a.run.gate, move |q: &QuotientState| rational_integral(&k, &g, q.point(), q.yx).unwrap_or(f64::NAN)));
    }
    if e.label == "sphere" {
        monitors.push(IntegralMonitor::new("f", a.run.gate, |q: &QuotientState| catalog::sphere_rational_integral(q.point(), q.yx)));
    }
    if is_superintegrable(&e) {
        for i in 0..2 {
            let name = format!("I{}", i + 1);
            monitors.push(IntegralMonitor::new(name, a.run.gate, move |q: &QuotientState| superintegrable_quotient_integrals(q.x, q.y, q.yx)[i]));
        }
    }
    let names: Vec<String> = monitors.iter().map(|m| m.name.clone()).collect();
    let mut header = vec!["x", "y", "yx"];
    header.extend(names.iter().map(String::as_str));
    let mut csv = Csv::new(&header);
    for q in &run.samples {
        let mut row = vec![Some(q.x), Some(q.y), Some(q.yx)];
        row.extend(monitors.iter().map(|m| Some((m.evaluator)(q))));
        csv.row(&row);
    }
    let drifts = monitor(&run.samples, &monitors);
    let mut r = Report::new("quotient", echo(a));
    for d in &drifts {
        r.push(Check::below(format!("drift_{}", d.name), d.drift, d.bound));
    }
    write_csv(&csv, &header, &a.run, 0, &[1])?;
    r.data = json!({ "label": e.label, "chart": g.chart, "samples": run.samples.len(), "drift": drifts, "stop": stop_info(&run.stop), "csv": a.run.out });
    finish(r, start, a.run.report.as_deref())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct RankSample {
    point: Point,
    momenta: [f64; 2],
    rank: usize,
}

pub fn superintegrable(a: &SuperArgs) -> CmdResult {
    let start = Instant::now();
    if let Some(row) = exceptional_point(a.theta, a.phi) {
        return Err(config(format!(
            "(θ, φ) = ({}, {}) is exceptional: the projective symmetry degenerates to a homothety ({row})",
            a.theta, a.phi
        )));
    }
    dom3_parametrize(0.0, a.theta, a.phi).map_err(config)?;
    let branch = match a.branch.as_str() {
        "plus" => Branch::Plus,
        "minus" => Branch::Minus,
        other => return Err(config(format!("--branch takes plus or minus, got `{other}`"))),
    };
    let c = TrajectoryConstants::new(a.c1, a.c2, a.k);
    let [w0, w1] = match &a.window {
        Some(w) => {
            arity("window", w, 2)?;
            [w[0], w[1]]
        }
        None => [a.x0, a.x0 + 1.0],
    };
    if !(w0 < w1) || a.samples == 0 {
        return Err(config("empty curve window or zero samples"));
    }

    // algebraic curve, both sheets
    let curve_header = ["x", "y_plus", "y_minus"];
    let mut curve = Csv::new(&curve_header);
    let mut gaps: Vec<[f64; 2]> = vec![];
    let mut in_gap = false;
    for i in 0..=a.samples {
        let x = w0 + (w1 - w0) * i as f64 / a.samples as f64;
        match trajectory_roots(&c, x) {
            Ok((p, m)) => {
                curve.row(&[Some(x), Some(p), Some(m)]);
                in_gap = false;
            }
            Err(_) => {
                curve.row(&[Some(x), None, None]);
                match gaps.last_mut() {
                    Some(g) if in_gap => g[1] = x,
                    _ => gaps.push([x, x]),
                }
                in_gap = true;
            }
        }
    }

    // proper-time parametrization in the orientation g = (x² + y) dx dy
    let y0 = trajectory_solve(&c, a.x0, branch).map_err(config)?.y;
    let opts = IntegratorOptions { samples: a.samples, ..IntegratorOptions::default() };
    let run = reparametrize(&c, a.x0, y0, a.t1, true, &opts).map_err(config)?;
    let traj_header = ["t", "x", "y", "xd", "yd", "branch", "H"];
    let mut traj = Csv::new(&traj_header);
    let (mut level, mut on_curve) = (0.0f64, 0.0f64);
    for s in &run.samples {
        let h = (s.x * s.x + s.y) * s.xd * s.yd;
        let b = if s.branch == Branch::Plus { 1.0 } else { -1.0 };
        traj.row(&[Some(s.t), Some(s.x), Some(s.y), Some(s.xd), Some(s.yd), Some(b), Some(h)]);
        if (2.0 * s.x - c.c1).abs() > 1e-3 {
            level = worst(level, (h - c.k).abs() / c.k.abs().max(1.0));
        }
        let scale = 9.0 * s.y * s.y + s.x.powi(4) + 1.0;
        on_curve = worst(on_curve, trajectory_polynomial(&c, s.x, s.y).abs() / scale);
    }

    // functional independence of (H, I, J) at random points of the generator chart
    let seed = resolve_seed(a.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s, sb, sh) = spherical_sigma(a.theta, a.phi);
    let mut ranks = vec![];
    let mut tries = 0;
    while ranks.len() < a.rank_points && tries < 100 * a.rank_points.max(1) {
        tries += 1;
        let p = GENERATOR_CHART.uniform(&mut rng);
        let m = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if let Ok(rank) = independence_rank((&s, &sb, &sh), p, m, GENERATOR_CHART) {
            ranks.push(RankSample { point: p, momenta: m, rank });
        }
    }
    let min_rank = ranks.iter().map(|r| r.rank).min().unwrap_or(0);

    let mut r = Report::new("superintegrable", echo(a));
    r.push(Check::below("H_level", level, LEVEL_TOL));
    r.push(Check::below("curve_residual", on_curve, 1e-9));
    r.push(Check::below("rank_deficit", 3.0 - min_rank as f64, 0.0));

    let curve_path = with_suffix(&a.out, ".curve.csv");
    let traj_path = with_suffix(&a.out, ".trajectory.csv");
    curve.write(&curve_path)?;
    traj.write(&traj_path)?;
    if a.emit_plot_script {
        std::fs::write(with_suffix(&a.out, ".curve.gp"), plot_script(&curve_path, &curve_header, 0, &[1, 2]))?;
        std::fs::write(with_suffix(&a.out, ".trajectory.gp"), plot_script(&traj_path, &traj_header, 1, &[2]))?;
    }
    r.data = json!({
        "constants": c,
        "start": [a.x0, y0],
        "no_real_root": gaps,
        "stop": stop_info(&run.stop),
        "seed": seed,
        "rank": ranks,
        "curve_csv": curve_path,
        "trajectory_csv": traj_path,
    });
    finish(r, start, a.report.as_deref())
}

fn coordinates(case: OrbitCase) -> (&'static str, &'static str, Option<&'static str>) {
    match case {
        OrbitCase::I => ("ln|u2|", "|u1| / |u2|^λ", None),
        OrbitCase::II => ("ln|u1|", "e^(u2/u1) / |u1|", None),
        OrbitCase::III0 => ("atan2(u2, u1) mod 2π", "u1² + u2²", Some("s is an angle: the nonzero solutions form 𝕊¹ × ℝ and every orbit is the circle u = const")),
        OrbitCase::IIILambda => ("ln(u1² + u2²) / (2λ)", "(s − atan2(u2, u1)) mod 2π", None),
    }
}

fn describe(act: &LieAction) -> Value {
    let case = act.orbit_case();
    let (s, u, note) = coordinates(case);
    let n = act.normal_matrix();
    json!({
        "case": act.case,
        "orbit_case": case,
        "lambda": act.lambda,
        "scale": act.scale,
        "normal_form": [[n[(0, 0)], n[(0, 1)]], [n[(1, 0)], n[(1, 1)]]],
        "basis": [[act.basis[(0, 0)], act.basis[(0, 1)]], [act.basis[(1, 0)], act.basis[(1, 1)]]],
        "components": component_count(act),
        "s": s,
        "u": u,
        "note": note,
    })
}

pub fn classify(a: &ClassifyArgs) -> CmdResult {
    let start = Instant::now();
    let mut r = Report::new("classify", echo(a));
    r.data = match (&a.m, &a.label) {
        (Some(m), None) => {
            arity("m", m, 4)?;
            describe(&metrization::classify(Matrix2::new(m[0], m[1], m[2], m[3])).map_err(config)?)
        }
        (None, Some(label)) => {
            let e = make(label, &Params::new()).map_err(config)?;
            if !e.label.starts_with("dom3.g") {
                return Err(config(format!("`{label}` carries no Lie derivative data on its solution space; pass --m")));
            }
            // ℒ_X is diagonal on (σ1, σ2, σ3); classify its restriction to each coordinate plane
            let (lam, resid) = dom3_eigen(e.params.get("swap") == Some(&1.0));
            r.push(Check::below("recovered_field_eigen_residual", resid, EIGEN_TOL));
            let mut planes = vec![];
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let act = metrization::classify(Matrix2::new(lam[i], 0.0, 0.0, lam[j])).map_err(config)?;
                planes.push(json!({ "plane": [i + 1, j + 1], "action": describe(&act) }));
            }
            json!({ "label": e.label, "eigenvalues": lam, "planes": planes })
        }
        _ => return Err(config("pass exactly one of --m or --label")),
    };
    finish(r, start, None)
}
