use std::f64::consts::FRAC_PI_2;

use projconn::catalog::{self, make, make_default, spherical_sigma, Params};
use projconn::dynamics::*;
use projconn::geometry::{christoffel, jet_project, killing_from_projective_field, metric_from_sigma, proj_conn_from_metric, Chart, QuadraticForm2};
use projconn::{Metric2, ProjConn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn opts(samples: usize) -> IntegratorOptions {
    IntegratorOptions { samples, ..IntegratorOptions::default() }
}

fn sphere() -> Metric2 {
    make_default("sphere").unwrap().metric.with_chart(Chart::new(-3.0, 3.0, 0.2, 2.9))
}

fn super_chart() -> Chart {
    Chart::new(0.2, 4.0, 0.1, 6.0)
}

#[test]
fn sphere_equator_is_a_great_circle() {
    let g = sphere();
    let run = integrate_geodesic(&g, GeodesicState::new(0.0, 0.0, FRAC_PI_2, 1.0, 0.0), 1.0, &opts(50)).into_result().unwrap();
    for s in &run {
        assert!((s.y - FRAC_PI_2).abs() < 1e-12 && (s.x - s.t).abs() < 1e-10, "{s:?}");
    }
    let d = monitor(&run, &[energy_monitor(&g, 1e-9)]);
    assert!(!d[0].flagged, "{d:?}");
}

#[test]
fn superintegrable_energy_conserved() {
    let g = make("dom3.g1", &Params::from([("swap".to_string(), 1.0)])).unwrap().metric.with_chart(super_chart());
    let s0 = GeodesicState::new(0.0, 1.0, 1.0, 0.4, 0.7);
    let run = integrate_geodesic(&g, s0, 1.0, &opts(100)).into_result().unwrap();
    let h = |s: &GeodesicState| (s.x * s.x + s.y) * s.xd * s.yd;
    let h0 = h(&run[0]);
    for s in &run {
        assert!((h(s) - h0).abs() < 1e-8 * h0.abs().max(1.0), "{s:?}");
    }
}

#[test]
fn geodesic_stops_at_chart_edge() {
    let g = Metric2::flat().with_chart(Chart::new(-1.0, 1.0, -1.0, 1.0));
    let run = integrate_geodesic(&g, GeodesicState::new(0.0, 0.0, 0.0, 1.0, 0.0), 3.0, &opts(30));
    match run.stop {
        Some(DynError::LeftChart { state, .. }) => assert!((state[0] - 1.0).abs() < 1e-6 && state[0] <= 1.0, "{state:?}"),
        other => panic!("{other:?}"),
    }
    assert!(run.samples.iter().all(|s| s.x <= 1.0));
}

#[test]
fn flat_quotient_is_a_line() {
    let run = integrate_quotient(&ProjConn::zero(), Chart::new(-5.0, 5.0, -5.0, 5.0), QuotientState::new(0.0, 0.5, -0.3), 2.0, &opts(20))
        .into_result()
        .unwrap();
    for q in &run {
        assert!((q.y - (0.5 - 0.3 * q.x)).abs() < 1e-12 && (q.yx + 0.3).abs() < 1e-12);
    }
}

#[test]
fn sphere_rational_integral_on_quotient_runs() {
    let pc = catalog::sphere_proj_conn();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let q0 = QuotientState::new(rng.gen_range(-0.8..0.8), rng.gen_range(1.2..1.9), rng.gen_range(-0.5..0.5));
        let run = integrate_quotient(&pc, Chart::new(-1.5, 1.5, 0.4, 2.7), q0, q0.x + 0.6, &opts(60)).into_result().unwrap();
        let f0 = catalog::sphere_rational_integral(q0.point(), q0.yx);
        for q in &run {
            let f = catalog::sphere_rational_integral(q.point(), q.yx);
            assert!((f - f0).abs() < 1e-7 * f0.abs().max(1.0), "{q0:?}: {f} vs {f0}");
        }
    }
}

#[test]
fn superintegrable_quotient_integrals_constant() {
    let pc = catalog::superintegrable_proj_conn();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..10 {
        let q0 = QuotientState::new(rng.gen_range(0.8..1.6), rng.gen_range(0.5..1.5), rng.gen_range(0.3..2.0));
        let run = integrate_quotient(&pc, super_chart(), q0, q0.x + 0.3, &opts(40)).into_result().unwrap();
        let i0 = superintegrable_quotient_integrals(q0.x, q0.y, q0.yx);
        for q in &run {
            let i = superintegrable_quotient_integrals(q.x, q.y, q.yx);
            for k in 0..2 {
                assert!((i[k] - i0[k]).abs() < 1e-7 * i0[k].abs().max(1.0), "Ĩ{} along {q0:?}", k + 1);
            }
        }
    }
}

#[test]
fn monitors_flag_non_integrals() {
    let g = sphere();
    let x = make_default("sphere").unwrap().projective_field.unwrap();
    let k = killing_from_projective_field(&g, &x);
    let run = integrate_geodesic(&g, GeodesicState::new(0.0, 0.1, 1.2, 0.8, 0.5), 1.0, &opts(100)).into_result().unwrap();
    let xsq = IntegralMonitor::new("x²", 1e-7, |s: &GeodesicState| s.x * s.x);
    let d = monitor(&run, &[energy_monitor(&g, 1e-8), quadratic_monitor("I_X", &k, 1e-7), xsq]);
    assert!(!d[0].flagged && !d[1].flagged, "{d:?}");
    assert!(d[2].flagged && d[2].drift > 0.1, "{d:?}");
}

#[test]
fn ratio_monitor_rejects_null_velocity() {
    let g = make("dom3.g1", &Params::new()).unwrap().metric;
    let s0 = GeodesicState::new(0.0, 1.5, 1.0, 1.0, 0.0);
    let k = QuadraticForm2::Metric(Box::new(g.clone()));
    assert!(matches!(ratio_monitor("r", &k, &g, &s0, 1e-7), Err(DynError::NullVelocity)));
}

#[test]
fn quadratic_integrals_for_entries_with_projective_field() {
    for s in catalog::list().iter().filter(|s| s.projective_field) {
        let e = make_default(s.label).unwrap();
        let g = &e.metric;
        let k = killing_from_projective_field(g, e.projective_field.as_ref().unwrap());
        let ch = g.chart;
        let (w, h) = (ch.x[1] - ch.x[0], ch.y[1] - ch.y[0]);
        // stay well inside the chart for unit time
        let v0 = [0.15 * w, 0.1 * h];
        let s0 = GeodesicState::new(0.0, ch.center()[0], ch.center()[1], v0[0], v0[1]);
        let run = integrate_geodesic(g, s0, 1.0, &opts(50)).into_result().unwrap_or_else(|e| panic!("{}: {e}", s.label));
        let scale_h = g.at(s0.point()).unwrap().iter().fold(0.0f64, |m, c| m.max(c.abs())) * (v0[0].abs() + v0[1].abs()).powi(2);
        let scale_k = k.at(s0.point()).iter().fold(0.0f64, |m, c| m.max(c.abs())) * (v0[0].abs() + v0[1].abs()).powi(2);
        let mon = [
            IntegralMonitor::new("H", 1e-7, {
                let g = g.clone();
                move |s: &GeodesicState| g.quadratic(s.point(), s.velocity()).unwrap() / scale_h
            }),
            IntegralMonitor::new("I_X", 1e-7, {
                let k = k.clone();
                move |s: &GeodesicState| {
                    let c = k.at(s.point());
                    (c[0] * s.xd * s.xd + 2.0 * c[1] * s.xd * s.yd + c[2] * s.yd * s.yd) / scale_k.max(f64::MIN_POSITIVE)
                }
            }),
        ];
        for d in monitor(&run, &mon) {
            assert!(!d.flagged, "{}: {d:?}", s.label);
        }
    }
}

/// Quotient ODE residual of jet-projected geodesics and overlay with the direct quotient run.
fn covering_check(g: &Metric2, s0: GeodesicState, t1: f64) {
    let pc = proj_conn_from_metric(g);
    let run = integrate_geodesic(g, s0, t1, &opts(80)).into_result().unwrap_or_else(|e| panic!("{}: {e}", g.label));
    let mut jets = vec![];
    for s in &run {
        let c = christoffel(g, s.point()).unwrap();
        let v = s.velocity();
        let acc: Vec<f64> = (0..2).map(|k| -(0..2).map(|i| (0..2).map(|j| c.get(k, i, j) * v[i] * v[j]).sum::<f64>()).sum::<f64>()).collect();
        let j = jet_project(s.t, s.x, s.y, s.xd, s.yd, acc[0], acc[1]).unwrap();
        let r = j[3] - pc.rhs([j[0], j[1]], j[2]);
        assert!(r.abs() < 1e-6 * j[3].abs().max(1.0), "{}: residual {r} at {s:?}", g.label);
        jets.push(j);
    }
    assert!(jets.windows(2).all(|w| (w[1][0] - w[0][0]) * s0.xd.signum() > 0.0), "{}: x not monotone", g.label);
    let xs: Vec<f64> = jets.iter().skip(1).map(|j| j[0]).collect();
    let q0 = QuotientState::new(jets[0][0], jets[0][1], jets[0][2]);
    let q = integrate_quotient_at(&pc, g.chart, q0, &xs, &opts(0)).into_result().unwrap();
    assert_eq!(q.len(), jets.len());
    for (a, b) in q.iter().zip(&jets) {
        assert!((a.x - b[0]).abs() < 1e-12);
        assert!((a.y - b[1]).abs() < 1e-6 && (a.yx - b[2]).abs() < 1e-6 * b[2].abs().max(1.0), "{}: {a:?} vs {b:?}", g.label);
    }
}

#[test]
fn geodesics_project_to_quotient_solutions() {
    for label in ["sphere", "dom3.g1", "dini.liouville", "B.4", "C.7"] {
        let g = make_default(label).unwrap().metric;
        let ch = g.chart;
        let (w, h) = (ch.x[1] - ch.x[0], ch.y[1] - ch.y[0]);
        let c = ch.center();
        covering_check(&g, GeodesicState::new(0.0, c[0] - 0.2 * w, c[1], 0.25 * w, 0.1 * h), 1.0);
    }
}

#[test]
fn trajectory_matches_integrated_quotient() {
    let pc = catalog::superintegrable_proj_conn();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let q0 = QuotientState::new(rng.gen_range(0.8..1.6), rng.gen_range(0.5..1.5), rng.gen_range(0.3..2.0));
        let run = integrate_quotient(&pc, super_chart(), q0, q0.x + 0.4, &opts(40)).into_result().unwrap();
        let [c1, c2] = superintegrable_quotient_integrals(q0.x, q0.y, q0.yx);
        let c = TrajectoryConstants::new(c1, c2, 1.0);
        let mut prev = q0.y;
        for q in &run {
            let (p, _) = trajectory_solve_auto(&c, q.x, prev).unwrap();
            assert!((p.y - q.y).abs() < 1e-6, "{q0:?} at x = {}: {} vs {}", q.x, p.y, q.y);
            assert!((p.yx - q.yx).abs() < 1e-6 * q.yx.abs().max(1.0));
            assert!(p.slope_residual < 1e-6);
            prev = p.y;
        }
    }
}

#[test]
fn perfect_square_case() {
    let c = TrajectoryConstants::new(0.0, 0.0, 1.0);
    for x in [0.3, 1.0, 2.5, -1.7] {
        for b in [Branch::Plus, Branch::Minus] {
            let p = trajectory_solve(&c, x, b).unwrap();
            assert!((p.y - x * x / 3.0).abs() < 1e-10);
        }
    }
    assert!(matches!(trajectory_solve(&c, 0.0, Branch::Plus), Err(DynError::AtVerticalTangent { .. })));
}

#[test]
fn no_real_root_on_the_wrong_side() {
    // disc = 36 (2x − c̃1)(c̃2 − 4c̃1³)
    let c = TrajectoryConstants::new(1.0, 5.0, 1.0);
    assert!(trajectory_solve(&c, 0.8, Branch::Plus).is_ok());
    assert!(matches!(trajectory_solve(&c, 0.2, Branch::Plus), Err(DynError::NoRealRoot { .. })));
    let d = TrajectoryConstants::new(1.0, 3.0, 1.0);
    assert!(matches!(trajectory_solve(&d, 0.8, Branch::Minus), Err(DynError::NoRealRoot { .. })));
    assert!(trajectory_solve(&d, 0.2, Branch::Minus).is_ok());
}

/// Fourth-order central difference of sampled values with uniform spacing.
fn derivative(v: &[f64], i: usize, h: f64) -> f64 {
    (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h)
}

#[test]
fn reparametrized_trajectory_levels() {
    let c = TrajectoryConstants::new(0.0, 0.0, 1.0);
    let t1 = 0.5;
    let run = reparametrize(&c, 1.0, 1.0 / 3.0, t1, true, &opts(500)).unwrap().into_result().unwrap();
    assert!(run.windows(2).all(|w| w[1].x > w[0].x));
    for s in &run {
        let xd = 3.0 * (2.0 * s.x).sqrt() / (4.0 * s.x * s.x);
        assert!((s.xd - xd).abs() < 1e-9 * xd);
        assert!(((s.x * s.x + s.y) * s.xd * s.yd - c.k).abs() < 1e-6);
        assert!((s.yd * s.yd * (2.0 * s.x - c.c1) - c.k).abs() < 1e-6);
    }
    // re-differentiate the sampled x(t), y(t)
    let h = t1 / 500.0;
    let (xs, ys): (Vec<f64>, Vec<f64>) = run.iter().map(|s| (s.x, s.y)).unzip();
    for i in 2..run.len() - 2 {
        let (xd, yd) = (derivative(&xs, i, h), derivative(&ys, i, h));
        let s = run[i];
        assert!(((s.x * s.x + s.y) * xd * yd - c.k).abs() < 1e-6, "t = {}", s.t);
        assert!((yd * yd * (2.0 * s.x - c.c1) - c.k).abs() < 1e-6, "t = {}", s.t);
    }
}

#[test]
fn reparametrize_preconditions() {
    let c = TrajectoryConstants::new(0.0, 0.0, 0.0);
    assert!(matches!(reparametrize(&c, 1.0, 1.0 / 3.0, 1.0, true, &opts(10)), Err(DynError::DegenerateLevel)));
    let c = TrajectoryConstants::new(0.0, 0.0, 1.0);
    assert!(matches!(reparametrize(&c, 1.0, 0.5, 1.0, true, &opts(10)), Err(DynError::NotOnCurve { .. })));
    assert!(matches!(reparametrize(&c, -1.0, 1.0 / 3.0, 1.0, true, &opts(10)), Err(DynError::ImaginaryVelocity)));
}

#[test]
fn reparametrize_through_the_fold() {
    // real roots for x ≥ −1/2; the fold sits on x² + y = 0 and the run
    // continues on the sheet with x² + y < 0
    let c = TrajectoryConstants::new(-1.0, 0.0, 1.0);
    let (y0, _) = trajectory_roots(&c, -0.3).unwrap();
    assert!(0.09 + y0 > 0.0);
    let run = reparametrize(&c, -0.3, y0, 0.4, false, &opts(400)).unwrap();
    assert!(run.stop.is_none(), "{:?}", run.stop);
    let s = run.samples;
    let min = s.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    assert!((-0.5..-0.49).contains(&min), "{min}");
    let turn = s.iter().position(|p| p.branch != s[0].branch).expect("no branch change");
    assert!(s[1..turn].iter().all(|p| p.xd < 0.0 && p.x * p.x + p.y > 0.0));
    assert!(s[turn..].iter().all(|p| p.xd > 0.0 && p.x * p.x + p.y < 0.0));
    assert!(s.last().unwrap().x > min + 0.01, "{:?}", s.last());
    for p in &s {
        let res = trajectory_polynomial(&c, p.x, p.y);
        assert!(res.abs() < 1e-9, "{p:?}: {res}");
        if (p.x + 0.5).abs() > 1e-3 {
            assert!(((p.x * p.x + p.y) * p.xd * p.yd - c.k).abs() < 1e-6, "{p:?}");
        }
    }
}

#[test]
fn reparametrize_stops_at_singular_locus() {
    // the second sheet meets x² + y = 0 again at a regular point of the curve
    let c = TrajectoryConstants::new(1.0, 5.0, 1.0);
    let (y0, _) = trajectory_roots(&c, 0.7).unwrap();
    let run = reparametrize(&c, 0.7, y0, 0.4, false, &opts(400)).unwrap();
    match run.stop {
        Some(DynError::LeftChart { state, .. }) => {
            let x = state[0];
            let (_, ym) = trajectory_roots(&c, x).unwrap();
            assert!(x > 0.5 && (x * x + ym).abs() < 1e-5, "{x}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn independence_rank_generic() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let chart = Chart::new(1.0, 2.0, 0.5, 1.5);
    let mut done = 0;
    while done < 100 {
        let (t, f) = (rng.gen_range(0.1..3.0), rng.gen_range(0.1..6.2));
        if (t - FRAC_PI_2).abs() < 0.05 {
            continue;
        }
        let (a, b, c) = spherical_sigma(t, f);
        let p = chart.uniform(&mut rng);
        let m = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        match independence_rank((&a, &b, &c), p, m, chart) {
            Ok(r) => {
                assert_eq!(r, 3, "θ = {t}, φ = {f}, p = {p:?}, momenta = {m:?}");
                done += 1;
            }
            Err(_) => continue,
        }
    }
}

#[test]
fn independence_rank_degenerate() {
    let chart = Chart::new(1.0, 2.0, 0.5, 1.5);
    let (a, _, c) = spherical_sigma(1.0, 0.7);
    let p = [1.4, 0.9];
    assert!(independence_rank((&a, &a, &c), p, [0.3, -0.7], chart).unwrap() <= 2);
    assert!(independence_rank((&a, &a.clone(), &c), p, [0.0, 0.0], chart).unwrap() < 3);
    let (a, b, c) = spherical_sigma(1.0, 0.7);
    assert!(independence_rank((&a, &b, &c), p, [0.0, 0.0], chart).unwrap() < 3);
}

#[test]
fn topalov_integrals_conserved() {
    let chart = Chart::new(1.0, 2.0, 0.5, 1.5);
    let (a, b, c) = spherical_sigma(1.0, 0.7);
    let [g, gb, gh] = [a, b, c].map(|s| metric_from_sigma(&s, chart));
    let s0 = GeodesicState::new(0.0, 1.5, 1.0, 0.2, -0.15);
    let run = integrate_geodesic(&g, s0, 1.0, &opts(60)).into_result().unwrap();
    let i = QuadraticForm2::Topalov(Box::new(g.clone()), Box::new(gb));
    let j = QuadraticForm2::Topalov(Box::new(g.clone()), Box::new(gh));
    let scale = |k: &QuadraticForm2| {
        let c = k.at(s0.point());
        c.iter().fold(0.0f64, |m, v| m.max(v.abs())) * 0.35f64.powi(2)
    };
    let (si, sj) = (scale(&i), scale(&j));
    let d = monitor(&run, &[quadratic_monitor("I", &i.scaled(1.0 / si), 1e-7), quadratic_monitor("J", &j.scaled(1.0 / sj), 1e-7)]);
    assert!(d.iter().all(|d| !d.flagged), "{d:?}");
}
