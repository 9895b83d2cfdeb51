use std::path::PathBuf;

use curvlab::riemann::{christoffel, metric_jet, riemann_tensor, scalar_curvature_from_jet};
use curvlab::scenario::{load_scenario, ScenarioBody, ScenarioKind};
use curvlab::surface::c_constants;
use curvlab::{Expression, MetricField, Params, PolytopeDomain, SmoothedSurface, SurfaceOptions};
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

fn expr(text: &str) -> Expression {
    Expression::parse(text, 3).unwrap()
}

fn metric(entries: [[String; 3]; 3]) -> MetricField {
    let rows = (0..3)
        .map(|i| (i..3).map(|j| expr(&entries[i][j])).collect())
        .collect();
    MetricField::from_upper(3, rows).unwrap()
}

// A non-conformal metric with a tunable perturbation; SPD for |c| < 0.2 on [-1,1]^3.
fn wobbly(c: [f64; 4]) -> MetricField {
    let [a, b, d, e] = c;
    metric([
        [format!("1 + {a}*x2^2"), format!("{b}*sin(x3)"), format!("{d}*x1*x2")],
        [String::new(), format!("1 + {e}*cos(x1)"), format!("{a}*x3")],
        [String::new(), String::new(), format!("exp({b}*x1*x3)")],
    ])
}

fn at(r: &[f64], n: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
    r[((i * n + j) * n + k) * n + l]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn riemann_symmetries_and_first_bianchi(
        c in proptest::array::uniform4(-0.15f64..0.15),
        x in proptest::array::uniform3(-1.0f64..1.0),
    ) {
        let field = wobbly(c);
        let jet = metric_jet(&field, &x, &Params::new()).unwrap();
        let r = riemann_tensor(&jet, &christoffel(&jet));
        let n = 3;
        let scale = 1.0 + r.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..n { for j in 0..n { for k in 0..n { for l in 0..n {
            let v = at(&r, n, i, j, k, l);
            prop_assert!((v + at(&r, n, j, i, k, l)).abs() < 1e-12 * scale);
            prop_assert!((v + at(&r, n, i, j, l, k)).abs() < 1e-12 * scale);
            prop_assert!((v - at(&r, n, k, l, i, j)).abs() < 1e-12 * scale);
            let bianchi = v + at(&r, n, i, k, l, j) + at(&r, n, i, l, j, k);
            prop_assert!(bianchi.abs() < 1e-12 * scale);
        }}}}
    }

    // Scalar curvature is a coordinate invariant: pulling a conformal metric
    // back by a rotation must leave it unchanged at corresponding points.
    #[test]
    fn scalar_curvature_is_rotation_invariant(
        axis in proptest::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..3.0,
        x in proptest::array::uniform3(-1.0f64..1.0),
    ) {
        prop_assume!(Vector3::from(axis).norm() > 0.1);
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::from(axis)), angle);
        let m: Matrix3<f64> = *rot.matrix();
        let f = "0.2*x1^2 + 0.1*x2*x3 - 0.3*x3";
        let fr = f
            .replace("x1", "(X1)").replace("x2", "(X2)").replace("x3", "(X3)");
        let fr = (0..3).fold(fr, |s, k| {
            s.replace(&format!("X{}", k + 1), &format!("{}*x1 + {}*x2 + {}*x3", m[(k, 0)], m[(k, 1)], m[(k, 2)]))
        });
        let g = MetricField::conformal(&expr(f)).unwrap();
        let gr = MetricField::conformal(&expr(&fr)).unwrap();
        let y = m * Vector3::from(x);
        let p = Params::new();
        let r1 = scalar_curvature_from_jet(&metric_jet(&gr, &x, &p).unwrap());
        let r2 = scalar_curvature_from_jet(&metric_jet(&g, y.as_slice(), &p).unwrap());
        prop_assert!((r1 - r2).abs() < 1e-10 * (1.0 + r2.abs()), "{r1} vs {r2}");
    }
}

fn rotated_cube(m: &Matrix3<f64>) -> Vec<Expression> {
    let mut faces = Vec::new();
    for k in 0..3 {
        // R(cube) = {y : R^T y in cube}
        let row = format!("({}*x1 + {}*x2 + {}*x3)", m[(0, k)], m[(1, k)], m[(2, k)]);
        faces.push(expr(&format!("{row} - 1")));
        faces.push(expr(&format!("-{row} - 1")));
    }
    faces
}

fn cube_faces() -> Vec<Expression> {
    ["x1 - 1", "-x1 - 1", "x2 - 1", "-x2 - 1", "x3 - 1", "-x3 - 1"]
        .iter()
        .map(|t| expr(t))
        .collect()
}

// Surface quantities at x on the cube must reappear at R x on the rotated
// cube, for the flat metric and for a radial conformal one.
#[test]
fn surface_quantities_are_rotation_invariant() {
    let rot = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
    let m: Matrix3<f64> = *rot.matrix();
    let radial = MetricField::conformal(&expr("0.1*(x1^2 + x2^2 + x3^2)")).unwrap();
    for metric in [MetricField::euclidean(3), radial] {
        let base = PolytopeDomain::new(cube_faces(), metric.clone(), Params::new(), vec![0.0; 3]).unwrap();
        let turned = PolytopeDomain::new(rotated_cube(&m), metric, Params::new(), vec![0.0; 3]).unwrap();
        for lambda in [20.0, 80.0] {
            let s0 = SmoothedSurface::new(&base, lambda, SurfaceOptions::default()).unwrap();
            let s1 = SmoothedSurface::new(&turned, lambda, SurfaceOptions::default()).unwrap();
            for sample in s0.sample_rays(64).unwrap() {
                let y = m * Vector3::from_column_slice(&sample.x);
                let g = s1.evaluate(y.as_slice()).unwrap();
                assert!(s1.residual(y.as_slice()).unwrap() < 1e-10);
                let tol = 1e-9 * (1.0 + sample.h.abs() + sample.tr_n.abs());
                assert!((g.h - sample.h).abs() < tol, "H {} vs {}", g.h, sample.h);
                assert!((g.tr_n - sample.tr_n).abs() < tol);
                assert!((g.v - sample.v).abs() < tol, "V {} vs {}", g.v, sample.v);
            }
        }
    }
}

// Linear defining functions with the flat metric: the smoothed boundary has
// V >= 0 up to rounding, for any convex cut of the cube.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_linear_polytopes_have_nonnegative_v(
        cuts in proptest::collection::vec((proptest::array::uniform3(-1.0f64..1.0), 0.3f64..1.0), 1..5),
        lambda in 10.0f64..120.0,
    ) {
        let mut faces = cube_faces();
        for (n, b) in &cuts {
            let v = Vector3::from(*n);
            prop_assume!(v.norm() > 0.2);
            let u = v / v.norm();
            faces.push(expr(&format!("{}*x1 + {}*x2 + {}*x3 - {b}", u[0], u[1], u[2])));
        }
        let d = PolytopeDomain::new(faces, MetricField::euclidean(3), Params::new(), vec![0.0; 3]).unwrap();
        let surf = match SmoothedSurface::new(&d, lambda, SurfaceOptions::default()) {
            Ok(s) => s,
            Err(_) => return Ok(()), // lambda below the admissible threshold
        };
        for s in surf.sample_rays(256).unwrap() {
            prop_assert!(s.v >= -1e-10, "V = {}", s.v);
            prop_assert!(s.h - s.tr_n >= s.v - 1e-10);
        }
    }
}

fn fixture(name: &str) -> curvlab::Scenario {
    load_scenario(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../scenarios/{name}.json"))).unwrap()
}

#[test]
fn sphere_c1_infimum_is_two() {
    let scn = fixture("ball");
    let ScenarioBody::Polytope(p) = &scn.body else { unreachable!() };
    for lambda in [5.0, 50.0] {
        let s = SmoothedSurface::new(&p.domain, lambda, p.surface).unwrap().sample_rays(1024).unwrap();
        let (c1, _) = c_constants(&s);
        assert!((c1 - 2.0).abs() < 1e-12, "{c1}");
    }
}

#[test]
fn cube_c_constants_are_stable_in_lambda() {
    let scn = fixture("cube");
    let ScenarioBody::Polytope(p) = &scn.body else { unreachable!() };
    let mut c1s = Vec::new();
    let mut c2s = Vec::new();
    for lambda in [50.0, 100.0, 200.0, 400.0] {
        let s = SmoothedSurface::new(&p.domain, lambda, p.surface).unwrap().sample_rays(4096).unwrap();
        let (c1, c2) = c_constants(&s);
        assert!(c1 > 0.0 && c2 > 0.0);
        c1s.push(c1);
        c2s.push(c2);
    }
    for v in [&c1s, &c2s] {
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi / lo < 1.2, "{v:?}");
    }
}

#[test]
fn every_fixture_loads() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let scn = load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(scn.dim(), 3);
        count += 1;
    }
    assert!(count >= 10);
    let cube = fixture("cube");
    assert_eq!(cube.kind(), ScenarioKind::Polytope);
    let ScenarioBody::Polytope(p) = &cube.body else { unreachable!() };
    assert_eq!(p.domain.face_count(), 6);
    assert_eq!(p.domain.dim(), 3);
}
