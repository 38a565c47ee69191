use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use veerkit::flatsurf::ptorus_bundle;
use veerkit::geometry::*;
use veerkit::triangulation::*;

const VOL_FIG8: f64 = 2.029883212819307;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn omega() -> Complex64 {
    c(0.5, 3f64.sqrt() / 2.0)
}

fn load(json: &str) -> IdealTriangulation {
    serde_json::from_str::<TriangulationJson>(json).unwrap().to_triangulation().unwrap()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> Complex64, a: f64, b: f64, n: usize) -> Complex64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * (h / 3.0)
}

/// Clausen function by quadrature with the log singularity split off.
fn clausen(theta: f64) -> f64 {
    let smooth = simpson(|t| c(if t == 0.0 { 0.0 } else { (2.0 * (t / 2.0).sin() / t).ln() }, 0.0), 0.0, theta, 2000).re;
    -(theta * theta.ln() - theta) - smooth
}

/// Bloch-Wigner dilogarithm from `Li2(z) = -∫₀¹ log(1 - zt)/t dt`.
fn bloch_wigner_oracle(z: Complex64) -> f64 {
    let li2 = -simpson(|t| if t == 0.0 { -z } else { (c(1.0, 0.0) - z * t).ln() / t }, 0.0, 1.0, 20000);
    li2.im + (c(1.0, 0.0) - z).arg() * z.norm().ln()
}

/// Product form `Π z^A (1-z)^B (-1)^C` of each row, evaluated directly.
fn product_residual(system: &GluingSystem, shapes: &[Complex64]) -> f64 {
    system
        .rows
        .iter()
        .map(|row| {
            let (a, b, cc) = row.product_form();
            let mut p = c(if cc % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
            for (t, z) in shapes.iter().enumerate() {
                p *= z.powi(a[t] as i32) * (c(1.0, 0.0) - z).powi(b[t] as i32);
            }
            (p - 1.0).norm()
        })
        .fold(0.0, f64::max)
}

fn solved(word: &str) -> (IdealTriangulation, Vec<Complex64>) {
    let tri = ptorus_bundle(word).unwrap().0;
    let sys = assemble_for(&tri).unwrap();
    let s = solve(&sys, None, 0).unwrap();
    (tri, s.shapes)
}

#[test]
fn figure_eight_system() {
    let tri = figure_eight();
    let sys = assemble_for(&tri).unwrap();
    assert_eq!(sys.tet_count, 2);
    assert_eq!(sys.rows.iter().filter(|r| matches!(r.kind, RowKind::Edge(_))).count(), 2);
    assert_eq!(sys.rows.iter().filter(|r| matches!(r.kind, RowKind::Cusp { .. })).count(), 2);
    assert_eq!(sys.square.len(), 2);
    let valences = edge_valences(&tri);
    for row in &sys.rows {
        if let RowKind::Edge(e) = row.kind {
            let sum: i64 = row.coeffs.iter().flatten().sum();
            assert_eq!(sum as usize, valences[e]);
            assert_eq!(row.target, 1);
        }
    }
    let w = [omega(), omega()];
    assert!(max_residual(&sys, &w) < 1e-14);
    assert!(product_residual(&sys, &w) < 1e-14);
}

#[test]
fn edge_rows_sum_to_valences_on_bundles() {
    for w in ["RLL", "RRLL", "RLRLL"] {
        let tri = ptorus_bundle(w).unwrap().0;
        let sys = assemble_for(&tri).unwrap();
        assert_eq!(sys, assemble_for(&tri).unwrap());
        assert_eq!(sys.rows.len(), tri.edge_count() + 2);
        assert_eq!(sys.square.len(), tri.tet_count());
        let valences = edge_valences(&tri);
        for row in &sys.rows {
            if let RowKind::Edge(e) = row.kind {
                assert_eq!(row.coeffs.iter().flatten().sum::<i64>() as usize, valences[e]);
            }
        }
    }
}

#[test]
fn solve_figure_eight_from_i() {
    let sys = assemble_for(&figure_eight()).unwrap();
    let start = ShapeAssignment::new(vec![c(0.0, 1.0); 2]);
    let s = solve(&sys, Some(&start), 0).unwrap();
    for z in &s.shapes {
        assert!((z - omega()).norm() < 1e-12);
    }
    assert!(max_residual(&sys, &s.shapes) <= 1e-12);
    assert!(product_residual(&sys, &s.shapes) <= 1e-12);
    assert_eq!(classify(&s.shapes, 1e-9), Classification::Geometric);
    assert!((volume(&s.shapes).unwrap() - VOL_FIG8).abs() < 1e-9);
}

#[test]
fn solve_bundles_geometric() {
    for w in ["RLL", "RRL", "RRLL", "RLRLL", "RRRRL"] {
        let (tri, shapes) = solved(w);
        let sys = assemble_for(&tri).unwrap();
        assert!(shapes.iter().all(|z| z.im > 0.0), "{w}");
        assert!(max_residual(&sys, &shapes) <= 1e-12, "{w}");
        assert!(product_residual(&sys, &shapes) <= 1e-11, "{w}");
    }
}

#[test]
fn valence_one_edge_has_no_solution() {
    let tri = load(
        r#"{"tet_count":2,"gluings":[[[1,3,[3,2,0,1]],[0,3,[1,3,0,2]],[1,0,[1,3,0,2]],[0,1,[2,0,3,1]]],[[0,2,[2,0,3,1]],[1,2,[0,2,1,3]],[1,1,[0,2,1,3]],[0,0,[2,3,1,0]]]]}"#,
    );
    assert!(edge_valences(&tri).contains(&1));
    let sys = assemble_for(&tri).unwrap();
    for seed in 0..3 {
        let r = solve(&sys, None, seed);
        assert!(
            matches!(r, Err(GeometryError::NoConvergence) | Err(GeometryError::DegenerateDrift(_))),
            "{r:?}"
        );
    }
}

#[test]
fn classification() {
    let w = vec![omega(); 3];
    assert_eq!(classify(&w, 1e-9), Classification::Geometric);
    let mut v = w.clone();
    v[1] = v[1].conj();
    assert_eq!(classify(&v, 1e-9), Classification::NonGeometric(vec![1]));
    v[2] = c(2.0, 0.0);
    assert_eq!(classify(&v, 1e-9), Classification::ContainsFlat(vec![2]));
    assert_eq!(classify(&[c(0.3, 1e-12)], 1e-9), Classification::ContainsFlat(vec![0]));
}

#[test]
fn figure_eight_volume_matches_clausen_quadrature() {
    let oracle = 2.0 * clausen(PI / 3.0);
    assert!((oracle - VOL_FIG8).abs() < 1e-9);
    assert!((volume(&[omega(), omega()]).unwrap() - oracle).abs() < 1e-9);
    assert!((bloch_wigner(omega()) - bloch_wigner_oracle(omega())).abs() < 1e-9);
    assert_eq!(volume(&[c(0.3, 0.0), c(-2.0, 0.0), c(5.0, 0.0)]).unwrap(), 0.0);
    assert!(matches!(volume(&[omega(), c(1.0, 0.0)]), Err(GeometryError::DegenerateShape(1))));
    assert!(matches!(volume(&[c(0.0, 0.0)]), Err(GeometryError::DegenerateShape(0))));
}

fn shape() -> impl Strategy<Value = Complex64> {
    (-3.0f64..3.0, -3.0f64..3.0)
        .prop_map(|(a, b)| c(a, b))
        .prop_filter("away from 0, 1 and the real axis", |z| z.norm() > 0.05 && (z - 1.0).norm() > 0.05 && z.im.abs() > 0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bloch_wigner_properties(z in shape(), w in shape()) {
        let d = bloch_wigner(z);
        prop_assert!((d - bloch_wigner_oracle(z)).abs() < 1e-8);
        prop_assert_eq!(d > 0.0, z.im > 0.0);
        prop_assert!((bloch_wigner(z.conj()) + d).abs() < 1e-12);
        let one = c(1.0, 0.0);
        prop_assert!((bloch_wigner(one / (one - z)) - d).abs() < 1e-12);
        prop_assert!((bloch_wigner(one - one / z) - d).abs() < 1e-12);
        let v = volume(&[z, w]).unwrap();
        prop_assert!((v - d - bloch_wigner(w)).abs() < 1e-12);
        prop_assert!((volume(&[z.conj(), w.conj()]).unwrap() + v).abs() < 1e-12);
    }
}

fn check_transport(before: &IdealTriangulation, shapes: &[Complex64], after: &IdealTriangulation, mv: &PachnerMove) -> Vec<Complex64> {
    let out = transport(shapes, mv, before, after).unwrap().shapes;
    let sys = assemble_for(after).unwrap();
    assert!(max_residual(&sys, &out) <= 1e-10);
    assert!(product_residual(&sys, &out) <= 1e-10);
    assert!((volume(&out).unwrap() - volume(shapes).unwrap()).abs() <= 1e-9);
    out
}

#[test]
fn figure_eight_two_three_moves() {
    let tri = figure_eight();
    let w = vec![omega(); 2];
    for (t, f) in tri.faces() {
        let (up, mv) = pachner_23(&tri, t, f).unwrap();
        let out = check_transport(&tri, &w, &up, &mv);
        assert!(transport_23(&w, &mv, &tri, &up).is_ok());
        let e = (0..up.edge_count()).find(|&e| up.edge_embeddings(e).len() == 3).unwrap();
        let (down, mv2) = pachner_32(&up, e).unwrap();
        let back = transport_32(&out, &mv2, &up, &down).unwrap().shapes;
        assert_eq!(isomorphism_signature(&down), isomorphism_signature(&tri));
        // fig-8 is symmetric enough that both tetrahedra return as ω
        for z in &back {
            assert!((z - omega()).norm() < 1e-9);
        }
    }
}

#[test]
fn random_moves_on_rllr_preserve_volume() {
    let (mut tri, mut shapes) = solved("RLLR");
    let vol = volume(&shapes).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut done = 0;
    let mut attempts = 0;
    while done < 50 {
        attempts += 1;
        assert!(attempts < 2000);
        let (next, mv) = if rng.gen_bool(0.5) || tri.tet_count() > 9 {
            let edges: Vec<usize> = (0..tri.edge_count()).filter(|&e| pachner_32(&tri, e).is_ok()).collect();
            if edges.is_empty() {
                continue;
            }
            pachner_32(&tri, edges[rng.gen_range(0..edges.len())]).unwrap()
        } else {
            let faces: Vec<(usize, usize)> = tri.faces().into_iter().filter(|&(t, f)| tri.gluing(t, f).tet != t).collect();
            let (t, f) = faces[rng.gen_range(0..faces.len())];
            pachner_23(&tri, t, f).unwrap()
        };
        let Ok(out) = transport(&shapes, &mv, &tri, &next) else { continue };
        let sys = assemble_for(&next).unwrap();
        assert!(max_residual(&sys, &out.shapes) <= 1e-10);
        assert!((volume(&out.shapes).unwrap() - vol).abs() <= 1e-9);
        tri = next;
        shapes = out.shapes;
        done += 1;
    }
}

#[test]
fn round_trips_return_shapes() {
    let (tri, shapes) = solved("RRLL");
    for (t, f) in tri.faces() {
        let (up, mv) = pachner_23(&tri, t, f).unwrap();
        let out = check_transport(&tri, &shapes, &up, &mv);
        let added: Vec<usize> = mv.added.iter().map(|a| a.0).collect();
        let e = (0..up.edge_count())
            .find(|&e| up.edge_embeddings(e).len() == 3 && up.edge_embeddings(e).iter().all(|x| added.contains(&x.tet)))
            .unwrap();
        let (down, mv2) = pachner_32(&up, e).unwrap();
        let back = check_transport(&up, &out, &down, &mv2);
        // kept tetrahedra are untouched; the two rebuilt ones match the originals up to relabeling
        for &(old, new) in &mv.kept {
            let new2 = mv2.kept.iter().find(|k| k.0 == new).unwrap().1;
            assert!((back[new2] - shapes[old]).norm() < 1e-9);
        }
        let mut orig: Vec<f64> = mv.removed.iter().map(|r| bloch_wigner(shapes[r.0])).collect();
        let mut rebuilt: Vec<f64> = mv2.added.iter().map(|a| bloch_wigner(back[a.0])).collect();
        orig.sort_by(f64::total_cmp);
        rebuilt.sort_by(f64::total_cmp);
        for (a, b) in orig.iter().zip(&rebuilt) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn transport_commutes_with_relabeling() {
    let (tri, shapes) = solved("RRL");
    let n = tri.tet_count();
    let map: Vec<usize> = (0..n).map(|t| (t + 1) % n).collect();
    let ident = vec![veerkit::perm::Perm4::new([0, 1, 2, 3]).unwrap(); n];
    let r = tri.relabel(&map, &ident).unwrap();
    let mut rshapes = vec![c(0.0, 0.0); n];
    for t in 0..n {
        rshapes[map[t]] = shapes[t];
    }
    let (up, mv) = pachner_23(&tri, 0, 0).unwrap();
    let (rup, rmv) = pachner_23(&r, map[0], 0).unwrap();
    assert_eq!(isomorphism_signature(&up), isomorphism_signature(&rup));
    let a = transport(&shapes, &mv, &tri, &up).unwrap().shapes;
    let b = transport(&rshapes, &rmv, &r, &rup).unwrap().shapes;
    for (x, y) in mv.added.iter().zip(&rmv.added) {
        assert!((a[x.0] - b[y.0]).norm() < 1e-12);
    }
}

/// Shapes of the removed tetrahedra with bipyramid labels placed at `pos`.
fn shapes_at(tri: &IdealTriangulation, mv: &PachnerMove, pos: [Complex64; 5], base: &[Complex64]) -> Vec<Complex64> {
    let o = tri.orientation().unwrap();
    let mut out = base.to_vec();
    for &(t, labels) in &mv.removed {
        out[t] = shape_from_positions(o[t], [0, 1, 2, 3].map(|v| pos[labels[v] as usize]));
    }
    out
}

#[test]
fn flattened_bipyramid_is_degenerate() {
    let tri = figure_eight();
    let (up, mv) = pachner_23(&tri, 0, 1).unwrap();
    let a = c(0.3, 0.7);
    let u = [c(0.0, 0.0), c(1.0, 0.0), c(-0.4, 1.9)];
    // both apexes at one point: the new dual edge collapses
    let shapes = shapes_at(&tri, &mv, [a, a, u[0], u[1], u[2]], &[omega(); 2]);
    assert!(shapes.iter().all(|z| z.im.abs() > 1e-3 && (z - 1.0).norm() > 1e-3 && z.norm() > 1e-3));
    assert_eq!(transport_23(&shapes, &mv, &tri, &up), Err(GeometryError::DegenerateMove));
    // apexes apart: fine, and the cross-ratio of the new tetrahedra is read off the same points
    let b = c(0.9, -0.6);
    let shapes = shapes_at(&tri, &mv, [a, b, u[0], u[1], u[2]], &[omega(); 2]);
    let out = transport_23(&shapes, &mv, &tri, &up).unwrap().shapes;
    let o = up.orientation().unwrap();
    for &(t, labels) in &mv.added {
        let p = [a, b, u[0], u[1], u[2]];
        let z = shape_from_positions(o[t], [0, 1, 2, 3].map(|v| p[labels[v] as usize]));
        assert!((out[t] - z).norm() < 1e-12);
    }

    // 3-2 with an apex sitting on an equatorial vertex
    let e = (0..up.edge_count()).find(|&e| up.edge_embeddings(e).len() == 3).unwrap();
    let (down, mv2) = pachner_32(&up, e).unwrap();
    let w = [c(0.0, 0.0), c(1.0, 0.0), c(0.2, 1.3)];
    let near = shapes_at(&up, &mv2, [w[0] + c(1e-13, 0.0), c(0.5, -0.8), w[0], w[1], w[2]], &vec![omega(); 3]);
    assert_eq!(transport_32(&near, &mv2, &up, &down), Err(GeometryError::DegenerateMove));
}

#[test]
fn perturbed_solutions_fail_the_residual_check() {
    let (tri, shapes) = solved("RLL");
    let sys = assemble_for(&tri).unwrap();
    let mut p = shapes.clone();
    p[0] += c(1e-4, -1e-4);
    assert!(max_residual(&sys, &p) > 1e-6);
    let (up, mv) = pachner_23(&tri, 0, 0).unwrap();
    let out = transport(&shapes, &mv, &tri, &up).unwrap().shapes;
    assert!((volume(&out).unwrap() - volume(&shapes).unwrap()).abs() < 1e-9);
}
