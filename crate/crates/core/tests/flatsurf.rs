use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use veerkit::flatsurf::{
    eigenbasis_torus, gueritaud_triangulation, maximal_rectangles, ptorus_bundle, FlatError, FlatSurface, FlatSurfaceJson,
    Identification, NumberField, Vec2,
};
use veerkit::triangulation::isomorphism_signature;

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn sq22() -> String {
    std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sq22.json")).unwrap()
}

/// `u`, `v` spanning the eigenbasis lattice of `[[2,1],[1,1]]`.
fn rl_basis(k: &NumberField) -> (Vec2, Vec2) {
    let lam = k.gen();
    let u = Vec2::new(k.from_int(1), k.from_int(1));
    let v = Vec2::new(&lam - &k.from_int(2), &k.from_int(1) - &lam);
    (v, u)
}

fn rl_field() -> NumberField {
    NumberField::from_integer_poly(&[1, -3, 1], q(2), q(3)).unwrap()
}

/// Lattice points `a·u + b·v + offset` strictly inside / on the boundary of
/// the closed rectangle `[x0, x1] × [y0, y1]`.
fn lattice_count(u: &Vec2, v: &Vec2, offset: &Vec2, x0: &Vec2, x1: &Vec2, range: i64) -> (usize, usize) {
    let k = u.x.field().clone();
    let (mut inside, mut boundary) = (0, 0);
    for a in -range..=range {
        for b in -range..=range {
            let p = u.scale(&k.from_int(a)).add(&v.scale(&k.from_int(b))).add(offset);
            let cx = [(&p.x - &x0.x).signum(), (&x1.x - &p.x).signum()];
            let cy = [(&p.y - &x0.y).signum(), (&x1.y - &p.y).signum()];
            if cx.iter().chain(&cy).any(|&s| s < 0) {
                continue;
            }
            if cx.iter().chain(&cy).all(|&s| s > 0) {
                inside += 1;
            } else {
                boundary += 1;
            }
        }
    }
    (inside, boundary)
}

fn lower_upper(a: &Vec2, b: &Vec2) -> (Vec2, Vec2) {
    let (x0, x1) = if a.x < b.x { (a.x.clone(), b.x.clone()) } else { (b.x.clone(), a.x.clone()) };
    let (y0, y1) = if a.y < b.y { (a.y.clone(), b.y.clone()) } else { (b.y.clone(), a.y.clone()) };
    (Vec2::new(x0, y0), Vec2::new(x1, y1))
}

#[test]
fn sq22_file_matches_ptorus_rl() {
    let (surf, pa) = FlatSurfaceJson::parse(&sq22()).unwrap().build().unwrap();
    assert_eq!(surf.vertex_count(), 1);
    assert_eq!(surf.genus(), 1);
    let out = gueritaud_triangulation(&surf, &pa).unwrap();
    let (rl, _) = ptorus_bundle("RL").unwrap();
    assert_eq!(isomorphism_signature(&out.triangulation), isomorphism_signature(&rl));
}

#[test]
fn unit_square_has_horizontal_saddles() {
    let k = NumberField::rationals();
    let p = |x, y| Vec2::new(k.from_int(x), k.from_int(y));
    let ids = vec![
        Identification { p1: 0, e1: 0, p2: 0, e2: 2, sign: 1 },
        Identification { p1: 0, e1: 1, p2: 0, e2: 3, sign: 1 },
    ];
    let surf = FlatSurface::new(k.clone(), vec![vec![p(0, 0), p(1, 0), p(1, 1), p(0, 1)]], ids).unwrap();
    let err = surf.saddle_connections(&k.one(), &k.one()).unwrap_err();
    assert!(matches!(err, FlatError::HorizontalOrVerticalSaddle { .. }));
}

#[test]
fn eigenbasis_connections_are_oblique_and_monotone() {
    let (surf, _) = eigenbasis_torus([[2, 1], [1, 1]]).unwrap();
    let k = surf.field().clone();
    let small = surf.saddle_connections(&k.from_int(2), &k.from_int(2)).unwrap();
    assert!(!small.is_empty());
    for sc in &small {
        assert!(!sc.holonomy.x.is_zero() && !sc.holonomy.y.is_zero());
    }
    let mut bound = k.from_int(2);
    let mut prev: HashSet<_> = small.iter().map(|sc| sc.key()).collect();
    for _ in 0..2 {
        bound = &bound + &bound;
        let next: HashSet<_> = surf.saddle_connections(&bound, &bound).unwrap().iter().map(|sc| sc.key()).collect();
        assert!(prev.is_subset(&next));
        prev = next;
    }
}

#[test]
fn connections_match_primitive_lattice_vectors() {
    // on a torus with one marked point, saddle connections are primitive
    // lattice vectors, each once up to sign
    let (surf, _) = eigenbasis_torus([[2, 1], [1, 1]]).unwrap();
    let k = surf.field().clone();
    let (u, v) = rl_basis(&k);
    let bound = k.from_int(6);
    let got = surf.saddle_connections(&bound, &bound).unwrap().len();
    let mut want = 0;
    for a in -40i64..=40 {
        for b in -40i64..=40 {
            if num_integer::gcd(a, b) != 1 {
                continue;
            }
            let p = u.scale(&k.from_int(a)).add(&v.scale(&k.from_int(b)));
            if p.x.abs() <= bound && p.y.abs() <= bound {
                want += 1;
            }
        }
    }
    assert_eq!(got * 2, want);
}

#[test]
fn shortest_connection_spans_empty_rectangle() {
    let (surf, _) = eigenbasis_torus([[2, 1], [1, 1]]).unwrap();
    let k = surf.field().clone();
    let scs = surf.saddle_connections(&k.from_int(3), &k.from_int(3)).unwrap();
    let shortest = scs
        .iter()
        .min_by(|a, b| {
            let na = &(&a.holonomy.x * &a.holonomy.x) + &(&a.holonomy.y * &a.holonomy.y);
            let nb = &(&b.holonomy.x * &b.holonomy.x) + &(&b.holonomy.y * &b.holonomy.y);
            na.cmp(&nb)
        })
        .unwrap();
    assert!(surf.spans_empty_rectangle(shortest));
    let (u, v) = rl_basis(&k);
    let (lo, hi) = lower_upper(&Vec2::zero(&k), &shortest.holonomy);
    assert_eq!(lattice_count(&u, &v, &Vec2::zero(&k), &lo, &hi, 12).0, 0);
}

/// The eigenbasis parallelogram coned off at its center: two marked points.
fn two_point_torus() -> (FlatSurface, Vec2, Vec2, Vec2) {
    let k = rl_field();
    let (u, v) = rl_basis(&k);
    let half = k.from_rational(BigRational::new(1.into(), 2.into()));
    let c = u.add(&v).scale(&half);
    let o = Vec2::zero(&k);
    let corners = [o, u.clone(), u.add(&v), v.clone()];
    let polys = (0..4).map(|i| vec![corners[i].clone(), corners[(i + 1) % 4].clone(), c.clone()]).collect();
    let mut ids = vec![
        Identification { p1: 0, e1: 0, p2: 2, e2: 0, sign: 1 },
        Identification { p1: 1, e1: 0, p2: 3, e2: 0, sign: 1 },
    ];
    for i in 0..4 {
        ids.push(Identification { p1: i, e1: 1, p2: (i + 1) % 4, e2: 2, sign: 1 });
    }
    (FlatSurface::new(k, polys, ids).unwrap(), u, v, c)
}

#[test]
fn empty_rectangle_agrees_with_lattice_oracle() {
    let (surf, u, v, c) = two_point_torus();
    assert_eq!(surf.vertex_count(), 2);
    assert_eq!(surf.cone_angles(), &[2, 2]);
    let k = surf.field().clone();
    let center = surf.vertex_of((0, 2));
    let bound = k.from_int(4);
    let (mut empty, mut full) = (0, 0);
    for sc in surf.saddle_connections(&bound, &bound).unwrap() {
        let start = if sc.start_vertex == center { c.clone() } else { Vec2::zero(&k) };
        let (lo, hi) = lower_upper(&start, &start.add(&sc.holonomy));
        let inside = lattice_count(&u, &v, &Vec2::zero(&k), &lo, &hi, 20).0 + lattice_count(&u, &v, &c, &lo, &hi, 20).0;
        assert_eq!(surf.spans_empty_rectangle(&sc), inside == 0);
        if inside == 0 {
            empty += 1;
        } else {
            full += 1;
        }
    }
    assert!(empty > 0 && full > 0);
    // 0 → 2u + v crosses the rectangle containing the center u/2 + v/2
    let sc = surf
        .saddle_connections(&bound, &bound)
        .unwrap()
        .into_iter()
        .flat_map(|sc| [sc.reversed(), sc])
        .find(|sc| sc.start_vertex != center && sc.holonomy == u.add(&u).add(&v))
        .unwrap();
    assert!(!surf.spans_empty_rectangle(&sc));
}

#[test]
fn empty_rectangles_are_invariant_under_the_map() {
    let (surf, pa) = eigenbasis_torus([[2, 1], [1, 1]]).unwrap();
    let k = surf.field().clone();
    for sc in surf.saddle_connections(&k.from_int(4), &k.from_int(4)).unwrap() {
        let image = pa.apply_connection(&surf, &sc).unwrap();
        let h = pa.apply_vec(&sc.holonomy);
        assert!(image.holonomy == h || image.holonomy == h.neg());
        assert_eq!(surf.spans_empty_rectangle(&sc), surf.spans_empty_rectangle(&image));
    }
}

#[test]
fn rectangle_orbit_counts() {
    for (m, n) in [([[2, 1], [1, 1]], 2), ([[5, 2], [2, 1]], 4), ([[3, 2], [1, 1]], 3)] {
        let (surf, pa) = eigenbasis_torus(m).unwrap();
        assert_eq!(maximal_rectangles(&surf, &pa).unwrap().len(), n);
    }
}

#[test]
fn rectangles_meet_one_puncture_per_side() {
    let (surf, pa) = eigenbasis_torus([[2, 1], [1, 1]]).unwrap();
    let k = surf.field().clone();
    let (u, v) = rl_basis(&k);
    let rects = maximal_rectangles(&surf, &pa).unwrap();
    let w0 = rects.iter().map(|r| r.width.clone()).min().unwrap();
    for r in &rects {
        assert!(r.width >= w0 && r.width < &w0 * &pa.lambda);
        assert!(r.width.is_positive() && r.height.is_positive());
        assert!(surf.spans_empty_rectangle(&r.diagonal));
        let d = &r.right().y;
        assert!(r.top.x.is_positive() && r.top.x < r.width);
        assert!(r.bottom.x.is_positive() && r.bottom.x < r.width);
        assert!(&r.top.y > d && r.top.y.is_positive());
        assert!(&r.bottom.y < d && r.bottom.y.is_negative());
        assert_eq!(r.height, &r.top.y - &r.bottom.y);
        let lo = Vec2::new(k.zero(), r.bottom.y.clone());
        let hi = Vec2::new(r.width.clone(), r.top.y.clone());
        assert_eq!(lattice_count(&u, &v, &Vec2::zero(&k), &lo, &hi, 16), (0, 4));
    }
}

#[test]
fn polygon_decomposition_does_not_matter() {
    let k = rl_field();
    let (u, v) = rl_basis(&k);
    let o = Vec2::zero(&k);
    let polys = vec![vec![o.clone(), u.clone(), u.add(&v)], vec![o, u.add(&v), v.clone()]];
    let ids = vec![
        Identification { p1: 0, e1: 2, p2: 1, e2: 0, sign: 1 },
        Identification { p1: 0, e1: 0, p2: 1, e2: 1, sign: 1 },
        Identification { p1: 0, e1: 1, p2: 1, e2: 2, sign: 1 },
    ];
    let surf = FlatSurface::new(k.clone(), polys, ids).unwrap();
    let pa = veerkit::flatsurf::AffinePA::new(&surf, k.gen(), (0, 0)).unwrap();
    let cut = gueritaud_triangulation(&surf, &pa).unwrap();
    let (rl, _) = ptorus_bundle("RL").unwrap();
    assert_eq!(isomorphism_signature(&cut.triangulation), isomorphism_signature(&rl));
}

#[test]
fn short_words() {
    for w in ["RLL", "RRL", "RLLL", "RRLL"] {
        let (tri, v) = ptorus_bundle(w).unwrap();
        assert_eq!(tri.tet_count(), w.len(), "{w}");
        assert_eq!(tri.vertex_count(), 1, "{w}");
        assert!(veerkit::veering::is_veering(&tri, &v), "{w}");
    }
    assert_eq!(ptorus_bundle("LLLL").unwrap_err(), FlatError::NotPseudoAnosov(2));
}

#[test]
fn layers_enumerate_tetrahedra() {
    let (surf, pa) = eigenbasis_torus([[5, 2], [2, 1]]).unwrap();
    let out = gueritaud_triangulation(&surf, &pa).unwrap();
    let mut layers = out.layers.clone();
    layers.sort();
    assert_eq!(layers, (0..out.triangulation.tet_count()).collect::<Vec<_>>());
    for pair in out.rectangles.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert!(&a.height * &b.width <= &b.height * &a.width);
    }
}

/// `a + bλ` for `λ = (3 + √5)/2`, compared against a 100-digit evaluation.
#[test]
fn sign_agrees_with_high_precision() {
    let k = rl_field();
    let scale = BigInt::from(10).pow(100);
    let root5 = (BigInt::from(5) * &scale * &scale).sqrt();
    let lam_lo = BigRational::new(BigInt::from(3) * &scale + &root5, BigInt::from(2) * &scale);
    let lam_hi = BigRational::new(BigInt::from(3) * &scale + &root5 + 1, BigInt::from(2) * &scale);
    // convergents of λ make the cancellation in a + bλ severe
    let conv = [(3i64, 1i64), (5, 2), (13, 5), (34, 13), (89, 34), (233, 89), (610, 233), (1597, 610)];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut zeros = 0;
    for i in 0..1000 {
        let (a, b) = match i % 3 {
            0 => (
                BigRational::new(rng.gen_range(-1000i64..1000).into(), rng.gen_range(1i64..50).into()),
                BigRational::new(rng.gen_range(-1000i64..1000).into(), rng.gen_range(1i64..50).into()),
            ),
            1 => {
                let (p, qq) = conv[rng.gen_range(0..conv.len())];
                let s = if rng.gen_bool(0.5) { 1 } else { -1 };
                (q(-s * p), q(s * qq))
            }
            _ => {
                let n = rng.gen_range(0i64..5);
                (q(n * rng.gen_range(-3i64..4)), q(0))
            }
        };
        let x = k.elem(&[a.clone(), b.clone()]).unwrap();
        let (e0, e1) = (&a + &b * &lam_lo, &a + &b * &lam_hi);
        let want = if e0.is_zero() && e1.is_zero() {
            zeros += 1;
            0
        } else {
            assert!(e0.signum() == e1.signum(), "oracle precision too low");
            if e0.is_positive() {
                1
            } else {
                -1
            }
        };
        assert_eq!(x.signum(), want, "{a} + {b}λ");
    }
    assert!(zeros > 0);
}
