//! One line per acceptance criterion; exits nonzero if any fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use veerkit::certify::*;
use veerkit::cusp::CuspCrossSection;
use veerkit::flatsurf::{eigenbasis_torus, gueritaud_triangulation, ptorus_bundle};
use veerkit::geometry::*;
use veerkit::homology::*;
use veerkit::interval::{from_hex, to_hex, ComplexBox, Interval};
use veerkit::triangulation::*;
use veerkit::veering::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn words(min: usize, max: usize) -> Vec<String> {
    let mut out = Vec::new();
    for len in min..=max {
        for bits in 0..1u32 << len {
            let w: String = (0..len).map(|i| if bits >> i & 1 == 1 { 'R' } else { 'L' }).collect();
            if w.contains('R') && w.contains('L') {
                out.push(w);
            }
        }
    }
    out
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn omega() -> Complex64 {
    Complex64::new(0.5, 3f64.sqrt() / 2.0)
}

// ---------------------------------------------------------------------------

fn figure_eight_pipeline() -> Outcome {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_veerkit")).args(["build", "--ptorus", "RL"]).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), "build --ptorus RL failed")?;
    let json: TriangulationJson = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let tri = json.to_triangulation().map_err(|e| e.to_string())?;
    ensure(tri.tet_count() == 2, format!("{} tetrahedra", tri.tet_count()))?;
    let sys = assemble_for(&tri).map_err(|e| e.to_string())?;
    let s = solve(&sys, None, 0).map_err(|e| e.to_string())?;
    let shape_err = s.shapes.iter().map(|z| (z - omega()).norm()).fold(0.0, f64::max);
    ensure(shape_err <= 1e-12, format!("shape error {shape_err:e}"))?;
    let vol = volume(&s.shapes).map_err(|e| e.to_string())?;
    let vol_err = (vol - 2.029883212819307).abs();
    ensure(vol_err <= 1e-9, format!("volume error {vol_err:e}"))?;
    let cert = certify_geometric(&tri, 0).map_err(|e| e.to_string())?;
    let boxes = decode_boxes(&cert.steps[0].boxes).ok_or("undecodable boxes")?;
    let radius = boxes.iter().map(|b| b.radius()).fold(0.0, f64::max);
    ensure(cert.verdict == Verdict::GeometricCertified && radius <= 1e-8, format!("box radius {radius:e}"))?;
    ensure(check_certificate(&cert).ok, "certificate rejected")?;
    let el = t.elapsed();
    ensure(el < Duration::from_secs(1), format!("took {}", secs(el)))?;
    Ok(format!("shape error {shape_err:.1e}, volume error {vol_err:.1e}, box radius {radius:.1e}, {}", secs(el)))
}

fn bundle_census(certs: &mut Vec<Certificate>) -> Outcome {
    let t = Instant::now();
    let ws = words(2, 6);
    for w in &ws {
        let (tri, v) = ptorus_bundle(w).map_err(|e| format!("{w}: {e}"))?;
        ensure(tri.tet_count() == w.len(), format!("{w}: {} tetrahedra", tri.tet_count()))?;
        ensure(is_veering(&tri, &v), format!("{w}: not veering"))?;
        let cert = certify_geometric(&tri, 0).map_err(|e| format!("{w}: {e}"))?;
        certs.push(cert);
    }
    let el = t.elapsed();
    ensure(el < Duration::from_secs(120), format!("took {}", secs(el)))?;
    Ok(format!("{} words, all veering and certified geometric, {}", ws.len(), secs(el)))
}

fn cross_constructor() -> Outcome {
    let t = Instant::now();
    let (surf, pa) = eigenbasis_torus([[2, 1], [1, 1]]).map_err(|e| e.to_string())?;
    let g = gueritaud_triangulation(&surf, &pa).map_err(|e| e.to_string())?;
    let (tri, _) = ptorus_bundle("RL").map_err(|e| e.to_string())?;
    let (a, b) = (isomorphism_signature(&g.triangulation), isomorphism_signature(&tri));
    ensure(a == b, format!("signatures differ: {a} vs {b}"))?;
    let el = t.elapsed();
    ensure(el < Duration::from_secs(30), format!("took {}", secs(el)))?;
    Ok(format!("signature {a}, {}", secs(el)))
}

/// Each removed tetrahedron of `mv` reappears among the added tetrahedra of
/// `mv2` with one of its three shape parameters; kept ones are unchanged.
fn round_trip_error(shapes: &[Complex64], mv: &PachnerMove, back: &[Complex64], mv2: &PachnerMove) -> f64 {
    let mut err: f64 = 0.0;
    for &(old, new) in &mv.kept {
        let Some(&(_, new2)) = mv2.kept.iter().find(|k| k.0 == new) else { return f64::INFINITY };
        err = err.max((back[new2] - shapes[old]).norm());
    }
    let mut unused: Vec<usize> = mv2.added.iter().map(|a| a.0).collect();
    for &(t, _) in &mv.removed {
        let best = unused
            .iter()
            .enumerate()
            .map(|(i, &u)| (i, (0..3).map(|k| (parameter(back[u], k) - shapes[t]).norm()).fold(f64::INFINITY, f64::min)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, d)) = best else { return f64::INFINITY };
        unused.remove(i);
        err = err.max(d);
    }
    err
}

fn inverse(after: &IdealTriangulation, mv: &PachnerMove) -> Option<(IdealTriangulation, PachnerMove)> {
    match mv.kind {
        MoveKind::TwoThree => {
            let added: Vec<usize> = mv.added.iter().map(|a| a.0).collect();
            let e = (0..after.edge_count()).find(|&e| {
                let emb = after.edge_embeddings(e);
                emb.len() == 3 && emb.iter().all(|x| added.contains(&x.tet))
            })?;
            pachner_32(after, e).ok()
        }
        MoveKind::ThreeTwo => {
            let (t, labels) = mv.added[0];
            let face = labels.iter().position(|&l| l == APEX_A)?;
            pachner_23(after, t, face).ok()
        }
    }
}

fn pachner_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut states = Vec::new();
    for w in words(2, 5).into_iter().step_by(5) {
        let (tri, _) = ptorus_bundle(&w).map_err(|e| e.to_string())?;
        let s = solve(&assemble_for(&tri).map_err(|e| e.to_string())?, None, 0).map_err(|e| e.to_string())?;
        let vol = volume(&s.shapes).map_err(|e| e.to_string())?;
        states.push((w, tri, s.shapes, vol));
    }
    let (mut done, mut skipped, mut trips) = (0, 0, 0);
    let (mut worst_res, mut worst_vol, mut worst_trip) = (0.0f64, 0.0f64, 0.0f64);
    while done < 200 {
        ensure(skipped < 10_000, "too many degenerate moves")?;
        let k = rng.gen_range(0..states.len());
        let (w, tri, shapes, vol) = &states[k];
        let valence3: Vec<usize> = (0..tri.edge_count()).filter(|&e| pachner_32(tri, e).is_ok()).collect();
        let (next, mv) = if !valence3.is_empty() && (rng.gen_bool(0.4) || tri.tet_count() >= 2 * w.len() + 4) {
            pachner_32(tri, valence3[rng.gen_range(0..valence3.len())]).unwrap()
        } else {
            let faces: Vec<(usize, usize)> = tri.faces().into_iter().filter(|&(t, f)| tri.gluing(t, f).tet != t).collect();
            let (t, f) = faces[rng.gen_range(0..faces.len())];
            pachner_23(tri, t, f).unwrap()
        };
        let out = match transport(shapes, &mv, tri, &next) {
            Ok(o) => o.shapes,
            Err(GeometryError::DegenerateMove) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(format!("{w}: {e}")),
        };
        let res = max_residual(&assemble_for(&next).map_err(|e| e.to_string())?, &out);
        let dv = (volume(&out).map_err(|e| e.to_string())? - vol).abs();
        worst_res = worst_res.max(res);
        worst_vol = worst_vol.max(dv);
        let (back_tri, mv2) = inverse(&next, &mv).ok_or_else(|| format!("{w}: no inverse move"))?;
        let back = transport(&out, &mv2, &next, &back_tri).map_err(|e| format!("{w}: inverse {e}"))?;
        worst_trip = worst_trip.max(round_trip_error(shapes, &mv, &back.shapes, &mv2));
        trips += 1;
        states[k].1 = next;
        states[k].2 = out;
        done += 1;
    }
    ensure(worst_res <= 1e-10, format!("residual {worst_res:e}"))?;
    ensure(worst_vol <= 1e-9, format!("volume drift {worst_vol:e}"))?;
    ensure(worst_trip <= 1e-9, format!("round trip error {worst_trip:e}"))?;
    Ok(format!(
        "{done} moves ({skipped} degenerate skipped), residual {worst_res:.1e}, volume drift {worst_vol:.1e}, {trips} round trips within {worst_trip:.1e}"
    ))
}

// ---------------------------------------------------------------------------

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn encloses(i: Interval, x: &BigRational) -> bool {
    (i.lo == f64::NEG_INFINITY || q(i.lo) <= *x) && (i.hi == f64::INFINITY || *x <= q(i.hi))
}

fn random_interval(rng: &mut ChaCha8Rng) -> Interval {
    let a = if rng.gen_bool(0.05) {
        0.0
    } else {
        let s = if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
        s * rng.gen_range(1.0..2.0) * 2f64.powi(rng.gen_range(-20..20))
    };
    let w = if rng.gen_bool(0.2) { 0.0 } else { a.abs().max(1e-6) * rng.gen_range(0.0..0.5) };
    Interval::new(a, a + w)
}

fn midpoint(i: Interval) -> BigRational {
    (q(i.lo) + q(i.hi)) / BigRational::from_integer(BigInt::from(2))
}

fn enclosure_instance(rng: &mut ChaCha8Rng) -> bool {
    let (a, b) = (random_interval(rng), random_interval(rng));
    let (x, y) = (midpoint(a), midpoint(b));
    match rng.gen_range(0..6) {
        0 => encloses(a + b, &(&x + &y)),
        1 => encloses(a - b, &(&x - &y)),
        2 => encloses(a * b, &(&x * &y)),
        3 => b.contains_zero() || y.is_zero() || encloses(a / b, &(&x / &y)),
        4 => encloses(a.sqr(), &(&x * &x)),
        _ => {
            let (c, d) = (random_interval(rng), random_interval(rng));
            let (u, v) = (ComplexBox { re: a, im: b }, ComplexBox { re: c, im: d });
            let (yr, yi) = (midpoint(c), midpoint(d));
            let p = u * v;
            let mul = encloses(p.re, &(&x * &yr - &y * &yi)) && encloses(p.im, &(&x * &yi + &y * &yr));
            let n = &yr * &yr + &yi * &yi;
            if v.norm_sqr().contains_zero() || n.is_zero() {
                return mul;
            }
            let r = u / v;
            mul && encloses(r.re, &((&x * &yr + &y * &yi) / &n)) && encloses(r.im, &((&y * &yr - &x * &yi) / &n))
        }
    }
}

/// Depth-3 Pachner exploration around the bundles of words of length ≤ 4.
/// Triangulations whose transported shapes include a flat tetrahedron are
/// recorded but not expanded further.
fn explore_and_certify(certs: &mut Vec<Certificate>) -> Result<(usize, usize, usize, usize), String> {
    let mut seen = HashSet::new();
    let (mut found, mut nongeo, mut certified, mut flat) = (0, 0, 0, 0);
    for w in words(2, 4) {
        let (tri, _) = ptorus_bundle(&w).map_err(|e| e.to_string())?;
        if !seen.insert(isomorphism_signature(&tri)) {
            continue;
        }
        let s = solve(&assemble_for(&tri).map_err(|e| e.to_string())?, None, 0).map_err(|e| e.to_string())?;
        let mut frontier = vec![(tri, s)];
        for _ in 0..3 {
            let mut next = Vec::new();
            for (t, sh) in &frontier {
                let mut moves: Vec<(IdealTriangulation, PachnerMove)> = t.faces().into_iter().filter_map(|(a, f)| pachner_23(t, a, f).ok()).collect();
                moves.extend((0..t.edge_count()).filter_map(|e| pachner_32(t, e).ok()));
                for (u, mv) in moves {
                    if !seen.insert(isomorphism_signature(&u)) {
                        continue;
                    }
                    let Ok(out) = transport(&sh.shapes, &mv, t, &u) else { continue };
                    found += 1;
                    match classify(&out.shapes, 1e-9) {
                        Classification::ContainsFlat(_) => {
                            flat += 1;
                            continue;
                        }
                        Classification::NonGeometric(_) => {
                            nongeo += 1;
                            let cert = certify_nongeometric(&u, Some(&out), Budget::default(), 0)
                                .map_err(|e| format!("{w}, {} tetrahedra: {e}", u.tet_count()))?;
                            ensure(cert.verdict == Verdict::NonGeometricCertified, "wrong verdict")?;
                            let r = check_certificate(&cert);
                            ensure(r.ok, format!("{w}: produced certificate rejected: {:?}", r.failures))?;
                            certified += 1;
                            certs.push(cert);
                        }
                        Classification::Geometric => {}
                    }
                    next.push((u, out));
                }
            }
            frontier = next;
        }
    }
    Ok((found, nongeo, certified, flat))
}

fn certification_soundness(certs: &mut Vec<Certificate>) -> Outcome {
    let t = Instant::now();
    let (found, nongeo, certified, flat) = explore_and_certify(certs)?;
    ensure(nongeo > 0 && certified == nongeo, format!("{certified}/{nongeo} certified"))?;

    let accepted = certs.iter().filter(|c| check_certificate(c).ok).count();
    ensure(accepted == certs.len(), format!("{accepted}/{} certificates accepted", certs.len()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rejected = 0;
    for _ in 0..100 {
        let mut bad = certs[rng.gen_range(0..certs.len())].clone();
        let step = rng.gen_range(0..bad.steps.len());
        let b = rng.gen_range(0..bad.steps[step].boxes.len());
        let k = rng.gen_range(0..4);
        let x = from_hex(&bad.steps[step].boxes[b][k]).ok_or("bad hex")?;
        bad.steps[step].boxes[b][k] = to_hex(f64::from_bits(x.to_bits() ^ (1 << rng.gen_range(0..64))));
        if !check_certificate(&bad).ok {
            rejected += 1;
        }
    }
    ensure(rejected == 100, format!("{rejected}/100 tamperings rejected"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sound = (0..100_000).filter(|_| enclosure_instance(&mut rng)).count();
    ensure(sound == 100_000, format!("{} enclosure failures", 100_000 - sound))?;

    Ok(format!(
        "(a) {} certificates accepted, 100/100 tamperings rejected; (b) 100000/100000 enclosures; \
         (c) {found} triangulations explored, {nongeo} non-geometric, {certified} certified, {flat} flat not expanded; {}",
        certs.len(),
        secs(t.elapsed())
    ))
}

// ---------------------------------------------------------------------------

fn face(name: &str) -> Result<FaceData, String> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name);
    let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    serde_json::from_slice(&bytes).map_err(|e| e.to_string())
}

fn homology_arithmetic() -> Outcome {
    let (genus, torus, planar) = (face("genus-family.json")?, face("torus-family.json")?, face("planar-family.json")?);
    let t = Instant::now();
    let h = homology_groups(&figure_eight()).map_err(|e| e.to_string())?;
    ensure(h.h1.to_string() == "Z", format!("H1(fig8) = {}", h.h1))?;
    let mut checked = 0;
    for g in 2..=11i64 {
        for n in 1..=10i64 {
            if num_integer::gcd(n, g - 1) != 1 {
                continue;
            }
            let ft = fiber_type(&genus, n, g - 1).map_err(|e| e.to_string())?;
            ensure((ft.genus, ft.punctures, ft.norm) == (g, n, n + 2 * (g - 1)), format!("genus family g={g} n={n}: {ft:?}"))?;
            checked += 1;
        }
    }
    for n in 1..=10i64 {
        let ft = fiber_type(&torus, 1, n - 1).map_err(|e| e.to_string())?;
        ensure((ft.genus, ft.punctures, ft.norm) == (1, n, n), format!("torus family n={n}: {ft:?}"))?;
        checked += 1;
    }
    for a in 1..=10i64 {
        let ft = fiber_type(&planar, a, 1).map_err(|e| e.to_string())?;
        let counts: Vec<i64> = ft.boundary.iter().map(|b| b.0).collect();
        ensure(
            (ft.genus, ft.punctures, ft.norm) == (0, a + 6, a + 4) && counts == vec![1, 1, a + 4],
            format!("planar family a={a}: {ft:?}"),
        )?;
        ensure(slope_sum(&[(a, (0, 1)), (1, (1, 0))]) == (1, (1, a)), format!("slope sum a={a}"))?;
        checked += 2;
    }
    let el = t.elapsed();
    ensure(el < Duration::from_secs(1), format!("took {}", secs(el)))?;
    Ok(format!("H1(fig8) = Z, {checked} fiber/slope cases exact, {}", secs(el)))
}

fn degeneracy_criterion() -> Outcome {
    let mut bundles = 0;
    for w in words(2, 5) {
        let (tri, v) = ptorus_bundle(&w).map_err(|e| e.to_string())?;
        let cusp = CuspCrossSection::new(&tri, 0).map_err(|e| e.to_string())?;
        let fiber = fiber_boundary_slopes(&tri).map_err(|e| e.to_string())?[0].1;
        let p = prong_count(&tri, &v, &cusp, fiber).map_err(|e| e.to_string())?;
        ensure(p == 2, format!("{w}: prong count {p}"))?;
        bundles += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut primitive = || loop {
        let s = (rng.gen_range(-6i64..=6), rng.gen_range(-6i64..=6));
        if num_integer::gcd(s.0, s.1) == 1 {
            return s;
        }
    };
    let (mut trials, mut principal) = (0, 0);
    for len in 1..=4 {
        for _ in 0..500 {
            let b: Vec<(i64, i64)> = (0..len).map(|_| primitive()).collect();
            let d: Vec<(i64, i64)> = (0..len).map(|_| primitive()).collect();
            let expect = b.iter().zip(&d).all(|(x, y)| intersection_number(*x, *y).abs() == 1);
            let got = is_principal_fiber(&b, &d).map_err(|e| e.to_string())?;
            ensure(got == expect, format!("is_principal_fiber({b:?}, {d:?}) = {got}"))?;
            trials += 1;
            principal += usize::from(got);
        }
        // an all-ones vector
        let b: Vec<(i64, i64)> = (0..len).map(|i| (1, i as i64)).collect();
        let d: Vec<(i64, i64)> = (0..len).map(|i| (0, 1 - 2 * (i as i64 % 2))).collect();
        ensure(is_principal_fiber(&b, &d) == Ok(true), "all-ones vector rejected")?;
    }
    Ok(format!("prong count 2 on {bundles} bundles; is_principal_fiber exact on {trials} random vectors ({principal} principal)"))
}

// ---------------------------------------------------------------------------

fn run(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    })
}

fn main() {
    let mut certs = Vec::new();
    let results = [
        run(figure_eight_pipeline),
        run(|| bundle_census(&mut certs)),
        run(cross_constructor),
        run(pachner_invariance),
        run(|| certification_soundness(&mut certs)),
        run(homology_arithmetic),
        run(degeneracy_criterion),
    ];
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(detail) => println!("criterion {}: PASS: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
