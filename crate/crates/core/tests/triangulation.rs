use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use veerkit::flatsurf::ptorus_bundle;
use veerkit::homology::homology_groups;
use veerkit::perm::Perm4;
use veerkit::triangulation::*;

const EDGE_ENDS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        self.0[a] = b;
    }
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

/// Edge and vertex slot partitions recomputed from the raw gluings.
fn union_find_classes(tri: &IdealTriangulation) -> (Vec<usize>, Vec<usize>) {
    let n = tri.tet_count();
    let raw = tri.to_raw();
    let mut edges = Dsu((0..6 * n).collect());
    let mut verts = Dsu((0..4 * n).collect());
    for t in 0..n {
        for f in 0..4 {
            let (t2, _, p) = raw[t][f];
            for v in (0..4).filter(|&v| v != f) {
                verts.union(4 * t + v, 4 * t2 + p[v] as usize);
            }
            for (e, &(a, b)) in EDGE_ENDS.iter().enumerate() {
                if a == f || b == f {
                    continue;
                }
                let (x, y) = (p[a] as usize, p[b] as usize);
                let e2 = EDGE_ENDS.iter().position(|&(u, v)| (u, v) == (x.min(y), x.max(y))).unwrap();
                edges.union(6 * t + e, 6 * t2 + e2);
            }
        }
    }
    let e = (0..6 * n).map(|s| edges.find(s)).collect();
    let v = (0..4 * n).map(|s| verts.find(s)).collect();
    (e, v)
}

fn check_structure(tri: &IdealTriangulation) {
    check_structure_closed(tri);
    // torus cusps: χ = tets − faces + edges = 0
    assert_eq!(tri.tet_count() as i64 - tri.face_count() as i64 + tri.edge_count() as i64, 0);
}

fn check_structure_closed(tri: &IdealTriangulation) {
    let n = tri.tet_count();
    let raw = tri.to_raw();
    for t in 0..n {
        for f in 0..4 {
            let (t2, f2, p) = raw[t][f];
            assert_eq!(p[f] as usize, f2);
            let (t3, f3, q) = raw[t2][f2];
            assert_eq!((t3, f3), (t, f));
            for v in 0..4 {
                assert_eq!(q[p[v] as usize] as usize, v);
            }
        }
    }
    let (e, v) = union_find_classes(tri);
    let ours_e: Vec<usize> = (0..6 * n).map(|s| tri.edge_class(s / 6, s % 6)).collect();
    let ours_v: Vec<usize> = (0..4 * n).map(|s| tri.vertex_class(s / 4, s % 4)).collect();
    assert!(same_partition(&e, &ours_e));
    assert!(same_partition(&v, &ours_v));
    assert_eq!(tri.face_count(), 2 * n);
    assert_eq!(edge_valences(tri).iter().sum::<usize>(), 6 * n);
    if let Some(o) = tri.orientation() {
        for t in 0..n {
            for f in 0..4 {
                let g = tri.gluing(t, f);
                assert_eq!(o[g.tet], -g.perm.sign() * o[t]);
            }
        }
    }
}

fn bundle(word: &str) -> IdealTriangulation {
    static CACHE: OnceLock<Mutex<HashMap<String, IdealTriangulation>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().unwrap().get(word) {
        return t.clone();
    }
    let tri = ptorus_bundle(word).unwrap().0;
    cache.lock().unwrap().insert(word.to_string(), tri.clone());
    tri
}

fn random_walk(word: &str, moves: usize, seed: u64, max_tets: usize) -> IdealTriangulation {
    let mut tri = bundle(word);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..moves {
        let try_32 = rng.gen_bool(0.4) || tri.tet_count() >= max_tets;
        if try_32 {
            let edges: Vec<usize> = (0..tri.edge_count()).filter(|&e| pachner_32(&tri, e).is_ok()).collect();
            if !edges.is_empty() {
                tri = pachner_32(&tri, edges[rng.gen_range(0..edges.len())]).unwrap().0;
                continue;
            }
        }
        if tri.tet_count() < max_tets {
            let faces: Vec<(usize, usize)> =
                tri.faces().into_iter().filter(|&(t, f)| tri.gluing(t, f).tet != t).collect();
            let (t, f) = faces[rng.gen_range(0..faces.len())];
            tri = pachner_23(&tri, t, f).unwrap().0;
        }
    }
    tri
}

fn word() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop_oneof![Just('L'), Just('R')], 2..=5)
        .prop_map(|v| v.into_iter().collect::<String>())
        .prop_filter("needs both letters", |w| w.contains('L') && w.contains('R'))
}

fn h1(tri: &IdealTriangulation) -> String {
    homology_groups(tri).unwrap().h1.to_string()
}

#[test]
fn figure_eight_examples() {
    let tri = figure_eight();
    check_structure(&tri);
    let (e, _) = union_find_classes(&tri);
    let mut classes = e.clone();
    classes.sort();
    classes.dedup();
    assert_eq!(classes.len(), 2);
    assert_eq!(tri.vertex_count(), 1);
    assert_eq!(edge_valences(&tri), vec![6, 6]);
    for e in 0..2 {
        assert!(matches!(pachner_32(&tri, e), Err(TriangulationError::WrongValence { valence: 6, .. })));
    }
    assert!(matches!(pachner_32(&tri, 7), Err(TriangulationError::NoSuchEdge(7))));
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(matches!(IdealTriangulation::from_gluing_data(&[]), Err(TriangulationError::UngluedFace { .. })));
    let mut raw = figure_eight().to_raw();
    raw[1][2].1 = (raw[1][2].1 + 1) % 4;
    assert!(IdealTriangulation::from_gluing_data(&raw).is_err());
    let mut raw = figure_eight().to_raw();
    raw[0][3].2 = [0, 0, 1, 2];
    assert!(matches!(IdealTriangulation::from_gluing_data(&raw), Err(TriangulationError::InvalidPermutation { .. })));
    let mut raw = figure_eight().to_raw();
    raw[0][0].0 = 5;
    assert!(IdealTriangulation::from_gluing_data(&raw).is_err());
}

#[test]
fn json_round_trip() {
    let tri = random_walk("RRL", 6, 3, 12);
    let json = serde_json::to_string(&TriangulationJson::from_triangulation(&tri)).unwrap();
    let back: TriangulationJson = serde_json::from_str(&json).unwrap();
    assert_eq!(back.to_triangulation().unwrap().to_raw(), tri.to_raw());
}

#[test]
fn repeated_tetrahedron_is_rejected() {
    let json = r#"{"tet_count":2,"gluings":[[[1,3,[3,1,2,0]],[1,0,[2,0,3,1]],[0,3,[2,0,3,1]],[0,2,[1,3,0,2]]],[[0,1,[1,3,0,2]],[1,2,[0,2,1,3]],[1,1,[0,2,1,3]],[0,0,[3,1,2,0]]]]}"#;
    let tri = serde_json::from_str::<TriangulationJson>(json).unwrap().to_triangulation().unwrap();
    check_structure_closed(&tri);
    let e = edge_valences(&tri).iter().position(|&v| v == 3).unwrap();
    assert!(matches!(pachner_32(&tri, e), Err(TriangulationError::RepeatedTetrahedron { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn moves_preserve_structure_and_invert(w in word(), moves in 0usize..6, seed in any::<u64>()) {
        let tri = random_walk(&w, moves, seed, 12);
        check_structure(&tri);
        let sig = isomorphism_signature(&tri);
        let hom = h1(&tri);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);

        if tri.tet_count() < 12 {
            let faces: Vec<(usize, usize)> = tri.faces().into_iter().filter(|&(t, f)| tri.gluing(t, f).tet != t).collect();
            let (t, f) = faces[rng.gen_range(0..faces.len())];
            let (up, mv) = pachner_23(&tri, t, f).unwrap();
            check_structure(&up);
            prop_assert_eq!(up.tet_count(), tri.tet_count() + 1);
            prop_assert_eq!(up.edge_count(), tri.edge_count() + 1);
            prop_assert_eq!(up.face_count(), tri.face_count() + 2);
            prop_assert_eq!(up.vertex_count(), tri.vertex_count());
            prop_assert_eq!(mv.removed.len(), 2);
            prop_assert_eq!(mv.added.len(), 3);
            prop_assert_eq!(mv.kept.len(), tri.tet_count() - 2);
            prop_assert_eq!(h1(&up), hom.clone());
            prop_assert_ne!(isomorphism_signature(&up), sig.clone());
            let added: Vec<usize> = mv.added.iter().map(|a| a.0).collect();
            let dual = (0..up.edge_count())
                .find(|&e| {
                    let emb = up.edge_embeddings(e);
                    emb.len() == 3 && emb.iter().all(|x| added.contains(&x.tet))
                })
                .unwrap();
            let (down, _) = pachner_32(&up, dual).unwrap();
            prop_assert_eq!(isomorphism_signature(&down), sig.clone());
        }

        let edges: Vec<usize> = (0..tri.edge_count()).filter(|&e| pachner_32(&tri, e).is_ok()).collect();
        if !edges.is_empty() {
            let e = edges[rng.gen_range(0..edges.len())];
            let (down, mv) = pachner_32(&tri, e).unwrap();
            check_structure(&down);
            prop_assert_eq!(down.tet_count() + 1, tri.tet_count());
            prop_assert_eq!(down.edge_count() + 1, tri.edge_count());
            prop_assert_eq!(h1(&down), hom.clone());
            let (t, labels) = mv.added[0];
            let face = labels.iter().position(|&l| l == APEX_A).unwrap();
            prop_assert_eq!(down.gluing(t, face).tet, mv.added[1].0);
            let (up, _) = pachner_23(&down, t, face).unwrap();
            prop_assert_eq!(isomorphism_signature(&up), sig.clone());
        }
    }

    #[test]
    fn signature_is_relabeling_invariant(w in word(), moves in 0usize..5, seed in any::<u64>()) {
        let tri = random_walk(&w, moves, seed, 10);
        let sig = isomorphism_signature(&tri);
        prop_assert!(sig.bytes().all(|b| b.is_ascii_graphic()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = tri.tet_count();
        let mut tet_map: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            tet_map.swap(i, rng.gen_range(0..=i));
        }
        let perms: Vec<Perm4> = Perm4::all().collect();
        let maps: Vec<Perm4> = (0..n).map(|_| perms[rng.gen_range(0..24)]).collect();
        let relabeled = tri.relabel(&tet_map, &maps).unwrap();
        check_structure(&relabeled);
        prop_assert_eq!(isomorphism_signature(&relabeled), sig.clone());
        let decoded = decode_signature(&sig).unwrap();
        prop_assert_eq!(isomorphism_signature(&decoded), sig);
    }
}
