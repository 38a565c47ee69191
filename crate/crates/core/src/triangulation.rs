//! Closed ideal triangulations: storage, validation, derived skeleton,
//! Pachner moves and isomorphism signatures.
//!
//! A triangulation is a list of tetrahedra whose faces are glued in pairs.
//! Face `f` of a tetrahedron is the face opposite vertex `f`. A gluing
//! `(t', f', σ)` on face `f` of tetrahedron `t` identifies that face with
//! face `f'` of `t'`, sending vertex `i` of `t` to vertex `σ(i)` of `t'`;
//! in particular `σ(f) = f'`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perm::{edge_index, Perm4, EDGE_VERTICES};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TriangulationError {
    #[error("face {face} of tetrahedron {tet} is not glued")]
    UngluedFace { tet: usize, face: usize },
    #[error("gluing on face {face} of tetrahedron {tet} is not a valid face pairing permutation")]
    InvalidPermutation { tet: usize, face: usize },
    #[error("gluing on face {face} of tetrahedron {tet} is not matched by its partner")]
    NonInvolutiveGluing { tet: usize, face: usize },
    #[error("gluing on face {face} of tetrahedron {tet} points outside the triangulation")]
    TargetOutOfRange { tet: usize, face: usize },
    #[error("edge class {edge} is identified with itself in reverse")]
    InvalidEdge { edge: usize },
    #[error("face {face} of tetrahedron {tet} is glued to the same tetrahedron")]
    SelfGluedFace { tet: usize, face: usize },
    #[error("edge class {edge} has valence {valence}, expected 3")]
    WrongValence { edge: usize, valence: usize },
    #[error("edge class {edge} meets some tetrahedron more than once")]
    RepeatedTetrahedron { edge: usize },
    #[error("no such edge class {0}")]
    NoSuchEdge(usize),
    #[error("malformed isomorphism signature")]
    InvalidSignature,
}

/// One face pairing: the partner tetrahedron, partner face and vertex map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Gluing {
    pub tet: usize,
    pub face: usize,
    pub perm: Perm4,
}

/// A position of an edge class inside one tetrahedron, as visited by the
/// walk around the edge. `vertices[0], vertices[1]` are the edge endpoints;
/// the walk leaves this tetrahedron through the face opposite `vertices[2]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeEmbedding {
    pub tet: usize,
    pub vertices: Perm4,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealTriangulation {
    gluings: Vec<[Gluing; 4]>,
    edge_class: Vec<[usize; 6]>,
    edge_embeddings: Vec<Vec<EdgeEmbedding>>,
    vertex_class: Vec<[usize; 4]>,
    vertex_count: usize,
    orientation: Option<Vec<i8>>,
}

/// Raw gluing triple as it appears in the JSON format.
pub type RawGluing = (usize, usize, [u8; 4]);

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
    /// Class labels numbered by first appearance.
    fn labels(&mut self) -> (Vec<usize>, usize) {
        let n = self.parent.len();
        let mut label = vec![usize::MAX; n];
        let mut out = vec![0; n];
        let mut count = 0;
        for i in 0..n {
            let r = self.find(i);
            if label[r] == usize::MAX {
                label[r] = count;
                count += 1;
            }
            out[i] = label[r];
        }
        (out, count)
    }
}

impl IdealTriangulation {
    /// Validates raw gluing data and computes the skeleton.
    pub fn from_gluing_data(raw: &[Vec<RawGluing>]) -> Result<Self, TriangulationError> {
        if raw.is_empty() {
            return Err(TriangulationError::UngluedFace { tet: 0, face: 0 });
        }
        let n = raw.len();
        let mut gluings = Vec::with_capacity(n);
        for (t, faces) in raw.iter().enumerate() {
            if faces.len() < 4 {
                return Err(TriangulationError::UngluedFace { tet: t, face: faces.len() });
            }
            let mut row = [Gluing { tet: 0, face: 0, perm: Perm4::IDENTITY }; 4];
            for f in 0..4 {
                let (tt, ff, images) = faces[f];
                let perm = Perm4::new(images)
                    .ok_or(TriangulationError::InvalidPermutation { tet: t, face: f })?;
                if ff > 3 || perm.apply(f) != ff {
                    return Err(TriangulationError::InvalidPermutation { tet: t, face: f });
                }
                if tt >= n {
                    return Err(TriangulationError::TargetOutOfRange { tet: t, face: f });
                }
                row[f] = Gluing { tet: tt, face: ff, perm };
            }
            gluings.push(row);
        }
        Self::from_gluings(gluings)
    }

    pub(crate) fn from_gluings(gluings: Vec<[Gluing; 4]>) -> Result<Self, TriangulationError> {
        let n = gluings.len();
        for t in 0..n {
            for f in 0..4 {
                let g = gluings[t][f];
                if g.tet == t && g.face == f {
                    return Err(TriangulationError::NonInvolutiveGluing { tet: t, face: f });
                }
                let back = gluings[g.tet][g.face];
                if back.tet != t || back.face != f || back.perm != g.perm.inverse() {
                    return Err(TriangulationError::NonInvolutiveGluing { tet: t, face: f });
                }
            }
        }

        let mut edges = UnionFind::new(6 * n);
        let mut verts = UnionFind::new(4 * n);
        for t in 0..n {
            for f in 0..4 {
                let g = gluings[t][f];
                for &(a, b) in EDGE_VERTICES.iter() {
                    if a != f && b != f {
                        edges.union(
                            6 * t + edge_index(a, b),
                            6 * g.tet + edge_index(g.perm.apply(a), g.perm.apply(b)),
                        );
                    }
                }
                for v in (0..4).filter(|&v| v != f) {
                    verts.union(4 * t + v, 4 * g.tet + g.perm.apply(v));
                }
            }
        }
        let (edge_labels, edge_count) = edges.labels();
        let (vertex_labels, vertex_count) = verts.labels();
        let edge_class: Vec<[usize; 6]> = (0..n)
            .map(|t| std::array::from_fn(|e| edge_labels[6 * t + e]))
            .collect();
        let vertex_class: Vec<[usize; 4]> = (0..n)
            .map(|t| std::array::from_fn(|v| vertex_labels[4 * t + v]))
            .collect();

        let orientation = compute_orientation(&gluings);

        let mut tri = IdealTriangulation {
            gluings,
            edge_class,
            edge_embeddings: Vec::new(),
            vertex_class,
            vertex_count,
            orientation,
        };
        tri.edge_embeddings = tri.walk_edges(edge_count)?;
        Ok(tri)
    }

    fn walk_edges(&self, edge_count: usize) -> Result<Vec<Vec<EdgeEmbedding>>, TriangulationError> {
        let mut out = vec![Vec::new(); edge_count];
        for class in 0..edge_count {
            let (t, e) = (0..self.tet_count())
                .flat_map(|t| (0..6).map(move |e| (t, e)))
                .find(|&(t, e)| self.edge_class[t][e] == class)
                .expect("every edge class has a representative");
            let (a, b) = EDGE_VERTICES[e];
            let (c, d) = EDGE_VERTICES[5 - e];
            let start = EdgeEmbedding {
                tet: t,
                vertices: Perm4::new([a as u8, b as u8, c as u8, d as u8]).unwrap(),
            };
            let mut cur = start;
            let mut walk = Vec::new();
            loop {
                walk.push(cur);
                if walk.len() > 6 * self.tet_count() {
                    return Err(TriangulationError::InvalidEdge { edge: class });
                }
                let p = cur.vertices;
                let g = self.gluings[cur.tet][p.apply(2)];
                let s = g.perm;
                let next = EdgeEmbedding {
                    tet: g.tet,
                    vertices: Perm4::new([
                        s.apply(p.apply(0)) as u8,
                        s.apply(p.apply(1)) as u8,
                        s.apply(p.apply(3)) as u8,
                        s.apply(p.apply(2)) as u8,
                    ])
                    .unwrap(),
                };
                if next.tet == start.tet {
                    let same = next.vertices.apply(0) == start.vertices.apply(0)
                        && next.vertices.apply(1) == start.vertices.apply(1);
                    let reversed = next.vertices.apply(0) == start.vertices.apply(1)
                        && next.vertices.apply(1) == start.vertices.apply(0);
                    if same && next.vertices == start.vertices {
                        break;
                    }
                    if reversed {
                        return Err(TriangulationError::InvalidEdge { edge: class });
                    }
                }
                cur = next;
            }
            out[class] = walk;
        }
        Ok(out)
    }

    pub fn tet_count(&self) -> usize {
        self.gluings.len()
    }

    pub fn face_count(&self) -> usize {
        2 * self.tet_count()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_embeddings.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn gluing(&self, tet: usize, face: usize) -> Gluing {
        self.gluings[tet][face]
    }

    pub fn gluings(&self) -> &[[Gluing; 4]] {
        &self.gluings
    }

    /// Edge class of edge `e` (index into [`EDGE_VERTICES`]) of `tet`.
    pub fn edge_class(&self, tet: usize, e: usize) -> usize {
        self.edge_class[tet][e]
    }

    pub fn vertex_class(&self, tet: usize, v: usize) -> usize {
        self.vertex_class[tet][v]
    }

    /// The cyclic sequence of tetrahedron edges around an edge class.
    pub fn edge_embeddings(&self, edge: usize) -> &[EdgeEmbedding] {
        &self.edge_embeddings[edge]
    }

    pub fn is_orientable(&self) -> bool {
        self.orientation.is_some()
    }

    /// Orientation sign of each tetrahedron relative to its vertex labeling,
    /// normalized so that tetrahedron 0 is positive.
    pub fn orientation(&self) -> Option<&[i8]> {
        self.orientation.as_deref()
    }

    /// Number of (tetrahedron, vertex) corners in each vertex class.
    pub fn vertex_corner_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.vertex_count];
        for row in &self.vertex_class {
            for &c in row {
                counts[c] += 1;
            }
        }
        counts
    }

    /// Face identifiers: the canonical side `(tet, face)` of every glued pair.
    pub fn faces(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.face_count());
        for t in 0..self.tet_count() {
            for f in 0..4 {
                let g = self.gluings[t][f];
                if (t, f) <= (g.tet, g.face) {
                    out.push((t, f));
                }
            }
        }
        out
    }

    /// Index into [`Self::faces`] of the face containing side `(tet, face)`.
    pub fn face_index(&self, tet: usize, face: usize) -> usize {
        let g = self.gluings[tet][face];
        let key = if (tet, face) <= (g.tet, g.face) { (tet, face) } else { (g.tet, g.face) };
        self.faces().iter().position(|&x| x == key).expect("face present")
    }

    /// Whether the side `(tet, face)` is the canonical representative of its face.
    pub fn is_canonical_side(&self, tet: usize, face: usize) -> bool {
        let g = self.gluings[tet][face];
        (tet, face) <= (g.tet, g.face)
    }

    pub fn to_raw(&self) -> Vec<Vec<RawGluing>> {
        self.gluings
            .iter()
            .map(|row| row.iter().map(|g| (g.tet, g.face, g.perm.images())).collect())
            .collect()
    }

    /// Same triangulation with tetrahedra renumbered by `tet_map` (old -> new)
    /// and each tetrahedron's vertices relabeled by `vertex_maps[old]`.
    pub fn relabel(&self, tet_map: &[usize], vertex_maps: &[Perm4]) -> Result<Self, TriangulationError> {
        let n = self.tet_count();
        let mut out = vec![[Gluing { tet: 0, face: 0, perm: Perm4::IDENTITY }; 4]; n];
        for t in 0..n {
            let mt = vertex_maps[t];
            for f in 0..4 {
                let g = self.gluings[t][f];
                let mu = vertex_maps[g.tet];
                out[tet_map[t]][mt.apply(f)] = Gluing {
                    tet: tet_map[g.tet],
                    face: mu.apply(g.face),
                    perm: mu.compose(g.perm).compose(mt.inverse()),
                };
            }
        }
        Self::from_gluings(out)
    }
}

fn compute_orientation(gluings: &[[Gluing; 4]]) -> Option<Vec<i8>> {
    let n = gluings.len();
    let mut o = vec![0i8; n];
    for root in 0..n {
        if o[root] != 0 {
            continue;
        }
        o[root] = 1;
        let mut queue = VecDeque::from([root]);
        while let Some(t) = queue.pop_front() {
            for g in &gluings[t] {
                let want = -g.perm.sign() * o[t];
                if o[g.tet] == 0 {
                    o[g.tet] = want;
                    queue.push_back(g.tet);
                } else if o[g.tet] != want {
                    return None;
                }
            }
        }
    }
    Some(o)
}

/// Valence of every edge class; the valences sum to six times the number of
/// tetrahedra.
pub fn edge_valences(tri: &IdealTriangulation) -> Vec<usize> {
    (0..tri.edge_count()).map(|e| tri.edge_embeddings(e).len()).collect()
}

/// Labels of the five vertices of the bipyramid involved in a Pachner move.
/// `A` and `B` are the two apexes (the ends of the valence-three edge), `U0..U2`
/// the vertices of the shared triangle.
pub const APEX_A: u8 = 0;
pub const APEX_B: u8 = 1;
pub const EQUATOR: [u8; 3] = [2, 3, 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveKind {
    #[serde(rename = "23")]
    TwoThree,
    #[serde(rename = "32")]
    ThreeTwo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MoveTarget {
    Face { tet: usize, face: usize },
    Edge { edge: usize },
}

/// A performed Pachner move with the bookkeeping needed to transport shapes.
///
/// `removed[i] = (old tet, bipyramid label of each of its vertices)` and
/// `added[i] = (new tet, labels)`. Unaffected tetrahedra keep their vertex
/// labels and are renumbered by `kept`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PachnerMove {
    pub kind: MoveKind,
    pub target: MoveTarget,
    pub removed: Vec<(usize, [u8; 4])>,
    pub added: Vec<(usize, [u8; 4])>,
    pub kept: Vec<(usize, usize)>,
}

/// Where a removed tetrahedron's external face ends up.
#[derive(Clone, Copy)]
struct SlotImage {
    tet: usize,
    /// Old vertex label -> new vertex label.
    map: Perm4,
}

fn labels_to_perm(from: [u8; 4], to: [u8; 4]) -> Perm4 {
    // Vertex i of `from` carries bipyramid label from[i]; send it to the vertex
    // of `to` with the same label, pairing the single unmatched vertices.
    let mut images = [u8::MAX; 4];
    let mut unmatched_to = (0..4).filter(|&j| !from.contains(&to[j]));
    for i in 0..4 {
        images[i] = match to.iter().position(|&l| l == from[i]) {
            Some(j) => j as u8,
            None => unmatched_to.next().expect("single unmatched vertex") as u8,
        };
    }
    Perm4::new(images).expect("bijective label map")
}

/// Builds the new triangulation after replacing `removed` tetrahedra by
/// `added` ones. Each removed tetrahedron's faces are either internal (glued to
/// another removed tetrahedron) or external; `external` lists for each external
/// removed side the new tetrahedron index (within `added`) that inherits it.
fn rebuild(
    tri: &IdealTriangulation,
    removed: &[(usize, [u8; 4])],
    added_labels: &[[u8; 4]],
) -> Result<(IdealTriangulation, Vec<(usize, usize)>), TriangulationError> {
    let n = tri.tet_count();
    let removed_set: Vec<usize> = removed.iter().map(|r| r.0).collect();
    let mut new_index = vec![usize::MAX; n];
    let mut kept = Vec::new();
    let mut next = 0;
    for t in 0..n {
        if !removed_set.contains(&t) {
            new_index[t] = next;
            kept.push((t, next));
            next += 1;
        }
    }
    let first_added = next;
    let total = first_added + added_labels.len();

    // External side (old tet, old face) -> image slot in a new tetrahedron.
    let mut slot_image = std::collections::HashMap::new();
    for &(old, labels) in removed {
        for f in 0..4 {
            let face_labels: Vec<u8> = (0..4).filter(|&v| v != f).map(|v| labels[v]).collect();
            // the new tetrahedron containing this face and not the far label
            for (k, nl) in added_labels.iter().enumerate() {
                if face_labels.iter().all(|l| nl.contains(l)) && !nl.contains(&labels[f]) {
                    slot_image.insert((old, f), SlotImage { tet: first_added + k, map: labels_to_perm(labels, *nl) });
                }
            }
        }
    }

    let mut out = vec![[Gluing { tet: 0, face: 0, perm: Perm4::IDENTITY }; 4]; total];
    // Unaffected tetrahedra.
    for t in (0..n).filter(|t| !removed_set.contains(t)) {
        for f in 0..4 {
            let g = tri.gluing(t, f);
            out[new_index[t]][f] = if let Some(img) = slot_image.get(&(g.tet, g.face)) {
                let perm = img.map.compose(g.perm);
                Gluing { tet: img.tet, face: perm.apply(f), perm }
            } else {
                Gluing { tet: new_index[g.tet], face: g.face, perm: g.perm }
            };
        }
    }
    // External faces of new tetrahedra, inherited from removed ones.
    for (&(old, f), img) in slot_image.iter() {
        let g = tri.gluing(old, f);
        let new_face = img.map.apply(f);
        let gl = if let Some(dst) = slot_image.get(&(g.tet, g.face)) {
            let perm = dst.map.compose(g.perm).compose(img.map.inverse());
            Gluing { tet: dst.tet, face: perm.apply(new_face), perm }
        } else {
            if removed_set.contains(&g.tet) {
                // internal face of the old configuration; cannot be external
                unreachable!("internal face listed as external");
            }
            let perm = g.perm.compose(img.map.inverse());
            Gluing { tet: new_index[g.tet], face: perm.apply(new_face), perm }
        };
        out[img.tet][new_face] = gl;
    }
    // Internal faces between new tetrahedra.
    for (k, a) in added_labels.iter().enumerate() {
        for (m, b) in added_labels.iter().enumerate() {
            if k == m {
                continue;
            }
            let shared = a.iter().filter(|l| b.contains(l)).count();
            if shared == 3 {
                let perm = labels_to_perm(*a, *b);
                let face = (0..4).find(|&v| !b.contains(&a[v])).unwrap();
                out[first_added + k][face] =
                    Gluing { tet: first_added + m, face: perm.apply(face), perm };
            }
        }
    }
    let new_tri = IdealTriangulation::from_gluings(out)?;
    Ok((new_tri, kept))
}

/// Geometric orientation sign of the ordered vertex tuple `labels` of `tet`.
fn tuple_orientation(tri: &IdealTriangulation, tet: usize, vertices: Perm4) -> i8 {
    let o = tri.orientation().map(|o| o[tet]).unwrap_or(1);
    o * vertices.sign()
}

/// Align the new triangulation's orientation with the old one on kept tetrahedra.
fn align_orientation(new_tri: &mut IdealTriangulation, old: &IdealTriangulation, kept: &[(usize, usize)], reference_new: Option<(usize, i8)>) {
    let (Some(old_o), Some(new_o)) = (old.orientation.clone(), new_tri.orientation.as_mut()) else {
        return;
    };
    let flip = if let Some(&(o, nw)) = kept.first() {
        old_o[o] != new_o[nw]
    } else if let Some((t, want)) = reference_new {
        new_o[t] != want
    } else {
        false
    };
    if flip {
        for x in new_o.iter_mut() {
            *x = -*x;
        }
    }
}

/// Pachner 2-3 move on the face `(tet, face)`.
///
/// Labeling convention: with `d0 < d1 < d2` the vertices of `tet` other than
/// `face`, the bipyramid labels are `A = face` (apex in `tet`), `B` the apex of
/// the neighbour, `U_i = d_i`. New tetrahedra are appended after the
/// unaffected ones (which keep their relative order); new tetrahedron `k`
/// spans `A, B, U_{k+1}, U_{k+2}` (indices mod 3) with vertex order
/// `[A, B, U_{k+1}, U_{k+2}]` when that order is positively oriented and
/// `[B, A, U_{k+1}, U_{k+2}]` otherwise.
pub fn pachner_23(tri: &IdealTriangulation, tet: usize, face: usize) -> Result<(IdealTriangulation, PachnerMove), TriangulationError> {
    if tet >= tri.tet_count() || face > 3 {
        return Err(TriangulationError::TargetOutOfRange { tet, face });
    }
    let g = tri.gluing(tet, face);
    if g.tet == tet {
        return Err(TriangulationError::SelfGluedFace { tet, face });
    }
    let d: Vec<usize> = (0..4).filter(|&v| v != face).collect();
    let mut la = [0u8; 4];
    la[face] = APEX_A;
    for (i, &v) in d.iter().enumerate() {
        la[v] = EQUATOR[i];
    }
    let mut lb = [0u8; 4];
    lb[g.face] = APEX_B;
    for (i, &v) in d.iter().enumerate() {
        lb[g.perm.apply(v)] = EQUATOR[i];
    }
    let eps = tuple_orientation(
        tri,
        tet,
        Perm4::new([face as u8, d[0] as u8, d[1] as u8, d[2] as u8]).unwrap(),
    );
    let added_labels: Vec<[u8; 4]> = (0..3)
        .map(|k| {
            let u1 = EQUATOR[(k + 1) % 3];
            let u2 = EQUATOR[(k + 2) % 3];
            if eps > 0 {
                [APEX_A, APEX_B, u1, u2]
            } else {
                [APEX_B, APEX_A, u1, u2]
            }
        })
        .collect();
    let removed = vec![(tet, la), (g.tet, lb)];
    let (mut new_tri, kept) = rebuild(tri, &removed, &added_labels)?;
    let first = kept.len();
    align_orientation(&mut new_tri, tri, &kept, Some((first, 1)));
    let added = (0..3).map(|k| (first + k, added_labels[k])).collect();
    Ok((
        new_tri,
        PachnerMove { kind: MoveKind::TwoThree, target: MoveTarget::Face { tet, face }, removed, added, kept },
    ))
}

/// Pachner 3-2 move removing the valence-three edge class `edge`.
///
/// The three tetrahedra around the edge are taken in the order of the edge
/// walk; the edge ends are `A` (`vertices[0]` of the first embedding) and
/// `B`, and the equatorial vertices `W0, W1, W2` are met in walk order. The two
/// new tetrahedra are appended: first the one with apex `A`, then apex `B`,
/// each ordered `[apex, W0, W1, W2]` or with the last two swapped so that the
/// order is positively oriented.
pub fn pachner_32(tri: &IdealTriangulation, edge: usize) -> Result<(IdealTriangulation, PachnerMove), TriangulationError> {
    if edge >= tri.edge_count() {
        return Err(TriangulationError::NoSuchEdge(edge));
    }
    let emb = tri.edge_embeddings(edge);
    if emb.len() != 3 {
        return Err(TriangulationError::WrongValence { edge, valence: emb.len() });
    }
    let tets: Vec<usize> = emb.iter().map(|e| e.tet).collect();
    if tets[0] == tets[1] || tets[1] == tets[2] || tets[0] == tets[2] {
        return Err(TriangulationError::RepeatedTetrahedron { edge });
    }
    let mut removed = Vec::new();
    for (m, e) in emb.iter().enumerate() {
        let p = e.vertices;
        let mut l = [0u8; 4];
        l[p.apply(0)] = APEX_A;
        l[p.apply(1)] = APEX_B;
        l[p.apply(2)] = EQUATOR[m];
        l[p.apply(3)] = EQUATOR[(m + 1) % 3];
        removed.push((e.tet, l));
    }
    let eps = tuple_orientation(tri, emb[0].tet, emb[0].vertices);
    let [w0, w1, w2] = EQUATOR;
    let added_labels = if eps > 0 {
        vec![[APEX_A, w0, w1, w2], [APEX_B, w0, w2, w1]]
    } else {
        vec![[APEX_A, w0, w2, w1], [APEX_B, w0, w1, w2]]
    };
    let (mut new_tri, kept) = rebuild(tri, &removed, &added_labels)?;
    let first = kept.len();
    align_orientation(&mut new_tri, tri, &kept, Some((first, 1)));
    let added = (0..2).map(|k| (first + k, added_labels[k])).collect();
    Ok((
        new_tri,
        PachnerMove { kind: MoveKind::ThreeTwo, target: MoveTarget::Edge { edge }, removed, added, kept },
    ))
}

/// Applies a move described by kind and target.
pub fn apply_move(tri: &IdealTriangulation, kind: MoveKind, target: MoveTarget) -> Result<(IdealTriangulation, PachnerMove), TriangulationError> {
    match (kind, target) {
        (MoveKind::TwoThree, MoveTarget::Face { tet, face }) => pachner_23(tri, tet, face),
        (MoveKind::ThreeTwo, MoveTarget::Edge { edge }) => pachner_32(tri, edge),
        _ => Err(TriangulationError::InvalidSignature),
    }
}

// ---------------------------------------------------------------------------
// Isomorphism signatures

const SIG_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789+-";

/// Canonical code of the component reached from `start` with the given
/// initial vertex relabeling, plus the old->new tetrahedron numbering.
fn bfs_code(tri: &IdealTriangulation, start: usize, start_map: Perm4) -> (Vec<usize>, Vec<usize>) {
    let n = tri.tet_count();
    let mut image = vec![usize::MAX; n];
    let mut maps = vec![Perm4::IDENTITY; n];
    let mut order = vec![start];
    image[start] = 0;
    maps[start] = start_map;
    let mut code = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let t = order[i];
        let m = maps[t];
        let minv = m.inverse();
        for new_face in 0..4 {
            let f = minv.apply(new_face);
            let g = tri.gluing(t, f);
            if image[g.tet] == usize::MAX {
                image[g.tet] = order.len();
                order.push(g.tet);
                // the neighbour's labeling makes this gluing the identity
                maps[g.tet] = m.compose(g.perm.inverse());
            }
            let perm = maps[g.tet].compose(g.perm).compose(minv);
            code.push(image[g.tet]);
            code.push(perm.index());
        }
        i += 1;
    }
    (code, order)
}

fn components(tri: &IdealTriangulation) -> Vec<Vec<usize>> {
    let n = tri.tet_count();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let (_, order) = bfs_code(tri, s, Perm4::IDENTITY);
        for &t in &order {
            seen[t] = true;
        }
        out.push(order);
    }
    out
}

/// Canonical string such that two triangulations are combinatorially
/// isomorphic exactly when their signatures agree.
///
/// For each connected component the lexicographically smallest breadth-first
/// code over all starting tetrahedra and starting labelings is taken; the
/// component codes are sorted and concatenated.
pub fn isomorphism_signature(tri: &IdealTriangulation) -> String {
    let mut codes: Vec<Vec<usize>> = components(tri)
        .into_iter()
        .map(|comp| {
            let mut best: Option<Vec<usize>> = None;
            for &s in &comp {
                for p in Perm4::all() {
                    let (code, _) = bfs_code(tri, s, p);
                    if best.as_ref().is_none_or(|b| code < *b) {
                        best = Some(code);
                    }
                }
            }
            let mut full = vec![comp.len()];
            full.extend(best.unwrap_or_default());
            full
        })
        .collect();
    codes.sort();
    let max = codes.iter().flatten().copied().max().unwrap_or(0).max(23);
    let mut width = 1;
    while 64usize.pow(width as u32) <= max {
        width += 1;
    }
    let mut s = String::new();
    s.push(SIG_ALPHABET[width] as char);
    s.push(SIG_ALPHABET[codes.len() % 64] as char);
    for code in codes {
        for x in code {
            let mut digits = vec![0u8; width];
            let mut v = x;
            for d in digits.iter_mut().rev() {
                *d = SIG_ALPHABET[v % 64];
                v /= 64;
            }
            s.push_str(std::str::from_utf8(&digits).unwrap());
        }
    }
    s
}

/// Rebuilds a triangulation from its signature.
pub fn decode_signature(sig: &str) -> Result<IdealTriangulation, TriangulationError> {
    let bytes = sig.as_bytes();
    let val = |c: u8| SIG_ALPHABET.iter().position(|&a| a == c).ok_or(TriangulationError::InvalidSignature);
    if bytes.len() < 2 {
        return Err(TriangulationError::InvalidSignature);
    }
    let width = val(bytes[0])?;
    let ncomp = val(bytes[1])?;
    if width == 0 || (bytes.len() - 2) % width != 0 {
        return Err(TriangulationError::InvalidSignature);
    }
    let nums: Vec<usize> = bytes[2..]
        .chunks(width)
        .map(|ch| ch.iter().try_fold(0usize, |acc, &c| Ok(acc * 64 + val(c)?)))
        .collect::<Result<_, TriangulationError>>()?;
    let mut gluings: Vec<[Gluing; 4]> = Vec::new();
    let mut pos = 0;
    for _ in 0..ncomp {
        let size = *nums.get(pos).ok_or(TriangulationError::InvalidSignature)?;
        pos += 1;
        let base = gluings.len();
        for _ in 0..size {
            let mut row = [Gluing { tet: 0, face: 0, perm: Perm4::IDENTITY }; 4];
            for (f, slot) in row.iter_mut().enumerate() {
                let t = *nums.get(pos).ok_or(TriangulationError::InvalidSignature)?;
                let p = nums.get(pos + 1).and_then(|&i| Perm4::from_index(i)).ok_or(TriangulationError::InvalidSignature)?;
                pos += 2;
                if t >= size {
                    return Err(TriangulationError::InvalidSignature);
                }
                *slot = Gluing { tet: base + t, face: p.apply(f), perm: p };
            }
            gluings.push(row);
        }
    }
    if pos != nums.len() {
        return Err(TriangulationError::InvalidSignature);
    }
    IdealTriangulation::from_gluings(gluings).map_err(|_| TriangulationError::InvalidSignature)
}

// ---------------------------------------------------------------------------
// JSON

/// Wire format: `{"tet_count": n, "gluings": [[[t', f', [σ0..σ3]] x 4] x n]}`
/// with an optional embedded veering structure.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TriangulationJson {
    pub tet_count: usize,
    pub gluings: Vec<Vec<RawGluing>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub veering: Option<crate::veering::VeeringJson>,
}

impl TriangulationJson {
    pub fn from_triangulation(tri: &IdealTriangulation) -> Self {
        TriangulationJson { tet_count: tri.tet_count(), gluings: tri.to_raw(), veering: None }
    }

    pub fn to_triangulation(&self) -> Result<IdealTriangulation, TriangulationError> {
        if self.gluings.len() != self.tet_count {
            return Err(TriangulationError::UngluedFace { tet: self.gluings.len().min(self.tet_count), face: 0 });
        }
        IdealTriangulation::from_gluing_data(&self.gluings)
    }
}

/// The standard two-tetrahedron triangulation of the figure-eight knot
/// complement.
pub fn figure_eight() -> IdealTriangulation {
    let raw = vec![
        vec![(1, 1, [1, 3, 0, 2]), (1, 0, [2, 0, 3, 1]), (1, 2, [0, 3, 2, 1]), (1, 3, [2, 1, 0, 3])],
        vec![(0, 1, [1, 3, 0, 2]), (0, 0, [2, 0, 3, 1]), (0, 2, [0, 3, 2, 1]), (0, 3, [2, 1, 0, 3])],
    ];
    IdealTriangulation::from_gluing_data(&raw).expect("figure-eight data is valid")
}
