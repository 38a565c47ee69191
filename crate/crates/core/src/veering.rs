//! Taut angle structures, veering colorings and slopes on cusp tori.
//!
//! A taut structure picks one pair of opposite edges per tetrahedron to
//! carry angle π. Pairs are indexed by the smaller [`EDGE_VERTICES`] index
//! of the two edges: 0 for {01, 23}, 1 for {02, 13}, 2 for {03, 12}.
//!
//! Veering chirality: write a tetrahedron's vertices as `(a, b, c, d)` with
//! `ab` and `cd` the π-edges and `(a, b, c, d)` positively oriented. The
//! equatorial square `a c b d` is then colored Red, Blue, Red, Blue starting
//! from `ac`. In the flat model `a, b` are the top and bottom punctures of the
//! maximal rectangle and `c` the left one, so Red edges have positive slope.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cusp::{CuspCrossSection, DualCycle};
use crate::perm::{edge_index, opposite_edge, Perm4, EDGE_VERTICES};
use crate::triangulation::IdealTriangulation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    #[serde(rename = "R")]
    Red,
    #[serde(rename = "B")]
    Blue,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TautStructure {
    pub pi_pairs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VeeringStructure {
    pub taut: TautStructure,
    pub colors: Vec<Color>,
}

/// Serialized form embedded in triangulation JSON.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VeeringJson {
    pub pi_pairs: Vec<usize>,
    pub colors: Vec<Color>,
}

impl From<&VeeringStructure> for VeeringJson {
    fn from(v: &VeeringStructure) -> Self {
        VeeringJson { pi_pairs: v.taut.pi_pairs.clone(), colors: v.colors.clone() }
    }
}

impl From<VeeringJson> for VeeringStructure {
    fn from(v: VeeringJson) -> Self {
        VeeringStructure { taut: TautStructure { pi_pairs: v.pi_pairs }, colors: v.colors }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VeeringError {
    #[error("expected one slope pair per cusp ({boundary} boundary slopes, {degeneracy} degeneracy slopes)")]
    MismatchedCuspCount { boundary: usize, degeneracy: usize },
    #[error("veering structure does not match the triangulation")]
    Invalid,
    #[error("rung cycle not found on cusp {0}")]
    NoLadderpole(usize),
}

fn is_pi(pair: usize, e: usize) -> bool {
    e == pair || e == opposite_edge(pair)
}

/// Checks the 2π edge sums and that the two π angles around each edge are
/// separated on both sides by zero angles.
pub fn is_taut(tri: &IdealTriangulation, taut: &TautStructure) -> bool {
    if taut.pi_pairs.len() != tri.tet_count() || taut.pi_pairs.iter().any(|&p| p > 2) {
        return false;
    }
    (0..tri.edge_count()).all(|e| {
        let emb = tri.edge_embeddings(e);
        let pis: Vec<usize> = emb
            .iter()
            .enumerate()
            .filter(|(_, x)| {
                let k = edge_index(x.vertices.apply(0), x.vertices.apply(1));
                is_pi(taut.pi_pairs[x.tet], k)
            })
            .map(|(i, _)| i)
            .collect();
        pis.len() == 2 && pis[1] - pis[0] > 1 && pis[0] + emb.len() - pis[1] > 1
    })
}

/// All taut structures, in lexicographic order of π-pair choices.
pub fn find_taut_structures(tri: &IdealTriangulation) -> Vec<TautStructure> {
    let n = tri.tet_count();
    let mut out = Vec::new();
    if tri.orientation().is_none() {
        return out;
    }
    let mut choice = vec![0usize; n];
    let mut counts = vec![0usize; tri.edge_count()];
    fn recurse(
        tri: &IdealTriangulation,
        t: usize,
        choice: &mut Vec<usize>,
        counts: &mut Vec<usize>,
        out: &mut Vec<TautStructure>,
    ) {
        let n = tri.tet_count();
        if t == n {
            if counts.iter().all(|&c| c == 2) {
                let cand = TautStructure { pi_pairs: choice.clone() };
                if is_taut(tri, &cand) {
                    out.push(cand);
                }
            }
            return;
        }
        for p in 0..3 {
            let (e1, e2) = (tri.edge_class(t, p), tri.edge_class(t, opposite_edge(p)));
            counts[e1] += 1;
            counts[e2] += 1;
            if counts[e1] <= 2 && counts[e2] <= 2 {
                choice[t] = p;
                recurse(tri, t + 1, choice, counts, out);
            }
            counts[e1] -= 1;
            counts[e2] -= 1;
        }
    }
    recurse(tri, 0, &mut choice, &mut counts, &mut out);
    out
}

/// Colors forced on the four equatorial edges of tetrahedron `t`.
fn equatorial_colors(tri: &IdealTriangulation, t: usize, pair: usize) -> [(usize, Color); 4] {
    let (a, b) = EDGE_VERTICES[pair];
    let (c, d) = EDGE_VERTICES[opposite_edge(pair)];
    let o = tri.orientation().map(|o| o[t]).unwrap_or(1);
    let p = Perm4::new([a as u8, b as u8, c as u8, d as u8]).unwrap();
    let (c, d) = if p.sign() * o > 0 { (c, d) } else { (d, c) };
    [
        (edge_index(a, c), Color::Red),
        (edge_index(c, b), Color::Blue),
        (edge_index(b, d), Color::Red),
        (edge_index(d, a), Color::Blue),
    ]
}

/// Checks every veering invariant: tautness, equatorial alternation with the
/// fixed chirality, and two colors on every face.
pub fn is_veering(tri: &IdealTriangulation, v: &VeeringStructure) -> bool {
    if v.colors.len() != tri.edge_count() || !is_taut(tri, &v.taut) {
        return false;
    }
    for t in 0..tri.tet_count() {
        for (k, col) in equatorial_colors(tri, t, v.taut.pi_pairs[t]) {
            if v.colors[tri.edge_class(t, k)] != col {
                return false;
            }
        }
    }
    faces_bicolored(tri, &v.colors)
}

fn faces_bicolored(tri: &IdealTriangulation, colors: &[Color]) -> bool {
    (0..tri.tet_count()).all(|t| {
        (0..4).all(|f| {
            let ks: Vec<usize> =
                (0..6).filter(|&k| EDGE_VERTICES[k].0 != f && EDGE_VERTICES[k].1 != f).collect();
            let c0 = colors[tri.edge_class(t, ks[0])];
            ks.iter().any(|&k| colors[tri.edge_class(t, k)] != c0)
        })
    })
}

/// The first veering structure found, scanning taut structures in order.
pub fn find_veering_structure(tri: &IdealTriangulation) -> Option<VeeringStructure> {
    for taut in find_taut_structures(tri) {
        let mut forced: Vec<Option<Color>> = vec![None; tri.edge_count()];
        let mut ok = true;
        'tets: for t in 0..tri.tet_count() {
            for (k, col) in equatorial_colors(tri, t, taut.pi_pairs[t]) {
                let e = tri.edge_class(t, k);
                match forced[e] {
                    Some(c) if c != col => {
                        ok = false;
                        break 'tets;
                    }
                    _ => forced[e] = Some(col),
                }
            }
        }
        if !ok {
            continue;
        }
        let free: Vec<usize> = (0..forced.len()).filter(|&e| forced[e].is_none()).collect();
        for mask in 0u64..(1u64 << free.len().min(20)) {
            let mut colors: Vec<Color> = forced.iter().map(|c| c.unwrap_or(Color::Red)).collect();
            for (i, &e) in free.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    colors[e] = Color::Blue;
                }
            }
            if faces_bicolored(tri, &colors) {
                return Some(VeeringStructure { taut, colors });
            }
        }
    }
    None
}

/// Color of the tetrahedron edge at label `w` of cusp triangle `i`.
fn corner_color(tri: &IdealTriangulation, v: &VeeringStructure, cusp: &CuspCrossSection, i: usize, w: usize) -> Color {
    let (t, vert, w) = cusp.corner_edge(i, w);
    v.colors[tri.edge_class(t, edge_index(vert, w))]
}

/// The dual cycle through triangle 0 crossing only rungs: sides whose two
/// endpoints have different colors. It runs parallel to the ladderpoles.
pub fn ladderpole_cycle(
    tri: &IdealTriangulation,
    v: &VeeringStructure,
    cusp: &CuspCrossSection,
) -> Result<DualCycle, VeeringError> {
    let rung = |i: usize, f: usize| {
        let vert = cusp.triangles[i].1;
        let ends: Vec<usize> = (0..4).filter(|&w| w != vert && w != f).collect();
        corner_color(tri, v, cusp, i, ends[0]) != corner_color(tri, v, cusp, i, ends[1])
    };
    cusp.follow_cycle(0, rung).ok_or(VeeringError::NoLadderpole(cusp.vertex_class))
}

/// Number of ladders on a cusp torus. Each ladder is bounded by one
/// ladderpole of each color, so half of them are red.
pub fn ladder_count(tri: &IdealTriangulation, v: &VeeringStructure, cusp: &CuspCrossSection) -> Result<usize, VeeringError> {
    let rung = |i: usize, f: usize| {
        let vert = cusp.triangles[i].1;
        let ends: Vec<usize> = (0..4).filter(|&w| w != vert && w != f).collect();
        corner_color(tri, v, cusp, i, ends[0]) != corner_color(tri, v, cusp, i, ends[1])
    };
    let mut seen = vec![false; cusp.triangles.len()];
    let mut count = 0;
    for i in 0..seen.len() {
        if seen[i] {
            continue;
        }
        let cycle = cusp.follow_cycle(i, rung).ok_or(VeeringError::NoLadderpole(cusp.vertex_class))?;
        for s in &cycle.steps {
            seen[s.triangle] = true;
        }
        count += 1;
    }
    Ok(count)
}

/// Points in which a curve of `slope` on the cusp torus meets the singular
/// leaves of one color: the prong count when `slope` is a fiber's boundary.
pub fn prong_count(
    tri: &IdealTriangulation,
    v: &VeeringStructure,
    cusp: &CuspCrossSection,
    slope: (i64, i64),
) -> Result<i64, VeeringError> {
    let d = degeneracy_slope(tri, v, cusp)?;
    let poles = ladder_count(tri, v, cusp)? / 2;
    Ok(poles as i64 * (slope.0 * d.1 - slope.1 * d.0).abs())
}

fn primitive(p: (i64, i64)) -> (i64, i64) {
    let g = num_integer::gcd(p.0, p.1);
    if g == 0 {
        return p;
    }
    (p.0 / g, p.1 / g)
}

/// Degeneracy slope of a cusp as a primitive class in the cusp basis.
pub fn degeneracy_slope(
    tri: &IdealTriangulation,
    v: &VeeringStructure,
    cusp: &CuspCrossSection,
) -> Result<(i64, i64), VeeringError> {
    if !is_veering(tri, v) {
        return Err(VeeringError::Invalid);
    }
    let cycle = ladderpole_cycle(tri, v, cusp)?;
    Ok(primitive(cusp.dual_class(&cycle)))
}

/// Whether every cusp's boundary slope meets its degeneracy slope once.
pub fn is_principal_fiber(boundary: &[(i64, i64)], degeneracy: &[(i64, i64)]) -> Result<bool, VeeringError> {
    if boundary.len() != degeneracy.len() {
        return Err(VeeringError::MismatchedCuspCount { boundary: boundary.len(), degeneracy: degeneracy.len() });
    }
    Ok(boundary
        .iter()
        .zip(degeneracy)
        .all(|(b, d)| (b.0 * d.1 - b.1 * d.0).abs() == 1))
}
