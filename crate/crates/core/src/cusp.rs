//! Cusp cross-sections: the triangulated torus linking each ideal vertex.
//!
//! Triangles are tetrahedron corners `(tet, v)`. The side of corner `(tet, v)`
//! lying in face `f` of `tet` is called side `f`; it is opposite the triangle
//! vertex labeled `f`, and the triangle vertex labeled `w` sits on the
//! tetrahedron edge `v w`.
//!
//! Homology classes are handled through two kinds of curves: dual cycles
//! (closed walks through triangles across sides, used for holonomies) and
//! primal chains (integer combinations of triangle sides). Dual cycles are
//! converted to primal chains and classes are read off with the intersection
//! pairing against a tree–cotree basis.

use std::collections::VecDeque;

use thiserror::Error;

use crate::triangulation::IdealTriangulation;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CuspError {
    #[error("link of vertex class {vertex} has Euler characteristic {euler}, not a torus")]
    NonTorusLink { vertex: usize, euler: i64 },
    #[error("triangulation is not orientable")]
    NonOrientable,
    #[error("cusp basis is degenerate (intersection determinant {0})")]
    DegenerateBasis(i64),
}

/// One step of a dual cycle: leave `triangle` through side `exit`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DualStep {
    pub triangle: usize,
    pub exit: usize,
}

/// A closed walk in the dual graph of a cusp triangulation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualCycle {
    pub steps: Vec<DualStep>,
}

/// A turn of a dual cycle around a triangle corner: the tetrahedron edge
/// `(tet, v, c)` whose shape enters the holonomy with sign `+1` (corner on
/// the right of the walk) or `-1` (on the left).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Turn {
    pub tet: usize,
    pub v: usize,
    pub c: usize,
    pub sign: i64,
}

#[derive(Clone, Debug)]
pub struct CuspCrossSection {
    pub vertex_class: usize,
    /// Corners `(tet, v)` in this cusp.
    pub triangles: Vec<(usize, usize)>,
    /// `neighbors[i][f] = (j, f')`: side `f` of triangle `i` is glued to side
    /// `f'` of triangle `j` (entries with `f == v` are unused).
    neighbors: Vec<[(usize, usize); 4]>,
    /// Perm images for the side gluing, from the tetrahedron face pairing.
    side_perm: Vec<[crate::perm::Perm4; 4]>,
    /// Global id of the cusp vertex at label `w` of triangle `i`.
    vertex_ids: Vec<[usize; 4]>,
    vertex_total: usize,
    /// Canonical sides, one per cusp edge.
    edges: Vec<(usize, usize)>,
    /// ccw flag per triangle: whether ascending label order is counterclockwise.
    ccw_ascending: Vec<bool>,
    basis: [DualCycle; 2],
    /// Primal chains of the basis cycles.
    basis_primal: [Vec<i64>; 2],
    /// `pairing[r][c] = i(basis_primal[c], basis[r])`.
    pairing: [[i64; 2]; 2],
}

fn others(v: usize) -> [usize; 3] {
    let mut out = [0; 3];
    let mut k = 0;
    for w in 0..4 {
        if w != v {
            out[k] = w;
            k += 1;
        }
    }
    out
}

impl CuspCrossSection {
    /// Builds the cross-section of one vertex class.
    pub fn new(tri: &IdealTriangulation, vertex_class: usize) -> Result<Self, CuspError> {
        let orient = tri.orientation().ok_or(CuspError::NonOrientable)?;
        let mut triangles = Vec::new();
        let mut index = vec![[usize::MAX; 4]; tri.tet_count()];
        for t in 0..tri.tet_count() {
            for v in 0..4 {
                if tri.vertex_class(t, v) == vertex_class {
                    index[t][v] = triangles.len();
                    triangles.push((t, v));
                }
            }
        }
        let nt = triangles.len();
        let mut neighbors = vec![[(usize::MAX, usize::MAX); 4]; nt];
        let mut side_perm = vec![[crate::perm::Perm4::IDENTITY; 4]; nt];
        for (i, &(t, v)) in triangles.iter().enumerate() {
            for f in others(v) {
                let g = tri.gluing(t, f);
                neighbors[i][f] = (index[g.tet][g.perm.apply(v)], g.face);
                side_perm[i][f] = g.perm;
            }
        }
        // cusp vertices: union over side gluings
        let mut parent: Vec<usize> = (0..4 * nt).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (i, &(_, v)) in triangles.iter().enumerate() {
            for f in others(v) {
                let (j, _) = neighbors[i][f];
                let perm = side_perm[i][f];
                for w in others(v).into_iter().filter(|&w| w != f) {
                    let a = find(&mut parent, 4 * i + w);
                    let b = find(&mut parent, 4 * j + perm.apply(w));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut ids = vec![usize::MAX; 4 * nt];
        let mut vertex_ids = vec![[usize::MAX; 4]; nt];
        let mut vertex_total = 0;
        for (i, &(_, v)) in triangles.iter().enumerate() {
            for w in others(v) {
                let r = find(&mut parent, 4 * i + w);
                if ids[r] == usize::MAX {
                    ids[r] = vertex_total;
                    vertex_total += 1;
                }
                vertex_ids[i][w] = ids[r];
            }
        }
        let mut edges = Vec::new();
        for (i, &(_, v)) in triangles.iter().enumerate() {
            for f in others(v) {
                if (i, f) <= neighbors[i][f] {
                    edges.push((i, f));
                }
            }
        }
        let euler = vertex_total as i64 - edges.len() as i64 + nt as i64;
        if euler != 0 {
            return Err(CuspError::NonTorusLink { vertex: vertex_class, euler });
        }
        let ccw_ascending = triangles
            .iter()
            .map(|&(t, v)| {
                let [a, b, c] = others(v);
                let p = crate::perm::Perm4::new([v as u8, a as u8, b as u8, c as u8]).unwrap();
                p.sign() * orient[t] > 0
            })
            .collect();

        let mut cs = CuspCrossSection {
            vertex_class,
            triangles,
            neighbors,
            side_perm,
            vertex_ids,
            vertex_total,
            edges,
            ccw_ascending,
            basis: [DualCycle { steps: vec![] }, DualCycle { steps: vec![] }],
            basis_primal: [vec![], vec![]],
            pairing: [[0; 2]; 2],
        };
        cs.basis = cs.tree_cotree_basis();
        cs.basis_primal = [cs.dual_to_primal(&cs.basis[0]), cs.dual_to_primal(&cs.basis[1])];
        for r in 0..2 {
            for c in 0..2 {
                cs.pairing[r][c] = cs.intersection(&cs.basis_primal[c], &cs.basis[r]);
            }
        }
        let det = cs.pairing[0][0] * cs.pairing[1][1] - cs.pairing[0][1] * cs.pairing[1][0];
        if det.abs() != 1 {
            return Err(CuspError::DegenerateBasis(det));
        }
        Ok(cs)
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex_total(&self) -> usize {
        self.vertex_total
    }

    pub fn edge_total(&self) -> usize {
        self.edges.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_total as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn basis(&self) -> &[DualCycle; 2] {
        &self.basis
    }

    pub fn neighbor(&self, triangle: usize, side: usize) -> (usize, usize) {
        self.neighbors[triangle][side]
    }

    /// Whether the cyclic label order `(x, y, z)` is counterclockwise in triangle `i`.
    fn is_ccw(&self, i: usize, x: usize, y: usize, z: usize) -> bool {
        let v = self.triangles[i].1;
        let asc = others(v);
        let pos = |l: usize| asc.iter().position(|&a| a == l).unwrap();
        let (px, py, pz) = (pos(x), pos(y), pos(z));
        let even = (py + 3 - px) % 3 == 1 && (pz + 3 - py) % 3 == 1;
        even == self.ccw_ascending[i]
    }

    fn tree_cotree_basis(&self) -> [DualCycle; 2] {
        let nt = self.triangles.len();
        // dual BFS tree
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; nt]; // (parent tri, side of child leading to parent)
        let mut seen = vec![false; nt];
        let mut dual_tree_edge = vec![false; self.edges.len()];
        let edge_of = |i: usize, f: usize| -> usize {
            let key = if (i, f) <= self.neighbors[i][f] { (i, f) } else { self.neighbors[i][f] };
            self.edges.iter().position(|&e| e == key).unwrap()
        };
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            let v = self.triangles[i].1;
            for f in others(v) {
                let (j, fj) = self.neighbors[i][f];
                if !seen[j] {
                    seen[j] = true;
                    parent[j] = Some((i, fj));
                    dual_tree_edge[edge_of(i, f)] = true;
                    queue.push_back(j);
                }
            }
        }
        // primal spanning tree avoiding edges dual to the dual tree
        let mut comp: Vec<usize> = (0..self.vertex_total).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut leftover = Vec::new();
        for (k, &(i, f)) in self.edges.iter().enumerate() {
            if dual_tree_edge[k] {
                continue;
            }
            let v = self.triangles[i].1;
            let ends: Vec<usize> = others(v).into_iter().filter(|&w| w != f).collect();
            let a = find(&mut comp, self.vertex_ids[i][ends[0]]);
            let b = find(&mut comp, self.vertex_ids[i][ends[1]]);
            if a != b {
                comp[a.max(b)] = a.min(b);
            } else {
                leftover.push((i, f));
            }
        }
        debug_assert_eq!(leftover.len(), 2);
        let path_to_root = |mut i: usize| -> Vec<DualStep> {
            // steps from i up to root
            let mut steps = Vec::new();
            while let Some((p, side)) = parent[i] {
                steps.push(DualStep { triangle: i, exit: side });
                i = p;
            }
            steps
        };
        let mk = |(i, f): (usize, usize)| -> DualCycle {
            let (j, _) = self.neighbors[i][f];
            // root -> i, then i -f-> j, then j -> root
            let up_i = path_to_root(i);
            let mut down_i: Vec<DualStep> = Vec::new();
            // reverse the path i->root into root->i
            for s in up_i.iter().rev() {
                let (p, _) = parent[s.triangle].unwrap();
                let side_from_parent = self.neighbors[s.triangle][s.exit].1;
                down_i.push(DualStep { triangle: p, exit: side_from_parent });
            }
            let mut steps = down_i;
            steps.push(DualStep { triangle: i, exit: f });
            steps.extend(path_to_root(j));
            simplify(steps, &self.neighbors)
        };
        [mk(leftover[0]), mk(leftover[1])]
    }

    fn canonical_sign(&self, i: usize, f: usize) -> (usize, i64) {
        let key = if (i, f) <= self.neighbors[i][f] { (i, f) } else { self.neighbors[i][f] };
        let k = self.edges.iter().position(|&e| e == key).unwrap();
        (k, if key == (i, f) { 1 } else { -1 })
    }

    /// Algebraic intersection of a primal chain with a dual cycle.
    pub fn intersection(&self, primal: &[i64], dual: &DualCycle) -> i64 {
        dual.steps
            .iter()
            .map(|s| {
                let (k, sign) = self.canonical_sign(s.triangle, s.exit);
                sign * primal[k]
            })
            .sum()
    }

    fn entry_sides(&self, cycle: &DualCycle) -> Vec<usize> {
        let n = cycle.steps.len();
        (0..n)
            .map(|k| {
                let prev = cycle.steps[(k + n - 1) % n];
                self.neighbors[prev.triangle][prev.exit].1
            })
            .collect()
    }

    /// Corners turned around by a dual cycle, with holonomy signs.
    pub fn turns(&self, cycle: &DualCycle) -> Vec<Turn> {
        let entries = self.entry_sides(cycle);
        cycle
            .steps
            .iter()
            .zip(entries)
            .map(|(s, s_in)| {
                let (t, v) = self.triangles[s.triangle];
                let c = (0..4).find(|&w| w != v && w != s_in && w != s.exit).unwrap();
                let right = self.is_ccw(s.triangle, s_in, s.exit, c);
                Turn { tet: t, v, c, sign: if right { 1 } else { -1 } }
            })
            .collect()
    }

    /// Pushes a dual cycle onto the cusp 1-skeleton.
    pub fn dual_to_primal(&self, cycle: &DualCycle) -> Vec<i64> {
        let mut chain = vec![0i64; self.edges.len()];
        let entries = self.entry_sides(cycle);
        let n = cycle.steps.len();
        let turn_vertex: Vec<usize> = (0..n)
            .map(|k| {
                let s = cycle.steps[k];
                let v = self.triangles[s.triangle].1;
                (0..4).find(|&w| w != v && w != entries[k] && w != s.exit).unwrap()
            })
            .collect();
        for k in 0..n {
            let s = cycle.steps[k];
            let c = turn_vertex[k];
            let (j, fj) = self.neighbors[s.triangle][s.exit];
            let c_next = turn_vertex[(k + 1) % n];
            let mapped = self.side_perm[s.triangle][s.exit].apply(c);
            if mapped == c_next {
                continue;
            }
            // traverse the side from c to its other end
            let (edge, canon) = self.canonical_sign(s.triangle, s.exit);
            let (ti, fi, start) = if canon > 0 { (s.triangle, s.exit, c) } else { (j, fj, mapped) };
            let v = self.triangles[ti].1;
            let ends: Vec<usize> = others(v).into_iter().filter(|&w| w != fi).collect();
            // canonical direction u -> w with (f, u, w) counterclockwise
            let (u, _w) = if self.is_ccw(ti, fi, ends[0], ends[1]) { (ends[0], ends[1]) } else { (ends[1], ends[0]) };
            chain[edge] += if start == u { 1 } else { -1 };
        }
        chain
    }

    /// Coordinates of a primal 1-cycle in the basis of this cross-section.
    pub fn primal_class(&self, chain: &[i64]) -> (i64, i64) {
        let ia = self.intersection(chain, &self.basis[0]);
        let ib = self.intersection(chain, &self.basis[1]);
        let [[a, b], [c, d]] = self.pairing;
        let det = a * d - b * c;
        // [a b; c d] (m, n)^T = (ia, ib)^T
        let m = (d * ia - b * ib) * det;
        let n = (-c * ia + a * ib) * det;
        (m, n)
    }

    pub fn dual_class(&self, cycle: &DualCycle) -> (i64, i64) {
        self.primal_class(&self.dual_to_primal(cycle))
    }

    /// Algebraic intersection number of two classes in the cusp basis.
    pub fn class_intersection(&self, x: (i64, i64), y: (i64, i64)) -> i64 {
        // the basis pairs to ±1
        let sign = self.pairing[1][0] - self.pairing[0][1];
        let sign = sign.signum();
        sign * (x.0 * y.1 - x.1 * y.0)
    }

    /// The class `l` whose intersection with each basis cycle is given,
    /// i.e. the Poincaré dual of a cohomology class restricted to this cusp.
    pub fn class_with_pairings(&self, on_a: i64, on_b: i64) -> (i64, i64) {
        let [[a, b], [c, d]] = self.pairing;
        let det = a * d - b * c;
        ((d * on_a - b * on_b) * det, (-c * on_a + a * on_b) * det)
    }

    /// Edge color lookup: label `w` of triangle `i` sits on tetrahedron edge `(v, w)`.
    pub fn corner_edge(&self, i: usize, w: usize) -> (usize, usize, usize) {
        let (t, v) = self.triangles[i];
        (t, v, w)
    }

    /// Follows the dual edges selected by `keep(triangle, side)` from triangle
    /// `start`, assuming every triangle has exactly two such sides.
    pub fn follow_cycle(&self, start: usize, keep: impl Fn(usize, usize) -> bool) -> Option<DualCycle> {
        let v0 = self.triangles[start].1;
        let first = others(v0).into_iter().find(|&f| keep(start, f))?;
        let mut steps = vec![DualStep { triangle: start, exit: first }];
        let (mut cur, mut entered) = self.neighbors[start][first];
        for _ in 0..=2 * self.triangles.len() {
            if cur == start && entered != first {
                let expected_last = others(v0).into_iter().find(|&f| f != first && keep(start, f))?;
                if entered == expected_last {
                    return Some(DualCycle { steps });
                }
            }
            let v = self.triangles[cur].1;
            let exit = others(v).into_iter().find(|&f| f != entered && keep(cur, f))?;
            steps.push(DualStep { triangle: cur, exit });
            let nx = self.neighbors[cur][exit];
            cur = nx.0;
            entered = nx.1;
        }
        None
    }
}

/// Removes immediate backtracking (exit then re-enter through the same side).
fn simplify(mut steps: Vec<DualStep>, nb: &[[(usize, usize); 4]]) -> DualCycle {
    let backtracks = |a: &DualStep, b: &DualStep| nb[a.triangle][a.exit] == (b.triangle, b.exit);
    let mut changed = true;
    while changed && steps.len() > 1 {
        changed = false;
        let mut out: Vec<DualStep> = Vec::with_capacity(steps.len());
        for s in steps.iter() {
            if let Some(last) = out.last() {
                if backtracks(last, s) {
                    out.pop();
                    changed = true;
                    continue;
                }
            }
            out.push(*s);
        }
        // cyclic wrap
        while out.len() > 1 && backtracks(out.last().unwrap(), &out[0]) {
            out.pop();
            out.remove(0);
            changed = true;
        }
        steps = out;
    }
    DualCycle { steps }
}

/// Cross-sections of all cusps, in vertex-class order.
pub fn cusp_cross_sections(tri: &IdealTriangulation) -> Result<Vec<CuspCrossSection>, CuspError> {
    (0..tri.vertex_count()).map(|v| CuspCrossSection::new(tri, v)).collect()
}
