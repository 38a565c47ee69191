//! Flat surfaces glued from convex polygons by translations and half
//! translations, with exact straight-line developing.

use std::collections::{HashMap, HashSet, VecDeque};

use super::field::{FieldElem, NumberField};
use super::FlatError;

/// A vector in the plane with field coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vec2 {
    pub x: FieldElem,
    pub y: FieldElem,
}

impl Vec2 {
    pub fn new(x: FieldElem, y: FieldElem) -> Self {
        Vec2 { x, y }
    }

    pub fn zero(k: &NumberField) -> Self {
        Vec2 { x: k.zero(), y: k.zero() }
    }

    pub fn add(&self, o: &Vec2) -> Vec2 {
        Vec2 { x: &self.x + &o.x, y: &self.y + &o.y }
    }

    pub fn sub(&self, o: &Vec2) -> Vec2 {
        Vec2 { x: &self.x - &o.x, y: &self.y - &o.y }
    }

    pub fn neg(&self) -> Vec2 {
        Vec2 { x: -&self.x, y: -&self.y }
    }

    pub fn signed(&self, s: i8) -> Vec2 {
        if s > 0 {
            self.clone()
        } else {
            self.neg()
        }
    }

    pub fn scale(&self, k: &FieldElem) -> Vec2 {
        Vec2 { x: &self.x * k, y: &self.y * k }
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.x.to_f64(), self.y.to_f64())
    }
}

/// `a × b`
pub fn cross(a: &Vec2, b: &Vec2) -> FieldElem {
    &(&a.x * &b.y) - &(&a.y * &b.x)
}

fn cross_sign(a: &Vec2, b: &Vec2) -> i32 {
    cross(a, b).signum()
}

/// `(b - a) × (c - a)`
fn orient(a: &Vec2, b: &Vec2, c: &Vec2) -> i32 {
    cross_sign(&b.sub(a), &c.sub(a))
}

/// Triangle corner `(triangle, vertex index)`.
pub type Corner = (usize, usize);

/// A direction at a cone point: the corner whose half-open angular sector
/// `[out, in)` contains it, and the direction in that triangle's coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sector {
    pub corner: Corner,
    pub dir: Vec2,
}

#[derive(Clone, Debug)]
pub(crate) struct Adj {
    pub tri: usize,
    pub edge: usize,
    pub sign: i8,
    /// Coordinates change `z ↦ sign·z + shift` into the neighbor.
    pub shift: Vec2,
}

#[derive(Clone, Debug)]
pub(crate) struct Tri {
    pub v: [Vec2; 3],
    pub adj: [Adj; 3],
}

/// `dev(z) = sigma·z + c`, from a triangle's own coordinates to a common
/// developing frame.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Dev {
    pub sigma: i8,
    pub c: Vec2,
}

impl Dev {
    fn point(&self, z: &Vec2) -> Vec2 {
        z.signed(self.sigma).add(&self.c)
    }

    fn across(&self, a: &Adj) -> Dev {
        let s = self.sigma * a.sign;
        Dev { sigma: s, c: self.c.sub(&a.shift.signed(s)) }
    }
}

/// Edge pairing `(polygon, edge, polygon, edge, sign)`; `sign = 1` is a
/// translation (edge vectors opposite), `sign = -1` a half translation
/// (edge vectors equal).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Identification {
    pub p1: usize,
    pub e1: usize,
    pub p2: usize,
    pub e2: usize,
    pub sign: i8,
}

/// A saddle connection with its developing data.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SaddleConnection {
    pub start: Sector,
    pub end: Sector,
    /// Holonomy in the coordinates of the start triangle.
    pub holonomy: Vec2,
    pub start_vertex: usize,
    pub end_vertex: usize,
    /// Triangles crossed from start to end.
    pub path: Vec<usize>,
}

impl SaddleConnection {
    pub fn reversed(&self) -> SaddleConnection {
        let mut path = self.path.clone();
        path.reverse();
        SaddleConnection {
            start: self.end.clone(),
            end: self.start.clone(),
            holonomy: self.end.dir.clone(),
            start_vertex: self.end_vertex,
            end_vertex: self.start_vertex,
            path,
        }
    }

    /// The orientation-independent identity `(corner, direction)`.
    pub fn key(&self) -> (Corner, Vec2) {
        let a = (self.start.corner, self.start.dir.clone());
        let b = (self.end.corner, self.end.dir.clone());
        a.min(b)
    }
}

/// A vertex seen from a cone point along a straight segment.
#[derive(Clone, Debug)]
pub(crate) struct Sight {
    pub start: Sector,
    pub end: Sector,
    /// Position in the developing frame of the search.
    pub pos: Vec2,
    /// Sign of the developing map on the end triangle.
    pub end_sigma: i8,
    pub end_vertex: usize,
}

pub(crate) struct BoxRegion {
    pub xmin: FieldElem,
    pub xmax: FieldElem,
    pub ymin: FieldElem,
    pub ymax: FieldElem,
}

impl BoxRegion {
    /// Whether the closed segment `pq` meets the closed box.
    fn meets_segment(&self, p: &Vec2, q: &Vec2) -> bool {
        let (xl, xh) = if p.x <= q.x { (&p.x, &q.x) } else { (&q.x, &p.x) };
        let (yl, yh) = if p.y <= q.y { (&p.y, &q.y) } else { (&q.y, &p.y) };
        if xh < &self.xmin || xl > &self.xmax || yh < &self.ymin || yl > &self.ymax {
            return false;
        }
        let corners = [
            Vec2::new(self.xmin.clone(), self.ymin.clone()),
            Vec2::new(self.xmax.clone(), self.ymin.clone()),
            Vec2::new(self.xmax.clone(), self.ymax.clone()),
            Vec2::new(self.xmin.clone(), self.ymax.clone()),
        ];
        let s: Vec<i32> = corners.iter().map(|c| orient(p, q, c)).collect();
        !(s.iter().all(|&x| x > 0) || s.iter().all(|&x| x < 0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TraceFailure {
    HitsSingularity,
    EndsOffVertex,
}

pub(crate) struct TraceEnd {
    pub end: Sector,
    /// Sign of the end triangle's coordinates relative to the start's.
    pub sigma: i8,
    pub path: Vec<usize>,
}

/// A flat surface with cone points at the polygon vertices, all of which
/// are treated as punctures.
#[derive(Clone, Debug)]
pub struct FlatSurface {
    field: NumberField,
    polygons: Vec<Vec<Vec2>>,
    identifications: Vec<Identification>,
    pub(crate) tris: Vec<Tri>,
    pub(crate) corner_vertex: Vec<[usize; 3]>,
    cone_angles: Vec<usize>,
    /// Corner of the triangle whose out-edge is polygon edge `v`.
    pub(crate) poly_corner: Vec<Vec<Corner>>,
}

impl FlatSurface {
    pub fn new(field: NumberField, polygons: Vec<Vec<Vec2>>, identifications: Vec<Identification>) -> Result<Self, FlatError> {
        let bad = |m: String| Err(FlatError::InvalidSurface(m));
        if polygons.is_empty() {
            return bad("no polygons".into());
        }
        for (i, p) in polygons.iter().enumerate() {
            if p.len() < 3 {
                return bad(format!("polygon {i} has fewer than 3 vertices"));
            }
            let n = p.len();
            for k in 0..n {
                if orient(&p[k], &p[(k + 1) % n], &p[(k + 2) % n]) <= 0 {
                    return bad(format!("polygon {i} is not strictly convex and counterclockwise"));
                }
            }
        }
        let edge_vec = |p: usize, e: usize| {
            let poly = &polygons[p];
            poly[(e + 1) % poly.len()].sub(&poly[e])
        };
        let mut partner: HashMap<(usize, usize), (usize, usize, i8)> = HashMap::new();
        for id in &identifications {
            if id.p1 >= polygons.len() || id.p2 >= polygons.len() || id.e1 >= polygons[id.p1].len() || id.e2 >= polygons[id.p2].len() {
                return bad("identification refers to a missing edge".into());
            }
            if id.sign != 1 && id.sign != -1 {
                return bad("identification sign must be 1 or -1".into());
            }
            if (id.p1, id.e1) == (id.p2, id.e2) {
                return bad("edge identified with itself".into());
            }
            let (a, b) = (edge_vec(id.p1, id.e1), edge_vec(id.p2, id.e2));
            let ok = if id.sign == 1 { a == b.neg() } else { a == b };
            if !ok {
                return bad(format!("edges ({}, {}) and ({}, {}) are not parallel of equal length", id.p1, id.e1, id.p2, id.e2));
            }
            for key in [(id.p1, id.e1), (id.p2, id.e2)] {
                if partner.contains_key(&key) {
                    return bad(format!("edge {key:?} identified twice"));
                }
            }
            partner.insert((id.p1, id.e1), (id.p2, id.e2, id.sign));
            partner.insert((id.p2, id.e2), (id.p1, id.e1, id.sign));
        }
        // fan triangulation
        let mut tris_v: Vec<[Vec2; 3]> = Vec::new();
        let mut tri_base = Vec::new();
        let mut edge_loc: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut poly_corner = Vec::new();
        for (pi, p) in polygons.iter().enumerate() {
            let n = p.len();
            let base = tris_v.len();
            tri_base.push(base);
            for i in 1..n - 1 {
                tris_v.push([p[0].clone(), p[i].clone(), p[i + 1].clone()]);
            }
            edge_loc.insert((pi, 0), (base, 0));
            for k in 1..n - 1 {
                edge_loc.insert((pi, k), (base + k - 1, 1));
            }
            edge_loc.insert((pi, n - 1), (base + n - 3, 2));
            let mut pc = vec![(base, 0)];
            for k in 1..n - 1 {
                pc.push((base + k - 1, 1));
            }
            pc.push((base + n - 3, 2));
            poly_corner.push(pc);
        }
        let mut adj: Vec<[Option<(usize, usize, i8)>; 3]> = vec![[None; 3]; tris_v.len()];
        for (pi, p) in polygons.iter().enumerate() {
            let base = tri_base[pi];
            for i in 0..p.len() - 3 {
                adj[base + i][2] = Some((base + i + 1, 0, 1));
                adj[base + i + 1][0] = Some((base + i, 2, 1));
            }
            for e in 0..p.len() {
                let Some(&(q, f, s)) = partner.get(&(pi, e)) else {
                    return bad(format!("edge ({pi}, {e}) is not identified"));
                };
                let (t, j) = edge_loc[&(pi, e)];
                let (t2, j2) = edge_loc[&(q, f)];
                adj[t][j] = Some((t2, j2, s));
            }
        }
        let tris: Vec<Tri> = (0..tris_v.len())
            .map(|t| {
                let adj = [0, 1, 2].map(|j| {
                    let (t2, j2, s) = adj[t][j].unwrap();
                    let a = &tris_v[t][j];
                    let b2 = &tris_v[t2][(j2 + 1) % 3];
                    Adj { tri: t2, edge: j2, sign: s, shift: b2.sub(&a.signed(s)) }
                });
                Tri { v: tris_v[t].clone(), adj }
            })
            .collect();
        let mut surf = FlatSurface {
            field,
            polygons,
            identifications,
            tris,
            corner_vertex: vec![],
            cone_angles: vec![],
            poly_corner,
        };
        surf.compute_vertices()?;
        Ok(surf)
    }

    fn compute_vertices(&mut self) -> Result<(), FlatError> {
        let n = self.tris.len();
        let mut id = vec![[usize::MAX; 3]; n];
        let mut angles = Vec::new();
        for t in 0..n {
            for k in 0..3 {
                if id[t][k] != usize::MAX {
                    continue;
                }
                let v = angles.len();
                let start = (t, k);
                let mut c = start;
                let mut s = 1i8;
                let mut crossings = 0;
                let first = self.out_dir(start);
                loop {
                    id[c.0][c.1] = v;
                    let (o, i) = (self.out_dir(c).signed(s), self.in_dir(c).signed(s));
                    if o.y.signum() != i.y.signum() {
                        crossings += 1;
                    }
                    let (next, sg) = self.ccw(c);
                    s *= sg;
                    c = next;
                    if c == start {
                        break;
                    }
                }
                let last = first.signed(s);
                if crossings == 0 || (last != first) != (crossings % 2 == 1) {
                    return Err(FlatError::InvalidSurface("cone angle is not a positive multiple of π".into()));
                }
                angles.push(crossings);
            }
        }
        self.corner_vertex = id;
        self.cone_angles = angles;
        Ok(())
    }

    pub fn field(&self) -> &NumberField {
        &self.field
    }

    pub fn polygons(&self) -> &[Vec<Vec2>] {
        &self.polygons
    }

    pub fn identifications(&self) -> &[Identification] {
        &self.identifications
    }

    pub fn vertex_count(&self) -> usize {
        self.cone_angles.len()
    }

    /// Cone angle at each cone point, in multiples of π.
    pub fn cone_angles(&self) -> &[usize] {
        &self.cone_angles
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// Genus from `2 - 2g = V - E + F` over the polygon decomposition.
    pub fn genus(&self) -> usize {
        let v = self.vertex_count() as i64;
        let e = self.polygons.iter().map(|p| p.len()).sum::<usize>() as i64 / 2;
        let f = self.polygons.len() as i64;
        ((2 - (v - e + f)) / 2) as usize
    }

    pub fn vertex_of(&self, c: Corner) -> usize {
        self.corner_vertex[c.0][c.1]
    }

    pub(crate) fn out_dir(&self, c: Corner) -> Vec2 {
        let v = &self.tris[c.0].v;
        v[(c.1 + 1) % 3].sub(&v[c.1])
    }

    pub(crate) fn in_dir(&self, c: Corner) -> Vec2 {
        let v = &self.tris[c.0].v;
        v[(c.1 + 2) % 3].sub(&v[c.1])
    }

    pub(crate) fn in_sector(&self, c: Corner, d: &Vec2) -> bool {
        cross_sign(&self.out_dir(c), d) >= 0 && cross_sign(d, &self.in_dir(c)) > 0
    }

    /// Next corner counterclockwise around the same cone point, with the sign
    /// of the coordinate change.
    pub(crate) fn ccw(&self, c: Corner) -> (Corner, i8) {
        let a = &self.tris[c.0].adj[(c.1 + 2) % 3];
        ((a.tri, a.edge), a.sign)
    }

    pub(crate) fn cw(&self, c: Corner) -> (Corner, i8) {
        let a = &self.tris[c.0].adj[c.1];
        ((a.tri, (a.edge + 1) % 3), a.sign)
    }

    /// Rotates from corner `c` (whose sector contains `reference`) to the
    /// corner containing `target`, turning the short way. Returns the sector
    /// and the sign relating the new coordinates to those of `c`.
    pub(crate) fn locate(&self, c: Corner, reference: &Vec2, target: &Vec2) -> (Sector, i8) {
        let ccw = cross_sign(reference, target) >= 0;
        let mut cur = c;
        let mut s = 1i8;
        let limit = 4 * self.tris.len() * 3 + 4;
        for _ in 0..limit {
            let d = target.signed(s);
            if self.in_sector(cur, &d) {
                return (Sector { corner: cur, dir: d }, s);
            }
            let (next, sg) = if ccw { self.ccw(cur) } else { self.cw(cur) };
            cur = next;
            s *= sg;
        }
        unreachable!("every direction lies in some sector")
    }

    /// The first sector counterclockwise from `c` (inclusive) containing
    /// `target`, given in the coordinates of `c`.
    pub(crate) fn rotate_ccw_to(&self, c: Corner, target: &Vec2) -> (Sector, i8) {
        let mut cur = c;
        let mut s = 1i8;
        for _ in 0..4 * self.tris.len() * 3 + 4 {
            let d = target.signed(s);
            if self.in_sector(cur, &d) {
                return (Sector { corner: cur, dir: d }, s);
            }
            let (next, sg) = self.ccw(cur);
            cur = next;
            s *= sg;
        }
        unreachable!("every direction lies in some sector")
    }

    /// The sector containing `d`, starting the search at `c`.
    pub(crate) fn normalize(&self, c: Corner, d: &Vec2) -> (Sector, i8) {
        self.locate(c, d, d)
    }

    /// Follows the straight segment `hol` from the cone point of sector
    /// `start` (with `hol` in the start triangle's coordinates).
    pub(crate) fn trace(&self, start: Corner, hol: &Vec2) -> Result<TraceEnd, TraceFailure> {
        let (t0, k) = start;
        let tri = &self.tris[t0];
        let s_pt = tri.v[k].clone();
        let e_pt = s_pt.add(hol);
        let out = self.out_dir(start);
        let mut path = vec![t0];
        if cross_sign(&out, hol) == 0 {
            // along the out edge
            let next = &tri.v[(k + 1) % 3];
            if &e_pt == next {
                let (sec, sg) = self.normalize(((t0), (k + 1) % 3), &hol.neg());
                return Ok(TraceEnd { end: sec, sigma: sg, path });
            }
            let beyond = if out.x.is_zero() { hol.y.abs() > out.y.abs() } else { hol.x.abs() > out.x.abs() };
            return Err(if beyond { TraceFailure::HitsSingularity } else { TraceFailure::EndsOffVertex });
        }
        let (b, c) = (&tri.v[(k + 1) % 3], &tri.v[(k + 2) % 3]);
        match orient(b, c, &e_pt) {
            x if x >= 0 => return Err(TraceFailure::EndsOffVertex),
            _ => {}
        }
        let mut t = t0;
        let mut exit = (k + 1) % 3;
        let mut s_pt = s_pt;
        let mut e_pt = e_pt;
        let mut sigma = 1i8;
        for _ in 0..1_000_000 {
            let a = &self.tris[t].adj[exit];
            s_pt = s_pt.signed(a.sign).add(&a.shift);
            e_pt = e_pt.signed(a.sign).add(&a.shift);
            sigma *= a.sign;
            t = a.tri;
            let j = a.edge;
            path.push(t);
            let v = &self.tris[t].v;
            let apex = &v[(j + 2) % 3];
            if &e_pt == apex {
                let (sec, sg) = self.normalize((t, (j + 2) % 3), &s_pt.sub(&e_pt));
                return Ok(TraceEnd { end: sec, sigma: sigma * sg, path });
            }
            let inside = orient(&v[(j + 1) % 3], apex, &e_pt) >= 0 && orient(apex, &v[j], &e_pt) >= 0;
            if inside {
                return Err(TraceFailure::EndsOffVertex);
            }
            match orient(&s_pt, &e_pt, apex) {
                0 => return Err(TraceFailure::HitsSingularity),
                o if o > 0 => exit = (j + 1) % 3,
                _ => exit = (j + 2) % 3,
            }
        }
        Err(TraceFailure::HitsSingularity)
    }

    /// The saddle connection leaving `sector` with holonomy `sector.dir`.
    pub fn saddle_connection(&self, sector: &Sector) -> Result<SaddleConnection, FlatError> {
        if !self.in_sector(sector.corner, &sector.dir) {
            return Err(FlatError::NotSaddle);
        }
        let end = self.trace(sector.corner, &sector.dir).map_err(|_| FlatError::NotSaddle)?;
        Ok(SaddleConnection {
            start: sector.clone(),
            end: end.end.clone(),
            holonomy: sector.dir.clone(),
            start_vertex: self.vertex_of(sector.corner),
            end_vertex: self.vertex_of(end.end.corner),
            path: end.path,
        })
    }

    /// Vertices visible from the cone point at `corner` in directions
    /// strictly between `from` and `to` (counterclockwise, less than π
    /// apart), within `region`. Coordinates are in the frame `dev` of the
    /// start triangle, which must place the cone point at the origin.
    pub(crate) fn visible(
        &self,
        corner: Corner,
        dev: Dev,
        from: &Vec2,
        to: &Vec2,
        region: &BoxRegion,
        keep: &dyn Fn(&Vec2) -> bool,
    ) -> Vec<Sight> {
        let mut out = Vec::new();
        let mut c = corner;
        let mut d = dev;
        let mut first = true;
        let mut queue: VecDeque<(usize, Dev, usize, Vec2, Vec2, (Corner, i8))> = VecDeque::new();
        for _ in 0..4 * self.tris.len() + 4 {
            let tri = &self.tris[c.0];
            let o_dev = d.point(&tri.v[(c.1 + 1) % 3]);
            let i_dev = d.point(&tri.v[(c.1 + 2) % 3]);
            let lo = if first { from.clone() } else { o_dev.clone() };
            if !first && cross_sign(&o_dev, to) > 0 && keep(&o_dev) {
                let (end, sg) = self.normalize((c.0, (c.1 + 1) % 3), &self.out_dir(c).neg());
                out.push(Sight {
                    start: Sector { corner: c, dir: self.out_dir(c) },
                    end,
                    pos: o_dev.clone(),
                    end_sigma: d.sigma * sg,
                    end_vertex: self.vertex_of((c.0, (c.1 + 1) % 3)),
                });
            }
            let in_before_end = cross_sign(&i_dev, to) > 0;
            let hi = if in_before_end { i_dev.clone() } else { to.clone() };
            if cross_sign(&lo, &hi) > 0 {
                queue.push_back((c.0, d.clone(), (c.1 + 1) % 3, lo, hi, (c, d.sigma)));
            }
            if !in_before_end {
                break;
            }
            let a = &tri.adj[(c.1 + 2) % 3];
            d = d.across(a);
            c = (a.tri, a.edge);
            first = false;
        }
        while let Some((t, d, e, lo, hi, origin)) = queue.pop_front() {
            let tri = &self.tris[t];
            let p = d.point(&tri.v[e]);
            let q = d.point(&tri.v[(e + 1) % 3]);
            if !region.meets_segment(&p, &q) {
                continue;
            }
            let a = &tri.adj[e];
            let d2 = d.across(a);
            let (t2, j) = (a.tri, a.edge);
            let apex_i = (j + 2) % 3;
            let apex = d2.point(&self.tris[t2].v[apex_i]);
            let after_lo = cross_sign(&lo, &apex) > 0;
            let before_hi = cross_sign(&apex, &hi) > 0;
            if after_lo && before_hi {
                if keep(&apex) {
                    let (end, sg) = self.normalize((t2, apex_i), &apex.neg().signed(d2.sigma));
                    out.push(Sight {
                        start: Sector { corner: origin.0, dir: apex.signed(origin.1) },
                        end,
                        pos: apex.clone(),
                        end_sigma: d2.sigma * sg,
                        end_vertex: self.vertex_of((t2, apex_i)),
                    });
                }
                queue.push_back((t2, d2.clone(), (j + 1) % 3, lo, apex.clone(), origin.clone()));
                queue.push_back((t2, d2, (j + 2) % 3, apex, hi, origin));
            } else if !after_lo {
                queue.push_back((t2, d2, (j + 2) % 3, lo, hi, origin));
            } else {
                queue.push_back((t2, d2, (j + 1) % 3, lo, hi, origin));
            }
        }
        out
    }
}

impl FlatSurface {
    fn edge_connection(&self, c: Corner) -> SaddleConnection {
        let dir = self.out_dir(c);
        let end = self.trace(c, &dir).expect("triangle edges are saddle connections");
        SaddleConnection {
            start: Sector { corner: c, dir: dir.clone() },
            end: end.end.clone(),
            holonomy: dir,
            start_vertex: self.vertex_of(c),
            end_vertex: self.vertex_of(end.end.corner),
            path: end.path,
        }
    }

    pub(crate) fn start_dev(&self, c: Corner) -> Dev {
        Dev { sigma: 1, c: self.tris[c.0].v[c.1].neg() }
    }

    pub(crate) fn sight_connection(&self, s: &Sight) -> SaddleConnection {
        let path = self.trace(s.start.corner, &s.start.dir).map(|e| e.path).unwrap_or_default();
        SaddleConnection {
            start: s.start.clone(),
            end: s.end.clone(),
            holonomy: s.start.dir.clone(),
            start_vertex: self.vertex_of(s.start.corner),
            end_vertex: s.end_vertex,
            path,
        }
    }

    /// All saddle connections with `|Δx| ≤ bx` and `|Δy| ≤ by`, each once up to
    /// reversal, sorted by key. Fails if one of them is horizontal or
    /// vertical.
    pub fn saddle_connections(&self, bx: &FieldElem, by: &FieldElem) -> Result<Vec<SaddleConnection>, FlatError> {
        let region = BoxRegion { xmin: -bx, xmax: bx.clone(), ymin: -by, ymax: by.clone() };
        let keep = |p: &Vec2| p.x.abs() <= *bx && p.y.abs() <= *by;
        let mut found: HashMap<(Corner, Vec2), SaddleConnection> = HashMap::new();
        for t in 0..self.tris.len() {
            for k in 0..3 {
                let c = (t, k);
                let mut here = Vec::new();
                let edge = self.edge_connection(c);
                if keep(&edge.holonomy) {
                    here.push(edge);
                }
                for s in self.visible(c, self.start_dev(c), &self.out_dir(c), &self.in_dir(c), &region, &keep) {
                    here.push(self.sight_connection(&s));
                }
                for sc in here {
                    if sc.holonomy.x.is_zero() || sc.holonomy.y.is_zero() {
                        let (dx, dy) = sc.holonomy.to_f64();
                        return Err(FlatError::HorizontalOrVerticalSaddle { dx, dy });
                    }
                    found.entry(sc.key()).or_insert(sc);
                }
            }
        }
        let mut out: Vec<(Corner, Vec2, SaddleConnection)> = found.into_iter().map(|(k, v)| (k.0, k.1, v)).collect();
        out.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        Ok(out.into_iter().map(|x| x.2).collect())
    }

    /// Whether the open rectangle with diagonal `sc`, developed along `sc`,
    /// contains no cone point.
    pub fn spans_empty_rectangle(&self, sc: &SaddleConnection) -> bool {
        let h = &sc.holonomy;
        let zero = self.field.zero();
        let (x0, x1) = if h.x.is_negative() { (h.x.clone(), zero.clone()) } else { (zero.clone(), h.x.clone()) };
        let (y0, y1) = if h.y.is_negative() { (h.y.clone(), zero.clone()) } else { (zero, h.y.clone()) };
        let inside = |p: &Vec2| p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1;
        let open_meets = |p: &Vec2, q: &Vec2| {
            let (xl, xh) = if p.x <= q.x { (&p.x, &q.x) } else { (&q.x, &p.x) };
            let (yl, yh) = if p.y <= q.y { (&p.y, &q.y) } else { (&q.y, &p.y) };
            if *xh <= x0 || *xl >= x1 || *yh <= y0 || *yl >= y1 {
                return false;
            }
            let corners = [
                Vec2::new(x0.clone(), y0.clone()),
                Vec2::new(x1.clone(), y0.clone()),
                Vec2::new(x1.clone(), y1.clone()),
                Vec2::new(x0.clone(), y1.clone()),
            ];
            let s: Vec<i32> = corners.iter().map(|c| orient(p, q, c)).collect();
            !(s.iter().all(|&x| x >= 0) || s.iter().all(|&x| x <= 0))
        };
        let c = sc.start.corner;
        let mut seen: HashSet<(usize, Dev)> = HashSet::new();
        let mut queue = VecDeque::new();
        let d0 = self.start_dev(c);
        seen.insert((c.0, d0.clone()));
        queue.push_back((c.0, d0));
        while let Some((t, d)) = queue.pop_front() {
            let pts: Vec<Vec2> = self.tris[t].v.iter().map(|v| d.point(v)).collect();
            if pts.iter().any(&inside) {
                return false;
            }
            for e in 0..3 {
                if open_meets(&pts[e], &pts[(e + 1) % 3]) {
                    let a = &self.tris[t].adj[e];
                    let d2 = d.across(a);
                    if seen.insert((a.tri, d2.clone())) {
                        queue.push_back((a.tri, d2));
                    }
                }
            }
        }
        true
    }
}
