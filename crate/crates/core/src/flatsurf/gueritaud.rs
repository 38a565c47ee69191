//! Maximal rectangles and the layered veering triangulation they define.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::field::FieldElem;
use super::surface::{BoxRegion, Corner, FlatSurface, SaddleConnection, Sector, Sight, Vec2};
use super::FlatError;
use crate::perm::EDGE_VERTICES;
use crate::triangulation::IdealTriangulation;
use crate::veering::{is_veering, Color, TautStructure, VeeringStructure};

/// An affine automorphism with derivative `diag(λ, 1/λ)`, stored by the
/// image of the out-edge direction of every triangle corner.
#[derive(Clone, Debug)]
pub struct AffinePA {
    pub lambda: FieldElem,
    lambda_inv: FieldElem,
    /// Image of cone point `polygon 0, vertex 0` as `(polygon, vertex)`.
    pub vertex_image: (usize, usize),
    img: Vec<[(Sector, i8); 3]>,
}

impl AffinePA {
    /// `vertex_image` names the polygon corner at which the search for the
    /// image of the first edge direction of polygon 0 starts, turning
    /// counterclockwise.
    pub fn new(surf: &FlatSurface, lambda: FieldElem, vertex_image: (usize, usize)) -> Result<Self, FlatError> {
        let bad = |m: &str| FlatError::InvalidAutomorphism(m.to_string());
        let k = surf.field();
        if lambda <= k.one() {
            return Err(bad("expansion factor must exceed 1"));
        }
        let lambda_inv = lambda.inv().ok_or_else(|| bad("expansion factor is not invertible"))?;
        let (p, v) = vertex_image;
        if p >= surf.polygons().len() || v >= surf.polygons()[p].len() {
            return Err(bad("vertex image out of range"));
        }
        let mut pa = AffinePA { lambda, lambda_inv, vertex_image, img: vec![] };
        let n = surf.triangle_count();
        let mut img: Vec<[Option<(Sector, i8)>; 3]> = vec![[None, None, None]; n];
        let c0 = surf.poly_corner[0][0];
        let cstar = surf.poly_corner[p][v];
        let (sec, s) = surf.rotate_ccw_to(cstar, &pa.apply_vec(&surf.out_dir(c0)));
        img[c0.0][c0.1] = Some((sec, s));
        let mut queue = vec![c0];
        let assign = |img: &mut Vec<[Option<(Sector, i8)>; 3]>, c: Corner, val: (Sector, i8), queue: &mut Vec<Corner>| {
            match &img[c.0][c.1] {
                Some(old) if *old != val => Err(bad("the map does not close up consistently")),
                Some(_) => Ok(()),
                None => {
                    img[c.0][c.1] = Some(val);
                    queue.push(c);
                    Ok(())
                }
            }
        };
        while let Some(c) = queue.pop() {
            let (sec, s) = img[c.0][c.1].clone().unwrap();
            let (c2, s12) = surf.ccw(c);
            let target = pa.apply_vec(&surf.in_dir(c)).signed(s);
            let (sec2, sacc) = surf.rotate_ccw_to(sec.corner, &target);
            assign(&mut img, c2, (sec2, sacc * s * s12), &mut queue)?;
            let end = surf.trace(sec.corner, &sec.dir).map_err(|_| bad("edge image is not a saddle connection"))?;
            let (c3, s13) = surf.ccw((c.0, (c.1 + 1) % 3));
            assign(&mut img, c3, (end.end, end.sigma * s * s13), &mut queue)?;
        }
        pa.img = img
            .into_iter()
            .map(|row| {
                let [a, b, c] = row;
                Some([a?, b?, c?])
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad("surface is not connected"))?;
        // each image must send every triangle vertex to a cone point of the same angle
        for t in 0..n {
            for k in 0..3 {
                let (sec, _) = &pa.img[t][k];
                if surf.cone_angles()[surf.vertex_of(sec.corner)] != surf.cone_angles()[surf.vertex_of((t, k))] {
                    return Err(bad("cone angles are not preserved"));
                }
            }
        }
        Ok(pa)
    }

    pub fn apply_vec(&self, v: &Vec2) -> Vec2 {
        Vec2::new(&v.x * &self.lambda, &v.y * &self.lambda_inv)
    }

    /// Image of a direction at a cone point, with the sign `s` such that
    /// the image direction is `s·A·dir` in its own coordinates.
    pub fn apply_sector(&self, surf: &FlatSurface, s: &Sector) -> (Sector, i8) {
        let (sec, s0) = &self.img[s.corner.0][s.corner.1];
        let target = self.apply_vec(&s.dir).signed(*s0);
        let (out, sacc) = surf.rotate_ccw_to(sec.corner, &target);
        (out, sacc * s0)
    }

    pub fn apply_connection(&self, surf: &FlatSurface, sc: &SaddleConnection) -> Result<SaddleConnection, FlatError> {
        let (start, _) = self.apply_sector(surf, &sc.start);
        surf.saddle_connection(&start)
    }
}

/// A maximal singularity-free rectangle, recorded by its left-to-right
/// diagonal. Positions are relative to the left cone point, in the
/// coordinates of the diagonal's start triangle.
#[derive(Clone, Debug)]
pub struct MaximalRectangle {
    pub diagonal: SaddleConnection,
    pub top: Vec2,
    pub bottom: Vec2,
    pub left_vertex: usize,
    pub right_vertex: usize,
    pub top_vertex: usize,
    pub bottom_vertex: usize,
    pub width: FieldElem,
    pub height: FieldElem,
    top_sight: Sight,
    bottom_sight: Sight,
}

impl MaximalRectangle {
    pub fn right(&self) -> &Vec2 {
        &self.diagonal.holonomy
    }
}

const MAX_DOUBLINGS: usize = 48;

fn grow(surf: &FlatSurface, sc: &SaddleConnection) -> Result<MaximalRectangle, FlatError> {
    let sc = if sc.holonomy.x.is_negative() { sc.reversed() } else { sc.clone() };
    let k = surf.field();
    let e = sc.holonomy.clone();
    let (w, d) = (e.x.clone(), e.y.clone());
    let zero = k.zero();
    let top0 = if d.is_positive() { d.clone() } else { zero.clone() };
    let bot0 = if d.is_negative() { d.clone() } else { zero.clone() };
    let c = sc.start.corner;
    let up = Vec2::new(zero.clone(), k.one());
    let down = Vec2::new(zero.clone(), -&k.one());
    let mut h = &(&w + &d.abs()) + &k.one();
    let mut top = None;
    for _ in 0..MAX_DOUBLINGS {
        let ymax = &top0 + &h;
        let region = BoxRegion { xmin: zero.clone(), xmax: w.clone(), ymin: bot0.clone(), ymax: ymax.clone() };
        let keep = |p: &Vec2| p.x > zero && p.x < w && p.y > top0 && p.y <= ymax;
        top = surf.visible(c, surf.start_dev(c), &e, &up, &region, &keep).into_iter().min_by(|a, b| a.pos.y.cmp(&b.pos.y));
        if top.is_some() {
            break;
        }
        h = &h + &h;
    }
    let top = top.ok_or(FlatError::BoundExhausted)?;
    let (dsec, dsig) = surf.locate(c, &e, &down);
    let dev = super::surface::Dev { sigma: dsig, c: surf.tris[dsec.corner.0].v[dsec.corner.1].signed(dsig).neg() };
    let mut h = &(&w + &d.abs()) + &k.one();
    let mut bottom = None;
    for _ in 0..MAX_DOUBLINGS {
        let ymin = &bot0 - &h;
        let region = BoxRegion { xmin: zero.clone(), xmax: w.clone(), ymin: ymin.clone(), ymax: top0.clone() };
        let keep = |p: &Vec2| p.x > zero && p.x < w && p.y < bot0 && p.y >= ymin;
        bottom = surf
            .visible(dsec.corner, dev.clone(), &down, &e, &region, &keep)
            .into_iter()
            .max_by(|a, b| a.pos.y.cmp(&b.pos.y));
        if bottom.is_some() {
            break;
        }
        h = &h + &h;
    }
    let bottom = bottom.ok_or(FlatError::BoundExhausted)?;
    Ok(MaximalRectangle {
        top: top.pos.clone(),
        bottom: bottom.pos.clone(),
        left_vertex: sc.start_vertex,
        right_vertex: sc.end_vertex,
        top_vertex: top.end_vertex,
        bottom_vertex: bottom.end_vertex,
        width: w,
        height: &top.pos.y - &bottom.pos.y,
        diagonal: sc,
        top_sight: top,
        bottom_sight: bottom,
    })
}

/// A cone point of a tetrahedron with a corner containing `reference`,
/// whose coordinates are `sigma` times the rectangle frame.
struct Anchor {
    corner: Corner,
    sigma: i8,
    reference: Vec2,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct FaceKey {
    corner: Corner,
    first: Vec2,
    second: Vec2,
}

/// Tetrahedron vertex labels: top, bottom, left, right.
const T: usize = 0;
const B: usize = 1;
const L: usize = 2;
const R: usize = 3;

struct TetData {
    pos: [Vec2; 4],
    anchors: [Anchor; 4],
}

impl TetData {
    fn new(rect: &MaximalRectangle) -> Self {
        let k = rect.width.field();
        let e = rect.right().clone();
        let sc = &rect.diagonal;
        let right_sigma = if sc.end.dir == e.neg() { 1 } else { -1 };
        let pos = [rect.top.clone(), rect.bottom.clone(), Vec2::zero(k), e.clone()];
        let anchors = [
            Anchor { corner: rect.top_sight.end.corner, sigma: rect.top_sight.end_sigma, reference: rect.top.neg() },
            Anchor { corner: rect.bottom_sight.end.corner, sigma: rect.bottom_sight.end_sigma, reference: rect.bottom.neg() },
            Anchor { corner: sc.start.corner, sigma: 1, reference: e.clone() },
            Anchor { corner: sc.end.corner, sigma: right_sigma, reference: e.neg() },
        ];
        TetData { pos, anchors }
    }

    fn sector_toward(&self, surf: &FlatSurface, v: usize, w: usize) -> (Sector, i8) {
        let a = &self.anchors[v];
        let target = self.pos[w].sub(&self.pos[v]);
        let (sec, sacc) = surf.locate(a.corner, &a.reference.signed(a.sigma), &target.signed(a.sigma));
        (sec, sacc * a.sigma)
    }

    /// Counterclockwise vertex order of face `f` and the key at each
    /// rotation.
    fn face(&self, surf: &FlatSurface, f: usize) -> ([usize; 3], [FaceKey; 3], FieldElem) {
        let mut o: Vec<usize> = (0..4).filter(|&x| x != f).collect();
        let orient = super::surface::cross(&self.pos[o[1]].sub(&self.pos[o[0]]), &self.pos[o[2]].sub(&self.pos[o[0]]));
        if orient.is_negative() {
            o.swap(1, 2);
        }
        let keys = [0, 1, 2].map(|i| {
            let (v0, v1, v2) = (o[i], o[(i + 1) % 3], o[(i + 2) % 3]);
            let (sec, s) = self.sector_toward(surf, v0, v1);
            FaceKey { corner: sec.corner, first: sec.dir, second: self.pos[v2].sub(&self.pos[v0]).signed(s) }
        });
        let width = (0..3)
            .map(|i| self.pos[o[(i + 1) % 3]].x.clone() - self.pos[o[i]].x.clone())
            .map(|x| x.abs())
            .max()
            .unwrap();
        ([o[0], o[1], o[2]], keys, width)
    }
}

fn push_forward(surf: &FlatSurface, pa: &AffinePA, key: &FaceKey) -> FaceKey {
    let (sec, s) = pa.apply_sector(surf, &Sector { corner: key.corner, dir: key.first.clone() });
    FaceKey { corner: sec.corner, first: sec.dir, second: pa.apply_vec(&key.second).signed(s) }
}

/// Canonical key of a face moved by powers of the map until its width lies
/// in `[w0, λ w0)`, with the vertex order starting at the key's vertex.
fn normalized_face(
    surf: &FlatSurface,
    pa: &AffinePA,
    w0: &FieldElem,
    order: [usize; 3],
    mut keys: [FaceKey; 3],
    mut width: FieldElem,
) -> (FaceKey, [usize; 3]) {
    while &width < w0 {
        keys = keys.map(|k| push_forward(surf, pa, &k));
        width = &width * &pa.lambda;
    }
    let i = (0..3).min_by(|&a, &b| keys[a].cmp(&keys[b])).unwrap();
    (keys[i].clone(), [order[i], order[(i + 1) % 3], order[(i + 2) % 3]])
}

struct Census {
    rects: Vec<MaximalRectangle>,
    gluings: Vec<Vec<(usize, usize, [u8; 4])>>,
    tets: Vec<TetData>,
}

fn try_census(surf: &FlatSurface, pa: &AffinePA, bound: &FieldElem) -> Result<Option<Census>, FlatError> {
    let edges: Vec<SaddleConnection> =
        surf.saddle_connections(bound, bound)?.into_iter().filter(|sc| surf.spans_empty_rectangle(sc)).collect();
    let mut widths: Vec<FieldElem> = edges.iter().map(|sc| sc.holonomy.x.abs()).collect();
    widths.sort();
    widths.dedup();
    // candidate windows, most balanced first
    let mut windows: Vec<(FieldElem, FieldElem)> = Vec::new();
    for w0 in widths {
        let w1 = &w0 * &pa.lambda;
        if &w1 > bound {
            break;
        }
        let size = edges
            .iter()
            .filter(|sc| sc.holonomy.x.abs() >= w0 && sc.holonomy.x.abs() < w1)
            .map(|sc| sc.holonomy.y.abs().max(sc.holonomy.x.abs()))
            .max()
            .unwrap_or_else(|| w1.clone());
        windows.push((size, w0));
    }
    windows.sort();
    for (_, w0) in windows {
        if let Some(c) = census_in_window(surf, pa, &edges, &w0)? {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

fn census_in_window(
    surf: &FlatSurface,
    pa: &AffinePA,
    edges: &[SaddleConnection],
    w0: &FieldElem,
) -> Result<Option<Census>, FlatError> {
    let w1 = w0 * &pa.lambda;
    let mut rects = Vec::new();
    for sc in edges {
        let w = sc.holonomy.x.abs();
        if &w >= w0 && w < w1 {
            rects.push(grow(surf, sc)?);
        }
    }
    rects.sort_by(|a, b| square_time_cmp(a, b));
    let tets: Vec<TetData> = rects.iter().map(TetData::new).collect();
    let n = tets.len();
    let mut lower: HashMap<FaceKey, (usize, usize, [usize; 3])> = HashMap::new();
    for (i, tet) in tets.iter().enumerate() {
        for f in [T, B] {
            let (o, keys, width) = tet.face(surf, f);
            let (key, order) = normalized_face(surf, pa, w0, o, keys, width);
            if lower.insert(key, (i, f, order)).is_some() {
                return Ok(None);
            }
        }
    }
    let mut gluings = vec![vec![(usize::MAX, 0usize, [0u8; 4]); 4]; n];
    for (i, tet) in tets.iter().enumerate() {
        for f in [L, R] {
            let (o, keys, width) = tet.face(surf, f);
            let (key, order) = normalized_face(surf, pa, w0, o, keys, width);
            let Some((j, g, other)) = lower.remove(&key) else {
                return Ok(None);
            };
            let mut perm = [0u8; 4];
            perm[f] = g as u8;
            for m in 0..3 {
                perm[order[m]] = other[m] as u8;
            }
            let mut inv = [0u8; 4];
            for (a, &b) in perm.iter().enumerate() {
                inv[b as usize] = a as u8;
            }
            gluings[i][f] = (j, g, perm);
            gluings[j][g] = (i, f, inv);
        }
    }
    if !lower.is_empty() {
        return Ok(None);
    }
    Ok(Some(Census { rects, gluings, tets }))
}

/// Compares the times `½ log(h/w)` at which rectangles become square.
fn square_time_cmp(a: &MaximalRectangle, b: &MaximalRectangle) -> Ordering {
    (&a.height * &b.width).cmp(&(&b.height * &a.width))
}

fn initial_bound(surf: &FlatSurface) -> FieldElem {
    let k = surf.field();
    let mut m = k.one();
    for p in surf.polygons() {
        for v in p {
            for c in [&v.x, &v.y] {
                if c.abs() > m {
                    m = c.abs();
                }
            }
        }
    }
    &m + &m
}

fn census(surf: &FlatSurface, pa: &AffinePA) -> Result<Census, FlatError> {
    let mut bound = initial_bound(surf);
    for _ in 0..10 {
        if let Some(c) = try_census(surf, pa, &bound)? {
            return Ok(c);
        }
        bound = &bound + &bound;
    }
    Err(FlatError::BoundExhausted)
}

/// One maximal rectangle per orbit of the map, those whose width lies in
/// `[w0, λ w0)`, ordered by the time at which they become square. `w0` is
/// the width of a veering edge; windows are tried from the one whose
/// rectangles are smallest, and the first whose faces close up is kept.
pub fn maximal_rectangles(surf: &FlatSurface, pa: &AffinePA) -> Result<Vec<MaximalRectangle>, FlatError> {
    Ok(census(surf, pa)?.rects)
}

/// The veering triangulation of the mapping torus, one tetrahedron per
/// rectangle orbit.
#[derive(Clone, Debug)]
pub struct GueritaudOutput {
    pub triangulation: IdealTriangulation,
    pub veering: VeeringStructure,
    pub rectangles: Vec<MaximalRectangle>,
    /// Tetrahedra in the order their rectangles become square; consecutive
    /// entries are consecutive diagonal exchanges.
    pub layers: Vec<usize>,
}

/// Guéritaud's construction: tetrahedron `i` has vertices top, bottom,
/// left, right of rectangle `i`, with the top-bottom and left-right
/// diagonals carrying angle π.
pub fn gueritaud_triangulation(surf: &FlatSurface, pa: &AffinePA) -> Result<GueritaudOutput, FlatError> {
    let c = census(surf, pa)?;
    let tri = IdealTriangulation::from_gluing_data(&c.gluings).map_err(|e| FlatError::NonManifoldGluing(e.to_string()))?;
    if tri.orientation().is_none_or(|o| o.iter().any(|&x| x != 1)) {
        return Err(FlatError::NonManifoldGluing("tetrahedra are not coherently oriented".into()));
    }
    let mut colors: Vec<Option<Color>> = vec![None; tri.edge_count()];
    for (t, tet) in c.tets.iter().enumerate() {
        for (k, &(a, b)) in EDGE_VERTICES.iter().enumerate() {
            let v = tet.pos[b].sub(&tet.pos[a]);
            let col = if v.x.signum() * v.y.signum() > 0 { Color::Red } else { Color::Blue };
            let slot = &mut colors[tri.edge_class(t, k)];
            match slot {
                Some(old) if *old != col => return Err(FlatError::NonManifoldGluing("edge slopes disagree".into())),
                _ => *slot = Some(col),
            }
        }
    }
    let veering = VeeringStructure {
        taut: TautStructure { pi_pairs: vec![0; tri.tet_count()] },
        colors: colors.into_iter().map(|c| c.unwrap()).collect(),
    };
    if !is_veering(&tri, &veering) {
        return Err(FlatError::NonManifoldGluing("rectangle tetrahedra do not form a veering structure".into()));
    }
    let layers = (0..tri.tet_count()).collect();
    Ok(GueritaudOutput { triangulation: tri, veering, rectangles: c.rects, layers })
}
