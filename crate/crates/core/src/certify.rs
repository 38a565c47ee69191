//! Interval certification of shapes and Pachner-path certificates.
//!
//! A geometric certificate is a single triangulation with Krawczyk-verified
//! boxes in the upper half plane. A non-geometric certificate is a path
//! `τ_1 → … → τ_n` of Pachner moves: `τ_n` carries verified geometric boxes,
//! and each earlier `τ_i` carries boxes obtained from those of `τ_{i+1}` by
//! interval cross-ratio transport. Every box must avoid the real axis, and
//! some box of `τ_1` must lie in the lower half plane.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{
    self, anchor_points, classify, max_residual, parameter_kind, placement_order, placement_schedule, transport,
    Classification, GeometryError, GluingSystem, ShapeAssignment,
};
use crate::interval::{from_hex, to_hex, ComplexBox, Interval};
use crate::perm::edge_index;
use crate::triangulation::{
    apply_move, isomorphism_signature, IdealTriangulation, MoveKind, MoveTarget, PachnerMove, TriangulationError, TriangulationJson,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
    #[error("approximate solution residual {0:e} exceeds 1e-8")]
    ResidualTooLarge(f64),
    #[error("Krawczyk operator did not contract at any inflation")]
    VerificationFailed,
    #[error("not certified: {0}")]
    NotCertified(String),
    #[error("search budget exhausted")]
    BudgetExhausted,
    #[error("an intermediate transported box meets the excluded set")]
    TransportDegenerate,
    #[error("the input is geometric, no non-geometric certificate exists")]
    NotNonGeometric,
}

/// Verified boxes, one per tetrahedron.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxAssignment {
    pub boxes: Vec<ComplexBox>,
    pub unique: bool,
}

// ---------------------------------------------------------------------------
// Interval evaluation of the product-form equations

fn one_minus(z: ComplexBox) -> ComplexBox {
    ComplexBox::real(1.0) - z
}

/// `Π z^A (1-z)^B` over boxes.
fn row_product(a: &[i64], b: &[i64], boxes: &[ComplexBox]) -> ComplexBox {
    let mut p = ComplexBox::real(1.0);
    for t in 0..boxes.len() {
        if a[t] != 0 {
            p = p * boxes[t].powi(a[t]);
        }
        if b[t] != 0 {
            p = p * one_minus(boxes[t]).powi(b[t]);
        }
    }
    p
}

struct ProductSystem {
    a: Vec<Vec<i64>>,
    b: Vec<Vec<i64>>,
    sign: Vec<f64>,
}

impl ProductSystem {
    fn new(system: &GluingSystem, rows: &[usize]) -> Self {
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut sign = Vec::new();
        for &r in rows {
            let (ra, rb, c) = system.rows[r].product_form();
            a.push(ra);
            b.push(rb);
            sign.push(if c % 2 == 0 { 1.0 } else { -1.0 });
        }
        ProductSystem { a, b, sign }
    }

    fn values(&self, boxes: &[ComplexBox]) -> Vec<ComplexBox> {
        (0..self.a.len()).map(|i| row_product(&self.a[i], &self.b[i], boxes) - ComplexBox::real(self.sign[i])).collect()
    }

    fn jacobian(&self, boxes: &[ComplexBox]) -> Vec<Vec<ComplexBox>> {
        (0..self.a.len())
            .map(|i| {
                let p = row_product(&self.a[i], &self.b[i], boxes);
                (0..boxes.len())
                    .map(|t| {
                        let da = ComplexBox::real(self.a[i][t] as f64) / boxes[t];
                        let db = ComplexBox::real(self.b[i][t] as f64) / one_minus(boxes[t]);
                        (da - db) * p
                    })
                    .collect()
            })
            .collect()
    }

    fn float_jacobian(&self, z: &[Complex64]) -> DMatrix<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        DMatrix::from_fn(self.a.len(), z.len(), |i, t| {
            let mut p = one;
            for s in 0..z.len() {
                p *= z[s].powi(self.a[i][s] as i32) * (one - z[s]).powi(self.b[i][s] as i32);
            }
            (self.a[i][t] as f64 / z[t] - self.b[i][t] as f64 / (one - z[t])) * p
        })
    }
}

/// Krawczyk test `K(X) ⊂ int X` for the square subsystem, with `c` the box
/// centers and `Y` a floating inverse of the Jacobian at `c`.
fn krawczyk_contracts(ps: &ProductSystem, boxes: &[ComplexBox]) -> bool {
    let n = boxes.len();
    if ps.a.len() != n || boxes.iter().any(|b| !b.is_nondegenerate()) {
        return false;
    }
    let c: Vec<Complex64> = boxes.iter().map(|b| b.center()).collect();
    let Some(y) = ps.float_jacobian(&c).try_inverse() else {
        return false;
    };
    if y.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let cb: Vec<ComplexBox> = c.iter().map(|&z| ComplexBox::point(z)).collect();
    let fc = ps.values(&cb);
    let jx = ps.jacobian(boxes);
    let dx: Vec<ComplexBox> = (0..n).map(|t| boxes[t] - cb[t]).collect();
    for i in 0..n {
        let mut k = cb[i];
        for j in 0..n {
            k = k - ComplexBox::point(y[(i, j)]) * fc[j];
        }
        for j in 0..n {
            // (I - Y J(X))_{ij}
            let mut m = if i == j { ComplexBox::real(1.0) } else { ComplexBox::real(0.0) };
            for l in 0..n {
                m = m - ComplexBox::point(y[(i, l)]) * jx[l][j];
            }
            k = k + m * dx[j];
        }
        if !k.strict_subset(&boxes[i]) {
            return false;
        }
    }
    true
}

/// Smallest `d > 0` with `d·row` an integer combination of the square rows
/// (in the `(A | B)` exponent lattice), if `row` is a rational combination.
fn dependency_order(system: &GluingSystem, r: usize) -> Option<u64> {
    let vec_of = |i: usize| {
        let (a, b, _) = system.rows[i].product_form();
        a.into_iter().chain(b).map(BigInt::from).collect::<Vec<_>>()
    };
    let basis: Vec<Vec<BigInt>> = system.square.iter().map(|&i| vec_of(i)).collect();
    let target = vec_of(r);
    let k = basis.len();
    let m = target.len();
    // columns = basis vectors, solve B x = target over Q
    let mut mat: Vec<Vec<BigRational>> = (0..m)
        .map(|row| {
            let mut v: Vec<BigRational> = (0..k).map(|j| BigRational::from_integer(basis[j][row].clone())).collect();
            v.push(BigRational::from_integer(target[row].clone()));
            v
        })
        .collect();
    let mut pivots = Vec::new();
    let mut prow = 0;
    for col in 0..k {
        let Some(p) = (prow..m).find(|&i| !mat[i][col].is_zero()) else { continue };
        mat.swap(prow, p);
        let pv = mat[prow][col].clone();
        for x in mat[prow].iter_mut() {
            *x = &*x / &pv;
        }
        for i in 0..m {
            if i != prow && !mat[i][col].is_zero() {
                let f = mat[i][col].clone();
                for j in 0..=k {
                    let v = &mat[prow][j] * &f;
                    mat[i][j] -= v;
                }
            }
        }
        pivots.push(col);
        prow += 1;
    }
    if (prow..m).any(|i| !mat[i][k].is_zero()) {
        return None;
    }
    let mut d = BigInt::one();
    for i in 0..prow {
        let den = mat[i][k].denom().clone();
        d = num_integer::lcm(d, den);
    }
    d.try_into().ok()
}

/// Checks the rows outside the square subsystem over the boxes: the
/// interval value must contain the target and, when the row is a rational
/// combination of the square rows with denominator `d`, be too narrow to
/// contain any other `2d`-th root of unity.
fn dropped_rows_hold(system: &GluingSystem, boxes: &[ComplexBox]) -> bool {
    for r in 0..system.rows.len() {
        if system.square.contains(&r) {
            continue;
        }
        let (a, b, c) = system.rows[r].product_form();
        let target = if c % 2 == 0 { 1.0 } else { -1.0 };
        let v = row_product(&a, &b, boxes);
        if !v.contains(Complex64::new(target, 0.0)) {
            return false;
        }
        if let Some(d) = dependency_order(system, r) {
            let diag = (v.re.width().powi(2) + v.im.width().powi(2)).sqrt();
            if diag.is_nan() || diag >= 0.9 * 2.0 * (PI / (2.0 * d as f64)).sin() {
                return false;
            }
        }
    }
    true
}

/// Verifies a box around `approx` containing a unique solution of the square
/// subsystem, trying radii `inflation · 10^k` (relative to `max(1, |z|)`).
pub fn krawczyk_verify(system: &GluingSystem, approx: &ShapeAssignment, inflation: f64) -> Result<BoxAssignment, CertifyError> {
    let res = max_residual(system, &approx.shapes);
    if !(res <= 1e-8) {
        return Err(CertifyError::ResidualTooLarge(res));
    }
    let ps = ProductSystem::new(system, &system.square);
    let mut r = inflation;
    for _ in 0..6 {
        let boxes: Vec<ComplexBox> = approx.shapes.iter().map(|&z| ComplexBox::around(z, r * z.norm().max(1.0))).collect();
        if boxes.iter().all(|b| b.is_nondegenerate()) && krawczyk_contracts(&ps, &boxes) && dropped_rows_hold(system, &boxes) {
            return Ok(BoxAssignment { boxes, unique: true });
        }
        r *= 10.0;
    }
    Err(CertifyError::VerificationFailed)
}

/// Re-verification of stored boxes: Krawczyk contraction plus dropped rows.
pub fn verify_boxes(system: &GluingSystem, boxes: &[ComplexBox]) -> bool {
    let ps = ProductSystem::new(system, &system.square);
    boxes.len() == system.tet_count && krawczyk_contracts(&ps, boxes) && dropped_rows_hold(system, boxes)
}

// ---------------------------------------------------------------------------
// Interval transport

/// A box together with enclosures of its complex derivatives with respect to
/// up to three input shapes.
#[derive(Clone, Copy, Debug)]
struct Dual {
    v: ComplexBox,
    d: [ComplexBox; 3],
}

const ZERO_BOX: ComplexBox = ComplexBox { re: Interval::ZERO, im: Interval::ZERO };

impl Dual {
    fn constant(v: ComplexBox) -> Dual {
        Dual { v, d: [ZERO_BOX; 3] }
    }

    fn variable(v: ComplexBox, k: usize) -> Dual {
        let mut d = [ZERO_BOX; 3];
        d[k] = ComplexBox::real(1.0);
        Dual { v, d }
    }
}

impl std::ops::Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: std::array::from_fn(|k| self.d[k] + o.d[k]) }
    }
}

impl std::ops::Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: std::array::from_fn(|k| self.d[k] - o.d[k]) }
    }
}

impl std::ops::Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: std::array::from_fn(|k| self.d[k] * o.v + self.v * o.d[k]) }
    }
}

impl std::ops::Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let r = o.v.recip();
        let q = self.v * r;
        Dual { v: q, d: std::array::from_fn(|k| (self.d[k] - q * o.d[k]) * r) }
    }
}

fn dual_parameter(z: Dual, kind: usize) -> Dual {
    let one = Dual::constant(ComplexBox::real(1.0));
    match kind {
        0 => z,
        1 => one / (one - z),
        _ => one - one / z,
    }
}

fn dual_cross_ratio(a: Dual, b: Dual, c: Dual, d: Dual) -> Dual {
    ((d - b) * (c - a)) / ((c - b) * (d - a))
}

fn boxes_disjoint(x: &ComplexBox, y: &ComplexBox) -> bool {
    !x.re.intersects(&y.re) || !x.im.intersects(&y.im)
}

const INTERVAL_PLACEMENT_BOUND: f64 = 1e6;

fn bounded_placement(a: &ComplexBox) -> bool {
    a.is_bounded() && a.re.abs_max() <= INTERVAL_PLACEMENT_BOUND && a.im.abs_max() <= INTERVAL_PLACEMENT_BOUND
}

/// Places the five vertices of the bipyramid from the shapes of `source`,
/// the `k`-th source shape being `shapes[k]`.
fn place_dual(shapes: &[Dual], source: &[(usize, [u8; 4])], orient: &[i8], anchors: &[Complex64; 3]) -> Option<[Dual; 5]> {
    let mut pos: [Option<Dual>; 5] = [None; 5];
    for v in 0..3 {
        pos[source[0].1[v] as usize] = Some(Dual::constant(ComplexBox::point(anchors[v])));
    }
    for (i, j) in placement_schedule(source) {
        let (t, labels) = source[i];
        let o = orient[t];
        let (x, k, l) = placement_order(o, j);
        let w = dual_parameter(shapes[i], parameter_kind(o, edge_index(j, x)));
        let get = |v: usize| pos[labels[v] as usize].unwrap();
        let (b, c, d) = (get(x), get(k), get(l));
        let den = w * (c - b) - (d - b);
        if den.v.contains_zero() {
            return None;
        }
        let a = (w * (c - b) * d - (d - b) * c) / den;
        if !bounded_placement(&a.v) || a.d.iter().any(|g| !g.is_bounded()) {
            return None;
        }
        pos[labels[j] as usize] = Some(a);
    }
    let pos = [pos[0]?, pos[1]?, pos[2]?, pos[3]?, pos[4]?];
    for i in 0..5 {
        for j in i + 1..5 {
            if !boxes_disjoint(&pos[i].v, &pos[j].v) {
                return None;
            }
        }
    }
    Some(pos)
}

fn removed_shapes(pos: &[Dual; 5], mv: &PachnerMove, o_before: &[i8]) -> Vec<Dual> {
    mv.removed
        .iter()
        .map(|&(t, labels)| {
            let p = [0, 1, 2, 3].map(|v| pos[labels[v] as usize]);
            if o_before[t] > 0 {
                dual_cross_ratio(p[0], p[1], p[2], p[3])
            } else {
                dual_cross_ratio(p[0], p[1], p[3], p[2])
            }
        })
        .collect()
}

/// Encloses the shapes of `before` given boxes on `after`, where `mv` takes
/// `before` to `after`. Removed shapes are enclosed by the intersection of
/// the direct interval evaluation with the mean-value form
/// `F(c) + Σ_k F_k(X)·(X_k − c_k)`.
pub fn transport_back_boxes(
    boxes_after: &[ComplexBox],
    mv: &PachnerMove,
    before: &IdealTriangulation,
    after: &IdealTriangulation,
) -> Option<Vec<ComplexBox>> {
    let o_before = before.orientation()?;
    let o_after = after.orientation()?;
    if boxes_after.len() != after.tet_count() || mv.added.len() > 3 {
        return None;
    }
    for &(t, _) in &mv.added {
        if !boxes_after[t].is_nondegenerate() {
            return None;
        }
    }
    let wide: Vec<Dual> = mv.added.iter().enumerate().map(|(k, &(t, _))| Dual::variable(boxes_after[t], k)).collect();
    let centers: Vec<ComplexBox> = mv.added.iter().map(|&(t, _)| ComplexBox::point(boxes_after[t].center())).collect();
    let narrow: Vec<Dual> = centers.iter().map(|&c| Dual::constant(c)).collect();
    for anchors in anchor_points().iter() {
        let Some(pos) = place_dual(&wide, &mv.added, o_after, anchors) else { continue };
        let Some(pos_c) = place_dual(&narrow, &mv.added, o_after, anchors) else { continue };
        let direct = removed_shapes(&pos, mv, &o_before);
        let at_center = removed_shapes(&pos_c, mv, &o_before);
        let mut out = vec![ComplexBox::real(0.0); before.tet_count()];
        for &(old, new) in &mv.kept {
            out[old] = boxes_after[new];
        }
        let mut ok = true;
        for (r, &(t, _)) in mv.removed.iter().enumerate() {
            // bounded direct values mean no pole of the transport meets the boxes
            if !direct[r].v.is_bounded() || direct[r].d.iter().any(|g| !g.is_bounded()) {
                ok = false;
                break;
            }
            let mut mvf = at_center[r].v;
            for (k, &(s, _)) in mv.added.iter().enumerate() {
                mvf = mvf + direct[r].d[k] * (boxes_after[s] - centers[k]);
            }
            let z = match direct[r].v.intersect(&mvf) {
                Some(z) => z,
                None => {
                    ok = false;
                    break;
                }
            };
            if !z.is_nondegenerate() {
                ok = false;
                break;
            }
            out[t] = z;
        }
        if ok {
            return Some(out);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Interval volume

/// Enclosure of `Σ D(z)` over boxes, by the mean-value bound
/// `|∇D| ≤ |log|z|| / |1-z| + |log|1-z|| / |z|` around the float value at the
/// box center.
pub fn interval_volume(boxes: &[ComplexBox]) -> Interval {
    let mut total = Interval::ZERO;
    for b in boxes {
        let c = b.center();
        let d = geometry::bloch_wigner(c);
        let az = b.abs();
        let aw = one_minus(*b).abs();
        let lz = az.ln();
        let lw = aw.ln();
        let grad = Interval::point(lz.abs_max()) / Interval::point(aw.lo) + Interval::point(lw.abs_max()) / Interval::point(az.lo);
        let half_diag = (Interval::point(b.re.width()).sqr() + Interval::point(b.im.width()).sqr()).sqrt() * Interval::point(0.5);
        let spread = (grad * half_diag).hi + 1e-13 * (1.0 + d.abs());
        total = total + Interval::around(d, spread);
    }
    total
}

// ---------------------------------------------------------------------------
// Certificates

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    GeometricCertified,
    NonGeometricCertified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertStep {
    pub triangulation: TriangulationJson,
    /// `[re_lo, re_hi, im_lo, im_hi]` as hexadecimal float literals.
    pub boxes: Vec<[String; 4]>,
    #[serde(default)]
    pub unique: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub kind: MoveKind,
    pub target: MoveTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub steps: Vec<CertStep>,
    pub moves: Vec<MoveRecord>,
    pub verdict: Verdict,
    pub seed: u64,
    pub version: String,
    /// SHA-256 of the certificate serialized with an empty digest.
    #[serde(default)]
    pub digest: String,
}

pub fn encode_boxes(boxes: &[ComplexBox]) -> Vec<[String; 4]> {
    boxes.iter().map(|b| b.endpoints().map(to_hex)).collect()
}

pub fn decode_boxes(raw: &[[String; 4]]) -> Option<Vec<ComplexBox>> {
    raw.iter()
        .map(|e| {
            let v = [from_hex(&e[0])?, from_hex(&e[1])?, from_hex(&e[2])?, from_hex(&e[3])?];
            let b = ComplexBox::from_endpoints(v);
            b.is_valid().then_some(b)
        })
        .collect()
}

impl Certificate {
    pub fn content_digest(&self) -> String {
        let mut copy = self.clone();
        copy.digest = String::new();
        let json = serde_json::to_string(&copy).expect("certificate serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn seal(mut self) -> Self {
        self.digest = self.content_digest();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

fn build_certificate(
    tris: &[IdealTriangulation],
    moves: &[PachnerMove],
    boxes: &[Vec<ComplexBox>],
    verdict: Verdict,
    seed: u64,
) -> Certificate {
    let n = tris.len();
    Certificate {
        steps: (0..n)
            .map(|i| CertStep {
                triangulation: TriangulationJson::from_triangulation(&tris[i]),
                boxes: encode_boxes(&boxes[i]),
                unique: i + 1 == n,
            })
            .collect(),
        moves: moves.iter().map(|m| MoveRecord { kind: m.kind, target: m.target }).collect(),
        verdict,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        digest: String::new(),
    }
    .seal()
}

pub const DEFAULT_INFLATION: f64 = 1e-12;

/// Solves, verifies and checks positivity on a single triangulation.
pub fn certify_geometric(tri: &IdealTriangulation, seed: u64) -> Result<Certificate, CertifyError> {
    let system = geometry::assemble_for(tri)?;
    let sol = geometry::solve(&system, None, seed).map_err(|e| CertifyError::NotCertified(e.to_string()))?;
    certify_geometric_from(tri, &system, &sol, seed)
}

fn certify_geometric_from(
    tri: &IdealTriangulation,
    system: &GluingSystem,
    sol: &ShapeAssignment,
    seed: u64,
) -> Result<Certificate, CertifyError> {
    let verified = krawczyk_verify(system, sol, DEFAULT_INFLATION).map_err(|e| CertifyError::NotCertified(e.to_string()))?;
    if verified.boxes.iter().any(|b| b.im.lo <= 0.0) {
        return Err(CertifyError::NotCertified("some shape box is not in the upper half plane".into()));
    }
    Ok(build_certificate(&[tri.clone()], &[], &[verified.boxes], Verdict::GeometricCertified, seed))
}

/// Limits for the randomized Pachner search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_path_length: usize,
    pub restarts: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_path_length: 24, restarts: 10_000 }
    }
}

/// A Pachner path with transported floating shapes at every step.
#[derive(Clone, Debug)]
pub struct PachnerPath {
    pub triangulations: Vec<IdealTriangulation>,
    pub moves: Vec<PachnerMove>,
    pub shapes: Vec<ShapeAssignment>,
}

const FLAT_TOL: f64 = 1e-9;
const GREEDY_EPSILON: f64 = 0.2;
const NEAR_FLAT: f64 = 1e-6;
const SEARCH_EXPANSIONS: usize = 64;

fn candidate_moves(tri: &IdealTriangulation, shapes: &[Complex64], any: bool) -> Vec<(MoveKind, MoveTarget)> {
    let bad: Vec<bool> = shapes.iter().map(|z| z.im <= FLAT_TOL).collect();
    let mut out = Vec::new();
    for t in 0..tri.tet_count() {
        if !(any || bad[t]) {
            continue;
        }
        for f in 0..4 {
            if tri.gluing(t, f).tet != t {
                out.push((MoveKind::TwoThree, MoveTarget::Face { tet: t, face: f }));
            }
        }
    }
    for e in 0..tri.edge_count() {
        let emb = tri.edge_embeddings(e);
        if emb.len() != 3 {
            continue;
        }
        let ts: Vec<usize> = emb.iter().map(|x| x.tet).collect();
        if ts[0] == ts[1] || ts[1] == ts[2] || ts[0] == ts[2] {
            continue;
        }
        if any || ts.iter().any(|&t| bad[t]) {
            out.push((MoveKind::ThreeTwo, MoveTarget::Edge { edge: e }));
        }
    }
    out
}

struct SearchNode {
    tri: IdealTriangulation,
    shapes: ShapeAssignment,
    parent: Option<(usize, PachnerMove)>,
    depth: usize,
}

fn negative_count(shapes: &ShapeAssignment) -> usize {
    shapes.shapes.iter().filter(|w| w.im < 0.0).count()
}

/// Search by Pachner moves from `tri` with shapes `start` for a triangulation
/// on which all transported shapes are positively oriented. Each restart is a
/// best-first search of at most `SEARCH_EXPANSIONS` nodes, ordered by
/// `2·(negative shapes) + depth` with randomized ties; with probability
/// `GREEDY_EPSILON` a child is promoted. Moves producing shapes within
/// `NEAR_FLAT` of the real axis are never taken.
pub fn find_geometric_path(
    tri: &IdealTriangulation,
    start: &ShapeAssignment,
    budget: Budget,
    seed: u64,
) -> Result<PachnerPath, CertifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if classify(&start.shapes, FLAT_TOL) == Classification::Geometric {
        return Ok(PachnerPath { triangulations: vec![tri.clone()], moves: vec![], shapes: vec![start.clone()] });
    }
    let size_cap = 3 * tri.tet_count() + 6;
    for _ in 0..budget.restarts {
        let mut nodes = vec![SearchNode { tri: tri.clone(), shapes: start.clone(), parent: None, depth: 0 }];
        let mut visited: HashSet<String> = HashSet::from([isomorphism_signature(tri)]);
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((2 * negative_count(start), rng.gen::<u32>(), 0usize)));
        let mut expansions = 0;
        while let Some(Reverse((_, _, idx))) = heap.pop() {
            if expansions == SEARCH_EXPANSIONS {
                break;
            }
            expansions += 1;
            if nodes[idx].depth >= budget.max_path_length {
                continue;
            }
            let mut cands = candidate_moves(&nodes[idx].tri, &nodes[idx].shapes.shapes, true);
            cands.shuffle(&mut rng);
            for (kind, target) in cands {
                let cur = &nodes[idx];
                let Ok((next, mv)) = apply_move(&cur.tri, kind, target) else { continue };
                if next.tet_count() > size_cap {
                    continue;
                }
                let sig = isomorphism_signature(&next);
                if visited.contains(&sig) {
                    continue;
                }
                let Ok(moved) = transport(&cur.shapes.shapes, &mv, &cur.tri, &next) else { continue };
                if moved.shapes.iter().any(|w| w.im.abs() <= NEAR_FLAT) {
                    continue;
                }
                let Ok(system) = geometry::assemble_for(&next) else { continue };
                if max_residual(&system, &moved.shapes) > 1e-9 {
                    continue;
                }
                visited.insert(sig);
                let neg = negative_count(&moved);
                let depth = cur.depth + 1;
                nodes.push(SearchNode { tri: next, shapes: moved, parent: Some((idx, mv)), depth });
                if neg == 0 {
                    return Ok(unwind(nodes));
                }
                let mut key = 2 * neg + depth;
                if rng.gen::<f64>() < GREEDY_EPSILON {
                    key = key.saturating_sub(2);
                }
                heap.push(Reverse((key, rng.gen::<u32>(), nodes.len() - 1)));
            }
        }
    }
    Err(CertifyError::BudgetExhausted)
}

/// The path from the root to the last node.
fn unwind(nodes: Vec<SearchNode>) -> PachnerPath {
    let mut chain = vec![nodes.len() - 1];
    while let Some((p, _)) = &nodes[*chain.last().unwrap()].parent {
        chain.push(*p);
    }
    chain.reverse();
    let mut path = PachnerPath { triangulations: vec![], moves: vec![], shapes: vec![] };
    for i in chain {
        let node = &nodes[i];
        if let Some((_, mv)) = &node.parent {
            path.moves.push(mv.clone());
        }
        path.triangulations.push(node.tri.clone());
        path.shapes.push(node.shapes.clone());
    }
    path
}


/// Certifies `path`'s endpoint and transports the boxes back to its start.
fn certify_path(path: &PachnerPath) -> Result<Vec<Vec<ComplexBox>>, CertifyError> {
    let n = path.triangulations.len();
    let last = &path.triangulations[n - 1];
    let system = geometry::assemble_for(last)?;
    let polished = geometry::polish(&system, &path.shapes[n - 1].shapes).unwrap_or_else(|_| path.shapes[n - 1].clone());
    let verified = krawczyk_verify(&system, &polished, DEFAULT_INFLATION)?;
    if verified.boxes.iter().any(|b| b.im.lo <= 0.0) {
        return Err(CertifyError::NotCertified("endpoint boxes not in the upper half plane".into()));
    }
    let mut boxes = vec![Vec::new(); n];
    boxes[n - 1] = verified.boxes;
    for i in (0..n - 1).rev() {
        boxes[i] = transport_back_boxes(&boxes[i + 1], &path.moves[i], &path.triangulations[i], &path.triangulations[i + 1])
            .ok_or(CertifyError::TransportDegenerate)?;
    }
    Ok(boxes)
}

/// The Pachner-path certification of non-geometricity. `initial` selects the
/// solution of the input's equations to start from; by default one is found
/// with [`geometry::solve`].
pub fn certify_nongeometric(
    tri: &IdealTriangulation,
    initial: Option<&ShapeAssignment>,
    budget: Budget,
    seed: u64,
) -> Result<Certificate, CertifyError> {
    let system = geometry::assemble_for(tri)?;
    let start = match initial {
        Some(s) => geometry::polish(&system, &s.shapes)?,
        None => geometry::solve(&system, None, seed)?,
    };
    if classify(&start.shapes, FLAT_TOL) == Classification::Geometric {
        if let Ok(v) = krawczyk_verify(&system, &start, DEFAULT_INFLATION) {
            if v.boxes.iter().all(|b| b.im.lo > 0.0) {
                return Err(CertifyError::NotNonGeometric);
            }
        }
    }
    let mut last_err = CertifyError::BudgetExhausted;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining = budget.restarts;
    while remaining > 0 {
        let attempt = Budget { max_path_length: budget.max_path_length, restarts: remaining.min(50) };
        remaining -= attempt.restarts;
        let path = match find_geometric_path(tri, &start, attempt, rng.gen()) {
            Ok(p) => p,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        if path.moves.is_empty() {
            return Err(CertifyError::NotNonGeometric);
        }
        match certify_path(&path) {
            Ok(boxes) => {
                if boxes[0].iter().all(|b| b.im.lo > 0.0) {
                    return Err(CertifyError::NotNonGeometric);
                }
                if !boxes[0].iter().any(|b| b.im.hi < 0.0) {
                    last_err = CertifyError::TransportDegenerate;
                    continue;
                }
                return Ok(build_certificate(
                    &path.triangulations,
                    &path.moves,
                    &boxes,
                    Verdict::NonGeometricCertified,
                    seed,
                ));
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// Outcome of [`check_certificate`]: `failures` is empty iff the check passed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub ok: bool,
    pub failures: Vec<String>,
}

/// Re-checks a certificate with interval arithmetic and combinatorics only.
pub fn check_certificate(cert: &Certificate) -> CheckReport {
    let mut failures = Vec::new();
    if cert.digest != cert.content_digest() {
        failures.push("digest mismatch".to_string());
    }
    let n = cert.steps.len();
    if n == 0 || cert.moves.len() + 1 != n {
        failures.push("step and move counts disagree".into());
        return CheckReport { ok: false, failures };
    }
    let mut tris = Vec::with_capacity(n);
    let mut boxes = Vec::with_capacity(n);
    for (i, step) in cert.steps.iter().enumerate() {
        match step.triangulation.to_triangulation() {
            Ok(t) => tris.push(t),
            Err(e) => {
                failures.push(format!("invalid triangulation at step {i}: {e}"));
                return CheckReport { ok: false, failures };
            }
        }
        match decode_boxes(&step.boxes) {
            Some(b) if b.len() == tris[i].tet_count() => boxes.push(b),
            _ => {
                failures.push(format!("malformed boxes at step {i}"));
                return CheckReport { ok: false, failures };
            }
        }
    }
    // (a) the move chain
    let mut moves = Vec::with_capacity(n - 1);
    for (i, rec) in cert.moves.iter().enumerate() {
        match apply_move(&tris[i], rec.kind, rec.target) {
            Ok((next, mv)) if next.to_raw() == tris[i + 1].to_raw() => moves.push(mv),
            _ => {
                failures.push(format!("move mismatch at step {i}"));
                return CheckReport { ok: false, failures };
            }
        }
    }
    // (d) exclusions
    for (i, bs) in boxes.iter().enumerate() {
        if let Some(t) = bs.iter().position(|b| !b.is_nondegenerate()) {
            failures.push(format!("box {t} at step {i} meets the real axis or is unbounded"));
        }
    }
    // (b) final verification
    match geometry::assemble_for(&tris[n - 1]) {
        Ok(system) => {
            if !verify_boxes(&system, &boxes[n - 1]) {
                failures.push(format!("Krawczyk verification failed at step {}", n - 1));
            }
        }
        Err(e) => failures.push(format!("cannot assemble equations at step {}: {e}", n - 1)),
    }
    if boxes[n - 1].iter().any(|b| b.im.lo <= 0.0) {
        failures.push(format!("final boxes at step {} are not geometric", n - 1));
    }
    // (c) backward transport enclosure
    for i in (0..n - 1).rev() {
        match transport_back_boxes(&boxes[i + 1], &moves[i], &tris[i], &tris[i + 1]) {
            Some(enc) => {
                if let Some(t) = (0..enc.len()).find(|&t| !enc[t].subset(&boxes[i][t])) {
                    failures.push(format!("transport not enclosed at step {i}, tetrahedron {t}"));
                }
            }
            None => failures.push(format!("transport degenerate at step {i}")),
        }
    }
    // (e) sign condition
    let sign_ok = match cert.verdict {
        Verdict::GeometricCertified => boxes[0].iter().all(|b| b.im.lo > 0.0),
        Verdict::NonGeometricCertified => boxes[0].iter().any(|b| b.im.hi < 0.0),
    };
    if !sign_ok {
        failures.push("sign condition fails on the first step".into());
    }
    CheckReport { ok: failures.is_empty(), failures }
}

/// The floating shapes of a certificate step (box centers).
pub fn box_centers(boxes: &[ComplexBox]) -> Vec<Complex64> {
    boxes.iter().map(|b| b.center()).collect()
}
