//! Gluing and completeness equations, Newton solving, volume and shape
//! transport across Pachner moves.
//!
//! Each tetrahedron carries one shape `z`, the cross-ratio at its edge 01.
//! With vertex positions `p_i` on the sphere at infinity, the shape of edge
//! `ij` is `cr(p_i, p_j, p_k, p_l)` where `(i, j, k, l)` has the tetrahedron's
//! orientation sign. The three edge parameters are
//! `z`, `z' = 1/(1-z)` and `z'' = 1 - 1/z`, assigned to the edge pairs
//! {01, 23}, {02, 13}, {03, 12} of a positive tetrahedron (the last two are
//! exchanged on a negative one).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::cusp::{cusp_cross_sections, CuspCrossSection, CuspError};
use crate::perm::{edge_index, Perm4};
use crate::triangulation::{IdealTriangulation, PachnerMove};

pub const DEGENERACY_GUARD: f64 = 1e-10;
pub const DRIFT_GUARD: f64 = 1e-8;
pub const INFINITY_GUARD: f64 = 1e10;
pub const SOLVE_TOLERANCE: f64 = 1e-12;

const TWO_PI_I: Complex64 = Complex64::new(0.0, 2.0 * PI);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error(transparent)]
    Cusp(#[from] CuspError),
    #[error("Newton iteration did not converge")]
    NoConvergence,
    #[error("singular Jacobian")]
    SingularJacobian,
    #[error("shape of tetrahedron {0} drifted to a degenerate value")]
    DegenerateDrift(usize),
    #[error("shape of tetrahedron {0} is degenerate")]
    DegenerateShape(usize),
    #[error("Pachner move is degenerate under these shapes")]
    DegenerateMove,
    #[error("shape count {got} does not match tetrahedron count {expected}")]
    WrongLength { expected: usize, got: usize },
}

/// Which of the three edge parameters a tetrahedron edge carries.
pub fn parameter_kind(orientation: i8, edge: usize) -> usize {
    let base = edge.min(5 - edge);
    if orientation < 0 && base != 0 {
        3 - base
    } else {
        base
    }
}

pub fn parameter(z: Complex64, kind: usize) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    match kind {
        0 => z,
        1 => one / (one - z),
        _ => one - one / z,
    }
}

/// Cross-ratio `((d-b)(c-a)) / ((c-b)(d-a))`; the shape of a tetrahedron
/// with vertices at `a, b, c, d` seen from edge `ab`.
pub fn cross_ratio(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    ((d - b) * (c - a)) / ((c - b) * (d - a))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Edge(usize),
    Cusp { cusp: usize, curve: usize },
}

/// One equation: `Σ coeffs[t][k] · log(parameter k of t) = 2πi · target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GluingRow {
    pub kind: RowKind,
    pub coeffs: Vec<[i64; 3]>,
    pub target: i64,
}

impl GluingRow {
    /// Exponents `(A_t, B_t)` and sign count `C` of the product form
    /// `Π z^A (1-z)^B = (-1)^C`.
    pub fn product_form(&self) -> (Vec<i64>, Vec<i64>, i64) {
        let a = self.coeffs.iter().map(|c| c[0] - c[2]).collect();
        let b = self.coeffs.iter().map(|c| c[2] - c[1]).collect();
        let c = self.coeffs.iter().map(|c| c[2]).sum();
        (a, b, c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GluingSystem {
    pub tet_count: usize,
    pub rows: Vec<GluingRow>,
    /// Rows of the square subsystem used by Newton and Krawczyk.
    pub square: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeAssignment {
    pub shapes: Vec<Complex64>,
    /// Per tetrahedron, `2πi` multiples separating the tracked logarithms of
    /// `z, z', z''` from their principal values.
    pub branches: Vec<[i64; 3]>,
}

impl ShapeAssignment {
    pub fn new(shapes: Vec<Complex64>) -> Self {
        let n = shapes.len();
        ShapeAssignment { shapes, branches: vec![[0; 3]; n] }
    }
}

fn rank_of(rows: &[Vec<i64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    crate::homology::smith_normal_form(&crate::homology::IntegerMatrix::from_rows(rows)).rank()
}

/// Assembles edge rows (target 2πi) and two cusp rows per cusp (target 0).
pub fn assemble(tri: &IdealTriangulation, cusps: &[CuspCrossSection]) -> GluingSystem {
    let n = tri.tet_count();
    let orient = tri.orientation().expect("cusp sections imply orientability");
    let mut rows = Vec::new();
    for e in 0..tri.edge_count() {
        let mut coeffs = vec![[0i64; 3]; n];
        for emb in tri.edge_embeddings(e) {
            let k = edge_index(emb.vertices.apply(0), emb.vertices.apply(1));
            coeffs[emb.tet][parameter_kind(orient[emb.tet], k)] += 1;
        }
        rows.push(GluingRow { kind: RowKind::Edge(e), coeffs, target: 1 });
    }
    for (ci, cusp) in cusps.iter().enumerate() {
        for (curve, cycle) in cusp.basis().iter().enumerate() {
            let mut coeffs = vec![[0i64; 3]; n];
            for turn in cusp.turns(cycle) {
                let k = edge_index(turn.v, turn.c);
                coeffs[turn.tet][parameter_kind(orient[turn.tet], k)] += turn.sign;
            }
            rows.push(GluingRow { kind: RowKind::Cusp { cusp: ci, curve }, coeffs, target: 0 });
        }
    }
    // square subsystem: a maximal independent set of edge rows, then the
    // first curve of every cusp
    let mut square = Vec::new();
    let mut chosen: Vec<Vec<i64>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if let RowKind::Edge(_) = row.kind {
            let (a, b, _) = row.product_form();
            let mut cand = chosen.clone();
            cand.push(a.iter().chain(b.iter()).copied().collect());
            if rank_of(&cand) > chosen.len() {
                chosen = cand;
                square.push(i);
            }
        }
    }
    for (i, row) in rows.iter().enumerate() {
        if let RowKind::Cusp { curve: 0, .. } = row.kind {
            square.push(i);
        }
    }
    GluingSystem { tet_count: n, rows, square }
}

/// Computes cusp sections and assembles the system.
pub fn assemble_for(tri: &IdealTriangulation) -> Result<GluingSystem, GeometryError> {
    let cusps = cusp_cross_sections(tri)?;
    Ok(assemble(tri, &cusps))
}

/// Residual of each row with principal logarithms, reduced modulo `2πi`.
pub fn residuals(system: &GluingSystem, shapes: &[Complex64]) -> Vec<f64> {
    system
        .rows
        .iter()
        .map(|row| {
            let mut s = Complex64::new(0.0, 0.0);
            for (t, c) in row.coeffs.iter().enumerate() {
                for k in 0..3 {
                    if c[k] != 0 {
                        s += parameter(shapes[t], k).ln() * c[k] as f64;
                    }
                }
            }
            let d = s - TWO_PI_I * row.target as f64;
            let wind = (d.im / (2.0 * PI)).round();
            (d - TWO_PI_I * wind).norm()
        })
        .collect()
}

pub fn max_residual(system: &GluingSystem, shapes: &[Complex64]) -> f64 {
    residuals(system, shapes).into_iter().fold(0.0, f64::max)
}

/// Continuously tracked `log z` and `log(1-z)` for every tetrahedron.
struct LogTracker {
    log_z: Vec<Complex64>,
    log_w: Vec<Complex64>,
}

fn nearest_branch(prev: Complex64, principal: Complex64) -> Complex64 {
    let k = ((prev.im - principal.im) / (2.0 * PI)).round();
    principal + TWO_PI_I * k
}

impl LogTracker {
    fn new(z: &[Complex64]) -> Self {
        let one = Complex64::new(1.0, 0.0);
        LogTracker { log_z: z.iter().map(|z| z.ln()).collect(), log_w: z.iter().map(|z| (one - z).ln()).collect() }
    }

    fn update(&mut self, z: &[Complex64]) {
        let one = Complex64::new(1.0, 0.0);
        for t in 0..z.len() {
            self.log_z[t] = nearest_branch(self.log_z[t], z[t].ln());
            self.log_w[t] = nearest_branch(self.log_w[t], (one - z[t]).ln());
        }
    }
}

struct NewtonSystem<'a> {
    system: &'a GluingSystem,
    a: Vec<Vec<i64>>,
    b: Vec<Vec<i64>>,
    /// constant term in units of iπ
    c: Vec<i64>,
    /// iπ offsets turning `log(1-z) - log z` into the tracked `log z''`
    s: Vec<i64>,
    /// extra 2πi multiples added to each row's target
    k: Vec<i64>,
}

impl<'a> NewtonSystem<'a> {
    fn new(system: &'a GluingSystem, z: &[Complex64], tracker: &LogTracker) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let s: Vec<i64> = (0..z.len())
            .map(|t| {
                let principal = (one - one / z[t]).ln();
                ((principal - tracker.log_w[t] + tracker.log_z[t]).im / PI).round() as i64
            })
            .collect();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut c = Vec::new();
        for &r in &system.square {
            let row = &system.rows[r];
            let (ra, rb, _) = row.product_form();
            let cc: i64 = row.coeffs.iter().enumerate().map(|(t, k)| k[2] * s[t]).sum();
            a.push(ra);
            b.push(rb);
            c.push(cc);
        }
        let k = vec![0; a.len()];
        NewtonSystem { system, a, b, c, s, k }
    }

    /// Moves each row's target to the branch nearest the current values.
    fn adopt_branches(&mut self, tr: &LogTracker) {
        let v = self.values(tr);
        for i in 0..self.k.len() {
            self.k[i] += (v[i].im / (2.0 * PI)).round() as i64;
        }
    }

    fn values(&self, tr: &LogTracker) -> DVector<Complex64> {
        DVector::from_iterator(
            self.a.len(),
            (0..self.a.len()).map(|i| {
                let mut v = Complex64::new(0.0, PI * self.c[i] as f64);
                for t in 0..tr.log_z.len() {
                    v += tr.log_z[t] * self.a[i][t] as f64 + tr.log_w[t] * self.b[i][t] as f64;
                }
                v - TWO_PI_I * (self.system.rows[self.system.square[i]].target + self.k[i]) as f64
            }),
        )
    }

    fn jacobian(&self, z: &[Complex64]) -> DMatrix<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        let n = z.len();
        DMatrix::from_fn(self.a.len(), n, |i, t| {
            self.a[i][t] as f64 / z[t] - self.b[i][t] as f64 / (one - z[t])
        })
    }
}

fn check_guard(z: &[Complex64]) -> Result<(), GeometryError> {
    let one = Complex64::new(1.0, 0.0);
    for (t, &x) in z.iter().enumerate() {
        if !x.is_finite() || x.norm() < DRIFT_GUARD || (one - x).norm() < DRIFT_GUARD || x.norm() > INFINITY_GUARD {
            return Err(GeometryError::DegenerateDrift(t));
        }
    }
    Ok(())
}

fn newton(system: &GluingSystem, start: &[Complex64], keep_branches: bool) -> Result<ShapeAssignment, GeometryError> {
    let mut z = start.to_vec();
    check_guard(&z)?;
    let mut tracker = LogTracker::new(&z);
    let mut ns = NewtonSystem::new(system, &z, &tracker);
    if keep_branches {
        ns.adopt_branches(&tracker);
    }
    let mut f = ns.values(&tracker);
    for _ in 0..100 {
        let norm = f.camax();
        if norm <= 1e-14 || (norm <= SOLVE_TOLERANCE * 0.1 && max_residual(system, &z) <= SOLVE_TOLERANCE) {
            break;
        }
        let jac = ns.jacobian(&z);
        let step = jac.lu().solve(&(-&f)).ok_or(GeometryError::SingularJacobian)?;
        // damped step: halve until the residual decreases
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<Complex64> = z.iter().zip(step.iter()).map(|(x, d)| x + d * lambda).collect();
            if check_guard(&trial).is_ok() {
                let mut tr = LogTracker { log_z: tracker.log_z.clone(), log_w: tracker.log_w.clone() };
                tr.update(&trial);
                let ft = ns.values(&tr);
                if ft.camax() < norm || norm < 1e-13 {
                    z = trial;
                    tracker = tr;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            check_guard(&z.iter().zip(step.iter()).map(|(x, d)| x + d).collect::<Vec<_>>())?;
            return Err(GeometryError::NoConvergence);
        }
    }
    if max_residual(system, &z) > SOLVE_TOLERANCE {
        return Err(GeometryError::NoConvergence);
    }
    let one = Complex64::new(1.0, 0.0);
    let branches = (0..z.len())
        .map(|t| {
            let b0 = ((tracker.log_z[t] - z[t].ln()).im / (2.0 * PI)).round() as i64;
            let b1 = ((-tracker.log_w[t] - (one / (one - z[t])).ln()).im / (2.0 * PI)).round() as i64;
            let tracked2 = tracker.log_w[t] - tracker.log_z[t] + Complex64::new(0.0, PI * ns.s[t] as f64);
            let b2 = ((tracked2 - (one - one / z[t]).ln()).im / (2.0 * PI)).round() as i64;
            [b0, b1, b2]
        })
        .collect();
    Ok(ShapeAssignment { shapes: z, branches })
}

/// Newton's method from `start` alone, for refining a nearby approximation.
/// The logarithmic branches of `start` are kept.
pub fn polish(system: &GluingSystem, start: &[Complex64]) -> Result<ShapeAssignment, GeometryError> {
    newton(system, start, true)
}

/// Newton's method from `initial` (default all `i`), then up to ten seeded
/// random restarts in the disc `|z - (0.5 + 0.87i)| < 0.4`. A solution with
/// all shapes in the upper half plane is preferred.
pub fn solve(system: &GluingSystem, initial: Option<&ShapeAssignment>, seed: u64) -> Result<ShapeAssignment, GeometryError> {
    let n = system.tet_count;
    let start = match initial {
        Some(s) if s.shapes.len() != n => return Err(GeometryError::WrongLength { expected: n, got: s.shapes.len() }),
        Some(s) => s.shapes.clone(),
        None => vec![Complex64::new(0.0, 1.0); n],
    };
    let mut errors = Vec::new();
    let mut fallback = None;
    let positive = |s: &ShapeAssignment| s.shapes.iter().all(|z| z.im > 0.0);
    match newton(system, &start, false) {
        Ok(s) if positive(&s) => return Ok(s),
        Ok(s) => {
            // the mirror image of a solution also solves the product equations
            let mirror: Vec<Complex64> = s.shapes.iter().map(|z| z.conj()).collect();
            if let Ok(m) = newton(system, &mirror, false) {
                if positive(&m) {
                    return Ok(m);
                }
            }
            fallback = Some(s);
        }
        Err(e) => errors.push(e),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = Complex64::new(0.5, 0.87);
    for _ in 0..10 {
        let guess: Vec<Complex64> = (0..n)
            .map(|_| {
                let r = 0.4 * rng.gen::<f64>().sqrt();
                let th = 2.0 * PI * rng.gen::<f64>();
                center + Complex64::from_polar(r, th)
            })
            .collect();
        match newton(system, &guess, false) {
            Ok(s) if positive(&s) => return Ok(s),
            Ok(s) => {
                fallback.get_or_insert(s);
            }
            Err(e) => errors.push(e),
        }
    }
    if let Some(s) = fallback {
        return Ok(s);
    }
    if errors.iter().all(|e| matches!(e, GeometryError::DegenerateDrift(_))) {
        return Err(errors.pop().unwrap());
    }
    if errors.iter().all(|e| *e == GeometryError::SingularJacobian) {
        return Err(GeometryError::SingularJacobian);
    }
    Err(GeometryError::NoConvergence)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Geometric,
    NonGeometric(Vec<usize>),
    ContainsFlat(Vec<usize>),
}

/// Flat tetrahedra take precedence over negatively oriented ones.
pub fn classify(shapes: &[Complex64], tol: f64) -> Classification {
    let flat: Vec<usize> = (0..shapes.len()).filter(|&i| shapes[i].im.abs() <= tol).collect();
    if !flat.is_empty() {
        return Classification::ContainsFlat(flat);
    }
    let neg: Vec<usize> = (0..shapes.len()).filter(|&i| shapes[i].im < -tol).collect();
    if neg.is_empty() {
        Classification::Geometric
    } else {
        Classification::NonGeometric(neg)
    }
}

// ---------------------------------------------------------------------------
// Bloch–Wigner dilogarithm

fn bernoulli_numbers(n: usize) -> Vec<f64> {
    // B_0..B_n with B_1 = -1/2
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for m in 1..=n {
        let mut s = 0.0;
        let mut binom = 1.0; // C(m+1, k)
        for (k, bk) in b.iter().enumerate().take(m) {
            s += binom * bk;
            binom = binom * (m + 1 - k) as f64 / (k + 1) as f64;
        }
        b[m] = -s / (m + 1) as f64;
    }
    b
}

/// `Li_2(w)` for `|w| ≤ 1`, `Re w ≤ 1/2`, by the Bernoulli series in `-log(1-w)`.
fn li2_reduced(w: Complex64) -> Complex64 {
    thread_local! {
        static BERN: Vec<f64> = bernoulli_numbers(40);
    }
    let one = Complex64::new(1.0, 0.0);
    let u = -(one - w).ln();
    BERN.with(|b| {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut power = u; // u^{n+1}/(n+1)!
        for (n, bn) in b.iter().enumerate() {
            if n > 0 {
                power = power * u / (n + 1) as f64;
            }
            if *bn != 0.0 {
                sum += power * *bn;
            }
        }
        sum
    })
}

/// Bloch–Wigner dilogarithm `D(z) = Im Li_2(z) + arg(1-z) log|z|`, the signed
/// volume of the ideal tetrahedron of shape `z`.
pub fn bloch_wigner(z: Complex64) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    if z.im == 0.0 {
        return 0.0;
    }
    let mut w = z;
    let mut sign = 1.0;
    if w.norm() > 1.0 {
        w = one / w;
        sign = -sign;
    }
    if w.re > 0.5 {
        w = one - w;
        sign = -sign;
    }
    let d = li2_reduced(w).im + (one - w).arg() * w.norm().ln();
    sign * d
}

pub fn volume(shapes: &[Complex64]) -> Result<f64, GeometryError> {
    let one = Complex64::new(1.0, 0.0);
    let mut v = 0.0;
    for (t, &z) in shapes.iter().enumerate() {
        if z.norm() < DEGENERACY_GUARD || (one - z).norm() < DEGENERACY_GUARD || !z.is_finite() {
            return Err(GeometryError::DegenerateShape(t));
        }
        v += bloch_wigner(z);
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Shape transport

/// Solves `cr(a, b, c, d) = w` for `a`.
pub fn solve_cross_ratio_first(w: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Option<Complex64> {
    let den = w * (c - b) - (d - b);
    if den.norm() < 1e-300 {
        return None;
    }
    Some((w * (c - b) * d - (d - b) * c) / den)
}

/// Choice of the three reference vertices and the order used to place the
/// fourth: for unknown vertex `j`, returns `(x, k, l)` with `(j, x, k, l)` of
/// sign `orientation`.
pub fn placement_order(orientation: i8, j: usize) -> (usize, usize, usize) {
    let rest: Vec<usize> = (0..4).filter(|&v| v != j).collect();
    let (x, k, l) = (rest[0], rest[1], rest[2]);
    let p = Perm4::new([j as u8, x as u8, k as u8, l as u8]).unwrap();
    if p.sign() * orientation > 0 {
        (x, k, l)
    } else {
        (x, l, k)
    }
}

/// Shape at edge 01 of a tetrahedron from its vertex positions.
pub fn shape_from_positions(orientation: i8, p: [Complex64; 4]) -> Complex64 {
    if orientation > 0 {
        cross_ratio(p[0], p[1], p[2], p[3])
    } else {
        cross_ratio(p[0], p[1], p[3], p[2])
    }
}

/// Candidate positions for the first removed tetrahedron's vertices 0, 1, 2.
/// Cross-ratios do not depend on the choice; several are tried so that no
/// vertex lands at or near infinity.
pub fn anchor_points() -> [[Complex64; 3]; 3] {
    [
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.5, 3f64.sqrt() / 2.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.31, 1.37)],
        [Complex64::new(-0.6, 0.2), Complex64::new(0.9, -0.35), Complex64::new(0.15, 1.1)],
    ]
}

/// Order in which bipyramid labels get placed from the labeled source
/// tetrahedra: `(source index, vertex)`. The first three labels are the
/// anchors of source tetrahedron 0.
pub fn placement_schedule(source: &[(usize, [u8; 4])]) -> Vec<(usize, usize)> {
    let mut known = [false; 5];
    let first = source[0].1;
    for v in 0..3 {
        known[first[v] as usize] = true;
    }
    let mut schedule = Vec::new();
    while known.iter().filter(|&&k| k).count() < 5 {
        let mut progressed = false;
        for (i, (_, labels)) in source.iter().enumerate() {
            let unknown: Vec<usize> = (0..4).filter(|&v| !known[labels[v] as usize]).collect();
            if unknown.len() == 1 {
                known[labels[unknown[0]] as usize] = true;
                schedule.push((i, unknown[0]));
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    schedule
}

fn is_degenerate_shape(z: Complex64) -> bool {
    let one = Complex64::new(1.0, 0.0);
    !z.is_finite() || z.norm() < DEGENERACY_GUARD || (one - z).norm() < DEGENERACY_GUARD || z.norm() > 1.0 / DEGENERACY_GUARD
}

/// Positions of the five bipyramid labels, or `None` if some vertex lands
/// near infinity or two vertices (nearly) coincide.
fn place_bipyramid(shapes: &[Complex64], mv: &PachnerMove, orient: &[i8], anchors: &[Complex64; 3]) -> Option<[Complex64; 5]> {
    let mut pos: [Option<Complex64>; 5] = [None; 5];
    let first = mv.removed[0].1;
    for v in 0..3 {
        pos[first[v] as usize] = Some(anchors[v]);
    }
    for (i, j) in placement_schedule(&mv.removed) {
        let (t, labels) = mv.removed[i];
        let o = orient[t];
        let (x, k, l) = placement_order(o, j);
        let w = parameter(shapes[t], parameter_kind(o, edge_index(j, x)));
        let get = |v: usize| pos[labels[v] as usize].unwrap();
        let a = solve_cross_ratio_first(w, get(x), get(k), get(l))?;
        if !a.is_finite() || a.norm() > PLACEMENT_BOUND {
            return None;
        }
        pos[labels[j] as usize] = Some(a);
    }
    let pos = [pos[0]?, pos[1]?, pos[2]?, pos[3]?, pos[4]?];
    for i in 0..5 {
        for j in i + 1..5 {
            if (pos[i] - pos[j]).norm() < 1.0 / PLACEMENT_BOUND {
                return None;
            }
        }
    }
    Some(pos)
}

const PLACEMENT_BOUND: f64 = 1e6;

/// Transports shapes across a Pachner move (either direction) by placing the
/// bipyramid's five ideal vertices in `C` and reading off cross-ratios.
pub fn transport(
    shapes: &[Complex64],
    mv: &PachnerMove,
    before: &IdealTriangulation,
    after: &IdealTriangulation,
) -> Result<ShapeAssignment, GeometryError> {
    if shapes.len() != before.tet_count() {
        return Err(GeometryError::WrongLength { expected: before.tet_count(), got: shapes.len() });
    }
    let o_before = before.orientation().ok_or(GeometryError::DegenerateMove)?;
    let o_after = after.orientation().ok_or(GeometryError::DegenerateMove)?;
    for &(t, _) in &mv.removed {
        if is_degenerate_shape(shapes[t]) {
            return Err(GeometryError::DegenerateMove);
        }
    }
    let pos = anchor_points()
        .iter()
        .find_map(|anchors| place_bipyramid(shapes, mv, o_before, anchors))
        .ok_or(GeometryError::DegenerateMove)?;
    let mut out = vec![Complex64::new(0.0, 0.0); after.tet_count()];
    for &(old, new) in &mv.kept {
        out[new] = shapes[old];
    }
    for &(t, labels) in &mv.added {
        let p = [0, 1, 2, 3].map(|v| pos[labels[v] as usize]);
        let z = shape_from_positions(o_after[t], p);
        if is_degenerate_shape(z) {
            return Err(GeometryError::DegenerateMove);
        }
        out[t] = z;
    }
    Ok(ShapeAssignment::new(out))
}

pub fn transport_23(
    shapes: &[Complex64],
    mv: &PachnerMove,
    before: &IdealTriangulation,
    after: &IdealTriangulation,
) -> Result<ShapeAssignment, GeometryError> {
    debug_assert_eq!(mv.kind, crate::triangulation::MoveKind::TwoThree);
    transport(shapes, mv, before, after)
}

pub fn transport_32(
    shapes: &[Complex64],
    mv: &PachnerMove,
    before: &IdealTriangulation,
    after: &IdealTriangulation,
) -> Result<ShapeAssignment, GeometryError> {
    debug_assert_eq!(mv.kind, crate::triangulation::MoveKind::ThreeTwo);
    transport(shapes, mv, before, after)
}
