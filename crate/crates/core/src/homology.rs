//! Integer homology via Smith normal form, cusp restriction of cohomology
//! classes, and the slope / fibered-face arithmetic used to identify fibers.
//!
//! `H_1(M)` is computed on the dual spine (tetrahedra, faces, edges as 0-,
//! 1- and 2-cells), onto which the truncated manifold retracts.
//! `H_2(M, ∂M)` is computed on the quotient `M/∂M`, whose cells are one
//! point, the edges, the faces and the tetrahedra.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cusp::{cusp_cross_sections, CuspCrossSection, CuspError};
use crate::perm::{edge_index, Perm4};
use crate::triangulation::IdealTriangulation;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HomologyError {
    #[error(transparent)]
    Cusp(#[from] CuspError),
    #[error("norm {norm} and puncture count {punctures} have different parity")]
    ParityViolation { norm: i64, punctures: i64 },
    #[error("class has genus {0}, which is impossible")]
    NonPositiveGenus(i64),
    #[error("coefficients must be non-negative, not both zero, and coprime")]
    InvalidCoefficients,
    #[error("unknown coefficient name {0:?}")]
    UnknownCoefficient(String),
    #[error("face data is inconsistent: {0}")]
    BadFaceData(String),
    #[error("cusp restriction of H^1 has rank {0}; a unique fiber class needs rank 1")]
    FiberNotUnique(usize),
}

/// Dense integer matrix with arbitrary-precision entries.
#[derive(Clone, PartialEq, Eq)]
pub struct IntegerMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl fmt::Debug for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries((0..self.rows).map(|r| self.row(r).iter().map(|x| x.to_string()).collect::<Vec<_>>())).finish()
    }
}

impl IntegerMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntegerMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix");
            for (j, &x) in row.iter().enumerate() {
                m[(i, j)] = BigInt::from(x);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[BigInt] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntegerMatrix) -> IntegerMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = a * &other[(k, j)];
                    out[(i, j)] += prod;
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Exact determinant by fraction-free elimination (square matrices only).
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n {
            let Some(p) = (k..n).find(|&r| !m[(r, k)].is_zero()) else {
                return BigInt::zero();
            };
            if p != k {
                m.swap_rows(p, k);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&m[(i, j)] * &m[(k, k)] - &m[(i, k)] * &m[(k, j)]) / &prev;
                    m[(i, j)] = v;
                }
                m[(i, k)] = BigInt::zero();
            }
            prev = m[(k, k)].clone();
        }
        if n == 0 {
            return BigInt::one();
        }
        sign * &m[(n - 1, n - 1)]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += k * row[src]
    fn add_row(&mut self, dst: usize, src: usize, k: &BigInt) {
        for j in 0..self.cols {
            let v = k * &self[(src, j)];
            self[(dst, j)] += v;
        }
    }

    /// col[dst] += k * col[src]
    fn add_col(&mut self, dst: usize, src: usize, k: &BigInt) {
        for i in 0..self.rows {
            let v = k * &self[(i, src)];
            self[(i, dst)] += v;
        }
    }

    fn negate_row(&mut self, r: usize) {
        for j in 0..self.cols {
            let v = -&self[(r, j)];
            self[(r, j)] = v;
        }
    }
}

impl std::ops::Index<(usize, usize)> for IntegerMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntegerMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

/// Smith normal form `U·A·V = S`.
#[derive(Clone, Debug)]
pub struct Smith {
    pub u: IntegerMatrix,
    pub s: IntegerMatrix,
    pub v: IntegerMatrix,
}

impl Smith {
    /// Nonzero diagonal entries, in order.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        (0..self.s.rows.min(self.s.cols)).map(|i| self.s[(i, i)].clone()).filter(|x| !x.is_zero()).collect()
    }

    pub fn rank(&self) -> usize {
        self.invariant_factors().len()
    }
}

fn nearest_quotient(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_mod_floor(b);
    if (&r + &r).abs() > b.abs() {
        q + 1
    } else {
        q
    }
}

pub fn smith_normal_form(a: &IntegerMatrix) -> Smith {
    let (m, n) = (a.rows, a.cols);
    let mut s = a.clone();
    let mut u = IntegerMatrix::identity(m);
    let mut v = IntegerMatrix::identity(n);
    for t in 0..m.min(n) {
        loop {
            // smallest nonzero entry of the trailing block becomes the pivot
            let mut best: Option<(usize, usize)> = None;
            for i in t..m {
                for j in t..n {
                    if !s[(i, j)].is_zero() && best.is_none_or(|(bi, bj)| s[(i, j)].abs() < s[(bi, bj)].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else { break };
            s.swap_rows(t, pi);
            u.swap_rows(t, pi);
            s.swap_cols(t, pj);
            v.swap_cols(t, pj);
            let mut clear = true;
            for i in t + 1..m {
                if !s[(i, t)].is_zero() {
                    let q = -nearest_quotient(&s[(i, t)], &s[(t, t)]);
                    s.add_row(i, t, &q);
                    u.add_row(i, t, &q);
                    clear &= s[(i, t)].is_zero();
                }
            }
            for j in t + 1..n {
                if !s[(t, j)].is_zero() {
                    let q = -nearest_quotient(&s[(t, j)], &s[(t, t)]);
                    s.add_col(j, t, &q);
                    v.add_col(j, t, &q);
                    clear &= s[(t, j)].is_zero();
                }
            }
            if !clear {
                continue;
            }
            // divisibility: pull in a row the pivot does not divide
            let bad = (t + 1..m).find(|&i| (t + 1..n).any(|j| !s[(i, j)].is_multiple_of(&s[(t, t)])));
            match bad {
                Some(i) => {
                    let one = BigInt::one();
                    s.add_row(t, i, &one);
                    u.add_row(t, i, &one);
                }
                None => break,
            }
        }
        if s[(t, t)].is_negative() {
            s.negate_row(t);
            u.negate_row(t);
        }
    }
    #[cfg(debug_assertions)]
    {
        assert_eq!(u.mul(a).mul(&v), s, "U·A·V != S");
        assert!(u.determinant().abs().is_one() && v.determinant().abs().is_one(), "SNF transforms not unimodular");
        let d: Vec<BigInt> = (0..m.min(n)).map(|i| s[(i, i)].clone()).collect();
        assert!(d.windows(2).all(|w| w[1].is_zero() || (!w[0].is_zero() && (&w[1] % &w[0]).is_zero())));
    }
    Smith { u, s, v }
}

/// Free rank and torsion coefficients of a finitely generated abelian group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianGroup {
    pub rank: usize,
    pub torsion: Vec<String>,
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        match self.rank {
            0 => {}
            1 => parts.push("Z".into()),
            r => parts.push(format!("Z^{r}")),
        }
        parts.extend(self.torsion.iter().map(|t| format!("Z/{t}")));
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Homology at the middle of `C_{k+1} --in_map--> C_k --out_map--> C_{k-1}`.
fn homology_at(dim: usize, out_map: &IntegerMatrix, in_map: &IntegerMatrix) -> AbelianGroup {
    let rank_out = if out_map.rows == 0 { 0 } else { smith_normal_form(out_map).rank() };
    let snf_in = smith_normal_form(in_map);
    let factors = snf_in.invariant_factors();
    AbelianGroup {
        rank: dim - rank_out - factors.len(),
        torsion: factors.iter().filter(|d| !d.is_one()).map(|d| d.to_string()).collect(),
    }
}

/// Boundary maps of the dual spine: `d1` (faces -> tetrahedra) and `d2`
/// (edges -> faces). Face `i` is oriented from its canonical side's
/// tetrahedron to the partner tetrahedron.
pub fn dual_spine_boundaries(tri: &IdealTriangulation) -> (IntegerMatrix, IntegerMatrix) {
    let faces = tri.faces();
    let mut d1 = IntegerMatrix::zeros(tri.tet_count(), faces.len());
    for (i, &(t, f)) in faces.iter().enumerate() {
        let g = tri.gluing(t, f);
        d1[(t, i)] -= 1;
        d1[(g.tet, i)] += 1;
    }
    let mut d2 = IntegerMatrix::zeros(faces.len(), tri.edge_count());
    for e in 0..tri.edge_count() {
        for emb in tri.edge_embeddings(e) {
            let f = emb.vertices.apply(2);
            let sign = if tri.is_canonical_side(emb.tet, f) { 1 } else { -1 };
            d2[(tri.face_index(emb.tet, f), e)] += sign;
        }
    }
    (d1, d2)
}

/// Sign of tetrahedron edge `(x, y)` of `t` against its class orientation.
fn edge_direction(tri: &IdealTriangulation) -> Vec<[i8; 6]> {
    let mut dir = vec![[0i8; 6]; tri.tet_count()];
    for e in 0..tri.edge_count() {
        for emb in tri.edge_embeddings(e) {
            let (a, b) = (emb.vertices.apply(0), emb.vertices.apply(1));
            dir[emb.tet][edge_index(a, b)] = if a < b { 1 } else { -1 };
        }
    }
    dir
}

/// Boundary maps of `M/∂M`: `d2` (faces -> edges) and `d3` (tetrahedra -> faces).
/// Each face is oriented by the ascending vertex order of its canonical side.
pub fn relative_boundaries(tri: &IdealTriangulation) -> (IntegerMatrix, IntegerMatrix) {
    let faces = tri.faces();
    let dir = edge_direction(tri);
    let mut d2 = IntegerMatrix::zeros(tri.edge_count(), faces.len());
    for (i, &(t, f)) in faces.iter().enumerate() {
        let vs: Vec<usize> = (0..4).filter(|&x| x != f).collect();
        for (k, (a, b)) in [(vs[1], vs[2]), (vs[0], vs[2]), (vs[0], vs[1])].into_iter().enumerate() {
            let sign = if k == 1 { -1 } else { 1 };
            let ek = edge_index(a, b);
            d2[(tri.edge_class(t, ek), i)] += sign * dir[t][ek] as i64;
        }
    }
    let mut d3 = IntegerMatrix::zeros(faces.len(), tri.tet_count());
    for t in 0..tri.tet_count() {
        for f in 0..4 {
            let g = tri.gluing(t, f);
            let (ct, cf, to_canon) = if tri.is_canonical_side(t, f) {
                (t, f, Perm4::IDENTITY)
            } else {
                (g.tet, g.face, g.perm)
            };
            // orientation of the face ordering induced from t, compared to canonical ascending order
            let mine: Vec<usize> = (0..4).filter(|&x| x != f).map(|x| to_canon.apply(x)).collect();
            let _ = ct;
            let canon: Vec<usize> = (0..4).filter(|&x| x != cf).collect();
            let pos: Vec<usize> = mine.iter().map(|x| canon.iter().position(|c| c == x).unwrap()).collect();
            let inversions = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).filter(|&(i, j)| pos[i] > pos[j]).count();
            let perm_sign = if inversions % 2 == 0 { 1 } else { -1 };
            let face_sign = if f % 2 == 0 { 1 } else { -1 };
            d3[(tri.face_index(t, f), t)] += perm_sign * face_sign;
        }
    }
    (d2, d3)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyReport {
    pub h1: AbelianGroup,
    pub h2_relative: AbelianGroup,
}

pub fn homology_groups(tri: &IdealTriangulation) -> Result<HomologyReport, HomologyError> {
    cusp_cross_sections(tri)?;
    let (d1, d2) = dual_spine_boundaries(tri);
    let h1 = homology_at(tri.face_count(), &d1, &d2);
    let (r2, r3) = relative_boundaries(tri);
    let h2_relative = homology_at(tri.face_count(), &r2, &r3);
    Ok(HomologyReport { h1, h2_relative })
}

/// Value of a face cochain on a dual cycle of a cusp.
fn evaluate_on_cusp_cycle(tri: &IdealTriangulation, cusp: &CuspCrossSection, cochain: &[BigInt], cycle: &crate::cusp::DualCycle) -> BigInt {
    let mut total = BigInt::zero();
    for step in &cycle.steps {
        let (t, _) = cusp.triangles[step.triangle];
        let f = step.exit;
        let x = &cochain[tri.face_index(t, f)];
        if tri.is_canonical_side(t, f) {
            total += x;
        } else {
            total -= x;
        }
    }
    total
}

/// Per-cusp boundary of the fiber class when `H^1(M)` restricts to the cusp
/// tori with rank one: `(component count, primitive slope)` per cusp.
pub fn fiber_boundary_slopes(tri: &IdealTriangulation) -> Result<Vec<(i64, (i64, i64))>, HomologyError> {
    let cusps = cusp_cross_sections(tri)?;
    let (_, d2) = dual_spine_boundaries(tri);
    // cocycles: kernel of d2^T, as columns of V past the rank
    let dt = d2.transpose();
    let snf = smith_normal_form(&dt);
    let r = snf.rank();
    let kernel: Vec<Vec<BigInt>> = (r..dt.cols).map(|j| (0..dt.cols).map(|i| snf.v[(i, j)].clone()).collect()).collect();
    let evals: Vec<Vec<i64>> = kernel
        .iter()
        .map(|phi| {
            cusps
                .iter()
                .flat_map(|c| c.basis().iter().map(|b| evaluate_on_cusp_cycle(tri, c, phi, b).to_i64().unwrap()).collect::<Vec<_>>())
                .collect()
        })
        .collect();
    let image_rank = if evals.is_empty() { 0 } else { smith_normal_form(&IntegerMatrix::from_rows(&evals)).rank() };
    if image_rank != 1 {
        return Err(HomologyError::FiberNotUnique(image_rank));
    }
    let g = evals.iter().flatten().fold(0i64, |acc, &x| acc.gcd(&x));
    let first = evals.iter().find(|row| row.iter().any(|&x| x != 0)).unwrap();
    let h = first.iter().fold(0i64, |acc, &x| acc.gcd(&x));
    let generator: Vec<i64> = first.iter().map(|&x| x / h * g).collect();
    Ok(cusps
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let class = c.class_with_pairings(generator[2 * k], generator[2 * k + 1]);
            let n = class.0.gcd(&class.1);
            if n == 0 {
                (0, (0, 0))
            } else {
                (n, (class.0 / n, class.1 / n))
            }
        })
        .collect())
}

/// Sum of weighted slopes on one cusp: `(component count, primitive slope)`.
/// The zero class has no essential components and slope `(0, 0)`.
pub fn slope_sum(terms: &[(i64, (i64, i64))]) -> (i64, (i64, i64)) {
    let (p, q) = terms.iter().fold((0i64, 0i64), |(p, q), &(m, (a, b))| (p + m * a, q + m * b));
    let n = p.gcd(&q);
    if n == 0 {
        (0, (0, 0))
    } else {
        (n, (p / n, q / n))
    }
}

pub fn intersection_number(s1: (i64, i64), s2: (i64, i64)) -> i64 {
    (s1.0 * s2.1 - s1.1 * s2.0).abs()
}

/// An integer, accepted in JSON either as a number or a decimal string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntLit {
    Num(i64),
    Str(String),
}

impl IntLit {
    pub fn value(&self) -> Result<i64, HomologyError> {
        match self {
            IntLit::Num(n) => Ok(*n),
            IntLit::Str(s) => s.trim().parse().map_err(|_| HomologyError::BadFaceData(format!("not an integer: {s:?}"))),
        }
    }
}

/// `constant + Σ coefficient·name`, used to express the vertex coefficients
/// of a face in named parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearExpr {
    #[serde(default)]
    pub terms: BTreeMap<String, IntLit>,
    #[serde(default = "zero_lit")]
    pub constant: IntLit,
}

fn zero_lit() -> IntLit {
    IntLit::Num(0)
}

impl LinearExpr {
    pub fn eval(&self, values: &BTreeMap<String, i64>) -> Result<i64, HomologyError> {
        let mut total = self.constant.value()?;
        for (name, k) in &self.terms {
            let x = values.get(name).ok_or_else(|| HomologyError::UnknownCoefficient(name.clone()))?;
            total += k.value()? * x;
        }
        Ok(total)
    }
}

/// One weighted slope on a cusp torus: `multiplicity · (p, q)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryTerm {
    pub multiplicity: IntLit,
    pub slope: [IntLit; 2],
}

/// Two vertex classes of a fibered cone with their norms and per-cusp
/// boundary contributions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceData {
    pub norms: [IntLit; 2],
    /// `boundary[cusp][vertex]`: boundary class of that vertex on that cusp.
    pub boundary: Vec<[Vec<BoundaryTerm>; 2]>,
    /// Optional named parameters for the two vertex coefficients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<[LinearExpr; 2]>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberType {
    pub genus: i64,
    pub punctures: i64,
    pub norm: i64,
    /// Per cusp: number of boundary curves and their slope.
    pub boundary: Vec<(i64, (i64, i64))>,
}

impl FaceData {
    /// Resolves named parameters to the coefficients `(a, b)` of the two vertices.
    pub fn coefficients_from(&self, values: &BTreeMap<String, i64>) -> Result<(i64, i64), HomologyError> {
        match &self.coefficients {
            Some([ea, eb]) => Ok((ea.eval(values)?, eb.eval(values)?)),
            None => {
                let get = |k: &str| values.get(k).copied().ok_or_else(|| HomologyError::UnknownCoefficient(k.into()));
                Ok((get("a")?, values.get("b").copied().unwrap_or(0)))
            }
        }
    }

    fn vertex_boundary(&self, cusp: usize, vertex: usize) -> Result<(i64, i64), HomologyError> {
        let mut terms = Vec::new();
        for t in &self.boundary[cusp][vertex] {
            terms.push((t.multiplicity.value()?, (t.slope[0].value()?, t.slope[1].value()?)));
        }
        let (n, s) = slope_sum(&terms);
        Ok((n * s.0, n * s.1))
    }
}

/// Genus, puncture count and norm of the primitive class `a·v1 + b·v2`.
pub fn fiber_type(face: &FaceData, a: i64, b: i64) -> Result<FiberType, HomologyError> {
    if a < 0 || b < 0 || (a == 0 && b == 0) || a.gcd(&b) != 1 {
        return Err(HomologyError::InvalidCoefficients);
    }
    let n1 = face.norms[0].value()?;
    let n2 = face.norms[1].value()?;
    if n1 <= 0 || n2 <= 0 {
        return Err(HomologyError::BadFaceData("norms must be positive".into()));
    }
    let norm = a * n1 + b * n2;
    let mut boundary = Vec::with_capacity(face.boundary.len());
    for c in 0..face.boundary.len() {
        let x = face.vertex_boundary(c, 0)?;
        let y = face.vertex_boundary(c, 1)?;
        boundary.push(slope_sum(&[(a, x), (b, y)]));
    }
    let punctures: i64 = boundary.iter().map(|b| b.0).sum();
    if (norm - punctures).rem_euclid(2) != 0 {
        return Err(HomologyError::ParityViolation { norm, punctures });
    }
    let genus = (norm - punctures + 2) / 2;
    if genus < 0 {
        return Err(HomologyError::NonPositiveGenus(genus));
    }
    Ok(FiberType { genus, punctures, norm, boundary })
}
