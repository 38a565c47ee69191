//! Flat surfaces with exact coordinates, saddle connections, maximal
//! singularity-free rectangles, and the Guéritaud construction of the
//! veering triangulation of a punctured mapping torus.

mod field;
mod gueritaud;
mod io;
mod surface;

pub use field::{FieldElem, FieldError, NumberField};
pub use gueritaud::{gueritaud_triangulation, maximal_rectangles, AffinePA, GueritaudOutput, MaximalRectangle};
pub use io::{FlatSurfaceJson, RationalJson};
pub use surface::{cross, Corner, FlatSurface, Identification, SaddleConnection, Sector, Vec2};

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use crate::triangulation::IdealTriangulation;
use crate::veering::VeeringStructure;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlatError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("invalid automorphism: {0}")]
    InvalidAutomorphism(String),
    #[error("horizontal or vertical saddle connection with holonomy ({dx}, {dy})")]
    HorizontalOrVerticalSaddle { dx: f64, dy: f64 },
    #[error("enumeration bound exhausted before the rectangle census closed")]
    BoundExhausted,
    #[error("non-manifold gluing: {0}")]
    NonManifoldGluing(String),
    #[error("not pseudo-Anosov: trace {0} is at most 2")]
    NotPseudoAnosov(i64),
    #[error("not a saddle connection")]
    NotSaddle,
    #[error("invalid flat surface file: {0}")]
    Json(String),
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Monodromy matrix of a word in `R = [[1,1],[0,1]]` and `L = [[1,0],[1,1]]`.
pub fn word_matrix(word: &str) -> Result<[[i64; 2]; 2], FlatError> {
    let mut m = [[1i64, 0], [0, 1]];
    for ch in word.chars() {
        let g = match ch {
            'R' | 'r' => [[1, 1], [0, 1]],
            'L' | 'l' => [[1, 0], [1, 1]],
            _ => return Err(FlatError::InvalidSurface(format!("unexpected letter {ch:?} in word"))),
        };
        m = [
            [m[0][0] * g[0][0] + m[0][1] * g[1][0], m[0][0] * g[0][1] + m[0][1] * g[1][1]],
            [m[1][0] * g[0][0] + m[1][1] * g[1][0], m[1][0] * g[0][1] + m[1][1] * g[1][1]],
        ];
    }
    Ok(m)
}

/// The once-punctured square torus in the eigenbasis of a hyperbolic
/// matrix in `SL(2, Z)` with positive entries, and the affine map it
/// induces, with derivative `diag(λ, 1/λ)`.
pub fn eigenbasis_torus(m: [[i64; 2]; 2]) -> Result<(FlatSurface, AffinePA), FlatError> {
    let [[a, b], [c, d]] = m;
    let t = a + d;
    if t <= 2 {
        return Err(FlatError::NotPseudoAnosov(t));
    }
    if a * d - b * c != 1 || a <= 0 || b <= 0 || c <= 0 || d <= 0 {
        return Err(FlatError::InvalidSurface("expected a positive matrix of determinant 1".into()));
    }
    let k = NumberField::from_integer_poly(&[1, -t, 1], q(t - 1), q(t))?;
    let lam = k.gen();
    // rows of P are left eigenvectors for λ and 1/λ
    let u = Vec2::new(k.from_int(c), k.from_int(c));
    let v = Vec2::new(&lam - &k.from_int(a), &k.from_int(d) - &lam);
    let (u, v) = if cross(&u, &v).is_positive() { (u, v) } else { (v, u) };
    let poly = vec![Vec2::zero(&k), u.clone(), u.add(&v), v];
    let ids = vec![
        Identification { p1: 0, e1: 0, p2: 0, e2: 2, sign: 1 },
        Identification { p1: 0, e1: 1, p2: 0, e2: 3, sign: 1 },
    ];
    let surf = FlatSurface::new(k, vec![poly], ids)?;
    let pa = AffinePA::new(&surf, lam, (0, 0))?;
    Ok((surf, pa))
}

/// Veering triangulation of the punctured-torus bundle with monodromy
/// `word`, built by the Guéritaud construction on the eigenbasis torus.
pub fn ptorus_bundle(word: &str) -> Result<(IdealTriangulation, VeeringStructure), FlatError> {
    let m = word_matrix(word)?;
    let t = m[0][0] + m[1][1];
    if t <= 2 {
        return Err(FlatError::NotPseudoAnosov(t));
    }
    let (surf, pa) = eigenbasis_torus(m)?;
    let out = gueritaud_triangulation(&surf, &pa)?;
    Ok((out.triangulation, out.veering))
}
