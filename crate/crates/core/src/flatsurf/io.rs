//! Flat-surface input files.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::field::{FieldElem, NumberField};
use super::gueritaud::AffinePA;
use super::surface::{FlatSurface, Identification, Vec2};
use super::FlatError;

/// A rational number as an integer, a `[numerator, denominator]` pair, or
/// a decimal string `"p/q"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalJson {
    Int(i64),
    Pair([i64; 2]),
    Text(String),
}

impl RationalJson {
    pub fn to_rational(&self) -> Result<BigRational, FlatError> {
        let bad = || FlatError::Json(format!("invalid rational {self:?}"));
        match self {
            RationalJson::Int(n) => Ok(BigRational::from_integer(BigInt::from(*n))),
            RationalJson::Pair([n, d]) => {
                if *d == 0 {
                    return Err(bad());
                }
                Ok(BigRational::new(BigInt::from(*n), BigInt::from(*d)))
            }
            RationalJson::Text(s) => {
                let (n, d) = s.split_once('/').unwrap_or((s.as_str(), "1"));
                let n: BigInt = n.trim().parse().map_err(|_| bad())?;
                let d: BigInt = d.trim().parse().map_err(|_| bad())?;
                if d == BigInt::from(0) {
                    return Err(bad());
                }
                Ok(BigRational::new(n, d))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldJson {
    pub min_poly: Vec<RationalJson>,
    pub root_interval: [RationalJson; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolygonMapJson {
    pub vertex: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomorphismJson {
    pub lambda: Vec<RationalJson>,
    pub polygon_map: PolygonMapJson,
}

/// `{"field": …, "polygons": [[[x, y], …], …], "identifications":
/// [[p1, e1, p2, e2, sign], …], "automorphism": {"lambda": …,
/// "polygon_map": {"vertex": [p, v]}}}`; coordinates are coefficient
/// vectors in the power basis of the field generator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatSurfaceJson {
    pub field: FieldJson,
    pub polygons: Vec<Vec<[Vec<RationalJson>; 2]>>,
    pub identifications: Vec<[i64; 5]>,
    pub automorphism: AutomorphismJson,
}

fn elem(k: &NumberField, v: &[RationalJson]) -> Result<FieldElem, FlatError> {
    let c = v.iter().map(|r| r.to_rational()).collect::<Result<Vec<_>, _>>()?;
    Ok(k.elem(&c)?)
}

impl FlatSurfaceJson {
    pub fn parse(s: &str) -> Result<Self, FlatError> {
        serde_json::from_str(s).map_err(|e| FlatError::Json(e.to_string()))
    }

    pub fn build(&self) -> Result<(FlatSurface, AffinePA), FlatError> {
        let coeffs = self.field.min_poly.iter().map(|r| r.to_rational()).collect::<Result<Vec<_>, _>>()?;
        let k = NumberField::new(&coeffs, self.field.root_interval[0].to_rational()?, self.field.root_interval[1].to_rational()?)?;
        let polygons = self
            .polygons
            .iter()
            .map(|p| p.iter().map(|[x, y]| Ok(Vec2::new(elem(&k, x)?, elem(&k, y)?))).collect::<Result<Vec<_>, FlatError>>())
            .collect::<Result<Vec<_>, _>>()?;
        let ids = self
            .identifications
            .iter()
            .map(|r| {
                if r[..4].iter().any(|&x| x < 0) {
                    return Err(FlatError::Json("negative index in identification".into()));
                }
                Ok(Identification { p1: r[0] as usize, e1: r[1] as usize, p2: r[2] as usize, e2: r[3] as usize, sign: r[4] as i8 })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let surf = FlatSurface::new(k.clone(), polygons, ids)?;
        let lambda = elem(&k, &self.automorphism.lambda)?;
        let [p, v] = self.automorphism.polygon_map.vertex;
        let pa = AffinePA::new(&surf, lambda, (p, v))?;
        Ok((surf, pa))
    }
}
