//! Exact arithmetic in a real number field `ℚ(λ)`, with `λ` a chosen real
//! root of a squarefree rational polynomial.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("minimal polynomial must have degree at least 1")]
    ConstantPolynomial,
    #[error("minimal polynomial is not squarefree")]
    NotSquarefree,
    #[error("root interval does not isolate exactly one root (found {0})")]
    NotIsolating(usize),
    #[error("coefficient vector has length {got}, expected at most {degree}")]
    WrongLength { got: usize, degree: usize },
    #[error("zero denominator")]
    ZeroDenominator,
}

type Poly = Vec<BigRational>;

fn trim(mut p: Poly) -> Poly {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

fn poly_eval(p: &[BigRational], x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in p.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn poly_rem(a: &[BigRational], b: &[BigRational]) -> Poly {
    let mut r = trim(a.to_vec());
    let db = b.len() - 1;
    let lead = &b[db];
    while r.len() > db {
        let k = r.len() - 1;
        let f = &r[k] / lead;
        for i in 0..=db {
            let v = &f * &b[i];
            r[k - db + i] -= v;
        }
        r = trim(r);
    }
    r
}

fn poly_divmod(a: &[BigRational], b: &[BigRational]) -> (Poly, Poly) {
    let mut r = trim(a.to_vec());
    let db = b.len() - 1;
    if r.len() <= db {
        return (vec![], r);
    }
    let mut q = vec![BigRational::zero(); r.len() - db];
    let lead = &b[db];
    while r.len() > db {
        let k = r.len() - 1;
        let f = &r[k] / lead;
        for i in 0..=db {
            let v = &f * &b[i];
            r[k - db + i] -= v;
        }
        q[k - db] = f;
        r = trim(r);
    }
    (trim(q), r)
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Poly {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

fn poly_sub(a: &[BigRational], b: &[BigRational]) -> Poly {
    let n = a.len().max(b.len());
    trim((0..n).map(|i| a.get(i).cloned().unwrap_or_default() - b.get(i).cloned().unwrap_or_default()).collect())
}

fn poly_gcd(a: &[BigRational], b: &[BigRational]) -> Poly {
    let (mut a, mut b) = (trim(a.to_vec()), trim(b.to_vec()));
    while !b.is_empty() {
        let r = poly_rem(&a, &b);
        a = b;
        b = r;
    }
    a
}

fn derivative(p: &[BigRational]) -> Poly {
    trim(p.iter().enumerate().skip(1).map(|(i, c)| c * BigRational::from_integer(BigInt::from(i))).collect())
}

fn sign_changes(seq: &[Poly], x: &BigRational) -> usize {
    let signs: Vec<i32> = seq
        .iter()
        .map(|p| {
            let v = poly_eval(p, x);
            if v.is_positive() {
                1
            } else if v.is_negative() {
                -1
            } else {
                0
            }
        })
        .filter(|&s| s != 0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Number of distinct roots in `(lo, hi]`.
fn sturm_count(p: &[BigRational], lo: &BigRational, hi: &BigRational) -> usize {
    let mut seq = vec![trim(p.to_vec()), derivative(p)];
    while seq.last().is_some_and(|q| !q.is_empty()) {
        let n = seq.len();
        let r = poly_rem(&seq[n - 2], &seq[n - 1]);
        if r.is_empty() {
            break;
        }
        seq.push(r.into_iter().map(|c| -c).collect());
    }
    sign_changes(&seq, lo) - sign_changes(&seq, hi)
}

struct FieldInner {
    poly: Poly,
    iso: Mutex<(BigRational, BigRational)>,
    root: f64,
}

/// The field `ℚ(λ)` together with the embedding fixed by an isolating
/// interval for `λ`.
#[derive(Clone)]
pub struct NumberField {
    inner: Arc<FieldInner>,
}

impl fmt::Debug for NumberField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NumberField").field("min_poly", &self.inner.poly).finish()
    }
}

impl PartialEq for NumberField {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.poly == other.inner.poly
    }
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl NumberField {
    /// `coeffs` are `c0, c1, …, cd` of `c0 + c1 x + … + cd x^d`.
    pub fn new(coeffs: &[BigRational], lo: BigRational, hi: BigRational) -> Result<Self, FieldError> {
        let p = trim(coeffs.to_vec());
        if p.len() < 2 {
            return Err(FieldError::ConstantPolynomial);
        }
        let lead = p.last().unwrap().clone();
        let p: Poly = p.into_iter().map(|c| c / &lead).collect();
        if poly_gcd(&p, &derivative(&p)).len() > 1 {
            return Err(FieldError::NotSquarefree);
        }
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let mut count = sturm_count(&p, &lo, &hi);
        if poly_eval(&p, &lo).is_zero() {
            count += 1;
        }
        if count != 1 {
            return Err(FieldError::NotIsolating(count));
        }
        let mut field = NumberField { inner: Arc::new(FieldInner { poly: p.clone(), iso: Mutex::new((lo, hi)), root: 0.0 }) };
        let (a, b) = field.refine_to(80);
        let root = ((a + b) / q(2)).to_f64().unwrap_or(f64::NAN);
        let iso = field.root_interval();
        field = NumberField { inner: Arc::new(FieldInner { poly: p, iso: Mutex::new(iso), root }) };
        Ok(field)
    }

    pub fn from_integer_poly(coeffs: &[i64], lo: BigRational, hi: BigRational) -> Result<Self, FieldError> {
        let c: Vec<BigRational> = coeffs.iter().map(|&x| q(x)).collect();
        Self::new(&c, lo, hi)
    }

    /// `ℚ` itself, as `ℚ(0)`.
    pub fn rationals() -> Self {
        Self::new(&[q(0), q(1)], q(-1), q(1)).expect("x isolates 0")
    }

    pub fn degree(&self) -> usize {
        self.inner.poly.len() - 1
    }

    pub fn min_poly(&self) -> &[BigRational] {
        &self.inner.poly
    }

    pub fn root_interval(&self) -> (BigRational, BigRational) {
        self.inner.iso.lock().unwrap().clone()
    }

    pub fn zero(&self) -> FieldElem {
        FieldElem { field: self.clone(), c: vec![BigRational::zero(); self.degree()], approx: 0.0, err: 0.0 }
    }

    /// Floating value of `Σ c_i λ^i` with an error bound.
    fn approximate(&self, c: &[BigRational]) -> (f64, f64) {
        let r = self.inner.root;
        let mut v = 0.0;
        let mut mag = 0.0;
        let mut p = 1.0f64;
        for x in c {
            if !x.is_zero() {
                let xf = x.to_f64().unwrap_or(f64::NAN);
                v += xf * p;
                mag += (xf * p).abs();
            }
            p *= r;
        }
        let err = mag * (c.len() as f64 + 2.0) * 8.0 * f64::EPSILON + f64::MIN_POSITIVE;
        if v.is_finite() && err.is_finite() {
            (v, err)
        } else {
            (0.0, f64::INFINITY)
        }
    }

    pub fn from_rational(&self, r: BigRational) -> FieldElem {
        let mut e = self.zero();
        e.c[0] = r;
        let (approx, err) = self.approximate(&e.c);
        e.approx = approx;
        e.err = err;
        e
    }

    pub fn from_int(&self, n: i64) -> FieldElem {
        self.from_rational(q(n))
    }

    pub fn one(&self) -> FieldElem {
        self.from_int(1)
    }

    /// The generator `λ`.
    pub fn gen(&self) -> FieldElem {
        self.elem(&[q(0), q(1)]).expect("degree 1 handled by reduction")
    }

    /// The element `Σ c_i λ^i`; longer vectors are reduced.
    pub fn elem(&self, coeffs: &[BigRational]) -> Result<FieldElem, FieldError> {
        Ok(self.reduce(coeffs.to_vec()))
    }

    fn reduce(&self, p: Poly) -> FieldElem {
        let r = poly_rem(&p, &self.inner.poly);
        let mut c = r;
        c.resize(self.degree(), BigRational::zero());
        let (approx, err) = self.approximate(&c);
        FieldElem { field: self.clone(), c, approx, err }
    }

    /// Halves the isolating interval until its width is below `2^-bits`.
    fn refine_to(&self, bits: u32) -> (BigRational, BigRational) {
        let mut g = self.inner.iso.lock().unwrap();
        let target = BigRational::new(BigInt::one(), BigInt::one() << bits);
        let p = &self.inner.poly;
        while &g.1 - &g.0 > target {
            let (lo, hi) = g.clone();
            let mid = (&lo + &hi) / q(2);
            let fm = poly_eval(p, &mid);
            if fm.is_zero() {
                *g = (mid.clone(), mid);
                break;
            }
            let flo = poly_eval(p, &lo);
            if flo.is_zero() {
                *g = (lo.clone(), lo);
                break;
            }
            if flo.is_positive() == fm.is_positive() {
                *g = (mid, hi);
            } else {
                *g = (lo, mid);
            }
        }
        g.clone()
    }

    fn is_root_rational(&self) -> Option<BigRational> {
        let (lo, hi) = self.root_interval();
        if lo == hi {
            return Some(lo);
        }
        if poly_eval(&self.inner.poly, &lo).is_zero() {
            return Some(lo);
        }
        if poly_eval(&self.inner.poly, &hi).is_zero() {
            return Some(hi);
        }
        None
    }
}

/// Interval Horner evaluation with exact rational endpoints.
fn eval_interval(p: &[BigRational], lo: &BigRational, hi: &BigRational) -> (BigRational, BigRational) {
    let mut a = BigRational::zero();
    let mut b = BigRational::zero();
    for c in p.iter().rev() {
        let prods = [&a * lo, &a * hi, &b * lo, &b * hi];
        let mn = prods.iter().min().unwrap().clone();
        let mx = prods.iter().max().unwrap().clone();
        a = mn + c;
        b = mx + c;
    }
    (a, b)
}

/// An element of a [`NumberField`], stored in the power basis.
#[derive(Clone)]
pub struct FieldElem {
    field: NumberField,
    c: Vec<BigRational>,
    approx: f64,
    err: f64,
}

const ROUND: f64 = 4.0 * f64::EPSILON;

fn sum_bound(v: f64, ea: f64, eb: f64) -> f64 {
    ea + eb + v.abs() * ROUND
}

impl fmt::Debug for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (i, c) in self.c.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            parts.push(match i {
                0 => format!("{c}"),
                1 => format!("({c})*λ"),
                _ => format!("({c})*λ^{i}"),
            });
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

impl PartialEq for FieldElem {
    fn eq(&self, other: &Self) -> bool {
        self.c == other.c
    }
}

impl Eq for FieldElem {}

impl Hash for FieldElem {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.c.hash(state);
    }
}

impl PartialOrd for FieldElem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FieldElem {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum().cmp(&0)
    }
}

impl FieldElem {
    pub fn field(&self) -> &NumberField {
        &self.field
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        if self.approx.abs() > self.err {
            return false;
        }
        self.c.iter().all(|x| x.is_zero())
    }

    /// Exact sign, by refining the isolating interval until the interval
    /// value of the element excludes zero.
    pub fn signum(&self) -> i32 {
        if self.err.is_finite() && self.approx.abs() > self.err {
            return if self.approx > 0.0 { 1 } else { -1 };
        }
        if self.is_zero() {
            return 0;
        }
        let p = trim(self.c.clone());
        if p.len() == 1 {
            return if p[0].is_positive() { 1 } else { -1 };
        }
        if let Some(r) = self.field.is_root_rational() {
            let v = poly_eval(&p, &r);
            return if v.is_positive() {
                1
            } else if v.is_negative() {
                -1
            } else {
                0
            };
        }
        // λ is irrational; the element vanishes iff gcd(p, m) vanishes at λ.
        let g = poly_gcd(&p, &self.field.inner.poly);
        if g.len() > 1 {
            let (lo, hi) = self.field.root_interval();
            let (glo, ghi) = (poly_eval(&g, &lo), poly_eval(&g, &hi));
            if glo.is_zero() || ghi.is_zero() || glo.is_positive() != ghi.is_positive() {
                return 0;
            }
        }
        let mut bits = 64;
        loop {
            let (lo, hi) = self.field.refine_to(bits);
            let (a, b) = eval_interval(&p, &lo, &hi);
            if a.is_positive() {
                return 1;
            }
            if b.is_negative() {
                return -1;
            }
            if lo == hi {
                let v = poly_eval(&p, &lo);
                return if v.is_positive() { 1 } else if v.is_negative() { -1 } else { 0 };
            }
            bits += 64;
        }
    }

    pub fn is_positive(&self) -> bool {
        self.signum() > 0
    }

    pub fn is_negative(&self) -> bool {
        self.signum() < 0
    }

    pub fn abs(&self) -> FieldElem {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    pub fn inv(&self) -> Option<FieldElem> {
        if self.signum() == 0 {
            return None;
        }
        let m = self.field.inner.poly.clone();
        let (mut r0, mut r1) = (m, trim(self.c.clone()));
        let (mut s0, mut s1): (Poly, Poly) = (vec![], vec![BigRational::one()]);
        while !r1.is_empty() {
            let (qt, r) = poly_divmod(&r0, &r1);
            let s = poly_sub(&s0, &poly_mul(&qt, &s1));
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s;
        }
        // r0 is a nonzero constant when gcd is trivial.
        if r0.len() != 1 {
            return None;
        }
        let k = r0[0].clone();
        Some(self.field.reduce(s0.into_iter().map(|c| c / &k).collect()))
    }

    pub fn to_f64(&self) -> f64 {
        if self.err.is_finite() {
            return self.approx;
        }
        let (lo, hi) = self.field.refine_to(80);
        let mid = (lo + hi) / q(2);
        poly_eval(&self.c, &mid).to_f64().unwrap_or(f64::NAN)
    }

    /// Integer power (negative exponents invert).
    pub fn pow(&self, n: i32) -> Option<FieldElem> {
        let base = if n < 0 { self.inv()? } else { self.clone() };
        let mut out = self.field.one();
        for _ in 0..n.unsigned_abs() {
            out = &out * &base;
        }
        Some(out)
    }
}

impl Add for &FieldElem {
    type Output = FieldElem;
    fn add(self, o: &FieldElem) -> FieldElem {
        let v = self.approx + o.approx;
        FieldElem {
            field: self.field.clone(),
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
            approx: v,
            err: sum_bound(v, self.err, o.err),
        }
    }
}

impl Sub for &FieldElem {
    type Output = FieldElem;
    fn sub(self, o: &FieldElem) -> FieldElem {
        let v = self.approx - o.approx;
        FieldElem {
            field: self.field.clone(),
            c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect(),
            approx: v,
            err: sum_bound(v, self.err, o.err),
        }
    }
}

impl Neg for &FieldElem {
    type Output = FieldElem;
    fn neg(self) -> FieldElem {
        FieldElem { field: self.field.clone(), c: self.c.iter().map(|a| -a).collect(), approx: -self.approx, err: self.err }
    }
}

impl Mul for &FieldElem {
    type Output = FieldElem;
    fn mul(self, o: &FieldElem) -> FieldElem {
        let v = self.approx * o.approx;
        let err = self.approx.abs() * o.err + o.approx.abs() * self.err + self.err * o.err + v.abs() * ROUND;
        let c = if self.field.degree() == 1 {
            vec![&self.c[0] * &o.c[0]]
        } else {
            let mut c = poly_rem(&poly_mul(&self.c, &o.c), &self.field.inner.poly);
            c.resize(self.field.degree(), BigRational::zero());
            c
        };
        let (approx, err) = if v.is_finite() && err.is_finite() { (v, err) } else { (0.0, f64::INFINITY) };
        FieldElem { field: self.field.clone(), c, approx, err }
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr for FieldElem {
            type Output = FieldElem;
            fn $m(self, o: FieldElem) -> FieldElem {
                (&self).$m(&o)
            }
        }
        impl $tr<&FieldElem> for FieldElem {
            type Output = FieldElem;
            fn $m(self, o: &FieldElem) -> FieldElem {
                (&self).$m(o)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl Neg for FieldElem {
    type Output = FieldElem;
    fn neg(self) -> FieldElem {
        -&self
    }
}
