//! Real intervals and complex rectangles with outward rounding.
//!
//! Rounding is done in software: every arithmetic result computed in
//! round-to-nearest is widened by one ulp in each direction with
//! `next_down` / `next_up`. A correctly rounded result is within half an ulp
//! of the exact value, so the widened interval always encloses it.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

fn down(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x.next_down()
    }
}

fn up(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x.next_up()
    }
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan(), "inverted interval");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// `[x - r, x + r]`, rounded outward.
    pub fn around(x: f64, r: f64) -> Self {
        Interval { lo: down(x - r), hi: up(x + r) }
    }

    pub fn is_valid(&self) -> bool {
        self.lo <= self.hi && !self.lo.is_nan() && !self.hi.is_nan()
    }

    pub fn width(&self) -> f64 {
        up(self.hi - self.lo)
    }

    pub fn mid(&self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && 0.0 <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// `self ⊆ other`.
    pub fn subset(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// `self` lies in the interior of `other`.
    pub fn strict_subset(&self, other: &Interval) -> bool {
        other.lo < self.lo && self.hi < other.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let r = Interval { lo: self.lo.max(other.lo), hi: self.hi.min(other.hi) };
        (r.lo <= r.hi).then_some(r)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn abs_max(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn abs_min(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn sqr(self) -> Interval {
        let (a, b) = (self.lo * self.lo, self.hi * self.hi);
        if self.contains_zero() {
            Interval { lo: 0.0, hi: up(a.max(b)) }
        } else {
            Interval { lo: down(a.min(b)).max(0.0), hi: up(a.max(b)) }
        }
    }

    pub fn recip(self) -> Interval {
        if self.contains_zero() {
            return Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
        }
        Interval { lo: down(1.0 / self.hi), hi: up(1.0 / self.lo) }
    }

    pub fn sqrt(self) -> Interval {
        Interval { lo: down(self.lo.max(0.0).sqrt()).max(0.0), hi: up(self.hi.max(0.0).sqrt()) }
    }

    /// Natural logarithm of a positive interval. The platform `ln` is
    /// faithful to within one ulp; two extra ulps are added on each side.
    pub fn ln(self) -> Interval {
        if self.lo <= 0.0 {
            return Interval { lo: f64::NEG_INFINITY, hi: up(up(up(self.hi.ln()))) };
        }
        Interval { lo: down(down(down(self.lo.ln()))), hi: up(up(up(self.hi.ln()))) }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval { lo: down(self.lo + o.lo), hi: up(self.hi + o.hi) }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval { lo: down(self.lo - o.hi), hi: up(self.hi - o.lo) }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        if p.iter().any(|x| x.is_nan()) {
            // 0 * inf
            return Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
        }
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo: down(lo), hi: up(hi) }
    }
}

impl Div for Interval {
    type Output = Interval;
    fn div(self, o: Interval) -> Interval {
        if o.contains_zero() {
            return Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
        }
        let p = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo: down(lo), hi: up(hi) }
    }
}

/// Axis-parallel rectangle in `C`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ComplexBox {
    pub re: Interval,
    pub im: Interval,
}

impl ComplexBox {
    pub fn point(z: Complex64) -> Self {
        ComplexBox { re: Interval::point(z.re), im: Interval::point(z.im) }
    }

    pub fn real(x: f64) -> Self {
        ComplexBox { re: Interval::point(x), im: Interval::ZERO }
    }

    pub fn around(z: Complex64, r: f64) -> Self {
        ComplexBox { re: Interval::around(z.re, r), im: Interval::around(z.im, r) }
    }

    pub fn from_endpoints(e: [f64; 4]) -> Self {
        ComplexBox { re: Interval { lo: e[0], hi: e[1] }, im: Interval { lo: e[2], hi: e[3] } }
    }

    pub fn endpoints(&self) -> [f64; 4] {
        [self.re.lo, self.re.hi, self.im.lo, self.im.hi]
    }

    pub fn is_valid(&self) -> bool {
        self.re.is_valid() && self.im.is_valid()
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(self.re.mid(), self.im.mid())
    }

    /// Half the larger side length.
    pub fn radius(&self) -> f64 {
        0.5 * self.re.width().max(self.im.width())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.re.contains(z.re) && self.im.contains(z.im)
    }

    pub fn subset(&self, other: &ComplexBox) -> bool {
        self.re.subset(&other.re) && self.im.subset(&other.im)
    }

    pub fn strict_subset(&self, other: &ComplexBox) -> bool {
        self.re.strict_subset(&other.re) && self.im.strict_subset(&other.im)
    }

    pub fn is_bounded(&self) -> bool {
        self.re.is_bounded() && self.im.is_bounded()
    }

    pub fn intersect(&self, other: &ComplexBox) -> Option<ComplexBox> {
        Some(ComplexBox { re: self.re.intersect(&other.re)?, im: self.im.intersect(&other.im)? })
    }

    /// Disjoint from the real axis (hence from 0 and 1) and bounded.
    pub fn is_nondegenerate(&self) -> bool {
        self.is_valid() && self.is_bounded() && !self.im.contains_zero()
    }

    pub fn contains_zero(&self) -> bool {
        self.re.contains_zero() && self.im.contains_zero()
    }

    pub fn norm_sqr(self) -> Interval {
        self.re.sqr() + self.im.sqr()
    }

    /// Enclosure of `|z|`.
    pub fn abs(self) -> Interval {
        self.norm_sqr().sqrt()
    }

    pub fn conj(self) -> ComplexBox {
        ComplexBox { re: self.re, im: -self.im }
    }

    pub fn recip(self) -> ComplexBox {
        let d = self.norm_sqr();
        if d.contains_zero() {
            let all = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
            return ComplexBox { re: all, im: all };
        }
        ComplexBox { re: self.re / d, im: -(self.im / d) }
    }

    pub fn powi(self, k: i64) -> ComplexBox {
        let base = if k < 0 { self.recip() } else { self };
        let mut result = ComplexBox::real(1.0);
        let mut b = base;
        let mut e = k.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = result * b;
            }
            e >>= 1;
            if e > 0 {
                b = b * b;
            }
        }
        result
    }
}

impl Add for ComplexBox {
    type Output = ComplexBox;
    fn add(self, o: ComplexBox) -> ComplexBox {
        ComplexBox { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for ComplexBox {
    type Output = ComplexBox;
    fn sub(self, o: ComplexBox) -> ComplexBox {
        ComplexBox { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Neg for ComplexBox {
    type Output = ComplexBox;
    fn neg(self) -> ComplexBox {
        ComplexBox { re: -self.re, im: -self.im }
    }
}

impl Mul for ComplexBox {
    type Output = ComplexBox;
    fn mul(self, o: ComplexBox) -> ComplexBox {
        ComplexBox { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
}

impl Div for ComplexBox {
    type Output = ComplexBox;
    fn div(self, o: ComplexBox) -> ComplexBox {
        let d = o.norm_sqr();
        if d.contains_zero() {
            let all = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
            return ComplexBox { re: all, im: all };
        }
        let n = self * o.conj();
        ComplexBox { re: n.re / d, im: n.im / d }
    }
}

/// Lowercase hexadecimal float literal, e.g. `-0x1.8p+1`; exact for every
/// finite `f64`.
pub fn to_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let mut digits = format!("{mant:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let frac = if digits.is_empty() { String::new() } else { format!(".{digits}") };
    let esign = if e >= 0 { "+" } else { "-" };
    format!("{sign}0x{lead}{frac}p{esign}{}", e.abs())
}

/// Parses the output of [`to_hex`].
pub fn from_hex(s: &str) -> Option<f64> {
    match s {
        "inf" => return Some(f64::INFINITY),
        "-inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let rest = rest.strip_prefix("0x")?;
    let (mant, exp) = rest.split_once('p')?;
    let e: i64 = exp.parse().ok()?;
    let (lead, frac) = match mant.split_once('.') {
        Some((l, f)) => (l, f),
        None => (mant, ""),
    };
    if frac.len() > 13 || !frac.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return None;
    }
    let lead: u64 = match lead {
        "0" => 0,
        "1" => 1,
        _ => return None,
    };
    let frac_bits = if frac.is_empty() { 0 } else { u64::from_str_radix(&format!("{frac:0<13}"), 16).ok()? };
    let bits = if lead == 0 {
        if frac_bits == 0 && e == 0 {
            0
        } else if e == -1022 {
            frac_bits
        } else {
            return None;
        }
    } else {
        if !(-1022..=1023).contains(&e) {
            return None;
        }
        (((e + 1023) as u64) << 52) | frac_bits
    };
    let v = f64::from_bits(bits);
    Some(if neg { -v } else { v })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_roundtrip() {
        for x in [0.0, -0.0, 1.0, -3.0, 0.1, 1e-310, f64::MAX, f64::MIN_POSITIVE, 5e-324, 2.5e17] {
            let s = to_hex(x);
            assert_eq!(from_hex(&s).unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(to_hex(3.0), "0x1.8p+1");
        assert_eq!(to_hex(-0.5), "-0x1p-1");
        assert!(from_hex("0x2p+1").is_none());
    }

    #[test]
    fn basic_enclosures() {
        let third = Interval::ONE / Interval::point(3.0);
        assert!(third.lo < 1.0 / 3.0 + 1e-17 && third.hi > 1.0 / 3.0 - 1e-17);
        assert!(third.lo < third.hi);
        let z = ComplexBox::point(Complex64::new(0.5, 0.8));
        let w = z * z.recip();
        assert!(w.contains(Complex64::new(1.0, 0.0)));
        assert!(z.powi(-3).contains(Complex64::new(0.5, 0.8).powi(-3)));
    }
}
