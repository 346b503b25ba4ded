//! Certified enclosures for the transcendental quantities the experiments
//! need (`exp`, `ln`, `sqrt`), using rational intervals whose endpoints are
//! rounded outward to a dyadic grid.
//!
//! Series are evaluated in fixed point: a value `v` at scale `w` is the
//! integer pair `(floor(v * 2^w), ceil(v * 2^w))` and every truncation rounds
//! away from the true value, so the final pair always brackets it.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rational::Rational;

/// Working precision, in bits after the binary point.
pub const DEFAULT_PRECISION: u32 = 128;
/// Escalation stops here with [`Undecided`].
pub const MAX_PRECISION: u32 = 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("comparison undecided at {precision} bits")]
pub struct Undecided {
    pub precision: u32,
}

/// Serialized as the string `"[lo, hi]"`.
#[derive(Clone, PartialEq, Eq)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(r: Rational) -> Self {
        Interval { lo: r.clone(), hi: r }
    }

    pub fn zero() -> Self {
        Self::point(Rational::zero())
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, r: &Rational) -> bool {
        &self.lo <= r && r <= &self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// `Some` only when every point of the interval compares the same way.
    pub fn cmp_rational(&self, r: &Rational) -> Option<Ordering> {
        if &self.hi < r {
            Some(Ordering::Less)
        } else if &self.lo > r {
            Some(Ordering::Greater)
        } else if self.is_point() {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// Every point of `self` is `<=` every point of `other`.
    pub fn certainly_le(&self, other: &Interval) -> bool {
        self.hi <= other.lo
    }

    pub fn certainly_lt(&self, other: &Interval) -> bool {
        self.hi < other.lo
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval { lo: &self.lo + &other.lo, hi: &self.hi + &other.hi }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        Interval { lo: &self.lo - &other.hi, hi: &self.hi - &other.lo }
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: -&self.hi, hi: -&self.lo }
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        let c = [&self.lo * &other.lo, &self.lo * &other.hi, &self.hi * &other.lo, &self.hi * &other.hi];
        let lo = c.iter().min().cloned().unwrap_or_default();
        let hi = c.iter().max().cloned().unwrap_or_default();
        Interval { lo, hi }
    }

    pub fn scale(&self, r: &Rational) -> Interval {
        self.mul(&Interval::point(r.clone()))
    }

    /// Reciprocal of an interval not containing zero.
    pub fn recip(&self) -> Interval {
        assert!(
            self.lo.is_positive() || self.hi.is_negative(),
            "reciprocal of interval containing zero"
        );
        Interval { lo: self.hi.recip(), hi: self.lo.recip() }
    }

    pub fn div(&self, other: &Interval) -> Interval {
        self.mul(&other.recip())
    }

    pub fn max_rational(&self, r: &Rational) -> Interval {
        Interval { lo: self.lo.clone().max(r.clone()), hi: self.hi.clone().max(r.clone()) }
    }

    pub fn min_rational(&self, r: &Rational) -> Interval {
        Interval { lo: self.lo.clone().min(r.clone()), hi: self.hi.clone().min(r.clone()) }
    }

    pub fn clamp(&self, lo: &Rational, hi: &Rational) -> Interval {
        self.max_rational(lo).min_rational(hi)
    }

    /// Snaps the endpoints outward onto the grid `2^-bits`.
    pub fn round_outward(&self, bits: u32) -> Interval {
        if self.is_point() && is_dyadic_within(&self.lo, bits) {
            return self.clone();
        }
        Interval {
            lo: from_fixed(&fixed_floor(&self.lo, bits), bits),
            hi: from_fixed(&fixed_ceil(&self.hi, bits), bits),
        }
    }

    /// Floor of the enclosed value when it is the same across the interval.
    pub fn floor_if_decided(&self) -> Option<BigInt> {
        let a = self.lo.floor();
        let b = self.hi.floor();
        (a == b).then_some(a)
    }

    pub fn midpoint_f64(&self) -> f64 {
        ((&self.lo + &self.hi) / Rational::from_integer(2)).to_f64()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let s = String::deserialize(deserializer)?;
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| D::Error::custom("expected \"[lo, hi]\""))?;
        let (lo, hi) = inner.split_once(',').ok_or_else(|| D::Error::custom("expected \"[lo, hi]\""))?;
        let lo: Rational = lo.trim().parse().map_err(D::Error::custom)?;
        let hi: Rational = hi.trim().parse().map_err(D::Error::custom)?;
        if lo > hi {
            return Err(D::Error::custom("interval endpoints out of order"));
        }
        Ok(Interval::new(lo, hi))
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} ~ {:.6e}, {}]", self.lo, self.midpoint_f64(), self.hi)
    }
}

fn is_dyadic_within(r: &Rational, bits: u32) -> bool {
    let den = r.denom();
    den.is_one() || (den.magnitude().count_ones() == 1 && den.bits() <= bits as u64 + 1)
}

fn pow2(bits: u32) -> BigInt {
    BigInt::one() << bits as usize
}

/// `floor(r * 2^w)`.
pub(crate) fn fixed_floor(r: &Rational, w: u32) -> BigInt {
    (r.numer() << w as usize).div_floor(&r.denom())
}

/// `ceil(r * 2^w)`.
pub(crate) fn fixed_ceil(r: &Rational, w: u32) -> BigInt {
    -((-(r.numer()) << w as usize).div_floor(&r.denom()))
}

pub(crate) fn from_fixed(v: &BigInt, w: u32) -> Rational {
    Rational::from_bigints(v.clone(), pow2(w))
}

fn shr_floor(v: &BigInt, w: u32) -> BigInt {
    v.div_floor(&pow2(w))
}

fn shr_ceil(v: &BigInt, w: u32) -> BigInt {
    -((-v).div_floor(&pow2(w)))
}

/// `atanh(u) = sum u^(2i+1)/(2i+1)` for `0 <= u <= 1/2`, fixed point at scale `w`.
fn atanh_fixed(u: &Rational, w: u32) -> (BigInt, BigInt) {
    debug_assert!(!u.is_negative() && u <= &Rational::new(1, 2));
    let ul = fixed_floor(u, w);
    let uh = fixed_ceil(u, w);
    if uh.is_zero() {
        return (BigInt::zero(), BigInt::zero());
    }
    let u2l = shr_floor(&(&ul * &ul), w);
    let u2h = shr_ceil(&(&uh * &uh), w);
    let (mut pl, mut ph) = (ul, uh);
    let (mut sl, mut sh) = (BigInt::zero(), BigInt::zero());
    let mut i: u64 = 0;
    loop {
        let k = BigInt::from(2 * i + 1);
        sl += pl.div_floor(&k);
        sh += -((-&ph).div_floor(&k));
        pl = shr_floor(&(&pl * &u2l), w);
        ph = shr_ceil(&(&ph * &u2h), w);
        i += 1;
        if ph <= BigInt::one() {
            // Tail bounded by a geometric series with ratio u^2 <= 1/4.
            sh += 2 * &ph + 2;
            break;
        }
    }
    (sl, sh)
}

/// Enclosure of `ln 2` at scale `w`.
fn ln2_fixed(w: u32) -> (BigInt, BigInt) {
    let (l, h) = atanh_fixed(&Rational::new(1, 3), w);
    (2 * l, 2 * h)
}

/// `k` with `2^k <= x < 2^(k+1)`.
fn floor_log2(x: &Rational) -> i64 {
    let n = x.numer();
    let d = x.denom();
    let mut k = n.bits() as i64 - d.bits() as i64;
    let ge = |k: i64| -> bool {
        if k >= 0 {
            n >= (&d << k as usize)
        } else {
            (&n << (-k) as usize) >= d
        }
    };
    while !ge(k) {
        k -= 1;
    }
    while ge(k + 1) {
        k += 1;
    }
    k
}

fn pow2_rational(k: i64) -> Rational {
    if k >= 0 {
        Rational::from(pow2(k as u32))
    } else {
        Rational::from_bigints(BigInt::one(), pow2((-k) as u32))
    }
}

/// Enclosure of `ln x` for rational `x > 0`.
pub fn ln(x: &Rational, prec: u32) -> Interval {
    assert!(x.is_positive(), "ln of non-positive {x}");
    if x == &Rational::one() {
        return Interval::zero();
    }
    let w = prec + 32;
    let k = floor_log2(x);
    let p = pow2_rational(k);
    // x = 2^k m with m in [1,2); ln m = 2 atanh((m-1)/(m+1)).
    let u = (x - &p) / (x + &p);
    let (al, ah) = atanh_fixed(&u, w);
    let (l2l, l2h) = ln2_fixed(w);
    let kb = BigInt::from(k);
    let (kl, kh) = if k >= 0 { (&kb * &l2l, &kb * &l2h) } else { (&kb * &l2h, &kb * &l2l) };
    let lo = 2 * al + kl;
    let hi = 2 * ah + kh;
    Interval::new(from_fixed(&lo, w), from_fixed(&hi, w)).round_outward(prec)
}

/// Enclosure of `ln` over a positive interval (monotone).
pub fn ln_interval(x: &Interval, prec: u32) -> Interval {
    Interval::new(ln(x.lo(), prec).lo, ln(x.hi(), prec).hi)
}

/// Enclosure of `exp x` for rational `x`.
pub fn exp(x: &Rational, prec: u32) -> Interval {
    if x.is_zero() {
        return Interval::point(Rational::one());
    }
    if x.is_negative() {
        let e = exp(&-x, prec + 8);
        return e.recip().round_outward(prec);
    }
    let half = Rational::new(1, 2);
    let mut s: u32 = 0;
    let mut y = x.clone();
    while y > half {
        y /= Rational::from_integer(2);
        s += 1;
    }
    let w = prec + 2 * s + 32;
    let yl = fixed_floor(&y, w);
    let yh = fixed_ceil(&y, w);
    let one = pow2(w);
    let (mut tl, mut th) = (one.clone(), one.clone());
    let (mut sl, mut sh) = (one.clone(), one);
    let mut k: u64 = 1;
    loop {
        let kk = BigInt::from(k) << w as usize;
        tl = (&tl * &yl).div_floor(&kk);
        th = -((-(&th * &yh)).div_floor(&kk));
        sl += &tl;
        sh += &th;
        k += 1;
        if th <= BigInt::one() {
            // Remaining terms shrink by a factor <= y/(k+1) <= 1/4.
            sh += 2 * &th + 2;
            break;
        }
    }
    for _ in 0..s {
        sl = shr_floor(&(&sl * &sl), w);
        sh = shr_ceil(&(&sh * &sh), w);
    }
    Interval::new(from_fixed(&sl, w), from_fixed(&sh, w)).round_outward(prec)
}

/// Enclosure of `exp` over an interval (monotone).
pub fn exp_interval(x: &Interval, prec: u32) -> Interval {
    Interval::new(exp(x.lo(), prec).lo, exp(x.hi(), prec).hi)
}

fn exact_sqrt(n: &BigInt) -> Option<BigInt> {
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

/// Enclosure of `sqrt x` for rational `x >= 0`; exact when `x` is a square.
pub fn sqrt(x: &Rational, prec: u32) -> Interval {
    assert!(!x.is_negative(), "sqrt of negative {x}");
    if let (Some(a), Some(b)) = (exact_sqrt(&x.numer()), exact_sqrt(&x.denom())) {
        return Interval::point(Rational::from_bigints(a, b));
    }
    let lo_sq = fixed_floor(x, 2 * prec);
    let hi_sq = fixed_ceil(x, 2 * prec);
    let lo = lo_sq.sqrt();
    let hi = hi_sq.sqrt() + 1;
    Interval::new(from_fixed(&lo, prec), from_fixed(&hi, prec))
}

/// Enclosure of `1 / sqrt x` for rational `x > 0`.
pub fn inv_sqrt(x: &Rational, prec: u32) -> Interval {
    assert!(x.is_positive(), "inv_sqrt of non-positive {x}");
    sqrt(&x.recip(), prec)
}

pub fn sqrt_interval(x: &Interval, prec: u32) -> Interval {
    Interval::new(sqrt(x.lo(), prec).lo, sqrt(x.hi(), prec).hi)
}

pub fn inv_sqrt_interval(x: &Interval, prec: u32) -> Interval {
    Interval::new(inv_sqrt(x.hi(), prec).lo, inv_sqrt(x.lo(), prec).hi)
}

/// Re-runs `attempt` at 128, 256, 512 and 1024 bits until it decides.
pub fn decide<T>(mut attempt: impl FnMut(u32) -> Option<T>) -> Result<T, Undecided> {
    let mut prec = DEFAULT_PRECISION;
    loop {
        if let Some(v) = attempt(prec) {
            return Ok(v);
        }
        if prec >= MAX_PRECISION {
            return Err(Undecided { precision: prec });
        }
        prec *= 2;
    }
}

/// Compares `r` with `e^j`.
pub fn cmp_exp(r: &Rational, j: i64) -> Result<Ordering, Undecided> {
    decide(|prec| exp(&Rational::from_integer(j), prec).cmp_rational(r).map(Ordering::reverse))
}

/// `floor(ln r)` for rational `r > 0`.
pub fn floor_ln(r: &Rational) -> Result<i64, Undecided> {
    decide(|prec| ln(r, prec).floor_if_decided()).map(|v| v.to_i64().expect("ln out of range"))
}

/// Floor of a quantity given by a precision-indexed enclosure.
pub fn floor_of(mut enclosure: impl FnMut(u32) -> Interval) -> Result<BigInt, Undecided> {
    decide(|prec| enclosure(prec).floor_if_decided())
}

/// Enclosure of `e^e`.
pub fn exp_e(prec: u32) -> Interval {
    exp_interval(&exp(&Rational::one(), prec + 16), prec)
}

/// Certified `r >= e^e`.
pub fn at_least_exp_e(r: &Rational) -> Result<bool, Undecided> {
    decide(|prec| exp_e(prec).cmp_rational(r).map(|o| o != Ordering::Greater))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn interval_serializes_as_bracket_string() {
        let i = Interval::new(rat(-1, 3), rat(5, 2));
        let s = serde_json::to_string(&i).unwrap();
        assert_eq!(s, "\"[-1/3, 5/2]\"");
        assert_eq!(serde_json::from_str::<Interval>(&s).unwrap(), i);
        assert!(serde_json::from_str::<Interval>("\"[1, 0]\"").is_err());
    }

    fn f64_inside(i: &Interval, v: f64) {
        let lo = i.lo().to_f64();
        let hi = i.hi().to_f64();
        let tol = 1e-15 * v.abs().max(1.0);
        assert!(lo <= v + tol && v - tol <= hi, "{v} not in {i:?}");
    }

    #[test]
    fn ln_known_values() {
        let l2 = ln(&rat(2, 1), 128);
        f64_inside(&l2, std::f64::consts::LN_2);
        assert!(l2.width() < Rational::from_bigints(BigInt::one(), pow2(120)));
        f64_inside(&ln(&rat(16, 1), 128), 16f64.ln());
        f64_inside(&ln(&rat(1, 7), 128), (1.0f64 / 7.0).ln());
        f64_inside(&ln(&rat(1000, 3), 256), (1000.0f64 / 3.0).ln());
        assert_eq!(ln(&Rational::one(), 128), Interval::zero());
    }

    #[test]
    fn exp_known_values() {
        let e = exp(&Rational::one(), 128);
        f64_inside(&e, std::f64::consts::E);
        // Decimal digits of e well beyond f64 precision.
        let e_digits: Rational = "2.71828182845904523536028747135266249775724709369995".parse().unwrap();
        let slack = Rational::from_bigints(BigInt::one(), BigInt::from(10).pow(49));
        assert!(e.lo() <= &(&e_digits + &slack) && &(&e_digits - &slack) <= e.hi());
        f64_inside(&exp(&rat(-3, 2), 128), (-1.5f64).exp());
        f64_inside(&exp(&rat(40, 1), 128), 40f64.exp());
        assert_eq!(exp(&Rational::zero(), 128), Interval::point(Rational::one()));
    }

    #[test]
    fn exp_ln_roundtrip_encloses_input() {
        for x in [rat(3, 1), rat(1, 9), rat(123, 7), rat(5, 4)] {
            let l = ln(&x, 200);
            let back = exp_interval(&l, 200);
            assert!(back.contains(&x), "{x} not in {back:?}");
        }
    }

    #[test]
    fn sqrt_exact_and_inexact() {
        assert_eq!(sqrt(&rat(9, 16), 64), Interval::point(rat(3, 4)));
        let s = sqrt(&rat(2, 1), 128);
        f64_inside(&s, std::f64::consts::SQRT_2);
        assert!(s.lo() * s.lo() <= rat(2, 1) && rat(2, 1) <= s.hi() * s.hi());
        let r = inv_sqrt(&rat(9, 2), 128);
        f64_inside(&r, 1.0 / 4.5f64.sqrt());
    }

    #[test]
    fn comparisons_escalate() {
        assert_eq!(cmp_exp(&Rational::one(), 0), Ok(Ordering::Equal));
        assert_eq!(cmp_exp(&rat(271, 100), 1), Ok(Ordering::Less));
        assert_eq!(cmp_exp(&rat(272, 100), 1), Ok(Ordering::Greater));
        // 20 digits of e: needs more than f64 but well within 128 bits.
        let close: Rational = "2.7182818284590452354".parse().unwrap();
        assert_eq!(cmp_exp(&close, 1), Ok(Ordering::Greater));
        assert_eq!(floor_ln(&rat(16, 1)), Ok(2));
        assert_eq!(floor_ln(&Rational::one()), Ok(0));
        assert_eq!(floor_ln(&rat(1, 2)), Ok(-1));
        assert_eq!(at_least_exp_e(&rat(16, 1)), Ok(true));
        assert_eq!(at_least_exp_e(&rat(15, 1)), Ok(false));
    }
}
