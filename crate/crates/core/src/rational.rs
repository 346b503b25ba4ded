//! Exact rational numbers.
//!
//! Values whose reduced numerator fits in an `i64` and denominator in a `u64`
//! are stored inline and operated on with `i128` intermediates; everything
//! else falls back to `BigInt` pairs. The representation is canonical, so
//! derived equality and hashing are value equality.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rational(Repr);

#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    /// `den >= 1`, `gcd(|num|, den) == 1`.
    Small { num: i64, den: u64 },
    /// Reduced, `den > 0`, and not representable as `Small`.
    Big { num: BigInt, den: BigInt },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    gcd_u128(a as u128, b as u128) as u64
}

/// gcd that short-circuits through a machine-word remainder when either side is small.
fn gcd_big(a: &BigInt, b: &BigInt) -> BigInt {
    if let Some(s) = b.magnitude().to_u64() {
        if s == 0 {
            return a.abs();
        }
        let r = (a.magnitude() % s).to_u64().unwrap_or(0);
        return BigInt::from(gcd_u64(s, r));
    }
    if let Some(s) = a.magnitude().to_u64() {
        if s == 0 {
            return b.abs();
        }
        let r = (b.magnitude() % s).to_u64().unwrap_or(0);
        return BigInt::from(gcd_u64(s, r));
    }
    a.gcd(b)
}

impl Rational {
    pub fn zero() -> Self {
        Rational(Repr::Small { num: 0, den: 1 })
    }

    pub fn one() -> Self {
        Rational(Repr::Small { num: 1, den: 1 })
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(Repr::Small { num: n, den: 1 })
    }

    /// `num / den`, reduced. Panics on a zero denominator.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Self::from_i128(num as i128, den as i128)
    }

    pub fn from_bigints(num: BigInt, den: BigInt) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        let (num, den) = if den.is_negative() { (-num, -den) } else { (num, den) };
        let g = gcd_big(&num, &den);
        if g.is_one() {
            Self::from_reduced_big(num, den)
        } else {
            Self::from_reduced_big(num / &g, den / &g)
        }
    }

    pub(crate) fn from_i128(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        if num == i128::MIN || den == i128::MIN {
            return Self::from_bigints(BigInt::from(num), BigInt::from(den));
        }
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = gcd_u128(num.unsigned_abs(), den as u128) as i128;
        let (num, den) = if g > 1 { (num / g, den / g) } else { (num, den) };
        Self::from_reduced_i128(num, den as u128)
    }

    fn from_reduced_i128(num: i128, den: u128) -> Self {
        if num == 0 {
            return Rational::zero();
        }
        match (i64::try_from(num), u64::try_from(den)) {
            (Ok(num), Ok(den)) => Rational(Repr::Small { num, den }),
            _ => Rational(Repr::Big { num: BigInt::from(num), den: BigInt::from(den) }),
        }
    }

    fn from_reduced_big(num: BigInt, den: BigInt) -> Self {
        if num.is_zero() {
            return Rational::zero();
        }
        match (num.to_i64(), den.to_u64()) {
            (Some(num), Some(den)) => Rational(Repr::Small { num, den }),
            _ => Rational(Repr::Big { num, den }),
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small { num, .. } => BigInt::from(*num),
            Repr::Big { num, .. } => num.clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small { den, .. } => BigInt::from(*den),
            Repr::Big { den, .. } => den.clone(),
        }
    }

    /// The inline `(num, den)` pair when the value is word-sized.
    pub fn as_small(&self) -> Option<(i64, u64)> {
        match self.0 {
            Repr::Small { num, den } => Some((num, den)),
            Repr::Big { .. } => None,
        }
    }

    fn big_parts(&self) -> (BigInt, BigInt) {
        (self.numer(), self.denom())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small { num: 0, .. })
    }

    pub fn is_positive(&self) -> bool {
        match &self.0 {
            Repr::Small { num, .. } => *num > 0,
            Repr::Big { num, .. } => num.is_positive(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small { num, .. } => *num < 0,
            Repr::Big { num, .. } => num.is_negative(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small { den, .. } => *den == 1,
            Repr::Big { den, .. } => den.is_one(),
        }
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        match self.0 {
            Repr::Small { num, den } => Self::from_i128(den as i128, num as i128),
            Repr::Big { ref num, ref den } => {
                let (n, d) = if num.is_negative() { (-den.clone(), -num.clone()) } else { (den.clone(), num.clone()) };
                Self::from_reduced_big(n, d)
            }
        }
    }

    pub fn floor(&self) -> BigInt {
        match self.0 {
            Repr::Small { num, den } => BigInt::from(Integer::div_floor(&(num as i128), &(den as i128))),
            Repr::Big { ref num, ref den } => num.div_floor(den),
        }
    }

    pub fn ceil(&self) -> BigInt {
        -(-self).floor()
    }

    /// Integer power; negative exponents invert.
    pub fn pow(&self, exp: i32) -> Self {
        let mut base = if exp < 0 { self.recip() } else { self.clone() };
        let mut e = exp.unsigned_abs();
        let mut acc = Rational::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Lossy conversion, for display and plotting columns only.
    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small { num, den } => *num as f64 / *den as f64,
            Repr::Big { num, den } => {
                let shift = num.bits().max(den.bits()).saturating_sub(1000) as usize;
                let n = (num >> shift).to_f64().unwrap_or(f64::NAN);
                let d = (den >> shift).to_f64().unwrap_or(f64::NAN);
                n / d
            }
        }
    }

    /// `(num_string, den_string)` for column-split output.
    pub fn parts_string(&self) -> (String, String) {
        (self.numer().to_string(), self.denom().to_string())
    }

    /// Exact sum that batches word-sized terms by denominator before
    /// combining, which keeps long sums of small fractions off the bignum path.
    pub fn sum_exact<I>(iter: I) -> Rational
    where
        I: IntoIterator<Item = Rational>,
    {
        let mut groups: BTreeMap<u64, i128> = BTreeMap::new();
        let mut big = Rational::zero();
        for r in iter {
            match r.0 {
                Repr::Small { num, den } => {
                    let slot = groups.entry(den).or_insert(0);
                    match slot.checked_add(num as i128) {
                        Some(v) => *slot = v,
                        None => {
                            big += Rational::from_i128(*slot, den as i128);
                            *slot = num as i128;
                        }
                    }
                }
                Repr::Big { .. } => big += r,
            }
        }
        let mut total = big;
        for (den, num) in groups {
            if num != 0 {
                total += Rational::from_i128(num, den as i128);
            }
        }
        total
    }

    fn add_ref(a: &Rational, b: &Rational) -> Rational {
        if let (Repr::Small { num: an, den: ad }, Repr::Small { num: bn, den: bd }) = (&a.0, &b.0) {
            if let Some(r) = small_add(*an, *ad, *bn, *bd) {
                return r;
            }
        }
        let (an, ad) = a.big_parts();
        let (bn, bd) = b.big_parts();
        // a/b + c/d with g = gcd(b, d); the reduction factor divides g.
        let g = gcd_big(&ad, &bd);
        if g.is_one() {
            let num = &an * &bd + &bn * &ad;
            return Rational::from_reduced_big(num, ad * bd);
        }
        let ad_g = &ad / &g;
        let bd_g = &bd / &g;
        let t = &an * &bd_g + &bn * &ad_g;
        let g2 = gcd_big(&t, &g);
        if g2.is_one() {
            Rational::from_reduced_big(t, ad_g * bd)
        } else {
            Rational::from_reduced_big(t / &g2, ad_g * (bd / g2))
        }
    }

    fn mul_ref(a: &Rational, b: &Rational) -> Rational {
        if let (Repr::Small { num: an, den: ad }, Repr::Small { num: bn, den: bd }) = (&a.0, &b.0) {
            let g1 = gcd_u64(an.unsigned_abs(), *bd).max(1);
            let g2 = gcd_u64(bn.unsigned_abs(), *ad).max(1);
            let num = (*an as i128 / g1 as i128) * (*bn as i128 / g2 as i128);
            let den = (*ad as u128 / g2 as u128) * (*bd as u128 / g1 as u128);
            return Rational::from_reduced_i128(num, den);
        }
        if a.is_zero() || b.is_zero() {
            return Rational::zero();
        }
        let (an, ad) = a.big_parts();
        let (bn, bd) = b.big_parts();
        let g1 = gcd_big(&an, &bd);
        let g2 = gcd_big(&bn, &ad);
        let num = (an / &g1) * (bn / &g2);
        let den = (ad / g2) * (bd / g1);
        Rational::from_reduced_big(num, den)
    }
}

fn small_add(an: i64, ad: u64, bn: i64, bd: u64) -> Option<Rational> {
    if ad == bd {
        return Some(Rational::from_i128(an as i128 + bn as i128, ad as i128));
    }
    let g = gcd_u64(ad, bd);
    let ad_g = (ad / g) as i128;
    let bd_g = (bd / g) as i128;
    let t = (an as i128).checked_mul(bd_g)?.checked_add((bn as i128).checked_mul(ad_g)?)?;
    let g2 = gcd_u128(t.unsigned_abs(), g as u128) as i128;
    let g2 = g2.max(1);
    let den = (ad_g as u128).checked_mul((bd as u128) / g2 as u128)?;
    Some(Rational::from_reduced_i128(t / g2, den))
}

impl Default for Rational {
    fn default() -> Self {
        Rational::zero()
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Rational::from_integer(v)
    }
}

impl From<i32> for Rational {
    fn from(v: i32) -> Self {
        Rational::from_integer(v as i64)
    }
}

impl From<u64> for Rational {
    fn from(v: u64) -> Self {
        Rational::from_i128(v as i128, 1)
    }
}

impl From<u32> for Rational {
    fn from(v: u32) -> Self {
        Rational::from_integer(v as i64)
    }
}

impl From<BigInt> for Rational {
    fn from(v: BigInt) -> Self {
        Rational::from_reduced_big(v, BigInt::one())
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        if let (Repr::Small { num: an, den: ad }, Repr::Small { num: bn, den: bd }) = (&self.0, &other.0) {
            if ad == bd {
                return an.cmp(bn);
            }
            return (*an as i128 * *bd as i128).cmp(&(*bn as i128 * *ad as i128));
        }
        let (an, ad) = self.big_parts();
        let (bn, bd) = other.big_parts();
        (an * bd).cmp(&(bn * ad))
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        -&self
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match &self.0 {
            Repr::Small { num, den } => Rational::from_reduced_i128(-(*num as i128), *den as u128),
            Repr::Big { num, den } => Rational::from_reduced_big(-num.clone(), den.clone()),
        }
    }
}

macro_rules! forward_binop {
    ($imp:ident, $method:ident, $assign_imp:ident, $assign_method:ident, $body:expr) => {
        impl $imp<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                let f: fn(&Rational, &Rational) -> Rational = $body;
                f(self, rhs)
            }
        }
        impl $imp<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                (&self).$method(&rhs)
            }
        }
        impl $imp<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                (&self).$method(rhs)
            }
        }
        impl $imp<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                self.$method(&rhs)
            }
        }
        impl $assign_imp<&Rational> for Rational {
            fn $assign_method(&mut self, rhs: &Rational) {
                *self = (&*self).$method(rhs);
            }
        }
        impl $assign_imp<Rational> for Rational {
            fn $assign_method(&mut self, rhs: Rational) {
                *self = (&*self).$method(&rhs);
            }
        }
    };
}

forward_binop!(Add, add, AddAssign, add_assign, |a, b| Rational::add_ref(a, b));
forward_binop!(Sub, sub, SubAssign, sub_assign, |a, b| Rational::add_ref(a, &-b));
forward_binop!(Mul, mul, MulAssign, mul_assign, |a, b| Rational::mul_ref(a, b));
forward_binop!(Div, div, DivAssign, div_assign, |a, b| Rational::mul_ref(a, &b.recip()));

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        Rational::sum_exact(iter)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        Rational::sum_exact(iter.cloned())
    }
}

impl Product for Rational {
    fn product<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::one(), |acc, x| acc * x)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small { num, den } => write!(f, "{num}/{den}"),
            Repr::Big { num, den } => write!(f, "{num}/{den}"),
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `a/b`, integers, and finite decimals such as `0.125`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        let bad = || ParseRationalError::Invalid(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(ParseRationalError::ZeroDenominator(s.to_string()));
            }
            return Ok(Rational::from_bigints(n, d));
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let negative = int.starts_with('-');
            let int_part: BigInt = match int {
                "" | "-" | "+" => BigInt::zero(),
                _ => int.parse().map_err(|_| bad())?,
            };
            let frac_num: BigInt = frac.parse().map_err(|_| bad())?;
            let scale = num_traits::pow(BigInt::from(10u32), frac.len());
            let mut num = int_part.abs() * &scale + frac_num;
            if negative {
                num = -num;
            }
            return Ok(Rational::from_bigints(num, scale));
        }
        let n: BigInt = s.parse().map_err(|_| bad())?;
        Ok(Rational::from(n))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(i) => Ok(Rational::from_integer(i)),
        }
    }
}

/// Convenience constructor used throughout tests and examples.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(num, den)
}
