//! Approximation sets in `L^d`, where `L = {f ∈ F_q((X^-1)) : |f| < 1}` and
//! `|f| = q^deg f`.
//!
//! An open ball `{|f − c| < q^-t}` is the set of `f` whose coefficients of
//! `X^-1, …, X^-t` agree with those of `c`, with Haar measure `q^-t`. Sets are
//! stored as prefix strings at a common depth.
//!
//! ```text
//! E_Q(Ψ)   = ∪_{deg P < deg Q, (P,Q)=1} B(P/Q, Ψ(Q)/|Q|)
//! H_Q^d(Ψ) = ∪_{deg P_i < deg Q, (P_1,…,P_d,Q)=1} Π_i B(P_i/Q, Ψ(Q)/|Q|)
//! ```

use std::collections::BTreeSet;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic;
use crate::poly::{self, Poly, PolyError};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LaurentError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("Q = {0} must be monic of degree at least 1")]
    BadModulus(Poly),
    #[error("Ψ = {0} is negative")]
    Negative(Rational),
    #[error("Ψ = {value} is not 0 or a power of {q}; round it down to {lower} or use a rounding policy")]
    NotAdmissible { value: Box<Rational>, q: u32, lower: Box<Rational> },
    #[error("Ψ = {0} must be 0 or a negative power of q here")]
    NotBelowOne(Rational),
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("sets over different (q, d)")]
    Mismatch,
    #[error("{0} prefixes exceed the enumeration cap")]
    TooLarge(u128),
    #[error("the two moduli coincide")]
    SameModulus,
    #[error("g must be nonzero")]
    ZeroScalar,
    #[error("scaling factor {0} must be at least 1")]
    ScaleBelowOne(Rational),
}

/// Largest number of prefixes or tuples ever enumerated.
pub const ENUMERATION_CAP: u128 = 1 << 22;

/// How a `Ψ` that is not a power of `q` becomes a ball radius.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusPolicy {
    /// Reject values that are not powers of `q`.
    #[default]
    Strict,
    /// Use the largest power of `q` below `Ψ`; shrinks the set.
    RoundDown,
    /// Use the smallest power of `q` at or above `Ψ`. An open ball of radius
    /// `r` equals the one of radius `q^ceil(log_q r)`, so this is exact.
    Literal,
}

/// `Ψ` as `q^exponent`; `None` when `Ψ = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exponent {
    pub exponent: Option<i64>,
    /// The value was not a power of `q`.
    pub rounded: bool,
}

pub fn psi_exponent(q: u32, psi: &Rational, policy: RadiusPolicy) -> Result<Exponent, LaurentError> {
    poly::check_field(q)?;
    if psi.is_negative() {
        return Err(LaurentError::Negative(psi.clone()));
    }
    if psi.is_zero() {
        return Ok(Exponent { exponent: None, rounded: false });
    }
    let z = padic::canonical_radius(q as u64, psi).expect("prime field and positive value");
    let exact = q_pow(q, z) == *psi;
    let exponent = match (exact, policy) {
        (true, _) | (false, RadiusPolicy::RoundDown) => z,
        (false, RadiusPolicy::Literal) => z + 1,
        (false, RadiusPolicy::Strict) => {
            return Err(LaurentError::NotAdmissible { value: Box::new(psi.clone()), q, lower: Box::new(q_pow(q, z)) });
        }
    };
    Ok(Exponent { exponent: Some(exponent), rounded: !exact })
}

fn q_pow(q: u32, e: i64) -> Rational {
    Rational::from(q as u64).pow(e as i32)
}

/// Measure of the open ball `{|f − c| < r}`: `q^ceil(log_q r)`, so `r <= ν <= q r`.
pub fn ball_measure(q: u32, r: &Rational) -> Result<Rational, LaurentError> {
    let e = psi_exponent(q, r, RadiusPolicy::Literal)?.exponent.ok_or(LaurentError::Negative(r.clone()))?;
    Ok(q_pow(q, e))
}

/// Coefficients of `X^-1, …, X^-t` in the expansion of `P/Q`, `deg P < deg Q`.
pub fn expansion_digits(p: &Poly, q_poly: &Poly, t: usize) -> Result<Vec<u32>, LaurentError> {
    let n = q_poly.degree().filter(|_| q_poly.is_monic()).ok_or_else(|| LaurentError::BadModulus(q_poly.clone()))?;
    let x = Poly::monomial(q_poly.q(), 1);
    let mut r = p.rem(q_poly)?;
    let mut out = Vec::with_capacity(t);
    for _ in 0..t {
        r = r.mul(&x)?;
        let c = r.coeff(n);
        out.push(c);
        if c != 0 {
            r = r.sub(&q_poly.scale(c))?;
        }
    }
    Ok(out)
}

/// Union of cubes `Π_i {f_i : first depth coefficients equal prefix_i}` in `L^d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaurentCubeSet {
    q: u32,
    d: u32,
    depth: u32,
    /// Each entry holds `d·depth` digits, coordinate by coordinate.
    prefixes: BTreeSet<Vec<u32>>,
}

impl LaurentCubeSet {
    pub fn empty(q: u32, d: u32) -> Self {
        LaurentCubeSet { q, d, depth: 0, prefixes: BTreeSet::new() }
    }

    pub fn whole(q: u32, d: u32) -> Self {
        LaurentCubeSet { q, d, depth: 0, prefixes: BTreeSet::from([Vec::new()]) }
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn prefixes(&self) -> impl Iterator<Item = &Vec<u32>> {
        self.prefixes.iter()
    }

    pub fn len(&self) -> usize {
        self.prefixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefixes.is_empty()
    }

    pub fn measure(&self) -> Rational {
        Rational::from_bigints(
            BigInt::from(self.prefixes.len()),
            BigInt::from(self.q).pow(self.d * self.depth),
        )
    }

    /// Same set at a deeper level.
    pub fn refine(&self, depth: u32) -> Result<LaurentCubeSet, LaurentError> {
        assert!(depth >= self.depth, "refine cannot coarsen");
        if depth == self.depth || self.prefixes.is_empty() {
            return Ok(LaurentCubeSet { depth, ..self.clone() });
        }
        let extra = (depth - self.depth) as usize;
        let fan = (self.q as u128).checked_pow((extra as u32) * self.d).unwrap_or(u128::MAX);
        let total = fan.saturating_mul(self.prefixes.len() as u128);
        if total > ENUMERATION_CAP {
            return Err(LaurentError::TooLarge(total));
        }
        let tails: Vec<Vec<u32>> = poly::polys_below(self.q, extra)
            .map(|p| (0..extra).map(|k| p.coeff(k)).collect())
            .collect();
        let old = self.depth as usize;
        let mut out = BTreeSet::new();
        for prefix in &self.prefixes {
            let mut partial: Vec<Vec<u32>> = vec![Vec::with_capacity(self.d as usize * depth as usize)];
            for i in 0..self.d as usize {
                let head = &prefix[i * old..(i + 1) * old];
                partial = partial
                    .into_iter()
                    .flat_map(|acc| {
                        tails.iter().map(move |tail| {
                            let mut v = acc.clone();
                            v.extend_from_slice(head);
                            v.extend_from_slice(tail);
                            v
                        })
                    })
                    .collect();
            }
            out.extend(partial);
        }
        Ok(LaurentCubeSet { q: self.q, d: self.d, depth, prefixes: out })
    }

    fn aligned(&self, other: &LaurentCubeSet) -> Result<(LaurentCubeSet, LaurentCubeSet), LaurentError> {
        if (self.q, self.d) != (other.q, other.d) {
            return Err(LaurentError::Mismatch);
        }
        let depth = self.depth.max(other.depth);
        Ok((self.refine(depth)?, other.refine(depth)?))
    }

    pub fn union(&self, other: &LaurentCubeSet) -> Result<LaurentCubeSet, LaurentError> {
        if other.is_empty() {
            return Ok(self.clone());
        }
        if self.is_empty() {
            return Ok(other.clone());
        }
        let (mut a, b) = self.aligned(other)?;
        a.prefixes.extend(b.prefixes);
        Ok(a)
    }

    pub fn intersection(&self, other: &LaurentCubeSet) -> Result<LaurentCubeSet, LaurentError> {
        if self.is_empty() || other.is_empty() {
            return Ok(LaurentCubeSet::empty(self.q, self.d));
        }
        let (a, b) = self.aligned(other)?;
        let prefixes = a.prefixes.intersection(&b.prefixes).cloned().collect();
        Ok(LaurentCubeSet { prefixes, ..a })
    }

    /// Membership of the cube whose coordinates start with `digits[i]`
    /// (each at least `depth` long).
    pub fn contains_cube(&self, digits: &[Vec<u32>]) -> bool {
        let k = self.depth as usize;
        let key: Vec<u32> = digits.iter().flat_map(|c| c[..k].iter().copied()).collect();
        self.prefixes.contains(&key)
    }
}

/// Which tuples `(P_1, …, P_d)` are used as centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coprimality {
    /// Each `P_i` coprime to `Q`: the power `E_Q(Ψ)^d`.
    Each,
    /// `gcd(P_1, …, P_d, Q) = 1`: the set `H_Q^d(Ψ)`.
    Joint,
}

fn check_modulus(q_poly: &Poly) -> Result<usize, LaurentError> {
    match q_poly.degree() {
        Some(n) if n >= 1 && q_poly.is_monic() => Ok(n),
        _ => Err(LaurentError::BadModulus(q_poly.clone())),
    }
}

fn build(
    q_poly: &Poly,
    psi: &Rational,
    d: u32,
    policy: RadiusPolicy,
    mode: Coprimality,
) -> Result<LaurentCubeSet, LaurentError> {
    if d == 0 {
        return Err(LaurentError::ZeroDimension);
    }
    let n = check_modulus(q_poly)?;
    let q = q_poly.q();
    let Some(e) = psi_exponent(q, psi, policy)?.exponent else {
        return Ok(LaurentCubeSet::empty(q, d));
    };
    // Radius q^(e − n), strict: agreement through X^-(n − e).
    let t = n as i64 - e;
    if t <= 0 {
        return Ok(LaurentCubeSet::whole(q, d));
    }
    let t = t as u32;
    let count = (q as u128).checked_pow(n as u32 * d).unwrap_or(u128::MAX);
    if count > ENUMERATION_CAP {
        return Err(LaurentError::TooLarge(count));
    }
    let centers: Vec<(Poly, Vec<u32>)> = poly::polys_below(q, n)
        .map(|p| {
            let g = p.gcd(q_poly)?;
            Ok((g, expansion_digits(&p, q_poly, t as usize)?))
        })
        .collect::<Result<_, LaurentError>>()?;
    let one = Poly::one(q);
    let mut prefixes = BTreeSet::new();
    let mut idx = vec![0usize; d as usize];
    'tuples: loop {
        let ok = match mode {
            Coprimality::Each => idx.iter().all(|&i| centers[i].0 == one),
            Coprimality::Joint => {
                let mut g = q_poly.clone();
                for &i in &idx {
                    g = g.gcd(&centers[i].0)?;
                }
                g == one
            }
        };
        if ok {
            prefixes.insert(idx.iter().flat_map(|&i| centers[i].1.iter().copied()).collect::<Vec<u32>>());
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < centers.len() {
                continue 'tuples;
            }
            *slot = 0;
        }
        break;
    }
    Ok(LaurentCubeSet { q, d, depth: t, prefixes })
}

/// `E_Q(Ψ)` in `L`.
pub fn build_e_q(q_poly: &Poly, psi: &Rational, policy: RadiusPolicy) -> Result<LaurentCubeSet, LaurentError> {
    build(q_poly, psi, 1, policy, Coprimality::Each)
}

/// `E_Q(Ψ)^d` in `L^d`.
pub fn build_e_q_power(q_poly: &Poly, psi: &Rational, d: u32, policy: RadiusPolicy) -> Result<LaurentCubeSet, LaurentError> {
    build(q_poly, psi, d, policy, Coprimality::Each)
}

/// `H_Q^d(Ψ)` in `L^d`.
pub fn build_h_q(q_poly: &Poly, psi: &Rational, d: u32, policy: RadiusPolicy) -> Result<LaurentCubeSet, LaurentError> {
    build(q_poly, psi, d, policy, Coprimality::Joint)
}

/// Lower bounds for `ν_d(H_Q^d(Ψ))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HMeasureBounds {
    pub measure: Rational,
    /// `(3/16) min{Ψ^d, 1}`, valid for `d >= 2`.
    pub general_bound: Rational,
    pub general_ok: bool,
    /// `Ψ^d / 2`, expected when `q^(d−1) >= 3` and `Ψ < 1`.
    pub sharp_bound: Option<Rational>,
    pub sharp_ok: Option<bool>,
}

pub fn h_measure_bounds(q_poly: &Poly, psi: &Rational, d: u32, policy: RadiusPolicy) -> Result<HMeasureBounds, LaurentError> {
    let q = q_poly.q();
    let eff = match psi_exponent(q, psi, policy)?.exponent {
        Some(e) => q_pow(q, e),
        None => Rational::zero(),
    };
    let measure = build_h_q(q_poly, psi, d, policy)?.measure();
    let psi_d = eff.pow(d as i32);
    let general_bound = Rational::new(3, 16) * psi_d.clone().min(Rational::one());
    let sharp_applies = (q as u128).pow(d.saturating_sub(1)) >= 3 && eff < Rational::one();
    let sharp_bound = sharp_applies.then(|| psi_d / Rational::from_integer(2));
    Ok(HMeasureBounds {
        general_ok: measure >= general_bound,
        sharp_ok: sharp_bound.as_ref().map(|b| &measure >= b),
        measure,
        general_bound,
        sharp_bound,
    })
}

/// `ν_d(H_Q ∩ H_Q')` against `Ψ(Q)^d Ψ(Q')^d` and `(256/9) ν_d(H_Q) ν_d(H_Q')`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HOverlap {
    pub measure: Rational,
    pub product_bound: Rational,
    pub product_bound_ok: bool,
    /// `measure / (ν_d(H_Q) ν_d(H_Q'))`, absent when a factor vanishes.
    pub quasi_constant: Option<Rational>,
    pub quasi_ok: bool,
}

pub const QUASI_INDEPENDENCE_CONSTANT: (i64, i64) = (256, 9);

pub fn overlap_h(
    q1: &Poly,
    psi1: &Rational,
    q2: &Poly,
    psi2: &Rational,
    d: u32,
) -> Result<HOverlap, LaurentError> {
    if q1 == q2 {
        return Err(LaurentError::SameModulus);
    }
    for (qp, v) in [(q1, psi1), (q2, psi2)] {
        let e = psi_exponent(qp.q(), v, RadiusPolicy::Strict)?;
        if e.exponent.is_some_and(|e| e >= 0) {
            return Err(LaurentError::NotBelowOne(v.clone()));
        }
    }
    let a = build_h_q(q1, psi1, d, RadiusPolicy::Strict)?;
    let b = build_h_q(q2, psi2, d, RadiusPolicy::Strict)?;
    let measure = a.intersection(&b)?.measure();
    let product_bound = psi1.pow(d as i32) * psi2.pow(d as i32);
    let denom = a.measure() * b.measure();
    let quasi_constant = (!denom.is_zero()).then(|| &measure / &denom);
    let (cn, cd) = QUASI_INDEPENDENCE_CONSTANT;
    let quasi_ok = quasi_constant.as_ref().is_none_or(|c| c <= &Rational::new(cn, cd));
    Ok(HOverlap { product_bound_ok: measure <= product_bound, measure, product_bound, quasi_constant, quasi_ok })
}

/// `Σ_{P ≠ 0} ν_d(L_{z1}^d ∩ (L_{z2}^d + gP))` against `ν_d(L_{z1}^d) ν_d(L_{z2}^d) / |g|^d`,
/// where `L_z = {deg < z}` has measure `q^z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslateSum {
    pub sum: Rational,
    pub bound: Rational,
    pub holds: bool,
    /// Nonzero tuples with a nonempty intersection.
    pub contributing: u64,
}

/// Only the degree of `g` matters, so `g` may be any nonzero Laurent series.
pub fn translate_sum(q: u32, d: u32, z1: i64, z2: i64, g_degree: i64) -> Result<TranslateSum, LaurentError> {
    poly::check_field(q)?;
    if d == 0 {
        return Err(LaurentError::ZeroDimension);
    }
    let top = z1.max(z2);
    let low = z1.min(z2);
    // deg(gP) = deg g + deg P < top is needed for the two balls to meet.
    let span = (top - g_degree).max(0) as u32;
    let count = (q as u128).checked_pow(span * d).unwrap_or(u128::MAX);
    if count > ENUMERATION_CAP {
        return Err(LaurentError::TooLarge(count));
    }
    let polys: Vec<Poly> = poly::polys_below(q, span as usize).collect();
    let ball = q_pow(q, low);
    let mut sum = Rational::zero();
    let mut contributing = 0;
    let mut idx = vec![0usize; d as usize];
    'tuples: loop {
        if idx.iter().any(|&i| !polys[i].is_zero()) {
            // L_{z1} and L_{z2} + c are nested or disjoint; they meet iff deg c < max(z1, z2).
            let meets = idx.iter().all(|&i| {
                polys[i].degree().is_none_or(|k| g_degree + (k as i64) < top)
            });
            if meets {
                sum += ball.pow(d as i32);
                contributing += 1;
            }
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < polys.len() {
                continue 'tuples;
            }
            *slot = 0;
        }
        break;
    }
    let bound = q_pow(q, (z1 + z2 - g_degree) * d as i64);
    Ok(TranslateSum { holds: sum <= bound, sum, bound, contributing })
}

pub fn translate_sum_poly(d: u32, z1: i64, z2: i64, g: &Poly) -> Result<TranslateSum, LaurentError> {
    let k = g.degree().ok_or(LaurentError::ZeroScalar)?;
    translate_sum(g.q(), d, z1, z2, k as i64)
}

/// `Ψ` on monic polynomials with finite support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyPsi {
    pub q: u32,
    /// `(coefficients from the constant term up, Ψ(Q))`.
    pub entries: Vec<(Vec<u32>, Rational)>,
}

impl PolyPsi {
    /// `value` on every monic polynomial with degree in `degrees`.
    pub fn constant(q: u32, value: Rational, degrees: std::ops::RangeInclusive<usize>) -> Self {
        let entries = degrees
            .flat_map(|n| poly::monic_polys(q, n))
            .map(|p| (p.coeffs().to_vec(), value.clone()))
            .collect();
        PolyPsi { q, entries }
    }

    pub fn support(&self) -> Result<Vec<(Poly, Rational)>, LaurentError> {
        let mut out = Vec::with_capacity(self.entries.len());
        for (c, v) in &self.entries {
            let p = Poly::new(self.q, c.clone())?;
            check_modulus(&p)?;
            if v.is_negative() {
                return Err(LaurentError::Negative(v.clone()));
            }
            if !v.is_zero() {
                out.push((p, v.clone()));
            }
        }
        out.sort();
        out.dedup_by(|a, b| a.0 == b.0);
        Ok(out)
    }

    pub fn scaled(&self, t: &Rational) -> PolyPsi {
        PolyPsi { q: self.q, entries: self.entries.iter().map(|(c, v)| (c.clone(), v * t)).collect() }
    }
}

/// `ν_d(∪_Q E_Q(Ψ)^d)`, every ball taken literally.
pub fn union_e_power(psi: &PolyPsi, d: u32) -> Result<LaurentCubeSet, LaurentError> {
    let mut acc = LaurentCubeSet::empty(psi.q, d);
    for (qp, v) in psi.support()? {
        acc = acc.union(&build_e_q_power(&qp, &v, d, RadiusPolicy::Literal)?)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaurentScalingCheck {
    /// `ν_d(∪ E_Q(tΨ)^d)`.
    pub lhs: Rational,
    /// `ν_d(∪ E_Q(Ψ)^d)`.
    pub base: Rational,
    /// `q^d t^d · base`.
    pub rhs: Rational,
    pub holds: bool,
}

pub fn verify_scaling_laurent(psi: &PolyPsi, t: &Rational, d: u32) -> Result<LaurentScalingCheck, LaurentError> {
    if t < &Rational::one() {
        return Err(LaurentError::ScaleBelowOne(t.clone()));
    }
    let lhs = union_e_power(&psi.scaled(t), d)?.measure();
    let base = union_e_power(psi, d)?.measure();
    let factor = (Rational::from(psi.q as u64) * t).pow(d as i32);
    let rhs = &factor * &base;
    Ok(LaurentScalingCheck { holds: lhs <= rhs, lhs, base, rhs })
}

/// `|c|` for a digit string `c` of `X^-1, X^-2, …`, as a power of `q`; `None` if all zero.
fn digits_abs_exponent(c: &[u32]) -> Option<i64> {
    c.iter().position(|&x| x != 0).map(|i| -(i as i64) - 1)
}

/// Oracle: is the depth-`depth` cylinder `f` inside the open ball `B(P/Q, r)`?
/// Needs `depth` large enough that `r >= q^-depth`.
pub fn cylinder_in_ball(f: &[u32], p: &Poly, q_poly: &Poly, r: &Rational) -> Result<bool, LaurentError> {
    let q = q_poly.q();
    let c = expansion_digits(p, q_poly, f.len())?;
    let diff: Vec<u32> = f.iter().zip(&c).map(|(a, b)| (a + q - b) % q).collect();
    // Points of the cylinder differ from f below X^-depth, so |g − P/Q| ranges up to q^-(depth+1).
    let worst = match digits_abs_exponent(&diff) {
        Some(e) => q_pow(q, e),
        None => q_pow(q, -(f.len() as i64) - 1),
    };
    Ok(&worst < r)
}

impl LaurentCubeSet {
    /// The set at depth 0 is `L^d` when nonempty.
    pub fn is_whole(&self) -> bool {
        self.measure() == Rational::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    fn p(q: u32, c: &[u32]) -> Poly {
        Poly::new(q, c.to_vec()).unwrap()
    }

    #[test]
    fn expansion_of_simple_fractions() {
        // 1/(X+1) = X^-1 + X^-2 + … over F_2.
        assert_eq!(expansion_digits(&Poly::one(2), &p(2, &[1, 1]), 4).unwrap(), vec![1, 1, 1, 1]);
        // 1/(X+1) = X^-1 − X^-2 + X^-3 − … over F_3.
        assert_eq!(expansion_digits(&Poly::one(3), &p(3, &[1, 1]), 4).unwrap(), vec![1, 2, 1, 2]);
        assert_eq!(expansion_digits(&p(2, &[1, 1]), &p(2, &[0, 0, 1]), 3).unwrap(), vec![1, 1, 0]);
    }

    #[test]
    fn e_and_h_examples() {
        let x = p(2, &[0, 1]);
        assert!(build_e_q(&x, &rat(0, 1), RadiusPolicy::Strict).unwrap().is_empty());
        let e = build_e_q(&x, &rat(1, 2), RadiusPolicy::Strict).unwrap();
        assert_eq!((e.depth(), e.len(), e.measure()), (2, 1, rat(1, 4)));
        let h = build_h_q(&x, &rat(1, 2), 2, RadiusPolicy::Strict).unwrap();
        assert_eq!((h.len(), h.measure()), (3, rat(3, 16)));
        let b = h_measure_bounds(&x, &rat(1, 2), 2, RadiusPolicy::Strict).unwrap();
        assert!(b.general_ok && b.general_bound == rat(3, 64));
        assert_eq!(b.sharp_bound, None);
        assert!(build_e_q(&x, &rat(2, 1), RadiusPolicy::Strict).unwrap().is_whole());
    }

    #[test]
    fn rounding_policies() {
        let x = p(3, &[0, 1]);
        assert!(matches!(build_e_q(&x, &rat(1, 2), RadiusPolicy::Strict), Err(LaurentError::NotAdmissible { .. })));
        let down = build_e_q(&x, &rat(1, 2), RadiusPolicy::RoundDown).unwrap();
        let lit = build_e_q(&x, &rat(1, 2), RadiusPolicy::Literal).unwrap();
        assert_eq!(down.measure(), rat(2, 9));
        assert_eq!(lit.measure(), rat(2, 3));
        assert!(psi_exponent(3, &rat(1, 2), RadiusPolicy::RoundDown).unwrap().rounded);
    }

    #[test]
    fn literal_sets_match_the_membership_oracle() {
        for (qp, r) in [
            (p(2, &[0, 1]), rat(1, 2)),
            (p(2, &[1, 1, 1]), rat(1, 3)),
            (p(3, &[2, 0, 1]), rat(2, 5)),
            (p(3, &[0, 1]), rat(1, 1)),
            (p(2, &[0, 0, 1]), rat(3, 16)),
        ] {
            let set = build_e_q(&qp, &r, RadiusPolicy::Literal).unwrap();
            let n = qp.degree().unwrap();
            let radius = &r / &Rational::from((qp.q() as u64).pow(n as u32));
            let depth = 6;
            let set = set.refine(depth).unwrap();
            for f in poly::polys_below(qp.q(), depth as usize) {
                let digits: Vec<u32> = (0..depth as usize).map(|k| f.coeff(k)).collect();
                let mut hit = false;
                for c in poly::polys_below(qp.q(), n) {
                    if c.gcd(&qp).unwrap() == Poly::one(qp.q()) && cylinder_in_ball(&digits, &c, &qp, &radius).unwrap() {
                        hit = true;
                    }
                }
                assert_eq!(set.contains_cube(std::slice::from_ref(&digits)), hit, "{qp:?} r={r} f={digits:?}");
            }
        }
    }

    #[test]
    fn measure_bounds_exhaustive() {
        for q in [2u32, 3] {
            for n in 1..=4 {
                for qp in poly::monic_polys(q, n) {
                    for d in 1..=2 {
                        for j in 0..=2 {
                            let psi = Rational::from(q as u64).pow(-j);
                            let b = h_measure_bounds(&qp, &psi, d, RadiusPolicy::Strict).unwrap();
                            assert!(b.general_ok, "{qp:?} d={d} Ψ={psi}: {b:?}");
                            if let Some(ok) = b.sharp_ok {
                                assert!(ok, "{qp:?} d={d} Ψ={psi}: {b:?}");
                            }
                            // Each cube has measure exactly (Ψ/|Q|)^d when Ψ <= 1.
                            let theta = poly::theta_d(&qp, d).unwrap();
                            let cube = (&psi / &Rational::from((q as u64).pow(n as u32))).pow(d as i32);
                            assert_eq!(b.measure, Rational::from(theta) * cube);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn overlap_examples() {
        let c = overlap_h(&p(2, &[0, 1]), &rat(1, 2), &p(2, &[1, 1]), &rat(1, 2), 1).unwrap();
        assert_eq!(c.measure, rat(0, 1));
        assert!(c.product_bound_ok && c.quasi_ok);
        assert!(overlap_h(&p(2, &[0, 1]), &rat(1, 2), &p(2, &[0, 1]), &rat(1, 2), 1).is_err());
        assert!(overlap_h(&p(2, &[0, 1]), &rat(1, 1), &p(2, &[1, 1]), &rat(1, 2), 1).is_err());
    }

    #[test]
    fn overlap_exhaustive_q2_d2() {
        let polys: Vec<Poly> = (1..=3).flat_map(|n| poly::monic_polys(2, n)).collect();
        let mut worst = Rational::zero();
        for a in &polys {
            for b in &polys {
                if a == b {
                    continue;
                }
                for pa in [rat(1, 2), rat(1, 4)] {
                    for pb in [rat(1, 2), rat(1, 4)] {
                        let c = overlap_h(a, &pa, b, &pb, 2).unwrap();
                        assert!(c.product_bound_ok && c.quasi_ok, "{a:?} {b:?}: {c:?}");
                        if let Some(k) = c.quasi_constant {
                            worst = worst.max(k);
                        }
                    }
                }
            }
        }
        assert!(worst <= rat(256, 9));
    }

    #[test]
    fn translate_sum_examples() {
        let s = translate_sum_poly(1, 2, 0, &Poly::one(2)).unwrap();
        assert_eq!((s.sum, s.bound, s.contributing), (rat(3, 1), rat(4, 1), 3));
        let s = translate_sum_poly(1, 1, 0, &p(2, &[0, 1])).unwrap();
        assert_eq!(s.sum, rat(0, 1));
        assert!(translate_sum_poly(1, 1, 0, &Poly::zero(2)).is_err());
        // Constant pairs (a, b) ≠ (0, 0) over F_2, each contributing ν(L_1)^2 = 4.
        let s = translate_sum_poly(2, 1, 1, &Poly::one(2)).unwrap();
        assert_eq!((s.sum, s.bound), (rat(12, 1), rat(16, 1)));
    }

    #[test]
    fn translate_sum_suite() {
        for q in [2u32, 3] {
            for d in 1..=2 {
                for z1 in -2i64..=3 {
                    for z2 in -2i64..=3 {
                        for g in -2i64..=2 {
                            let s = translate_sum(q, d, z1, z2, g).unwrap();
                            assert!(s.holds, "q={q} d={d} z1={z1} z2={z2} deg g={g}: {s:?}");
                            // Closed form: (q^{d·span} − 1) q^{d·min(z1,z2)}.
                            let span = (z1.max(z2) - g).max(0);
                            let count = Rational::from(q as u64).pow((span * d as i64) as i32) - Rational::one();
                            assert_eq!(s.sum, count * q_pow(q, z1.min(z2) * d as i64));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn scaling_examples() {
        let psi = PolyPsi { q: 2, entries: vec![(vec![0, 1], rat(1, 4))] };
        let c = verify_scaling_laurent(&psi, &rat(1, 1), 1).unwrap();
        assert!(c.holds && c.lhs == c.base);
        let c = verify_scaling_laurent(&psi, &rat(2, 1), 1).unwrap();
        assert!(c.holds);
        assert_eq!((c.lhs, c.base), (rat(1, 4), rat(1, 8)));
        assert!(verify_scaling_laurent(&psi, &rat(1, 2), 1).is_err());
    }

    #[test]
    fn refine_preserves_measure() {
        let h = build_h_q(&p(3, &[1, 0, 1]), &rat(1, 3), 2, RadiusPolicy::Strict).unwrap();
        let deeper = h.refine(h.depth() + 1).unwrap();
        assert_eq!(h.measure(), deeper.measure());
    }

    proptest! {
        #[test]
        fn ball_sandwich(q in prop::sample::select(vec![2u32, 3, 5]), a in 1i64..500, b in 1i64..500) {
            let r = rat(a, b);
            let v = ball_measure(q, &r).unwrap();
            prop_assert!(r <= v && v <= &r * &Rational::from(q as u64));
        }

        #[test]
        fn scaling_on_random_support(
            q in prop::sample::select(vec![2u32, 3]),
            raw in prop::collection::vec((prop::collection::vec(0u32..3, 1..4), 1i64..9, 1i64..40), 1..5),
            t in prop::sample::select(vec![rat(3, 1), rat(2, 1), rat(3, 2)]),
            d in 1u32..=2,
        ) {
            let entries = raw.into_iter().map(|(mut c, a, b)| {
                for x in c.iter_mut() { *x %= q; }
                c.push(1);
                (c, rat(a, b))
            }).collect();
            let psi = PolyPsi { q, entries };
            let c = verify_scaling_laurent(&psi, &t, d).unwrap();
            prop_assert!(c.holds, "{:?}", c);
        }
    }
}
