//! Polynomials over the prime field `F_q`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numtheory;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("field size {0} must be a prime below 2^16")]
    BadField(u32),
    #[error("coefficient {coeff} is not reduced mod {q}")]
    BadCoefficient { coeff: u32, q: u32 },
    #[error("polynomials over F_{0} and F_{1} mixed")]
    FieldMismatch(u32, u32),
    #[error("division by the zero polynomial")]
    DivisionByZero,
    #[error("{0} is not monic")]
    NotMonic(Poly),
}

pub fn check_field(q: u32) -> Result<(), PolyError> {
    if (2..1 << 16).contains(&q) && numtheory::factorize(q as u64).pairs == [(q as u64, 1)] {
        Ok(())
    } else {
        Err(PolyError::BadField(q))
    }
}

fn inverse(a: u32, q: u32) -> u32 {
    // a^(q-2) mod q.
    let (mut base, mut e, mut acc) = (a as u64, q - 2, 1u64);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % q as u64;
        }
        base = base * base % q as u64;
        e >>= 1;
    }
    acc as u32
}

/// Coefficients from the constant term up; the leading coefficient is nonzero.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Poly {
    q: u32,
    coeffs: Vec<u32>,
}

impl Poly {
    pub fn new(q: u32, mut coeffs: Vec<u32>) -> Result<Self, PolyError> {
        check_field(q)?;
        if let Some(&coeff) = coeffs.iter().find(|&&c| c >= q) {
            return Err(PolyError::BadCoefficient { coeff, q });
        }
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Ok(Poly { q, coeffs })
    }

    fn raw(q: u32, mut coeffs: Vec<u32>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Poly { q, coeffs }
    }

    pub fn zero(q: u32) -> Self {
        Poly { q, coeffs: Vec::new() }
    }

    pub fn one(q: u32) -> Self {
        Poly { q, coeffs: vec![1] }
    }

    /// `X^k`.
    pub fn monomial(q: u32, k: usize) -> Self {
        let mut coeffs = vec![0; k + 1];
        coeffs[k] = 1;
        Poly { q, coeffs }
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> u32 {
        self.coeffs.get(k).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Degree comparison with `deg 0 = −∞`.
    pub fn cmp_degree(&self, other: &Poly) -> Ordering {
        self.degree().cmp(&other.degree())
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last() == Some(&1)
    }

    /// `|P| = q^deg P`, as the exponent; `None` for zero.
    pub fn abs_exponent(&self) -> Option<usize> {
        self.degree()
    }

    fn same_field(&self, other: &Poly) -> Result<(), PolyError> {
        if self.q == other.q {
            Ok(())
        } else {
            Err(PolyError::FieldMismatch(self.q, other.q))
        }
    }

    pub fn add(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.same_field(other)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        Ok(Poly::raw(self.q, (0..n).map(|k| (self.coeff(k) + other.coeff(k)) % self.q).collect()))
    }

    pub fn sub(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.same_field(other)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        Ok(Poly::raw(self.q, (0..n).map(|k| (self.coeff(k) + self.q - other.coeff(k)) % self.q).collect()))
    }

    pub fn scale(&self, c: u32) -> Poly {
        let q = self.q as u64;
        Poly::raw(self.q, self.coeffs.iter().map(|&a| (a as u64 * (c as u64 % q) % q) as u32).collect())
    }

    pub fn mul(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.same_field(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Poly::zero(self.q));
        }
        let q = self.q as u64;
        let mut out = vec![0u64; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] = (out[i + j] + a as u64 * b as u64) % q;
            }
        }
        Ok(Poly::raw(self.q, out.into_iter().map(|c| c as u32).collect()))
    }

    pub fn divmod(&self, other: &Poly) -> Result<(Poly, Poly), PolyError> {
        self.same_field(other)?;
        let dd = other.degree().ok_or(PolyError::DivisionByZero)?;
        let q = self.q as u64;
        let lead_inv = inverse(other.coeffs[dd], self.q) as u64;
        let mut rem: Vec<u64> = self.coeffs.iter().map(|&c| c as u64).collect();
        let mut quot = vec![0u64; rem.len().saturating_sub(dd)];
        for k in (dd..rem.len()).rev() {
            let c = rem[k] * lead_inv % q;
            if c == 0 {
                continue;
            }
            quot[k - dd] = c;
            for (j, &b) in other.coeffs.iter().enumerate() {
                let idx = k - dd + j;
                rem[idx] = (rem[idx] + q * q - c * b as u64) % q;
            }
        }
        rem.truncate(dd);
        Ok((
            Poly::raw(self.q, quot.into_iter().map(|c| c as u32).collect()),
            Poly::raw(self.q, rem.into_iter().map(|c| c as u32).collect()),
        ))
    }

    pub fn rem(&self, other: &Poly) -> Result<Poly, PolyError> {
        Ok(self.divmod(other)?.1)
    }

    pub fn divides(&self, other: &Poly) -> Result<bool, PolyError> {
        Ok(other.rem(self)?.is_zero())
    }

    /// Scales to leading coefficient 1; zero stays zero.
    pub fn monic(&self) -> Poly {
        match self.coeffs.last() {
            None => self.clone(),
            Some(&lead) => self.scale(inverse(lead, self.q)),
        }
    }

    /// Monic gcd; `gcd(0, 0) = 0`.
    pub fn gcd(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.same_field(other)?;
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b)?;
            a = b;
            b = r;
        }
        Ok(a.monic())
    }

    /// Monic irreducible factors with multiplicity, in increasing order.
    pub fn factor(&self) -> Result<Vec<(Poly, u32)>, PolyError> {
        if !self.is_monic() {
            return Err(PolyError::NotMonic(self.clone()));
        }
        let mut rest = self.clone();
        let mut out = Vec::new();
        let mut k = 1;
        // Removing divisors in increasing degree leaves only irreducible ones.
        while rest.degree().is_some_and(|d| d >= 2 * k) {
            for m in monic_polys(self.q, k) {
                let mut e = 0;
                loop {
                    let (quot, r) = rest.divmod(&m)?;
                    if !r.is_zero() {
                        break;
                    }
                    rest = quot;
                    e += 1;
                }
                if e > 0 {
                    out.push((m, e));
                }
            }
            k += 1;
        }
        if rest.degree().is_some_and(|d| d >= 1) {
            match out.iter_mut().find(|(f, _)| f == &rest) {
                Some((_, e)) => *e += 1,
                None => out.push((rest, 1)),
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn is_irreducible(&self) -> Result<bool, PolyError> {
        let f = self.monic().factor()?;
        Ok(f.len() == 1 && f[0].1 == 1)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, "+")?;
            }
            first = false;
            match (k, c) {
                (0, c) => write!(f, "{c}")?,
                (1, 1) => write!(f, "X")?,
                (1, c) => write!(f, "{c}X")?,
                (k, 1) => write!(f, "X^{k}")?,
                (k, c) => write!(f, "{c}X^{k}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} (mod {})", self.q)
    }
}

/// All polynomials of degree `< n`, zero first, in counting order.
pub fn polys_below(q: u32, n: usize) -> impl Iterator<Item = Poly> {
    let total = (q as u64).checked_pow(n as u32).expect("enumeration too large");
    (0..total).map(move |mut i| {
        let mut coeffs = Vec::with_capacity(n);
        for _ in 0..n {
            coeffs.push((i % q as u64) as u32);
            i /= q as u64;
        }
        Poly::raw(q, coeffs)
    })
}

/// All monic polynomials of degree exactly `n`.
pub fn monic_polys(q: u32, n: usize) -> impl Iterator<Item = Poly> {
    polys_below(q, n).map(move |p| {
        let mut coeffs = p.coeffs;
        coeffs.resize(n + 1, 0);
        coeffs[n] = 1;
        Poly { q, coeffs }
    })
}

/// Monic divisors of a monic polynomial.
pub fn monic_divisors(f: &Poly) -> Result<Vec<Poly>, PolyError> {
    let mut out = vec![Poly::one(f.q)];
    for (p, e) in f.factor()? {
        let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
        for d in &out {
            let mut acc = d.clone();
            next.push(acc.clone());
            for _ in 0..e {
                acc = acc.mul(&p)?;
                next.push(acc.clone());
            }
        }
        out = next;
    }
    out.sort();
    Ok(out)
}

/// Möbius function on monic polynomials.
pub fn mobius_poly(f: &Poly) -> Result<i8, PolyError> {
    let factors = f.factor()?;
    if factors.iter().any(|&(_, e)| e > 1) {
        return Ok(0);
    }
    Ok(if factors.len() % 2 == 0 { 1 } else { -1 })
}

/// Number of `d`-tuples `(P_1, …, P_d)` with `deg P_i < deg Q` and
/// `gcd(P_1, …, P_d, Q) = 1`, as `Σ_{R|Q} μ(R) (|Q|/|R|)^d`.
pub fn theta_d(f: &Poly, d: u32) -> Result<BigInt, PolyError> {
    let n = f.degree().unwrap_or(0);
    let qb = BigInt::from(f.q);
    let mut total = BigInt::from(0);
    for r in monic_divisors(f)? {
        let mu = mobius_poly(&r)?;
        if mu != 0 {
            let e = (n - r.degree().unwrap_or(0)) as u32 * d;
            total += BigInt::from(mu) * qb.pow(e);
        }
    }
    Ok(total)
}

/// Same count by enumerating all tuples.
pub fn theta_d_brute(f: &Poly, d: u32) -> Result<u64, PolyError> {
    let n = f.degree().unwrap_or(0);
    let polys: Vec<Poly> = polys_below(f.q, n).collect();
    let mut count = 0;
    let mut idx = vec![0usize; d as usize];
    loop {
        let mut g = f.clone();
        for &i in &idx {
            g = g.gcd(&polys[i])?;
        }
        if g.degree() == Some(0) {
            count += 1;
        }
        // Odometer over polys^d.
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(count);
            }
            idx[k] += 1;
            if idx[k] < polys.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(q: u32, c: &[u32]) -> Poly {
        Poly::new(q, c.to_vec()).unwrap()
    }

    #[test]
    fn core_examples() {
        let x2 = p(2, &[0, 0, 1]);
        let x = p(2, &[0, 1]);
        assert_eq!(x2.gcd(&x).unwrap(), x);
        let f = p(2, &[0, 1, 1]);
        assert_eq!(f.factor().unwrap(), vec![(p(2, &[0, 1]), 1), (p(2, &[1, 1]), 1)]);
        let monics: Vec<Poly> = monic_polys(2, 2).collect();
        assert_eq!(monics, vec![p(2, &[0, 0, 1]), p(2, &[1, 0, 1]), p(2, &[0, 1, 1]), p(2, &[1, 1, 1])]);
        assert_eq!(x.divmod(&Poly::zero(2)), Err(PolyError::DivisionByZero));
        assert!(Poly::new(4, vec![1]).is_err());
        assert!(Poly::new(3, vec![3]).is_err());
        assert_eq!(p(3, &[1, 2, 1]).to_string(), "X^2+2X+1");
    }

    #[test]
    fn mobius_examples() {
        assert_eq!(mobius_poly(&Poly::one(2)), Ok(1));
        assert_eq!(mobius_poly(&p(2, &[1, 1, 1])), Ok(-1));
        assert_eq!(mobius_poly(&p(2, &[0, 0, 1])), Ok(0));
        assert_eq!(mobius_poly(&p(2, &[0, 1, 1])), Ok(1));
        assert!(matches!(mobius_poly(&p(3, &[1, 2])), Err(PolyError::NotMonic(_))));
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta_d(&p(2, &[0, 0, 1]), 1).unwrap(), 2.into());
        assert_eq!(theta_d(&p(2, &[0, 1]), 2).unwrap(), 3.into());
        assert_eq!(theta_d(&p(2, &[0, 1, 1]), 2).unwrap(), 9.into());
    }

    #[test]
    fn exhaustive_small_degree() {
        for q in [2, 3] {
            for n in 1..=4 {
                for f in monic_polys(q, n) {
                    let mu_sum: i32 = monic_divisors(&f).unwrap().iter().map(|r| mobius_poly(r).unwrap() as i32).sum();
                    assert_eq!(mu_sum, 0, "{f:?}");
                    let prod = f.factor().unwrap().iter().try_fold(Poly::one(q), |acc, (g, e)| {
                        (0..*e).try_fold(acc, |a, _| a.mul(g))
                    });
                    assert_eq!(prod.unwrap(), f);
                    for d in 1..=2 {
                        assert_eq!(theta_d(&f, d).unwrap(), theta_d_brute(&f, d).unwrap().into(), "{f:?} d={d}");
                    }
                }
            }
        }
    }

    #[test]
    fn division_identity() {
        for a in polys_below(3, 4) {
            for b in polys_below(3, 3).skip(1) {
                let (quot, r) = a.divmod(&b).unwrap();
                assert_eq!(quot.mul(&b).unwrap().add(&r).unwrap(), a);
                assert!(r.cmp_degree(&b) == Ordering::Less);
            }
        }
    }
}
