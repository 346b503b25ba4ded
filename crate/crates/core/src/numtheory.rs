//! Integer primitives: factorization, Euler's totient, coprime residues and
//! the pair parameters `B(m,n)`, `D(m,n)`, `P(m,n)` used by the overlap
//! estimates.

use std::sync::{OnceLock, RwLock};

use num_integer::Integer;
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumError {
    #[error("pair parameters need distinct indices, got m = n = {0}")]
    EqualIndices(u64),
    #[error("pair parameters need m, n >= 2, got ({0}, {1})")]
    IndexTooSmall(u64, u64),
    #[error("negative approximation value {0}")]
    NegativePsi(Rational),
}

/// Canonical prime factorization, primes strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Factorization {
    pub pairs: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.pairs.iter().map(|&(p, _)| p)
    }

    /// Multiplies the factorization back out.
    pub fn value(&self) -> u128 {
        self.pairs.iter().fold(1u128, |acc, &(p, e)| acc * (p as u128).pow(e))
    }
}

/// Grow-only sieve of primes shared across threads.
struct PrimeCache {
    limit: u64,
    primes: Vec<u64>,
}

const CACHE_CEILING: u64 = 1 << 24;

fn cache() -> &'static RwLock<PrimeCache> {
    static CACHE: OnceLock<RwLock<PrimeCache>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(PrimeCache { limit: 1, primes: Vec::new() }))
}

fn sieve(limit: u64) -> Vec<u64> {
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Primes up to `limit` (capped at 2^24), extending the shared sieve if needed.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    let limit = limit.min(CACHE_CEILING);
    {
        let c = cache().read().expect("prime cache poisoned");
        if c.limit >= limit {
            let end = c.primes.partition_point(|&p| p <= limit);
            return c.primes[..end].to_vec();
        }
    }
    let mut c = cache().write().expect("prime cache poisoned");
    if c.limit < limit {
        let target = limit.max(c.limit.saturating_mul(2)).min(CACHE_CEILING);
        c.primes = sieve(target);
        c.limit = target;
    }
    let end = c.primes.partition_point(|&p| p <= limit);
    c.primes[..end].to_vec()
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.saturating_mul(r) > n {
        r -= 1;
    }
    while (r + 1).saturating_mul(r + 1) <= n {
        r += 1;
    }
    r
}

/// Deterministic trial division backed by the prime cache.
pub fn factorize(n: u64) -> Factorization {
    assert!(n >= 1, "factorize needs n >= 1");
    let mut pairs = Vec::new();
    let mut rest = n;
    let bound = isqrt(n);
    let cached = primes_up_to(bound);
    let mut push = |p: u64, rest: &mut u64| {
        let mut e = 0;
        while rest.is_multiple_of(p) {
            *rest /= p;
            e += 1;
        }
        if e > 0 {
            pairs.push((p, e));
        }
    };
    for &p in &cached {
        if p.saturating_mul(p) > rest {
            break;
        }
        push(p, &mut rest);
    }
    // Beyond the cache ceiling continue over odd candidates.
    let mut d = cached.last().map_or(2, |&p| p + 2) | 1;
    if bound > CACHE_CEILING {
        while d.saturating_mul(d) <= rest {
            push(d, &mut rest);
            d += 2;
        }
    }
    if rest > 1 {
        pairs.push((rest, 1));
    }
    Factorization { pairs }
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n).pairs.iter().fold(1, |acc, &(p, e)| acc * (p - 1) * p.pow(e - 1))
}

/// Totients of `0..=n` by a linear sieve; entry 0 is 0.
pub fn phi_table(n: usize) -> Vec<u64> {
    let mut phi: Vec<u64> = (0..=n as u64).collect();
    for i in 2..=n {
        if phi[i] == i as u64 {
            let mut j = i;
            while j <= n {
                phi[j] -= phi[j] / i as u64;
                j += i;
            }
        }
    }
    phi
}

/// `m` in `[1, n]` with `gcd(m, n) = 1`, increasing.
pub fn coprime_residues(n: u64) -> Vec<u64> {
    assert!(n >= 1, "coprime_residues needs n >= 1");
    if n == 1 {
        return vec![1];
    }
    let primes: Vec<u64> = factorize(n).primes().collect();
    (1..n).filter(|m| primes.iter().all(|p| m % p != 0)).collect()
}

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// `B(m,n)`, `D(m,n)` and the Mertens-type product `P(m,n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairParams {
    pub b: u128,
    pub d: Rational,
    pub p_product: Rational,
}

pub fn pair_params(m: u64, n: u64, psi_m: &Rational, psi_n: &Rational) -> Result<PairParams, NumError> {
    if m == n {
        return Err(NumError::EqualIndices(m));
    }
    if m < 2 || n < 2 {
        return Err(NumError::IndexTooSmall(m, n));
    }
    for v in [psi_m, psi_n] {
        if v.is_negative() {
            return Err(NumError::NegativePsi(v.clone()));
        }
    }
    let g = gcd(m, n);
    let (mg, ng) = (m / g, n / g);
    let b = mg as u128 * ng as u128;
    let d = (Rational::from(n) * psi_m).max(Rational::from(m) * psi_n) / Rational::from(g);
    // p | B(m,n) iff p | m/g or p | n/g.
    let mut primes: Vec<u64> = factorize(mg).primes().chain(factorize(ng).primes()).collect();
    primes.sort_unstable();
    primes.dedup();
    let p_product = primes
        .into_iter()
        .filter(|&p| Rational::from(p) > d)
        .map(|p| Rational::new(p as i64, p as i64 - 1))
        .product();
    Ok(PairParams { b, d, p_product })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn trial_division_oracle(mut n: u64) -> Vec<(u64, u32)> {
        let mut out = Vec::new();
        let mut d = 2;
        while d * d <= n {
            let mut e = 0;
            while n.is_multiple_of(d) {
                n /= d;
                e += 1;
            }
            if e > 0 {
                out.push((d, e));
            }
            d += 1;
        }
        if n > 1 {
            out.push((n, 1));
        }
        out
    }

    fn phi_by_gcd_scan(n: u64) -> u64 {
        (1..=n).filter(|&m| gcd(m, n) == 1).count() as u64
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).pairs.is_empty());
        assert_eq!(factorize(12).pairs, vec![(2, 2), (3, 1)]);
        assert_eq!(factorize(97).pairs, vec![(97, 1)]);
        for n in 1..3000u64 {
            assert_eq!(factorize(n).pairs, trial_division_oracle(n), "n = {n}");
        }
        let big = 4_294_967_291u64 * 3; // largest 32-bit prime times 3
        assert_eq!(factorize(big).pairs, vec![(3, 1), (4_294_967_291, 1)]);
        assert_eq!(factorize(big).value(), big as u128);
    }

    #[test]
    fn phi_examples() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(12), 4);
        assert_eq!(euler_phi(97), 96);
        assert_eq!(coprime_residues(12), vec![1, 5, 7, 11]);
        let table = phi_table(500);
        for n in 1..=500u64 {
            assert_eq!(euler_phi(n), phi_by_gcd_scan(n));
            assert_eq!(table[n as usize], euler_phi(n));
        }
    }

    #[test]
    fn coprime_residue_examples() {
        assert_eq!(coprime_residues(1), vec![1]);
        assert_eq!(coprime_residues(6), vec![1, 5]);
        assert_eq!(coprime_residues(10), vec![1, 3, 7, 9]);
    }

    #[test]
    fn phi_is_multiplicative() {
        for m in 1..=200u64 {
            for n in 1..=200u64 {
                if gcd(m, n) == 1 {
                    assert_eq!(euler_phi(m * n), euler_phi(m) * euler_phi(n));
                }
            }
        }
    }

    #[test]
    fn divisor_sum_of_phi_and_residue_count() {
        let table = phi_table(10_000);
        let mut divisor_sum = vec![0u64; 10_001];
        for (d, phi) in table.iter().enumerate().skip(1) {
            for k in (d..=10_000).step_by(d) {
                divisor_sum[k] += phi;
            }
        }
        for n in 1..=10_000usize {
            assert_eq!(divisor_sum[n], n as u64);
            assert_eq!(coprime_residues(n as u64).len() as u64, table[n]);
        }
    }

    #[test]
    fn pair_param_examples() {
        let p = pair_params(4, 6, &rat(1, 2), &rat(1, 2)).unwrap();
        assert_eq!((p.b, p.d, p.p_product), (6, rat(3, 2), rat(3, 1)));
        let p = pair_params(2, 3, &rat(0, 1), &rat(0, 1)).unwrap();
        assert_eq!((p.b, p.d, p.p_product), (6, rat(0, 1), rat(3, 1)));
        let p = pair_params(3, 9, &rat(1, 1), &rat(1, 1)).unwrap();
        assert_eq!((p.b, p.d, p.p_product), (3, rat(3, 1), rat(1, 1)));
        assert_eq!(pair_params(5, 5, &rat(1, 2), &rat(1, 2)), Err(NumError::EqualIndices(5)));
    }

    #[test]
    fn p_product_at_least_one() {
        for m in 2..40u64 {
            for n in 2..40u64 {
                if m == n {
                    continue;
                }
                let p = pair_params(m, n, &rat(1, 3), &rat(1, 5)).unwrap();
                assert!(p.p_product >= Rational::one());
                let big_b = factorize(p.b as u64);
                if big_b.primes().all(|q| Rational::from(q) <= p.d) {
                    assert_eq!(p.p_product, Rational::one());
                }
            }
        }
    }
}
