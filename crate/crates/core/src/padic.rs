//! Closed balls in `Z_p` and the sets
//! `K_n(psi) = ∪_{|a|<=n, (a,n)=1} {x ∈ Z_p : |x − a/n|_p <= psi(n)/n}`.
//!
//! A ball is stored as `(k, r)`, meaning `{x : x ≡ r mod p^k}` with measure
//! `p^-k`. Two balls are nested or disjoint, so a normalized set is a family
//! of pairwise disjoint balls with no full sibling group.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle;
use crate::numtheory;
use crate::psi::{PsiError, PsiSpec};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PadicError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("sets over different primes {0} and {1}")]
    MismatchedPrime(u64, u64),
    #[error("index must be positive")]
    ZeroIndex,
    #[error("radius {0} must be positive")]
    NonPositiveRadius(Rational),
    #[error("psi({n}) = {value} is negative")]
    Negative { n: u64, value: Rational },
    #[error("ball level {level} puts p^level beyond 2^63")]
    TooDeep { level: u32 },
    #[error("scaling factor {0} must be at least 1")]
    ScaleBelowOne(Rational),
    #[error("hypothesis violated: p = {p} divides index {index}")]
    PDividesIndex { p: u64, index: u64 },
    #[error("hypothesis violated: psi({index})/{index} = {ratio} is not 0, 1 or a negative power of p")]
    RadiusNotPower { index: u64, ratio: Rational },
    #[error("hypothesis violated: psi({index}) = {value} is not below 1/4")]
    PsiTooLarge { index: u64, value: Rational },
    #[error(transparent)]
    Psi(#[from] PsiError),
}

/// Largest modulus a stored ball may have.
const MAX_MODULUS: u64 = 1 << 63;

fn check_prime(p: u64) -> Result<(), PadicError> {
    if p >= 2 && numtheory::factorize(p).pairs == [(p, 1)] {
        Ok(())
    } else {
        Err(PadicError::NotPrime(p))
    }
}

fn modulus(p: u64, level: u32) -> Result<u64, PadicError> {
    p.checked_pow(level).filter(|&m| m <= MAX_MODULUS).ok_or(PadicError::TooDeep { level })
}

/// The `z` with `p^z <= r < p^(z+1)`; the closed ball of radius `r` equals
/// the one of radius `p^z`.
pub fn canonical_radius(p: u64, r: &Rational) -> Result<i64, PadicError> {
    check_prime(p)?;
    if !r.is_positive() {
        return Err(PadicError::NonPositiveRadius(r.clone()));
    }
    let (a, b) = (r.numer(), r.denom());
    let pb = BigInt::from(p);
    if a >= b {
        // Largest z >= 0 with p^z <= a/b.
        let mut z = 0;
        let mut pz = pb.clone();
        while &pz * &b <= a {
            pz *= &pb;
            z += 1;
        }
        Ok(z)
    } else {
        // Smallest k > 0 with b <= a p^k.
        let mut k = 0;
        let mut apk = a;
        while apk < b {
            apk *= &pb;
            k += 1;
        }
        Ok(-k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Ball {
    pub level: u32,
    pub residue: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PadicSet {
    p: u64,
    balls: BTreeSet<Ball>,
}

impl PadicSet {
    pub fn empty(p: u64) -> Result<Self, PadicError> {
        check_prime(p)?;
        Ok(PadicSet { p, balls: BTreeSet::new() })
    }

    pub fn whole(p: u64) -> Result<Self, PadicError> {
        check_prime(p)?;
        Ok(PadicSet { p, balls: BTreeSet::from([Ball { level: 0, residue: 0 }]) })
    }

    /// Normalized union of the given balls; residues are reduced mod `p^level`.
    pub fn from_balls<I: IntoIterator<Item = (u32, u64)>>(p: u64, balls: I) -> Result<Self, PadicError> {
        check_prime(p)?;
        let balls = balls
            .into_iter()
            .map(|(level, residue)| Ok(Ball { level, residue: residue % modulus(p, level)? }))
            .collect::<Result<Vec<_>, PadicError>>()?;
        normalize(p, balls)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn balls(&self) -> impl Iterator<Item = &Ball> {
        self.balls.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn is_whole(&self) -> bool {
        self.balls.first().is_some_and(|b| b.level == 0)
    }

    pub fn measure(&self) -> Rational {
        Rational::sum_exact(self.balls.iter().map(|b| {
            Rational::from_bigints(BigInt::one(), BigInt::from(self.p).pow(b.level))
        }))
    }

    fn same_p(&self, other: &PadicSet) -> Result<(), PadicError> {
        if self.p == other.p {
            Ok(())
        } else {
            Err(PadicError::MismatchedPrime(self.p, other.p))
        }
    }

    pub fn union(&self, other: &PadicSet) -> Result<PadicSet, PadicError> {
        self.same_p(other)?;
        normalize(self.p, self.balls.iter().chain(&other.balls).copied().collect())
    }

    pub fn intersection(&self, other: &PadicSet) -> Result<PadicSet, PadicError> {
        self.same_p(other)?;
        let a = Index::new(self);
        let b = Index::new(other);
        // Nested or disjoint: a ball survives iff the other set holds it or an ancestor.
        let kept = self
            .balls
            .iter()
            .filter(|x| b.covers(x))
            .chain(other.balls.iter().filter(|x| a.covers(x)))
            .copied()
            .collect();
        normalize(self.p, kept)
    }

    /// Pairwise disjoint with no full sibling group.
    pub fn is_normalized(&self) -> bool {
        let idx = Index::new(self);
        let disjoint = self.balls.iter().all(|b| !idx.strict_ancestor_present(b));
        let merged = self.balls.iter().filter(|b| b.level > 0).all(|b| {
            let m = self.p.pow(b.level - 1);
            let parent = b.residue % m;
            (0..self.p).any(|d| !self.balls.contains(&Ball { level: b.level, residue: parent + d * m }))
        });
        disjoint && merged
    }
}

/// Residues grouped by level.
struct Index {
    p: u64,
    by_level: BTreeMap<u32, BTreeSet<u64>>,
}

impl Index {
    fn new(s: &PadicSet) -> Self {
        let mut by_level: BTreeMap<u32, BTreeSet<u64>> = BTreeMap::new();
        for b in &s.balls {
            by_level.entry(b.level).or_default().insert(b.residue);
        }
        Index { p: s.p, by_level }
    }

    fn has_ancestor(&self, b: &Ball, strict: bool) -> bool {
        self.by_level
            .range(..=b.level)
            .filter(|(&j, _)| !strict || j < b.level)
            .any(|(&j, set)| set.contains(&(b.residue % self.p.pow(j))))
    }

    fn covers(&self, b: &Ball) -> bool {
        self.has_ancestor(b, false)
    }

    fn strict_ancestor_present(&self, b: &Ball) -> bool {
        self.has_ancestor(b, true)
    }
}

fn normalize(p: u64, mut balls: Vec<Ball>) -> Result<PadicSet, PadicError> {
    balls.sort_unstable();
    balls.dedup();
    let mut by_level: BTreeMap<u32, BTreeSet<u64>> = BTreeMap::new();
    for b in balls {
        let covered = by_level.iter().any(|(&j, set)| set.contains(&(b.residue % p.pow(j))));
        if !covered {
            by_level.entry(b.level).or_default().insert(b.residue);
        }
    }
    // Replace full sibling groups by their parent, deepest level first.
    let max_level = by_level.keys().next_back().copied().unwrap_or(0);
    for k in (1..=max_level).rev() {
        let Some(set) = by_level.get(&k) else { continue };
        let m = p.pow(k - 1);
        let mut groups: BTreeMap<u64, u64> = BTreeMap::new();
        for r in set {
            *groups.entry(r % m).or_default() += 1;
        }
        let full: Vec<u64> = groups.into_iter().filter(|&(_, c)| c == p).map(|(parent, _)| parent).collect();
        if full.is_empty() {
            continue;
        }
        let set = by_level.get_mut(&k).expect("level present");
        for parent in &full {
            for d in 0..p {
                set.remove(&(parent + d * m));
            }
        }
        if set.is_empty() {
            by_level.remove(&k);
        }
        by_level.entry(k - 1).or_default().extend(full);
    }
    let balls = by_level
        .into_iter()
        .flat_map(|(level, set)| set.into_iter().map(move |residue| Ball { level, residue }))
        .collect();
    Ok(PadicSet { p, balls })
}

fn valuation(p: u64, mut n: u64) -> u32 {
    let mut e = 0;
    while n.is_multiple_of(p) {
        n /= p;
        e += 1;
    }
    e
}

fn inverse_mod(a: u64, m: u64) -> u64 {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    debug_assert_eq!(r0, 1, "{a} not invertible mod {m}");
    t0.rem_euclid(m as i128) as u64
}

/// `K_n(psi)` for a single index. `psi_n = 0` gives the empty set, since the
/// singleton balls of radius 0 are null.
pub fn build_k_n(p: u64, n: u64, psi_n: &Rational) -> Result<PadicSet, PadicError> {
    check_prime(p)?;
    if n == 0 {
        return Err(PadicError::ZeroIndex);
    }
    if psi_n.is_negative() {
        return Err(PadicError::Negative { n, value: psi_n.clone() });
    }
    if psi_n.is_zero() {
        return PadicSet::empty(p);
    }
    let z = canonical_radius(p, &(psi_n / &Rational::from(n)))?;
    let e = valuation(p, n);
    if e > 0 {
        // Every center a/n has |a/n|_p = p^e, so the ball meets Z_p iff it swallows it.
        return if z >= e as i64 { PadicSet::whole(p) } else { PadicSet::empty(p) };
    }
    if z >= 0 {
        return PadicSet::whole(p);
    }
    let level = (-z) as u32;
    let m = modulus(p, level)?;
    let inv = inverse_mod(n, m) as u128;
    let ni = n as i64;
    let balls = (-ni..=ni)
        .filter(|a| numtheory::gcd(a.unsigned_abs(), n) == 1)
        .map(|a| {
            let a = (a as i128).rem_euclid(m as i128) as u128;
            Ball { level, residue: (a * inv % m as u128) as u64 }
        })
        .collect();
    normalize(p, balls)
}

/// `∪_n K_n(psi)` over the finite support.
pub fn union_k(p: u64, psi: &PsiSpec) -> Result<PadicSet, PadicError> {
    let mut acc = PadicSet::empty(p)?;
    for (n, v) in psi.finite_support()? {
        acc = acc.union(&build_k_n(p, n, &v)?)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PadicScalingCheck {
    /// `μ_p(∪ K_n(t psi))`.
    pub lhs: Rational,
    /// `t μ_p(∪ K_n(psi))`.
    pub rhs: Rational,
    /// `lhs <= rhs`.
    pub holds: bool,
    pub equality: bool,
    /// `lhs <= p·rhs`. Ball measures are powers of `p`, so scaling a radius by
    /// `t` can scale the measure by up to `p·t`; this weaker form always holds.
    pub holds_with_factor_p: bool,
}

pub fn verify_scaling_padic(p: u64, psi: &PsiSpec, t: &Rational) -> Result<PadicScalingCheck, PadicError> {
    if t < &Rational::one() {
        return Err(PadicError::ScaleBelowOne(t.clone()));
    }
    let lhs = union_k(p, &psi.scaled(t)?)?.measure();
    let rhs = t * &union_k(p, psi)?.measure();
    Ok(PadicScalingCheck {
        holds: lhs <= rhs,
        equality: lhs == rhs,
        holds_with_factor_p: lhs <= &rhs * &Rational::from(p),
        lhs,
        rhs,
    })
}

/// The chain `λ(E_m(ψ/2) ∩ E_n(ψ/2)) <= μ_p(K_m ∩ K_n) <= (3/2) λ(E_m(2ψ) ∩ E_n(2ψ))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapChain {
    pub lower: Rational,
    pub mid: Rational,
    pub upper: Rational,
    pub chain_ok: bool,
}

fn is_power_ratio(p: u64, r: &Rational) -> bool {
    if r.is_zero() || r == &Rational::one() {
        return true;
    }
    let (a, b) = (r.numer(), r.denom());
    if !a.is_one() {
        return false;
    }
    let mut b = b;
    let pb = BigInt::from(p);
    while (&b % &pb).is_zero() {
        b /= &pb;
    }
    b.is_one()
}

/// Checks the hypotheses at `m` and `n` only.
pub fn check_overlap_hypotheses(p: u64, m: u64, n: u64, psi: &PsiSpec) -> Result<(), PadicError> {
    check_prime(p)?;
    let quarter = Rational::new(1, 4);
    for k in [m, n] {
        if k == 0 {
            return Err(PadicError::ZeroIndex);
        }
        if k % p == 0 {
            return Err(PadicError::PDividesIndex { p, index: k });
        }
        let v = psi.value(k);
        let ratio = &v / &Rational::from(k);
        if !is_power_ratio(p, &ratio) {
            return Err(PadicError::RadiusNotPower { index: k, ratio });
        }
        if v >= quarter {
            return Err(PadicError::PsiTooLarge { index: k, value: v });
        }
    }
    Ok(())
}

pub fn verify_overlap_chain(p: u64, m: u64, n: u64, psi: &PsiSpec) -> Result<OverlapChain, PadicError> {
    check_overlap_hypotheses(p, m, n, psi)?;
    let (vm, vn) = (psi.value(m), psi.value(n));
    let two = Rational::from_integer(2);
    let circle_overlap = |f: &dyn Fn(&Rational) -> Rational| {
        circle::build_e_n(m, &f(&vm)).intersection_measure(&circle::build_e_n(n, &f(&vn)))
    };
    let lower = circle_overlap(&|v| v / &two);
    let upper = Rational::new(3, 2) * circle_overlap(&|v| v * &two);
    let mid = build_k_n(p, m, &vm)?.intersection(&build_k_n(p, n, &vn)?)?.measure();
    Ok(OverlapChain { chain_ok: lower <= mid && mid <= upper, lower, mid, upper })
}

/// Random `m ≠ n` in `[1, max_index)`, both prime to `p`, with
/// `ψ(k)/k = p^-j` just below the `ψ < 1/4` limit or up to two powers deeper.
pub fn random_admissible_pair<R: Rng>(p: u64, max_index: u64, rng: &mut R) -> (u64, u64, PsiSpec) {
    assert!(max_index > 3, "need two indices prime to p");
    loop {
        let m = rng.gen_range(1..max_index);
        let n = rng.gen_range(1..max_index);
        if m == n || m % p == 0 || n % p == 0 {
            continue;
        }
        let mut value = |k: u64| {
            let mut j = 0;
            while Rational::from(4 * k) >= Rational::from(p).pow(j) {
                j += 1;
            }
            Rational::from(k) / Rational::from(p).pow(j + rng.gen_range(0..3))
        };
        let (vm, vn) = (value(m), value(n));
        let psi = PsiSpec::table([(m, vm), (n, vn)]).expect("positive values");
        return (m, n, psi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn balls(s: &PadicSet) -> Vec<(u32, u64)> {
        s.balls().map(|b| (b.level, b.residue)).collect()
    }

    /// Residue classes mod `p^level` that meet the set.
    fn brute_membership(s: &PadicSet, level: u32) -> Vec<bool> {
        let m = s.p.pow(level);
        (0..m)
            .map(|x| s.balls().any(|b| b.level <= level && x % s.p.pow(b.level) == b.residue))
            .collect()
    }

    #[test]
    fn radius_examples() {
        assert_eq!(canonical_radius(3, &rat(1, 9)), Ok(-2));
        assert_eq!(canonical_radius(3, &rat(1, 5)), Ok(-2));
        assert_eq!(canonical_radius(2, &rat(7, 1)), Ok(2));
        assert_eq!(canonical_radius(5, &rat(1, 1)), Ok(0));
        assert!(canonical_radius(4, &rat(1, 1)).is_err());
        assert!(canonical_radius(3, &rat(0, 1)).is_err());
    }

    #[test]
    fn k_n_examples() {
        let k = build_k_n(3, 2, &rat(2, 9)).unwrap();
        assert_eq!(balls(&k), vec![(2, 4), (2, 5)]);
        assert_eq!(k.measure(), rat(2, 9));
        assert!(build_k_n(3, 3, &rat(1, 10)).unwrap().is_empty());
        assert!(build_k_n(3, 3, &rat(9, 1)).unwrap().is_whole());
        assert!(build_k_n(5, 7, &rat(7, 1)).unwrap().is_whole());
        assert!(build_k_n(5, 7, &rat(0, 1)).unwrap().is_empty());
    }

    #[test]
    fn set_operations() {
        let a = PadicSet::from_balls(3, [(1, 1)]).unwrap();
        let b = PadicSet::from_balls(3, [(2, 4)]).unwrap();
        assert_eq!(a.intersection(&b).unwrap(), b);
        let all = PadicSet::from_balls(5, (0..5).map(|r| (1, r))).unwrap();
        assert!(all.is_whole());
        assert_eq!(all.measure(), rat(1, 1));
        assert_eq!(PadicSet::whole(7).unwrap().measure(), rat(1, 1));
        assert!(a.union(&PadicSet::empty(2).unwrap()).is_err());
    }

    #[test]
    fn scaling_examples() {
        let psi = PsiSpec::table([(2, rat(2, 9))]).unwrap();
        let c = verify_scaling_padic(3, &psi, &rat(3, 1)).unwrap();
        assert_eq!((c.lhs.clone(), c.rhs.clone()), (rat(2, 3), rat(2, 3)));
        assert!(c.holds && c.equality);
        let c = verify_scaling_padic(3, &psi, &rat(1, 1)).unwrap();
        assert!(c.equality);
        assert!(verify_scaling_padic(3, &psi, &rat(1, 2)).is_err());
    }

    #[test]
    fn scaling_fails_when_t_is_not_a_power_of_p() {
        // Radius 1/4 gives three balls mod 9; radius 1/2 gives all of Z_3.
        let psi = PsiSpec::table([(1, rat(1, 4))]).unwrap();
        let c = verify_scaling_padic(3, &psi, &rat(2, 1)).unwrap();
        assert_eq!((c.lhs.clone(), c.rhs.clone()), (rat(1, 1), rat(2, 3)));
        assert!(!c.holds && c.holds_with_factor_p);
        let psi = PsiSpec::table([(1, rat(8, 41))]).unwrap();
        let c = verify_scaling_padic(5, &psi, &rat(2, 1)).unwrap();
        assert_eq!((c.lhs, c.rhs), (rat(3, 5), rat(6, 25)));
    }

    #[test]
    fn scaling_fails_without_any_factor_when_p_divides_n() {
        // ±1/2 has 2-adic size 2: radius 3/2 misses Z_2, radius 3 covers it.
        let psi = PsiSpec::table([(2, rat(3, 1))]).unwrap();
        let c = verify_scaling_padic(2, &psi, &rat(2, 1)).unwrap();
        assert_eq!((c.lhs.clone(), c.rhs.clone()), (rat(1, 1), rat(0, 1)));
        assert!(!c.holds && !c.holds_with_factor_p);
    }

    #[test]
    fn overlap_chain_examples() {
        let zero = PsiSpec::table([(4, rat(4, 27))]).unwrap();
        let c = verify_overlap_chain(3, 2, 4, &zero).unwrap();
        assert_eq!((c.lower, c.mid, c.upper), (rat(0, 1), rat(0, 1), rat(0, 1)));
        let psi = PsiSpec::table([(2, rat(2, 9)), (4, rat(4, 27))]).unwrap();
        assert!(verify_overlap_chain(3, 2, 4, &psi).unwrap().chain_ok);
        let bad = PsiSpec::table([(2, rat(2, 9)), (4, rat(4, 9))]).unwrap();
        assert!(matches!(verify_overlap_chain(3, 2, 4, &bad), Err(PadicError::PsiTooLarge { index: 4, .. })));
        assert!(matches!(verify_overlap_chain(3, 3, 4, &psi), Err(PadicError::PDividesIndex { index: 3, .. })));
        let odd = PsiSpec::table([(2, rat(1, 5))]).unwrap();
        assert!(matches!(verify_overlap_chain(3, 2, 4, &odd), Err(PadicError::RadiusNotPower { index: 2, .. })));
    }

    #[test]
    fn overlap_chain_random_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let p = [2u64, 3, 5, 7][rng.gen_range(0..4)];
            let (m, n, psi) = random_admissible_pair(p, 80, &mut rng);
            check_overlap_hypotheses(p, m, n, &psi).unwrap();
            let c = verify_overlap_chain(p, m, n, &psi).unwrap();
            assert!(c.chain_ok, "p={p} m={m} n={n}: {c:?}");
        }
    }

    proptest! {
        #[test]
        fn operations_match_brute_force(
            p in prop::sample::select(vec![2u64, 3, 5]),
            xs in prop::collection::vec((0u32..4, 0u64..1000), 0..12),
            ys in prop::collection::vec((0u32..4, 0u64..1000), 0..12),
        ) {
            let a = PadicSet::from_balls(p, xs).unwrap();
            let b = PadicSet::from_balls(p, ys).unwrap();
            let u = a.union(&b).unwrap();
            let i = a.intersection(&b).unwrap();
            for s in [&a, &b, &u, &i] {
                prop_assert!(s.is_normalized());
            }
            prop_assert_eq!(u.measure() + i.measure(), a.measure() + b.measure());
            let (ma, mb) = (brute_membership(&a, 4), brute_membership(&b, 4));
            let (mu, mi) = (brute_membership(&u, 4), brute_membership(&i, 4));
            for x in 0..ma.len() {
                prop_assert_eq!(mu[x], ma[x] || mb[x]);
                prop_assert_eq!(mi[x], ma[x] && mb[x]);
            }
            let count = mu.iter().filter(|&&v| v).count() as i64;
            prop_assert_eq!(u.measure(), rat(count, p.pow(4) as i64));
        }

        #[test]
        fn k_n_balls_respect_radius(p in prop::sample::select(vec![2u64, 3, 5, 7]), n in 1u64..60, a in 1i64..40, b in 1i64..400) {
            let v = rat(a, b);
            let k = build_k_n(p, n, &v).unwrap();
            prop_assert!(k.is_normalized());
            let r = &v / &Rational::from(n);
            // The constructed balls have measure p^z <= r < p^(z+1); merging only coarsens them.
            let z = canonical_radius(p, &r).unwrap();
            let pz = Rational::from(p).pow(z as i32);
            prop_assert!(pz <= r && r < &pz * &Rational::from(p));
            if !k.is_whole() && n % p != 0 {
                for ball in k.balls() {
                    prop_assert!(i64::from(ball.level) <= -z);
                }
            }
            // Oracle: x mod p^L lies in K_n iff |x − a/n|_p <= r for some admissible a.
            let level = 4u32;
            let m = p.pow(level);
            if n % p != 0 && Rational::from(p).pow(-(level as i32)) <= r {
                let member = brute_membership(&k, level);
                for x in 0..m {
                    let hit = (-(n as i64)..=n as i64).filter(|c| numtheory::gcd(c.unsigned_abs(), n) == 1).any(|c| {
                        // |x − c/n|_p = |n x − c|_p since p ∤ n.
                        let d = (n as i64) * (x as i64) - c;
                        let dist = if d == 0 { Rational::zero() } else {
                            Rational::from(p).pow(-(valuation(p, d.unsigned_abs()) as i32))
                        };
                        dist <= r
                    });
                    prop_assert_eq!(member[x as usize], hit, "x={}", x);
                }
            }
        }

        #[test]
        fn scaling_bounds_on_random_psi(
            p in prop::sample::select(vec![2u64, 3, 5]),
            entries in prop::collection::vec((1u64..40, 1i64..20, 1i64..200), 1..6),
        ) {
            // Indices divisible by p give empty-or-whole sets, which no constant factor controls.
            let entries = entries.into_iter().map(|(n, a, b)| (if n % p == 0 { n + 1 } else { n }, rat(a, b)));
            let psi = PsiSpec::table(entries).unwrap();
            for t in [rat(5, 2), rat(2, 1), rat(3, 1)] {
                let c = verify_scaling_padic(p, &psi, &t).unwrap();
                prop_assert!(c.holds_with_factor_p, "{:?}", c);
            }
            // Scaling by p itself moves every radius across exactly one power of p.
            let c = verify_scaling_padic(p, &psi, &Rational::from(p)).unwrap();
            prop_assert!(c.holds, "{:?}", c);
        }
    }
}
