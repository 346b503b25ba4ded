//! Exact interval-set algebra on the circle `R/Z`.
//!
//! A [`CircleSet`] is a finite union of open arcs stored as sorted, pairwise
//! disjoint, non-touching intervals inside `[0, 1]`. Arcs crossing `0` are cut
//! there, so the representation of a set is unique and equality of sets is
//! equality of vectors. Isolated points are ignored throughout: intervals that
//! share an endpoint are merged.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numtheory::{self, NumError};
use crate::psi::{PsiError, PsiSpec};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircleError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Psi(#[from] PsiError),
    #[error("index must be positive")]
    ZeroIndex,
    #[error("scaling factor {0} must be at least 1")]
    ScaleBelowOne(Rational),
    #[error("point {0} is outside [0, 1)")]
    PointOutOfRange(Rational),
}

#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CircleSet {
    intervals: Vec<(Rational, Rational)>,
}

impl std::fmt::Debug for CircleSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.intervals.iter().map(|(a, b)| format!("({a}, {b})"))).finish()
    }
}

/// Reduces an arc `(l, r)` of length `< 1` into at most two pieces of `[0, 1]`.
fn push_reduced(out: &mut Vec<(Rational, Rational)>, l: Rational, r: Rational) {
    let shift = Rational::from(l.floor());
    let (l, r) = if shift.is_zero() { (l, r) } else { (&l - &shift, &r - &shift) };
    let one = Rational::one();
    if r <= one {
        out.push((l, r));
    } else {
        out.push((l, one.clone()));
        out.push((Rational::zero(), r - one));
    }
}

/// Merges sorted intervals in place, joining overlapping or touching ones.
fn merge_sorted(v: Vec<(Rational, Rational)>) -> Vec<(Rational, Rational)> {
    let mut out: Vec<(Rational, Rational)> = Vec::with_capacity(v.len());
    for (l, r) in v {
        if let Some(last) = out.last_mut() {
            if l <= last.1 {
                if r > last.1 {
                    last.1 = r;
                }
                continue;
            }
        }
        out.push((l, r));
    }
    out
}

impl CircleSet {
    pub fn empty() -> Self {
        CircleSet { intervals: Vec::new() }
    }

    pub fn full() -> Self {
        CircleSet { intervals: vec![(Rational::zero(), Rational::one())] }
    }

    /// Union of open arcs `(l, r)` with `l < r`, read modulo 1.
    pub fn from_arcs<I: IntoIterator<Item = (Rational, Rational)>>(arcs: I) -> Self {
        let mut pieces = Vec::new();
        for (l, r) in arcs {
            if l >= r {
                continue;
            }
            if &r - &l >= Rational::one() {
                return Self::full();
            }
            push_reduced(&mut pieces, l, r);
        }
        Self::from_pieces(pieces)
    }

    fn from_pieces(mut pieces: Vec<(Rational, Rational)>) -> Self {
        if !pieces.windows(2).all(|w| w[0].0 <= w[1].0) {
            pieces.sort_unstable();
        }
        CircleSet { intervals: merge_sorted(pieces) }
    }

    pub fn intervals(&self) -> &[(Rational, Rational)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.intervals.len() == 1 && self.intervals[0] == (Rational::zero(), Rational::one())
    }

    pub fn measure(&self) -> Rational {
        Rational::sum_exact(self.intervals.iter().map(|(l, r)| r - l))
    }

    /// Membership in the open intervals of the normalized form.
    pub fn contains(&self, x: &Rational) -> bool {
        let i = self.intervals.partition_point(|(l, _)| l < x);
        i > 0 && x < &self.intervals[i - 1].1
    }

    pub fn union(&self, other: &CircleSet) -> CircleSet {
        let mut all = Vec::with_capacity(self.intervals.len() + other.intervals.len());
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() || j < other.intervals.len() {
            let take_left = j >= other.intervals.len()
                || (i < self.intervals.len() && self.intervals[i].0 <= other.intervals[j].0);
            if take_left {
                all.push(self.intervals[i].clone());
                i += 1;
            } else {
                all.push(other.intervals[j].clone());
                j += 1;
            }
        }
        CircleSet { intervals: merge_sorted(all) }
    }

    pub fn union_all<'a, I: IntoIterator<Item = &'a CircleSet>>(sets: I) -> CircleSet {
        let pieces: Vec<_> = sets.into_iter().flat_map(|s| s.intervals.iter().cloned()).collect();
        Self::from_pieces(pieces)
    }

    fn for_each_overlap(&self, other: &CircleSet, mut f: impl FnMut(&Rational, &Rational)) {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let lo = if a[i].0 > b[j].0 { &a[i].0 } else { &b[j].0 };
            let hi = if a[i].1 < b[j].1 { &a[i].1 } else { &b[j].1 };
            if lo < hi {
                f(lo, hi);
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    pub fn intersection(&self, other: &CircleSet) -> CircleSet {
        let mut out = Vec::new();
        self.for_each_overlap(other, |l, r| out.push((l.clone(), r.clone())));
        // Pieces of disjoint normalized inputs can touch only where an input
        // had a gap of zero width, which normalization excludes.
        CircleSet { intervals: merge_sorted(out) }
    }

    /// `λ(self ∩ other)` without building the intersection.
    pub fn intersection_measure(&self, other: &CircleSet) -> Rational {
        let mut lengths = Vec::new();
        self.for_each_overlap(other, |l, r| lengths.push(r - l));
        Rational::sum_exact(lengths)
    }
}

/// `E_n(psi)`: the union over `m` coprime to `n` of `((m - psi)/n, (m + psi)/n)` mod 1.
pub fn build_e_n(n: u64, psi_n: &Rational) -> CircleSet {
    assert!(n >= 1, "build_e_n needs n >= 1");
    if !psi_n.is_positive() {
        return CircleSet::empty();
    }
    let nr = Rational::from(n);
    if psi_n * Rational::from_integer(2) >= nr {
        return CircleSet::full();
    }
    let residues = numtheory::coprime_residues(n);
    let arcs = residues.into_iter().map(|m| {
        let m = Rational::from(m);
        ((&m - psi_n) / &nr, (&m + psi_n) / &nr)
    });
    CircleSet::from_arcs(arcs)
}

/// `Z(psi)`: the union of all `E_n(psi)` over a finite support.
pub fn union_z(psi: &PsiSpec) -> Result<CircleSet, CircleError> {
    let support = psi.finite_support()?;
    if support.iter().any(|(n, v)| v * Rational::from_integer(2) >= Rational::from(*n)) {
        return Ok(CircleSet::full());
    }
    let mut arcs = Vec::new();
    for (n, v) in &support {
        let nr = Rational::from(*n);
        for m in numtheory::coprime_residues(*n) {
            let m = Rational::from(m);
            arcs.push(((&m - v) / &nr, (&m + v) / &nr));
        }
    }
    Ok(CircleSet::from_arcs(arcs))
}

/// `λ(E_m ∩ E_n)` with the checks that accompany it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub m: u64,
    pub n: u64,
    pub measure: Rational,
    /// `8 psi(m) psi(n)`.
    pub ds_bound: Rational,
    pub ds_bound_ok: bool,
    pub d: Rational,
    /// `D(m,n) < 1/2` implies an empty intersection.
    pub empty_by_d: bool,
    /// `λ(E_m ∩ E_n) / (λ(E_m) λ(E_n) P(m,n))`, when the denominator is nonzero.
    pub pv_ratio: Option<Rational>,
}

pub fn intersect_measure(m: u64, n: u64, psi: &PsiSpec) -> Result<OverlapReport, CircleError> {
    let (pm, pn) = (psi.value(m), psi.value(n));
    let params = numtheory::pair_params(m, n, &pm, &pn)?;
    let em = build_e_n(m, &pm);
    let en = build_e_n(n, &pn);
    let measure = em.intersection_measure(&en);
    let ds_bound = Rational::from_integer(8) * &pm * &pn;
    let empty_by_d = params.d >= Rational::new(1, 2) || measure.is_zero();
    let denom = em.measure() * en.measure() * &params.p_product;
    let pv_ratio = (!denom.is_zero()).then(|| &measure / &denom);
    Ok(OverlapReport {
        m,
        n,
        ds_bound_ok: measure <= ds_bound,
        measure,
        ds_bound,
        d: params.d,
        empty_by_d,
        pv_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub lhs: Rational,
    pub rhs: Rational,
    pub holds: bool,
}

/// `λ(Z(t psi)) <= t λ(Z(psi))` for `t >= 1`.
pub fn verify_scaling(psi: &PsiSpec, t: &Rational) -> Result<ScalingCheck, CircleError> {
    if t < &Rational::one() {
        return Err(CircleError::ScaleBelowOne(t.clone()));
    }
    let lhs = union_z(&psi.scaled(t)?)?.measure();
    let rhs = t * union_z(psi)?.measure();
    Ok(ScalingCheck { holds: lhs <= rhs, lhs, rhs })
}

/// Whether `x` lies in `E_n(psi_n)`, decided from the integers in
/// `(n x - psi, n x + psi)`.
pub fn in_e_n(x: &Rational, n: u64, psi_n: &Rational) -> bool {
    if !psi_n.is_positive() {
        return false;
    }
    let nx = x * Rational::from(n);
    let lo = (&nx - psi_n).floor() + 1;
    let hi = (&nx + psi_n).ceil() - 1;
    if hi < lo {
        return false;
    }
    // Any n consecutive integers contain one congruent to 1 mod n.
    if &hi - &lo + 1 >= BigInt::from(n) {
        return true;
    }
    let nb = BigInt::from(n);
    let mut m = lo;
    while m <= hi {
        let r = num_integer::Integer::mod_floor(&m, &nb).to_u64().expect("residue fits");
        if numtheory::gcd(r, n) == 1 {
            return true;
        }
        m += 1;
    }
    false
}

/// `M(N, x)`: the number of `n <= N` with `x ∈ E_n(psi)`.
pub fn hit_count(big_n: u64, x: &Rational, psi: &PsiSpec) -> Result<u64, CircleError> {
    if x.is_negative() || x >= &Rational::one() {
        return Err(CircleError::PointOutOfRange(x.clone()));
    }
    Ok(psi.nonzero_in(1, big_n).iter().filter(|(n, v)| in_e_n(x, *n, v)).count() as u64)
}

/// Membership of the dyadic point `u / 2^64` in `E_n(a/b)`, in integer arithmetic.
pub(crate) fn in_e_n_dyadic(u: u64, n: u64, psi_num: &BigInt, psi_den: &BigInt) -> bool {
    // x ∈ E_n iff some m coprime to n has |n u - m 2^64| b < a 2^64.
    let nu = BigInt::from(n) * BigInt::from(u);
    let two64 = BigInt::one() << 64;
    let radius = psi_num * &two64;
    // Integers m with |nu - m 2^64| * b < radius.
    let center: BigInt = &nu >> 64usize;
    let mut candidates = Vec::<BigInt>::new();
    let mut push = |m: BigInt| {
        let diff: BigInt = (&nu - &m * &two64) * psi_den;
        let diff = if diff < BigInt::zero() { -diff } else { diff };
        if diff < radius {
            candidates.push(m);
            true
        } else {
            false
        }
    };
    // Scan outwards from floor(nu / 2^64) until a candidate fails on each side.
    let mut m = center.clone();
    let mut scanned: u64 = 0;
    while push(m.clone()) {
        m -= 1;
        scanned += 1;
        if scanned > n {
            return true;
        }
    }
    let mut m: BigInt = center + 1u32;
    while push(m.clone()) {
        m += 1;
        scanned += 1;
        if scanned > n {
            return true;
        }
    }
    let nb = BigInt::from(n);
    candidates.iter().any(|m| {
        let r = num_integer::Integer::mod_floor(m, &nb).to_u64().expect("residue fits");
        numtheory::gcd(r, n) == 1
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    fn arcs(v: &[(i64, i64, i64, i64)]) -> Vec<(Rational, Rational)> {
        v.iter().map(|&(a, b, c, d)| (rat(a, b), rat(c, d))).collect()
    }

    #[test]
    fn e_n_examples() {
        assert!(build_e_n(5, &Rational::zero()).is_empty());
        let e2 = build_e_n(2, &rat(1, 2));
        assert_eq!(e2.intervals(), arcs(&[(1, 4, 3, 4)]).as_slice());
        let e3 = build_e_n(3, &rat(1, 2));
        assert_eq!(e3.intervals(), arcs(&[(1, 6, 5, 6)]).as_slice());
        assert_eq!(e3.measure(), rat(2, 3));
        assert_eq!(build_e_n(5, &rat(1, 2)).measure(), rat(4, 5));
        assert!(build_e_n(4, &rat(2, 1)).is_full());
        // n = 1 wraps around 0.
        assert_eq!(build_e_n(1, &rat(1, 4)).intervals(), arcs(&[(0, 1, 1, 4), (3, 4, 1, 1)]).as_slice());
        assert!(build_e_n(1, &rat(1, 2)).is_full());
    }

    #[test]
    fn overlap_examples() {
        let half = PsiSpec::Constant { value: rat(1, 2), lo: 1, hi: None };
        let r = intersect_measure(2, 3, &half).unwrap();
        assert_eq!(r.measure, rat(1, 2));
        assert!(r.ds_bound_ok);
        let zero = PsiSpec::zero();
        assert_eq!(intersect_measure(2, 3, &zero).unwrap().measure, Rational::zero());
        let small = PsiSpec::Constant { value: rat(1, 100), lo: 1, hi: None };
        let r = intersect_measure(7, 11, &small).unwrap();
        assert_eq!(r.measure, Rational::zero());
        assert_eq!(r.d, rat(11, 100));
        assert!(r.empty_by_d);
        assert!(intersect_measure(4, 4, &half).is_err());
    }

    #[test]
    fn union_examples() {
        assert!(union_z(&PsiSpec::zero()).unwrap().is_empty());
        let one = PsiSpec::table([(3, rat(1, 4))]).unwrap();
        assert_eq!(union_z(&one).unwrap().measure(), rat(1, 3));
        // E_2 = (1/4, 3/4) lies inside E_3 = (1/6, 5/6): 1/2 + 2/3 - 1/2.
        let two = PsiSpec::table([(2, rat(1, 2)), (3, rat(1, 2))]).unwrap();
        assert_eq!(union_z(&two).unwrap().measure(), rat(2, 3));
        let unbounded = PsiSpec::Constant { value: rat(1, 2), lo: 1, hi: None };
        assert!(matches!(union_z(&unbounded), Err(CircleError::Psi(PsiError::Unbounded))));
    }

    #[test]
    fn scaling_examples() {
        let one = PsiSpec::table([(3, rat(1, 4))]).unwrap();
        let c = verify_scaling(&one, &rat(2, 1)).unwrap();
        assert_eq!((c.lhs.clone(), c.rhs.clone(), c.holds), (rat(2, 3), rat(2, 3), true));
        let c = verify_scaling(&one, &Rational::one()).unwrap();
        assert_eq!(c.lhs, c.rhs);
        let two = PsiSpec::table([(2, rat(1, 2)), (3, rat(1, 2))]).unwrap();
        assert!(verify_scaling(&two, &rat(3, 2)).unwrap().holds);
        assert!(verify_scaling(&two, &rat(1, 2)).is_err());
    }

    #[test]
    fn hit_count_examples() {
        assert_eq!(hit_count(100, &rat(1, 7), &PsiSpec::zero()).unwrap(), 0);
        let one = PsiSpec::table([(3, rat(1, 4))]).unwrap();
        assert_eq!(hit_count(3, &rat(1, 3), &one).unwrap(), 1);
        let half = PsiSpec::Constant { value: rat(1, 2), lo: 1, hi: None };
        let oracle = (1..=10u64).filter(|&n| direct_membership(&Rational::zero(), n, &rat(1, 2))).count();
        assert_eq!(hit_count(10, &Rational::zero(), &half).unwrap(), oracle as u64);
        // Only n = 1 (the arc around 1 ≡ 0) contains 0.
        assert_eq!(oracle, 1);
    }

    /// Circular distance from x to some m/n, m coprime to n, below psi/n.
    fn direct_membership(x: &Rational, n: u64, psi: &Rational) -> bool {
        (1..=n).filter(|&m| numtheory::gcd(m, n) == 1).any(|m| {
            let d = (x - Rational::from(m) / Rational::from(n)).abs();
            let d = &d - Rational::from(d.floor());
            let d = d.clone().min(Rational::one() - d);
            d < psi / &Rational::from(n)
        })
    }

    #[test]
    fn membership_agrees_with_definition() {
        for n in 1..25u64 {
            for psi in [rat(1, 3), rat(1, 2), rat(2, 3), rat(3, 2), rat(5, 2), rat(13, 1)] {
                for k in 0..60 {
                    let x = rat(k, 60);
                    assert_eq!(in_e_n(&x, n, &psi), direct_membership(&x, n, &psi), "n={n} psi={psi} x={x}");
                }
            }
        }
    }

    #[test]
    fn membership_agrees_with_set_for_large_psi() {
        // Radii above 1/2 need more than the nearest integer to n x.
        for n in 1..30u64 {
            for psi in [rat(1, 3), rat(2, 3), rat(3, 2), rat(5, 2)] {
                let e = build_e_n(n, &psi);
                for k in 0..97 {
                    let x = rat(2 * k + 1, 194);
                    assert_eq!(in_e_n(&x, n, &psi), e.contains(&x), "n={n} psi={psi} x={x}");
                }
            }
        }
    }

    #[test]
    fn dyadic_membership_matches_rational() {
        for n in 1..40u64 {
            for (a, b) in [(1i64, 3i64), (1, 2), (7, 5), (1, 10)] {
                let psi = rat(a, b);
                for k in 0..50u64 {
                    let u = k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
                    let x = Rational::from_bigints(BigInt::from(u), BigInt::one() << 64);
                    assert_eq!(
                        in_e_n_dyadic(u, n, &BigInt::from(a), &BigInt::from(b)),
                        in_e_n(&x, n, &psi),
                        "n={n} psi={psi} u={u}"
                    );
                }
            }
        }
    }

    fn arb_arcs() -> impl Strategy<Value = Vec<(Rational, Rational)>> {
        prop::collection::vec((0i64..40, 1i64..20, 1i64..40), 0..8).prop_map(|v| {
            v.into_iter().map(|(a, len, den)| (rat(a, den), rat(a * 3 + len, 3 * den))).collect()
        })
    }

    proptest! {
        #[test]
        fn union_is_canonical(a in arb_arcs(), b in arb_arcs()) {
            let sa = CircleSet::from_arcs(a.clone());
            let sb = CircleSet::from_arcs(b.clone());
            let mut all = b.clone();
            all.extend(a.iter().cloned());
            prop_assert_eq!(sa.union(&sb), sb.union(&sa));
            prop_assert_eq!(sa.union(&sb), CircleSet::from_arcs(all));
            let inter = sa.intersection(&sb);
            prop_assert_eq!(inter.measure(), sa.intersection_measure(&sb));
            prop_assert_eq!(sa.union(&sb).measure(), sa.measure() + sb.measure() - inter.measure());
            prop_assert!(sa.measure() <= Rational::one());
        }

        #[test]
        fn bound_on_e_n(n in 1u64..400, num in 0i64..60, den in 1i64..12) {
            let psi = rat(num, den);
            let m = build_e_n(n, &psi).measure();
            let base = &psi * Rational::from(numtheory::euler_phi(n)) / Rational::from(n);
            prop_assert!(base.clone().min(rat(1, 2)) <= m);
            prop_assert!(m <= (base * Rational::from_integer(2)).min(Rational::one()));
        }
    }
}
