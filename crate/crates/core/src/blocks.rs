//! Block statistics `S_h`, `B_h`, `Q_h`, `R_h` over index blocks `Δ_h`, the
//! assumption checks (A1)–(A3), the Cauchy–Schwarz lower bound and the
//! per-block normalization `ψ₂`.
//!
//! `B_h` and `Q_h` come from one sweep over all arcs of the block. With
//! `c(x)` the number of `n ∈ Δ_h` such that `x ∈ E_n`,
//!
//! ```text
//! B_h = ∫ [c > 0],   Σ λ(E_n) = ∫ c,   Q_h = Σ_{m≠n} λ(E_m ∩ E_n) = ∫ c(c − 1).
//! ```
//!
//! By Abel summation each integral is a sum over arc endpoints `x` of
//! `x · (w(c_before) − w(c_after))`, so no segment lengths are formed.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle::{self, CircleError};
use crate::numtheory;
use crate::psi::{PsiError, PsiSpec, MATERIALIZE_CAP};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlockError {
    #[error("block {0} does not exist in this scheme")]
    NoSuchBlock(u32),
    #[error("custom boundaries must be strictly increasing and start at >= 1")]
    BadBoundaries,
    #[error("block {h} is too large for exact computation ({reason}); use the Monte Carlo variant")]
    Infeasible { h: u32, reason: String },
    #[error("S and Q are both zero")]
    ZeroMass,
    #[error("sample count must be positive")]
    NoSamples,
    #[error(transparent)]
    Psi(#[from] PsiError),
    #[error(transparent)]
    Circle(#[from] CircleError),
}

/// Partition of the positive integers into blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BlockScheme {
    /// `Δ_h = [2^(2^h) + 1, 2^(2^(h+1))]`, `h = 0..=4`.
    Canonical,
    /// Block `h >= 1` is `[N_(h-1) + 1, N_h]` for boundaries `N_0 < N_1 < …`.
    Custom { boundaries: Vec<u64> },
}

/// Largest canonical block whose bounds fit in 64 bits.
pub const CANONICAL_MAX_H: u32 = 4;

/// Default cap on `Σ φ(n)` over the nonzero members of a block.
pub const DEFAULT_PHI_CAP: u64 = 10_000_000;

impl BlockScheme {
    pub fn custom(boundaries: Vec<u64>) -> Result<Self, BlockError> {
        let s = BlockScheme::Custom { boundaries };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), BlockError> {
        match self {
            BlockScheme::Canonical => Ok(()),
            BlockScheme::Custom { boundaries } => {
                if boundaries.len() < 2 || boundaries.windows(2).any(|w| w[0] >= w[1]) {
                    Err(BlockError::BadBoundaries)
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Index of the first block.
    pub fn first(&self) -> u32 {
        match self {
            BlockScheme::Canonical => 0,
            BlockScheme::Custom { .. } => 1,
        }
    }

    /// Index of the last block.
    pub fn last(&self) -> u32 {
        match self {
            BlockScheme::Canonical => CANONICAL_MAX_H,
            BlockScheme::Custom { boundaries } => boundaries.len() as u32 - 1,
        }
    }

    /// Inclusive bounds of block `h`.
    pub fn range(&self, h: u32) -> Result<(u64, u64), BlockError> {
        if h < self.first() || h > self.last() {
            return Err(BlockError::NoSuchBlock(h));
        }
        Ok(match self {
            BlockScheme::Canonical => {
                let lo = 1u64 << (1u32 << h);
                let hi = 1u64 << (1u32 << (h + 1));
                (lo + 1, hi)
            }
            BlockScheme::Custom { boundaries } => (boundaries[h as usize - 1] + 1, boundaries[h as usize]),
        })
    }

    pub fn block_of(&self, n: u64) -> Option<u32> {
        (self.first()..=self.last()).find(|&h| {
            let (lo, hi) = self.range(h).expect("valid block index");
            lo <= n && n <= hi
        })
    }
}

/// Estimate of `B_h` with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BValue {
    Exact { value: Rational },
    Estimate { value: Rational, hits: u64, samples: u64, half_width: f64 },
}

impl BValue {
    pub fn value(&self) -> &Rational {
        match self {
            BValue::Exact { value } | BValue::Estimate { value, .. } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub h: u32,
    pub lo: u64,
    pub hi: u64,
    pub members: usize,
    /// `S_h = Σ ψ(n) φ(n) / n`.
    pub s: Rational,
    /// `B_h = λ(⋃ E_n)`.
    pub b: BValue,
    /// `Σ λ(E_n)`, exact runs only.
    pub sum_measures: Option<Rational>,
    /// `Q_h`, exact runs only.
    pub q: Option<Rational>,
    /// `R_h = Q_h / S_h²`, when `S_h > 0` and `Q_h` is known.
    pub r: Option<Rational>,
    pub exact: bool,
}

/// Nonzero `(n, ψ(n))` in block `h`, refusing blocks too wide to scan.
pub fn block_support(psi: &PsiSpec, scheme: &BlockScheme, h: u32) -> Result<Vec<(u64, Rational)>, BlockError> {
    let (lo, hi) = scheme.range(h)?;
    if !matches!(psi, PsiSpec::Table { .. }) {
        let top = psi.support_max().map_or(hi, |m| m.min(hi));
        if top >= lo && top - lo + 1 > MATERIALIZE_CAP {
            return Err(BlockError::Infeasible {
                h,
                reason: format!("{} indices to scan", top - lo + 1),
            });
        }
    }
    Ok(psi.nonzero_in(lo, hi))
}

/// `Σ ψ(n) φ(n) / n` over the given support.
pub fn mass(support: &[(u64, Rational)]) -> Rational {
    Rational::sum_exact(
        support.iter().map(|(n, v)| v * Rational::from(numtheory::euler_phi(*n)) / Rational::from(*n)),
    )
}

/// `S_h(ψ)`.
pub fn block_mass(psi: &PsiSpec, scheme: &BlockScheme, h: u32) -> Result<Rational, BlockError> {
    Ok(mass(&block_support(psi, scheme, h)?))
}

fn check_feasible(scheme: &BlockScheme, h: u32, support: &[(u64, Rational)], phi_cap: u64) -> Result<(), BlockError> {
    if matches!(scheme, BlockScheme::Canonical) {
        if h <= 2 {
            return Ok(());
        }
        if h >= 4 {
            return Err(BlockError::Infeasible { h, reason: "canonical blocks h >= 4 are Monte Carlo only".into() });
        }
    }
    let phi_sum: u64 = support.iter().map(|(n, _)| numtheory::euler_phi(*n)).sum();
    if phi_sum > phi_cap {
        return Err(BlockError::Infeasible { h, reason: format!("Σφ(n) = {phi_sum} exceeds {phi_cap}") });
    }
    Ok(())
}

/// Arcs of one `E_n`, in increasing order.
enum ArcStream {
    /// `ψ < 1/2`, `n >= 2`: arcs around coprime `m` are disjoint and inside `(0, 1)`.
    Lazy { n: u64, nr: Rational, psi: Rational, primes: Vec<u64>, next_m: u64 },
    Listed { arcs: Vec<(Rational, Rational)>, next: usize },
}

impl ArcStream {
    fn new(n: u64, psi: &Rational) -> Self {
        if n >= 2 && psi < &Rational::new(1, 2) {
            ArcStream::Lazy {
                n,
                nr: Rational::from(n),
                psi: psi.clone(),
                primes: numtheory::factorize(n).primes().collect(),
                next_m: 1,
            }
        } else {
            ArcStream::Listed { arcs: circle::build_e_n(n, psi).intervals().to_vec(), next: 0 }
        }
    }

    fn next_arc(&mut self) -> Option<(Rational, Rational)> {
        match self {
            ArcStream::Lazy { n, nr, psi, primes, next_m } => {
                while *next_m < *n {
                    let m = *next_m;
                    *next_m += 1;
                    if primes.iter().all(|p| m % p != 0) {
                        let mr = Rational::from(m);
                        return Some(((&mr - &*psi) / &*nr, (&mr + &*psi) / &*nr));
                    }
                }
                None
            }
            ArcStream::Listed { arcs, next } => {
                let a = arcs.get(*next).cloned();
                *next += 1;
                a
            }
        }
    }
}

/// Integrals of `[c > 0]`, `c` and `c(c − 1)` over the circle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverIntegrals {
    pub covered: Rational,
    pub total: Rational,
    pub pair_overlap: Rational,
}

/// One sweep over the arcs of all `E_n(ψ(n))` in `support`.
pub fn cover_integrals(support: &[(u64, Rational)]) -> CoverIntegrals {
    let mut streams: Vec<ArcStream> = support.iter().map(|(n, v)| ArcStream::new(*n, v)).collect();
    let mut pending_end: Vec<Option<Rational>> = vec![None; streams.len()];
    // (point, is_end, stream); ends sort after starts at equal points, which
    // only fixes an order: the Abel sums telescope regardless.
    let mut heap: BinaryHeap<Reverse<(Rational, bool, u32)>> = BinaryHeap::with_capacity(streams.len());
    for (g, s) in streams.iter_mut().enumerate() {
        if let Some((l, r)) = s.next_arc() {
            pending_end[g] = Some(r);
            heap.push(Reverse((l, false, g as u32)));
        }
    }
    let mut acc_b = vec![Rational::zero(); streams.len()];
    let mut acc_c = vec![Rational::zero(); streams.len()];
    let mut acc_q = vec![Rational::zero(); streams.len()];
    let mut c: i64 = 0;
    while let Some(Reverse((x, is_end, g))) = heap.pop() {
        let g = g as usize;
        let (coef_b, coef_c, coef_q) = if is_end {
            // w(c) − w(c − 1) with w(c) = c(c − 1).
            let r = ((c == 1) as i64, 1, 2 * (c - 1));
            c -= 1;
            r
        } else {
            let r = (-((c == 0) as i64), -1, -2 * c);
            c += 1;
            r
        };
        if coef_b != 0 {
            acc_b[g] += &x * Rational::from_integer(coef_b);
        }
        acc_c[g] += &x * Rational::from_integer(coef_c);
        if coef_q != 0 {
            acc_q[g] += &x * Rational::from_integer(coef_q);
        }
        if is_end {
            if let Some((l, r)) = streams[g].next_arc() {
                pending_end[g] = Some(r);
                heap.push(Reverse((l, false, g as u32)));
            }
        } else {
            let r = pending_end[g].take().expect("start without end");
            heap.push(Reverse((r, true, g as u32)));
        }
    }
    debug_assert_eq!(c, 0);
    CoverIntegrals {
        covered: Rational::sum_exact(acc_b),
        total: Rational::sum_exact(acc_c),
        pair_overlap: Rational::sum_exact(acc_q),
    }
}

/// `Q_h` by explicit pairwise intersections, both orders.
pub fn pair_overlap_direct(support: &[(u64, Rational)]) -> Rational {
    let sets: Vec<_> = support.iter().map(|(n, v)| circle::build_e_n(*n, v)).collect();
    let unordered: Vec<Rational> = (0..sets.len())
        .into_par_iter()
        .map(|i| Rational::sum_exact((i + 1..sets.len()).map(|j| sets[i].intersection_measure(&sets[j]))))
        .collect();
    Rational::sum_exact(unordered) * Rational::from_integer(2)
}

fn ratio_r(s: &Rational, q: &Rational) -> Option<Rational> {
    (!s.is_zero()).then(|| q / &(s * s))
}

/// Exact `S_h`, `B_h`, `Q_h`, `R_h`.
pub fn block_stats_exact(psi: &PsiSpec, scheme: &BlockScheme, h: u32) -> Result<BlockStats, BlockError> {
    block_stats_exact_capped(psi, scheme, h, DEFAULT_PHI_CAP)
}

pub fn block_stats_exact_capped(
    psi: &PsiSpec,
    scheme: &BlockScheme,
    h: u32,
    phi_cap: u64,
) -> Result<BlockStats, BlockError> {
    scheme.validate()?;
    let (lo, hi) = scheme.range(h)?;
    let support = block_support(psi, scheme, h)?;
    check_feasible(scheme, h, &support, phi_cap)?;
    let s = mass(&support);
    let ints = cover_integrals(&support);
    let r = ratio_r(&s, &ints.pair_overlap);
    Ok(BlockStats {
        h,
        lo,
        hi,
        members: support.len(),
        s,
        b: BValue::Exact { value: ints.covered },
        sum_measures: Some(ints.total),
        q: Some(ints.pair_overlap),
        r,
        exact: true,
    })
}

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.5758293035489004;

const MC_CHUNK: u64 = 4096;

/// Membership of `u / 2^64` in `E_n(a/b)` with machine integers when they suffice.
fn dyadic_hit(u: u64, n: u64, a: u64, b: u64) -> bool {
    // Fast path: at most one integer within ψ < 1/2 of n x.
    let nu = n as u128 * u as u128;
    let floor = (nu >> 64) as u64;
    let frac = nu as u64;
    let radius = (a as u128) << 64;
    let below = frac as u128 * b as u128;
    if below < radius && numtheory::gcd(floor % n, n) == 1 {
        return true;
    }
    let above = ((1u128 << 64) - frac as u128) * b as u128;
    above < radius && numtheory::gcd((floor + 1) % n, n) == 1
}

/// `B_h` estimated from `samples` uniform dyadic points; `S_h` stays exact.
pub fn block_stats_mc(
    psi: &PsiSpec,
    scheme: &BlockScheme,
    h: u32,
    samples: u64,
    seed: u64,
) -> Result<BlockStats, BlockError> {
    if samples == 0 {
        return Err(BlockError::NoSamples);
    }
    scheme.validate()?;
    let (lo, hi) = scheme.range(h)?;
    let support = block_support(psi, scheme, h)?;
    let s = mass(&support);
    let half = Rational::new(1, 2);
    let full = support.iter().any(|(n, v)| v * Rational::from_integer(2) >= Rational::from(*n));
    // Machine-integer parameters when ψ < 1/2 and the parts fit.
    let fast: Option<Vec<(u64, u64, u64)>> = support
        .iter()
        .map(|(n, v)| {
            if v >= &half {
                return None;
            }
            let (a, b) = (v.numer().to_u64()?, v.denom().to_u64()?);
            Some((*n, a, b))
        })
        .collect();
    let general: Vec<_> = support.iter().map(|(n, v)| (*n, v.numer(), v.denom())).collect();
    let chunks = samples.div_ceil(MC_CHUNK);
    let hits: u64 = if full {
        samples
    } else {
        (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(chunk);
                let count = MC_CHUNK.min(samples - chunk * MC_CHUNK);
                (0..count)
                    .filter(|_| {
                        let u: u64 = rng.gen();
                        match &fast {
                            Some(f) => f.iter().any(|&(n, a, b)| dyadic_hit(u, n, a, b)),
                            None => general.iter().any(|(n, a, b)| circle::in_e_n_dyadic(u, *n, a, b)),
                        }
                    })
                    .count() as u64
            })
            .sum()
    };
    let p = hits as f64 / samples as f64;
    let half_width = Z99 * (p * (1.0 - p) / samples as f64).sqrt();
    Ok(BlockStats {
        h,
        lo,
        hi,
        members: support.len(),
        s,
        b: BValue::Estimate {
            value: Rational::from_bigints(hits.into(), samples.into()),
            hits,
            samples,
            half_width,
        },
        sum_measures: None,
        q: None,
        r: None,
        exact: false,
    })
}

/// `s² / (s + q)`.
pub fn cauchy_schwarz_lower(s: &Rational, q: &Rational) -> Result<Rational, BlockError> {
    let den = s + q;
    if den.is_zero() {
        return Err(BlockError::ZeroMass);
    }
    Ok(s * s / den)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub h: u32,
    pub s: Rational,
    pub sum_psi: Rational,
    pub sum_psi_n_over_phi: Rational,
    pub q: Rational,
    /// `S_h <= 1/h`.
    pub a1: bool,
    /// `Σ ψ(n) <= 1/√h`, decided as `(Σ ψ)² h <= 1`.
    pub a2: bool,
    /// `Σ ψ(n) n / φ(n) <= 1`.
    pub a3: bool,
    pub q_over_s: Option<Rational>,
    /// Under (A3): `Q_h <= 8 (Σψ)²` and `8 (Σψ)² <= 8 S_h Σ ψ n/φ`.
    pub a3_chain: Option<(bool, bool)>,
}

/// (A1)–(A3) on block `h >= 1`.
pub fn check_assumptions(psi: &PsiSpec, scheme: &BlockScheme, h: u32) -> Result<AssumptionReport, BlockError> {
    let stats = block_stats_exact(psi, scheme, h)?;
    let support = block_support(psi, scheme, h)?;
    let sum_psi = Rational::sum_exact(support.iter().map(|(_, v)| v.clone()));
    let sum_psi_n_over_phi = Rational::sum_exact(
        support.iter().map(|(n, v)| v * Rational::from(*n) / Rational::from(numtheory::euler_phi(*n))),
    );
    let q = stats.q.clone().expect("exact stats carry Q");
    let s = stats.s.clone();
    // The thresholds 1/h and 1/√h need h >= 1; block 0 has none.
    let hr = Rational::from(h);
    let a1 = h == 0 || s <= hr.recip();
    let a2 = h == 0 || &sum_psi * &sum_psi * &hr <= Rational::one();
    let a3 = sum_psi_n_over_phi <= Rational::one();
    let eight = Rational::from_integer(8);
    let a3_chain = a3.then(|| {
        let mid = &eight * &sum_psi * &sum_psi;
        (q <= mid, mid <= &eight * &s * &sum_psi_n_over_phi)
    });
    let q_over_s = (!s.is_zero()).then(|| &q / &s);
    Ok(AssumptionReport { h, s, sum_psi, sum_psi_n_over_phi, q, a1, a2, a3, q_over_s, a3_chain })
}

/// Divides `ψ` by `S_h(ψ)` on every block with `S_h(ψ) > 1`.
pub fn psi2_normalize(psi: &PsiSpec, scheme: &BlockScheme) -> Result<PsiSpec, BlockError> {
    scheme.validate()?;
    let support = psi.finite_support()?;
    let top = support.last().map_or(0, |(n, _)| *n);
    let mut factors = Vec::new();
    for h in scheme.first()..=scheme.last() {
        let (lo, hi) = scheme.range(h)?;
        if lo > top {
            break;
        }
        let s = block_mass(psi, scheme, h)?;
        if s > Rational::one() {
            factors.push((lo, hi, s));
        }
    }
    Ok(PsiSpec::table(support.into_iter().map(|(n, v)| {
        match factors.iter().find(|(lo, hi, _)| *lo <= n && n <= *hi) {
            Some((_, _, s)) => (n, v / s),
            None => (n, v),
        }
    }))?)
}
