//! Weighted second-moment lower bounds and the block weighting scheme built
//! on them: the divergence criterion `Σ log S_h / (h log log S_h)` and the
//! convolution-based choice of `k_h`, `ψ̄ = ψ e^{-k_h}` and `ω_{Δ_h}`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocks::{self, BlockError, BlockScheme};
use crate::certified::{self, Interval, Undecided, DEFAULT_PRECISION};
use crate::circle::CircleSet;
use crate::numtheory;
use crate::psi::PsiSpec;
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BcError {
    #[error("event system: {0}")]
    Invalid(String),
    #[error("prefix {prefix} outside 1..={n}")]
    BadPrefix { prefix: usize, n: usize },
    #[error("second moment vanishes on prefix {0}")]
    ZeroDenominator(usize),
    #[error("S_{h} = {s} is below e^e")]
    BelowThreshold { h: u32, s: Rational },
    #[error(transparent)]
    Undecided(#[from] Undecided),
    #[error(transparent)]
    Block(#[from] BlockError),
}

/// Events given by their probabilities, pairwise intersections and weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSystem {
    pub p: Vec<Rational>,
    /// Symmetric, `pp[i][i] = p[i]`.
    pub pp: Vec<Vec<Rational>>,
    pub weights: Vec<Rational>,
}

impl EventSystem {
    pub fn new(p: Vec<Rational>, pp: Vec<Vec<Rational>>, weights: Option<Vec<Rational>>) -> Result<Self, BcError> {
        let n = p.len();
        let weights = weights.unwrap_or_else(|| vec![Rational::one(); n]);
        let es = EventSystem { p, pp, weights };
        es.validate()?;
        Ok(es)
    }

    /// Events realized as arcs of the circle, probabilities their measures.
    pub fn from_sets(sets: &[CircleSet], weights: Option<Vec<Rational>>) -> Result<Self, BcError> {
        let p: Vec<Rational> = sets.iter().map(CircleSet::measure).collect();
        let pp = (0..sets.len())
            .map(|i| {
                (0..sets.len())
                    .map(|j| if i == j { p[i].clone() } else { sets[i].intersection_measure(&sets[j]) })
                    .collect()
            })
            .collect();
        Self::new(p, pp, weights)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn validate(&self) -> Result<(), BcError> {
        let n = self.p.len();
        let bad = |m: &str| Err(BcError::Invalid(m.to_string()));
        if self.weights.len() != n || self.pp.len() != n || self.pp.iter().any(|r| r.len() != n) {
            return bad("dimension mismatch");
        }
        if self.weights.iter().any(Rational::is_negative) {
            return bad("negative weight");
        }
        let one = Rational::one();
        for i in 0..n {
            if self.p[i].is_negative() || self.p[i] > one {
                return bad("probability outside [0, 1]");
            }
            if self.pp[i][i] != self.p[i] {
                return bad("diagonal differs from p");
            }
            for j in 0..n {
                let v = &self.pp[i][j];
                if v != &self.pp[j][i] {
                    return bad("pp not symmetric");
                }
                if v.is_negative() || v > &self.p[i] || v > &self.p[j] {
                    return bad("pp outside [0, min(p_i, p_j)]");
                }
            }
        }
        Ok(())
    }

    pub fn with_weights(&self, weights: Vec<Rational>) -> Result<Self, BcError> {
        Self::new(self.p.clone(), self.pp.clone(), Some(weights))
    }
}

/// `(Σ_{k<=prefix} ω_k p_k)² / Σ_{i,j<=prefix} ω_i ω_j pp_ij`.
pub fn bc_lower_bound(es: &EventSystem, prefix: usize) -> Result<Rational, BcError> {
    if prefix == 0 || prefix > es.len() {
        return Err(BcError::BadPrefix { prefix, n: es.len() });
    }
    let w = &es.weights[..prefix];
    let first = Rational::sum_exact((0..prefix).map(|k| &w[k] * &es.p[k]));
    let second = Rational::sum_exact(
        (0..prefix).flat_map(|i| (0..prefix).map(move |j| (i, j))).map(|(i, j)| &w[i] * &w[j] * &es.pp[i][j]),
    );
    if second.is_zero() {
        return Err(BcError::ZeroDenominator(prefix));
    }
    Ok(&first * &first / second)
}

/// Largest bound over prefixes with nonzero second moment, and its prefix.
pub fn bc_max_over_prefixes(es: &EventSystem) -> Option<(Rational, usize)> {
    (1..=es.len())
        .filter_map(|k| bc_lower_bound(es, k).ok().map(|v| (v, k)))
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
}

/// Lower cut-off on `S_h` for a block to enter the criterion sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// `S_h >= 3`.
    Three,
    /// `S_h >= e^e`.
    ExpE,
}

impl Threshold {
    pub fn admits(self, s: &Rational) -> Result<bool, Undecided> {
        match self {
            Threshold::Three => Ok(s >= &Rational::from_integer(3)),
            Threshold::ExpE => certified::at_least_exp_e(s),
        }
    }
}

/// Enclosure of `log S / (h log log S)` for `S >= 3`, `h >= 1`.
pub fn criterion_term(s: &Rational, h: u32, prec: u32) -> Interval {
    let ln_s = certified::ln(s, prec);
    let lnln = certified::ln_interval(&ln_s, prec);
    ln_s.div(&lnln.scale(&Rational::from(h))).round_outward(prec)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub h: u32,
    pub s: Rational,
    /// `None` when the block is below the threshold or `h = 0`.
    pub term: Option<Interval>,
    pub partial_sum: Interval,
}

/// Terms and partial sums of the criterion for blocks up to `h_max`.
pub fn block_criterion(
    psi: &PsiSpec,
    scheme: &BlockScheme,
    h_max: u32,
    threshold: Threshold,
) -> Result<Vec<CriterionRow>, BcError> {
    scheme.validate()?;
    let mut rows = Vec::new();
    let mut partial = Interval::zero();
    for h in scheme.first()..=h_max.min(scheme.last()) {
        let s = blocks::block_mass(psi, scheme, h)?;
        let term = if h >= 1 && threshold.admits(&s)? {
            Some(criterion_term(&s, h, DEFAULT_PRECISION))
        } else {
            None
        };
        if let Some(t) = &term {
            partial = partial.add(t);
        }
        rows.push(CriterionRow { h, s, term, partial_sum: partial.clone() });
    }
    Ok(rows)
}

/// `j` with `e^j <= d < e^{j+1}`, or `None` when `d < e^{-1}`.
struct DClassifier {
    prec: u32,
    /// `thresholds[i]` encloses `e^{i-1}`.
    thresholds: Vec<Interval>,
}

impl DClassifier {
    fn new() -> Self {
        DClassifier { prec: DEFAULT_PRECISION, thresholds: Vec::new() }
    }

    fn threshold(&mut self, j: i64) -> &Interval {
        let i = (j + 1) as usize;
        while self.thresholds.len() <= i {
            let e = self.thresholds.len() as i64 - 1;
            self.thresholds.push(certified::exp(&Rational::from_integer(e), self.prec));
        }
        &self.thresholds[i]
    }

    /// `d >= e^j`, escalating precision for this comparison if needed.
    fn at_least(&mut self, d: &Rational, j: i64) -> Result<bool, Undecided> {
        match self.threshold(j).cmp_rational(d) {
            Some(o) => Ok(o != Ordering::Greater),
            None => certified::cmp_exp(d, j).map(|o| o != Ordering::Less),
        }
    }

    fn classify(&mut self, d: &Rational) -> Result<Option<i64>, Undecided> {
        if !self.at_least(d, -1)? {
            return Ok(None);
        }
        let mut j = -1;
        while self.at_least(d, j + 1)? {
            j += 1;
        }
        Ok(Some(j))
    }
}

/// `A_j = Σ_{(m,n) ∈ D_j} ψ(m)ψ(n) φ(m)/m φ(n)/n` over ordered pairs `m ≠ n`.
pub fn a_coefficients(support: &[(u64, Rational)]) -> Result<BTreeMap<i64, Rational>, BcError> {
    let weight: Vec<Rational> = support
        .iter()
        .map(|(n, v)| v * Rational::from(numtheory::euler_phi(*n)) / Rational::from(*n))
        .collect();
    let per_row: Vec<Result<BTreeMap<i64, Vec<Rational>>, Undecided>> = (0..support.len())
        .into_par_iter()
        .map(|i| {
            let mut cls = DClassifier::new();
            let mut out: BTreeMap<i64, Vec<Rational>> = BTreeMap::new();
            let (m, pm) = &support[i];
            for (k, (n, pn)) in support.iter().enumerate() {
                if k == i {
                    continue;
                }
                let params = numtheory::pair_params(*m, *n, pm, pn).expect("distinct block members");
                if let Some(j) = cls.classify(&params.d)? {
                    out.entry(j).or_default().push(&weight[i] * &weight[k]);
                }
            }
            Ok(out)
        })
        .collect();
    let mut merged: BTreeMap<i64, Vec<Rational>> = BTreeMap::new();
    for row in per_row {
        for (j, mut v) in row? {
            merged.entry(j).or_default().append(&mut v);
        }
    }
    Ok(merged.into_iter().map(|(j, v)| (j, Rational::sum_exact(v))).collect())
}

/// `ψ̄ = ψ e^{-k}` on one block, kept as the rational part and `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsiBar {
    pub psi: PsiSpec,
    pub k: i64,
}

impl PsiBar {
    /// Enclosure of `ψ̄(n)`.
    pub fn value(&self, n: u64, prec: u32) -> Interval {
        certified::exp(&Rational::from_integer(-self.k), prec).scale(&self.psi.value(n))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YoungCheck {
    pub f_l1: Rational,
    pub g_l1: Rational,
    pub conv_l1: Rational,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvolutionPlan {
    pub h: u32,
    pub s: Rational,
    pub ln_s: Interval,
    /// `y_h = log S_h / log log S_h`.
    pub y: Interval,
    pub y_floor: i64,
    /// `floor(log S_h)`, the largest admissible `k`.
    pub k_max: i64,
    pub a: BTreeMap<i64, Rational>,
    /// `Σ_{j=k-1}^{k+⌊y⌋} h/(j-k+2) A_j` for `k = 0..=k_max`.
    pub objective: Vec<Rational>,
    pub k: i64,
    pub psibar: PsiBar,
    /// `S_h(ψ̄) = S_h e^{-k}`.
    pub s_psibar: Interval,
    /// `e^k log S_h / (S_h h log log S_h)` before clamping.
    pub omega_raw: Interval,
    /// `omega_raw` clamped to `[0, 1]`.
    pub omega: Interval,
    /// `S_h <= exp(h log h)`, under which `ω <= 1` without clamping.
    pub within_hypothesis: bool,
    pub young: YoungCheck,
}

/// `f(j) = A_j` and `g(j) = h/(2 - j)` on `-⌊y⌋ <= j <= 1`.
fn g_value(h: u32, j: i64, y_floor: i64) -> Rational {
    if j > 1 || j < -y_floor {
        Rational::zero()
    } else {
        Rational::new(h as i64, 2 - j)
    }
}

fn convolve(a: &BTreeMap<i64, Rational>, h: u32, y_floor: i64, k: i64) -> Rational {
    Rational::sum_exact(a.iter().map(|(&j, v)| v * g_value(h, k - j, y_floor)))
}

/// Builds the plan for block `h`; requires `S_h >= e^e`.
pub fn convolution_select(psi: &PsiSpec, scheme: &BlockScheme, h: u32) -> Result<ConvolutionPlan, BcError> {
    scheme.validate()?;
    if h == 0 {
        return Err(BcError::Invalid("block index must be at least 1".into()));
    }
    let support = blocks::block_support(psi, scheme, h)?;
    let s = blocks::mass(&support);
    if !certified::at_least_exp_e(&s)? {
        return Err(BcError::BelowThreshold { h, s });
    }
    let prec = DEFAULT_PRECISION;
    let ln_s = certified::ln(&s, prec);
    let y_of = |p: u32| {
        let l = certified::ln(&s, p);
        l.div(&certified::ln_interval(&l, p))
    };
    let y = y_of(prec).round_outward(prec);
    let y_floor = num_traits::ToPrimitive::to_i64(&certified::floor_of(y_of)?).expect("y fits");
    let k_max = certified::floor_ln(&s)?;
    let a = a_coefficients(&support)?;
    let objective: Vec<Rational> = (0..=k_max)
        .map(|k| {
            Rational::sum_exact(
                (k - 1..=k + y_floor).filter_map(|j| a.get(&j).map(|v| v * Rational::new(h as i64, j - k + 2))),
            )
        })
        .collect();
    let (best, _) = objective
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.cmp(y.1).then(x.0.cmp(&y.0)))
        .expect("k range is non-empty");
    let k = best as i64;

    // Young: ‖f * g‖₁ against ‖f‖₁ ‖g‖₁, with f * g summed over its support.
    let f_l1 = Rational::sum_exact(a.values().cloned());
    let g_l1 = Rational::sum_exact((-y_floor..=1).map(|j| g_value(h, j, y_floor)));
    let (lo_k, hi_k) = match (a.keys().next(), a.keys().next_back()) {
        (Some(&lo), Some(&hi)) => (lo - y_floor, hi + 1),
        _ => (0, -1),
    };
    let conv_l1 = Rational::sum_exact((lo_k..=hi_k).map(|kk| convolve(&a, h, y_floor, kk)));
    let young = YoungCheck { holds: conv_l1 <= &f_l1 * &g_l1, f_l1, g_l1, conv_l1 };
    debug_assert!(
        (0..=k_max).all(|kk| objective[kk as usize] == convolve(&a, h, y_floor, kk)),
        "objective differs from the convolution"
    );

    let e_minus_k = certified::exp(&Rational::from_integer(-k), prec);
    let s_psibar = e_minus_k.scale(&s);
    let hr = Rational::from(h);
    let omega_raw = s_psibar
        .recip()
        .mul(&ln_s.div(&certified::ln_interval(&ln_s, prec).scale(&hr)))
        .round_outward(prec);
    let omega = omega_raw.clamp(&Rational::zero(), &Rational::one());
    // S_h <= exp(h log h)  ⇔  log S_h <= h log h.
    let within_hypothesis = h >= 1 && {
        let rhs = certified::ln(&hr, prec).scale(&hr);
        ln_s.certainly_le(&rhs)
    };
    let block_psi = PsiSpec::table(support)?;
    Ok(ConvolutionPlan {
        h,
        s,
        ln_s,
        y,
        y_floor,
        k_max,
        a,
        objective,
        k,
        psibar: PsiBar { psi: block_psi, k },
        s_psibar,
        omega_raw,
        omega,
        within_hypothesis,
        young,
    })
}

impl From<crate::psi::PsiError> for BcError {
    fn from(e: crate::psi::PsiError) -> Self {
        BcError::Block(e.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::build_e_n;
    use crate::rational::rat;

    #[test]
    fn bound_examples() {
        let one = EventSystem::new(vec![rat(1, 2)], vec![vec![rat(1, 2)]], None).unwrap();
        assert_eq!(bc_lower_bound(&one, 1).unwrap(), rat(1, 2));
        let same = EventSystem::new(
            vec![rat(1, 2), rat(1, 2)],
            vec![vec![rat(1, 2), rat(1, 2)], vec![rat(1, 2), rat(1, 2)]],
            None,
        )
        .unwrap();
        assert_eq!(bc_lower_bound(&same, 2).unwrap(), rat(1, 2));
        let disjoint = EventSystem::new(
            vec![rat(1, 2), rat(1, 2)],
            vec![vec![rat(1, 2), rat(0, 1)], vec![rat(0, 1), rat(1, 2)]],
            None,
        )
        .unwrap();
        assert_eq!(bc_lower_bound(&disjoint, 2).unwrap(), rat(1, 1));
        let zero = EventSystem::new(vec![rat(0, 1)], vec![vec![rat(0, 1)]], None).unwrap();
        assert_eq!(bc_lower_bound(&zero, 1), Err(BcError::ZeroDenominator(1)));
        assert!(EventSystem::new(vec![rat(1, 2)], vec![vec![rat(1, 3)]], None).is_err());
    }

    #[test]
    fn bound_from_arcs_is_below_union() {
        let sets: Vec<CircleSet> = (2..12u64).map(|n| build_e_n(n, &rat(1, 3))).collect();
        let es = EventSystem::from_sets(&sets, None).unwrap();
        let union = CircleSet::union_all(sets.iter()).measure();
        let (best, _) = bc_max_over_prefixes(&es).unwrap();
        assert!(best <= union);
        let scaled = es.with_weights(vec![rat(7, 3); sets.len()]).unwrap();
        for k in 1..=sets.len() {
            assert_eq!(bc_lower_bound(&es, k).unwrap(), bc_lower_bound(&scaled, k).unwrap());
        }
    }

    #[test]
    fn criterion_examples() {
        let c = BlockScheme::Canonical;
        let low = PsiSpec::constant(rat(1, 100), 5, 256);
        let rows = block_criterion(&low, &c, 2, Threshold::Three).unwrap();
        assert!(rows.iter().all(|r| r.term.is_none()));
        // A block with S_2 = 16 exactly.
        let s16 = PsiSpec::table([(17, rat(17, 1))]).unwrap();
        assert_eq!(blocks::block_mass(&s16, &c, 2).unwrap(), rat(16, 1));
        let rows = block_criterion(&s16, &c, 2, Threshold::Three).unwrap();
        let term = rows[2].term.clone().unwrap();
        let expected = 16f64.ln() / (2.0 * 16f64.ln().ln());
        assert!(term.lo().to_f64() <= expected + 1e-15 && expected - 1e-15 <= term.hi().to_f64());
        assert!(term.width() < Rational::from_bigints(1.into(), num_bigint::BigInt::from(1u8) << 100usize));
    }

    #[test]
    fn criterion_below_e_e_is_not_monotone() {
        // log S / log log S decreases on [3, e^e): the S >= 3 form can drop.
        let c = BlockScheme::Canonical;
        let a = PsiSpec::table([(17, rat(51, 16))]).unwrap(); // S_2 = 3
        let b = PsiSpec::table([(17, rat(51, 8))]).unwrap(); // S_2 = 6
        let ta = block_criterion(&a, &c, 2, Threshold::Three).unwrap()[2].partial_sum.clone();
        let tb = block_criterion(&b, &c, 2, Threshold::Three).unwrap()[2].partial_sum.clone();
        assert!(tb.certainly_lt(&ta));
    }

    #[test]
    fn convolution_examples() {
        let scheme = BlockScheme::custom(vec![1, 40]).unwrap();
        // Single nonzero value: no pairs, every A_j = 0, k = 0.
        let single = PsiSpec::table([(37, rat(20, 1))]).unwrap();
        let plan = convolution_select(&single, &scheme, 1).unwrap();
        assert!(plan.a.is_empty());
        assert_eq!(plan.k, 0);
        assert!(plan.young.holds);

        // D(m, n) = 1 lands in class 0: m = 2, n = 3, ψ(2) = 1/3, ψ(3) = 1/2
        // gives D = max(3·1/3, 2·1/2) = 1.
        let pair = PsiSpec::table([(2, rat(1, 3)), (3, rat(1, 2)), (30, rat(60, 1))]).unwrap();
        let d = numtheory::pair_params(2, 3, &rat(1, 3), &rat(1, 2)).unwrap().d;
        assert_eq!(d, Rational::one());
        let mut cls = DClassifier::new();
        assert_eq!(cls.classify(&d).unwrap(), Some(0));
        assert_eq!(cls.classify(&rat(1, 3)).unwrap(), None);
        assert_eq!(cls.classify(&rat(37, 100)).unwrap(), Some(-1));
        assert_eq!(cls.classify(&rat(8, 1)).unwrap(), Some(2));
        let plan = convolution_select(&pair, &scheme, 1).unwrap();
        assert!(plan.a.contains_key(&0));
        assert!(plan.k <= plan.k_max);
        assert!(plan.omega.lo() >= &Rational::zero() && plan.omega.hi() <= &Rational::one());
        for (kk, v) in plan.objective.iter().enumerate() {
            assert!(v >= &plan.objective[plan.k as usize], "k = {kk} beats the chosen k");
        }

        let small = PsiSpec::table([(5, rat(1, 1))]).unwrap();
        assert!(matches!(convolution_select(&small, &scheme, 1), Err(BcError::BelowThreshold { .. })));
    }
}
