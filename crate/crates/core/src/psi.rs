//! Non-negative arithmetical functions `psi: N -> Q_{>=0}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PsiError {
    #[error("psi has unbounded support; give an upper index bound")]
    Unbounded,
    #[error("psi({n}) = {value} is negative")]
    Negative { n: u64, value: Rational },
    #[error("psi is indexed from 1, got index 0")]
    ZeroIndex,
    #[error("support of {0} indices exceeds the materialization cap {1}")]
    TooLarge(u64, u64),
    #[error("scaling factor {0} must be positive")]
    BadScale(Rational),
}

/// Largest support that is ever materialized into a table.
pub const MATERIALIZE_CAP: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiSpec {
    /// Explicit values; absent indices are 0.
    Table {
        #[serde(with = "table_serde")]
        values: BTreeMap<u64, Rational>,
    },
    /// `value` on `[lo, hi]`.
    Constant { value: Rational, lo: u64, hi: Option<u64> },
    /// `scale / n` on `[lo, hi]`.
    Reciprocal { scale: Rational, lo: u64, hi: Option<u64> },
}

impl Default for PsiSpec {
    fn default() -> Self {
        PsiSpec::Table { values: BTreeMap::new() }
    }
}

impl PsiSpec {
    /// Builds a table, dropping zeros.
    pub fn table<I: IntoIterator<Item = (u64, Rational)>>(entries: I) -> Result<Self, PsiError> {
        let mut values = BTreeMap::new();
        for (n, v) in entries {
            if n == 0 {
                return Err(PsiError::ZeroIndex);
            }
            if v.is_negative() {
                return Err(PsiError::Negative { n, value: v });
            }
            if !v.is_zero() {
                values.insert(n, v);
            }
        }
        Ok(PsiSpec::Table { values })
    }

    pub fn constant(value: Rational, lo: u64, hi: u64) -> Self {
        PsiSpec::Constant { value, lo, hi: Some(hi) }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), PsiError> {
        match self {
            PsiSpec::Table { values } => {
                if values.contains_key(&0) {
                    return Err(PsiError::ZeroIndex);
                }
                match values.iter().find(|(_, v)| v.is_negative()) {
                    Some((&n, v)) => Err(PsiError::Negative { n, value: v.clone() }),
                    None => Ok(()),
                }
            }
            PsiSpec::Constant { value: v, lo, .. } | PsiSpec::Reciprocal { scale: v, lo, .. } => {
                if v.is_negative() {
                    Err(PsiError::Negative { n: (*lo).max(1), value: v.clone() })
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn value(&self, n: u64) -> Rational {
        match self {
            PsiSpec::Table { values } => values.get(&n).cloned().unwrap_or_default(),
            PsiSpec::Constant { value, lo, hi } => {
                if n >= (*lo).max(1) && hi.is_none_or(|h| n <= h) {
                    value.clone()
                } else {
                    Rational::zero()
                }
            }
            PsiSpec::Reciprocal { scale, lo, hi } => {
                if n >= (*lo).max(1) && hi.is_none_or(|h| n <= h) {
                    scale / Rational::from(n)
                } else {
                    Rational::zero()
                }
            }
        }
    }

    /// Largest index with possibly nonzero value, `None` if unbounded.
    pub fn support_max(&self) -> Option<u64> {
        match self {
            PsiSpec::Table { values } => Some(values.keys().next_back().copied().unwrap_or(0)),
            PsiSpec::Constant { value, hi, .. } | PsiSpec::Reciprocal { scale: value, hi, .. } => {
                if value.is_zero() {
                    Some(0)
                } else {
                    *hi
                }
            }
        }
    }

    fn support_min(&self) -> u64 {
        match self {
            PsiSpec::Table { values } => values.keys().next().copied().unwrap_or(1),
            PsiSpec::Constant { lo, .. } | PsiSpec::Reciprocal { lo, .. } => (*lo).max(1),
        }
    }

    /// Nonzero values with index in `[lo, hi]`, increasing in the index.
    pub fn nonzero_in(&self, lo: u64, hi: u64) -> Vec<(u64, Rational)> {
        let lo = lo.max(self.support_min());
        let hi = match self.support_max() {
            Some(m) => hi.min(m),
            None => hi,
        };
        if lo > hi {
            return Vec::new();
        }
        match self {
            PsiSpec::Table { values } => values.range(lo..=hi).map(|(&n, v)| (n, v.clone())).collect(),
            _ => (lo..=hi).map(|n| (n, self.value(n))).filter(|(_, v)| !v.is_zero()).collect(),
        }
    }

    /// All nonzero values; requires bounded support.
    pub fn finite_support(&self) -> Result<Vec<(u64, Rational)>, PsiError> {
        let hi = self.support_max().ok_or(PsiError::Unbounded)?;
        let lo = self.support_min();
        if hi >= lo && !matches!(self, PsiSpec::Table { .. }) && hi - lo + 1 > MATERIALIZE_CAP {
            return Err(PsiError::TooLarge(hi - lo + 1, MATERIALIZE_CAP));
        }
        Ok(self.nonzero_in(1, hi))
    }

    /// `t * psi` for `t > 0`.
    pub fn scaled(&self, t: &Rational) -> Result<Self, PsiError> {
        if !t.is_positive() {
            return Err(PsiError::BadScale(t.clone()));
        }
        Ok(match self {
            PsiSpec::Table { values } => PsiSpec::Table {
                values: values.iter().map(|(&n, v)| (n, v * t)).collect(),
            },
            PsiSpec::Constant { value, lo, hi } => PsiSpec::Constant { value: value * t, lo: *lo, hi: *hi },
            PsiSpec::Reciprocal { scale, lo, hi } => PsiSpec::Reciprocal { scale: scale * t, lo: *lo, hi: *hi },
        })
    }

    /// Materializes `f(n, psi(n))` over the finite support, dropping zeros.
    pub fn map_values(&self, mut f: impl FnMut(u64, &Rational) -> Rational) -> Result<Self, PsiError> {
        let support = self.finite_support()?;
        PsiSpec::table(support.into_iter().map(|(n, v)| {
            let w = f(n, &v);
            (n, w)
        }))
    }

    /// `min(psi, 1/2)`.
    pub fn clamp_half(&self) -> Result<Self, PsiError> {
        let half = Rational::new(1, 2);
        self.map_values(|_, v| v.clone().min(half.clone()))
    }

    /// Zeroes the values in `(0, 1/n)`, leaving `psi(n) in {0} ∪ [1/n, ∞)`.
    pub fn erdos_vaaler_filter(&self) -> Result<Self, PsiError> {
        self.map_values(|n, v| {
            if v < &Rational::new(1, n as i64) {
                Rational::zero()
            } else {
                v.clone()
            }
        })
    }
}

/// Tables serialize as `[[n, "a/b"], ...]`; integer map keys do not survive
/// every text format.
mod table_serde {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::rational::Rational;

    pub fn serialize<S: Serializer>(v: &BTreeMap<u64, Rational>, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<(u64, &Rational)> = v.iter().map(|(&n, r)| (n, r)).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, Rational>, D::Error> {
        let pairs: Vec<(u64, Rational)> = Vec::deserialize(d)?;
        Ok(pairs.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn evaluation_and_support() {
        let c = PsiSpec::constant(rat(1, 2), 3, 5);
        assert_eq!(c.value(2), Rational::zero());
        assert_eq!(c.value(4), rat(1, 2));
        assert_eq!(c.finite_support().unwrap().len(), 3);
        let r = PsiSpec::Reciprocal { scale: rat(1, 1), lo: 1, hi: None };
        assert_eq!(r.value(4), rat(1, 4));
        assert_eq!(r.finite_support(), Err(PsiError::Unbounded));
        assert_eq!(r.nonzero_in(2, 3), vec![(2, rat(1, 2)), (3, rat(1, 3))]);
    }

    #[test]
    fn table_rejects_bad_entries() {
        assert_eq!(PsiSpec::table([(0, rat(1, 2))]), Err(PsiError::ZeroIndex));
        assert!(matches!(PsiSpec::table([(3, rat(-1, 2))]), Err(PsiError::Negative { n: 3, .. })));
        let t = PsiSpec::table([(3, rat(0, 1)), (4, rat(1, 3))]).unwrap();
        assert_eq!(t.finite_support().unwrap(), vec![(4, rat(1, 3))]);
    }

    #[test]
    fn filters() {
        let t = PsiSpec::table([(2, rat(1, 3)), (4, rat(1, 4)), (5, rat(3, 1))]).unwrap();
        let ev = t.erdos_vaaler_filter().unwrap();
        assert_eq!(ev.finite_support().unwrap(), vec![(4, rat(1, 4)), (5, rat(3, 1))]);
        let h = t.clamp_half().unwrap();
        assert_eq!(h.value(5), rat(1, 2));
        assert_eq!(t.scaled(&rat(2, 1)).unwrap().value(2), rat(2, 3));
    }

    #[test]
    fn serde_roundtrip() {
        let t = PsiSpec::table([(2, rat(1, 3)), (7, rat(5, 2))]).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<PsiSpec>(&s).unwrap(), t);
    }
}
