//! Seeded generation of ψ families.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocks::{self, BlockError, BlockScheme};
use crate::numtheory;
use crate::psi::{PsiError, PsiSpec, MATERIALIZE_CAP};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("empty index range [{0}, {1}]")]
    EmptyRange(u64, u64),
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("denominator bound must be positive")]
    ZeroDenominator,
    #[error("support size {size} exceeds range length {len}")]
    SupportTooLarge { size: u64, len: u64 },
    #[error("target S_{h} = {target} unreachable: the largest value allowed by the clamp gives {max}")]
    Unachievable { h: u32, target: Box<Rational>, max: Box<Rational> },
    #[error("block {h} has no members to carry target {target}")]
    EmptyBlock { h: u32, target: Rational },
    #[error(transparent)]
    Psi(#[from] PsiError),
    #[error(transparent)]
    Block(#[from] BlockError),
}

/// Default cap on random denominators.
pub const DEFAULT_DEN_BOUND: u64 = 1 << 20;

fn default_den_bound() -> u64 {
    DEFAULT_DEN_BOUND
}

fn default_max_value() -> Rational {
    Rational::new(1, 2)
}

fn default_one() -> Rational {
    Rational::one()
}

/// Family descriptor, part of the experiment configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Constant { value: Rational, lo: u64, hi: u64 },
    /// `scale / n`.
    Reciprocal {
        #[serde(default = "default_one")]
        scale: Rational,
        lo: u64,
        hi: u64,
    },
    /// `value` on `n ≡ residue (mod modulus)`.
    ResidueClass { value: Rational, modulus: u64, residue: u64, lo: u64, hi: u64 },
    /// `value` on primes.
    Primes { value: Rational, lo: u64, hi: u64 },
    /// Constant on each listed block, scaled so that `S_h` equals its target.
    BlockTargeted { scheme: BlockScheme, targets: Vec<(u32, Rational)> },
    /// `a/b` with `b` uniform in `[1, den_bound]`, `a/b` uniform below `max_value`.
    UniformRandom {
        lo: u64,
        hi: u64,
        /// Number of distinct indices drawn; all of `[lo, hi]` when absent.
        #[serde(default)]
        support_size: Option<u64>,
        #[serde(default = "default_den_bound")]
        den_bound: u64,
        #[serde(default = "default_max_value")]
        max_value: Rational,
    },
    /// Explicit `(n, value)` pairs.
    Explicit { values: Vec<(u64, Rational)> },
}

/// A family together with optional clamps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsiDescriptor {
    #[serde(flatten)]
    pub family: Family,
    /// `ψ <= 1/2`, so that `λ(E_n) = 2ψφ(n)/n`.
    #[serde(default)]
    pub clamp_half: bool,
    /// `ψ(n) ∈ {0} ∪ [1/n, ∞)`.
    #[serde(default)]
    pub erdos_vaaler: bool,
}

impl From<Family> for PsiDescriptor {
    fn from(family: Family) -> Self {
        PsiDescriptor { family, clamp_half: false, erdos_vaaler: false }
    }
}

fn check_range(lo: u64, hi: u64) -> Result<(), GenError> {
    if lo == 0 || lo > hi {
        return Err(GenError::EmptyRange(lo, hi));
    }
    if hi - lo + 1 > MATERIALIZE_CAP {
        return Err(PsiError::TooLarge(hi - lo + 1, MATERIALIZE_CAP).into());
    }
    Ok(())
}

fn generate_family(family: &Family, seed: u64, clamp_half: bool) -> Result<PsiSpec, GenError> {
    match family {
        Family::Constant { value, lo, hi } => {
            check_range(*lo, *hi)?;
            let spec = PsiSpec::Constant { value: value.clone(), lo: *lo, hi: Some(*hi) };
            spec.validate()?;
            Ok(spec)
        }
        Family::Reciprocal { scale, lo, hi } => {
            check_range(*lo, *hi)?;
            let spec = PsiSpec::Reciprocal { scale: scale.clone(), lo: *lo, hi: Some(*hi) };
            spec.validate()?;
            Ok(spec)
        }
        Family::ResidueClass { value, modulus, residue, lo, hi } => {
            check_range(*lo, *hi)?;
            if *modulus == 0 {
                return Err(GenError::ZeroModulus);
            }
            let r = residue % modulus;
            Ok(PsiSpec::table((*lo..=*hi).filter(|n| n % modulus == r).map(|n| (n, value.clone())))?)
        }
        Family::Primes { value, lo, hi } => {
            check_range(*lo, *hi)?;
            let primes = numtheory::primes_up_to(*hi);
            let large: Vec<u64> = if *hi > (1 << 24) {
                ((1u64 << 24) + 1..=*hi).filter(|&n| numtheory::factorize(n).pairs == [(n, 1)]).collect()
            } else {
                Vec::new()
            };
            Ok(PsiSpec::table(
                primes.into_iter().chain(large).filter(|p| p >= lo).map(|p| (p, value.clone())),
            )?)
        }
        Family::BlockTargeted { scheme, targets } => {
            scheme.validate()?;
            let mut entries = Vec::new();
            for (h, target) in targets {
                let (lo, hi) = scheme.range(*h)?;
                check_range(lo, hi)?;
                // ψ ≡ c on the block gives S_h = c Σ φ(n)/n.
                let unit = blocks::block_mass(&PsiSpec::constant(Rational::one(), lo, hi), scheme, *h)?;
                if unit.is_zero() {
                    return Err(GenError::EmptyBlock { h: *h, target: target.clone() });
                }
                let c = target / &unit;
                let half = Rational::new(1, 2);
                if clamp_half && c > half {
                    return Err(GenError::Unachievable { h: *h, target: Box::new(target.clone()), max: Box::new(unit * half) });
                }
                entries.extend((lo..=hi).map(|n| (n, c.clone())));
            }
            Ok(PsiSpec::table(entries)?)
        }
        Family::UniformRandom { lo, hi, support_size, den_bound, max_value } => {
            check_range(*lo, *hi)?;
            if *den_bound == 0 {
                return Err(GenError::ZeroDenominator);
            }
            let len = hi - lo + 1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let indices: Vec<u64> = match support_size {
                Some(k) if *k > len => return Err(GenError::SupportTooLarge { size: *k, len }),
                Some(k) => {
                    let mut v: Vec<u64> =
                        index::sample(&mut rng, len as usize, *k as usize).into_iter().map(|i| lo + i as u64).collect();
                    v.sort_unstable();
                    v
                }
                None => (*lo..=*hi).collect(),
            };
            let entries: Vec<(u64, Rational)> = indices
                .into_iter()
                .map(|n| {
                    let b = rng.gen_range(1..=*den_bound);
                    let top = (max_value * Rational::from(b)).floor();
                    let top = num_traits::ToPrimitive::to_u64(&top).unwrap_or(u64::MAX);
                    let a = rng.gen_range(0..=top);
                    (n, Rational::from_bigints(a.into(), b.into()))
                })
                .collect();
            Ok(PsiSpec::table(entries)?)
        }
        Family::Explicit { values } => Ok(PsiSpec::table(values.iter().cloned())?),
    }
}

/// Deterministic in `(descriptor, seed)`.
pub fn generate_psi(desc: &PsiDescriptor, seed: u64) -> Result<PsiSpec, GenError> {
    let mut psi = generate_family(&desc.family, seed, desc.clamp_half)?;
    if desc.clamp_half {
        psi = psi.clamp_half()?;
    }
    if desc.erdos_vaaler {
        psi = psi.erdos_vaaler_filter()?;
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn constant_zero_is_empty() {
        let d: PsiDescriptor = Family::Constant { value: Rational::zero(), lo: 1, hi: 50 }.into();
        let psi = generate_psi(&d, 0).unwrap();
        assert!(psi.finite_support().unwrap().is_empty());
    }

    #[test]
    fn block_targeted_hits_target() {
        let c = BlockScheme::Canonical;
        let d: PsiDescriptor =
            Family::BlockTargeted { scheme: c.clone(), targets: vec![(1, rat(1, 1)), (2, rat(100, 1))] }.into();
        let psi = generate_psi(&d, 0).unwrap();
        assert_eq!(blocks::block_mass(&psi, &c, 1).unwrap(), rat(1, 1));
        assert_eq!(blocks::block_mass(&psi, &c, 2).unwrap(), rat(100, 1));
        let clamped = PsiDescriptor { clamp_half: true, ..d };
        assert!(matches!(generate_psi(&clamped, 0), Err(GenError::Unachievable { h: 2, .. })));
    }

    #[test]
    fn random_is_reproducible_and_bounded() {
        let d: PsiDescriptor = Family::UniformRandom {
            lo: 2,
            hi: 500,
            support_size: Some(40),
            den_bound: 1000,
            max_value: rat(1, 2),
        }
        .into();
        let a = generate_psi(&d, 11).unwrap();
        assert_eq!(a, generate_psi(&d, 11).unwrap());
        assert_ne!(a, generate_psi(&d, 12).unwrap());
        let support = a.finite_support().unwrap();
        assert!(support.len() <= 40);
        for (n, v) in support {
            assert!((2..=500).contains(&n));
            assert!(v <= rat(1, 2) && v.denom() <= 1000.into());
        }
    }

    #[test]
    fn clamps_apply() {
        let d = PsiDescriptor {
            family: Family::Explicit { values: vec![(3, rat(1, 5)), (4, rat(3, 1)), (10, rat(1, 20))] },
            clamp_half: true,
            erdos_vaaler: true,
        };
        let psi = generate_psi(&d, 0).unwrap();
        assert_eq!(psi.finite_support().unwrap(), vec![(4, rat(1, 2))]);
    }

    #[test]
    fn residue_and_prime_families() {
        let d: PsiDescriptor = Family::ResidueClass { value: rat(1, 3), modulus: 4, residue: 1, lo: 1, hi: 20 }.into();
        let ns: Vec<u64> = generate_psi(&d, 0).unwrap().finite_support().unwrap().into_iter().map(|(n, _)| n).collect();
        assert_eq!(ns, vec![1, 5, 9, 13, 17]);
        let d: PsiDescriptor = Family::Primes { value: rat(1, 3), lo: 10, hi: 30 }.into();
        let ns: Vec<u64> = generate_psi(&d, 0).unwrap().finite_support().unwrap().into_iter().map(|(n, _)| n).collect();
        assert_eq!(ns, vec![11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn descriptor_roundtrips_through_toml() {
        let d = PsiDescriptor {
            family: Family::UniformRandom { lo: 2, hi: 9, support_size: None, den_bound: 64, max_value: rat(5, 1) },
            clamp_half: false,
            erdos_vaaler: true,
        };
        #[derive(Serialize, Deserialize)]
        struct Wrap {
            psi: PsiDescriptor,
        }
        let text = toml::to_string(&Wrap { psi: d.clone() }).unwrap();
        let back: Wrap = toml::from_str(&text).unwrap();
        assert_eq!(back.psi, d);
    }
}
