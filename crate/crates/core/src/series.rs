//! Transforms showing there is no slowest divergent and no fastest
//! convergent series:
//!
//! ```text
//! y_n = 1 / Σ_{k<=n} (b_k + 1/k²)            Σ b_n y_n still diverges,
//! x_n = 1 / sqrt(Σ_{k>=n} (a_k + 1/k²))       Σ a_n x_n still converges,
//! z_1 = x_1,  z_{n+1} = z_n + min{1, x_{n+1} − x_n}.
//! ```
//!
//! Only finite prefixes are ever summed. The unknown tail past the last term
//! is carried as an interval, so every `x_n` is a certified enclosure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certified::{self, Interval};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("sequence is empty")]
    Empty,
    #[error("term {0} is negative")]
    Negative(usize),
    #[error("an infinite sequence needs a bound on its tail")]
    MissingTail,
}

fn check_terms(v: &[Rational]) -> Result<(), SeriesError> {
    if v.is_empty() {
        return Err(SeriesError::Empty);
    }
    match v.iter().position(Rational::is_negative) {
        Some(i) => Err(SeriesError::Negative(i + 1)),
        None => Ok(()),
    }
}

fn inv_square(k: usize) -> Rational {
    let k = k as i64;
    Rational::new(1, k * k)
}

/// Exact `y_1, …, y_n` for `b = (b_1, …, b_n)`.
pub fn slow_divergent_transform(b: &[Rational]) -> Result<Vec<Rational>, SeriesError> {
    check_terms(b)?;
    let mut total = Rational::zero();
    Ok(b.iter()
        .enumerate()
        .map(|(i, bk)| {
            total += bk + &inv_square(i + 1);
            total.recip()
        })
        .collect())
}

/// Certified enclosures of `y_n` and of `Σ_{k<=n} b_k y_k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergentEnclosure {
    pub y: Vec<Interval>,
    pub partial: Vec<Interval>,
}

/// Same transform with every step rounded outward to `2^-bits`, for prefixes
/// too long for exact arithmetic.
pub fn slow_divergent_certified(b: &[Rational], bits: u32) -> Result<DivergentEnclosure, SeriesError> {
    check_terms(b)?;
    let mut total = Interval::zero();
    let mut partial = Interval::zero();
    let mut ys = Vec::with_capacity(b.len());
    let mut partials = Vec::with_capacity(b.len());
    for (i, bk) in b.iter().enumerate() {
        total = total.add(&Interval::point(bk + &inv_square(i + 1))).round_outward(bits);
        let y = total.recip().round_outward(bits);
        partial = partial.add(&y.scale(bk)).round_outward(bits);
        ys.push(y);
        partials.push(partial.clone());
    }
    Ok(DivergentEnclosure { y: ys, partial: partials })
}

/// What is known about `Σ_{k>N} a_k` beyond the supplied prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailBound {
    /// The sequence is zero past the prefix.
    Finite,
    /// `0 <= Σ_{k>N} a_k <= bound`.
    AtMost { bound: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergentEntry {
    pub n: usize,
    pub x: Interval,
    /// `x_n − x_{n−1}`, from the second entry on.
    pub increment: Option<Interval>,
    pub z: Interval,
}

/// Enclosures of `x_n` and `z_n` for `n = 1..=N`.
pub fn accelerate_convergent_transform(
    a: &[Rational],
    tail: Option<&TailBound>,
    prec: u32,
) -> Result<Vec<ConvergentEntry>, SeriesError> {
    check_terms(a)?;
    let tail = tail.ok_or(SeriesError::MissingTail)?;
    let big_n = a.len() as i64;
    // Σ_{k>N} 1/k² lies in [1/(N+1), 1/N].
    let (tau_lo, mut tau_hi) = (Rational::new(1, big_n + 1), Rational::new(1, big_n));
    if let TailBound::AtMost { bound } = tail {
        if bound.is_negative() {
            return Err(SeriesError::Negative(a.len() + 1));
        }
        tau_hi += bound;
    }
    // finite[n-1] = Σ_{k=n}^{N} (a_k + 1/k²).
    let mut finite = vec![Rational::zero(); a.len()];
    let mut acc = Rational::zero();
    for k in (0..a.len()).rev() {
        acc += &a[k] + &inv_square(k + 1);
        finite[k] = acc.clone();
    }
    let x_at = |k: usize, tau: &Rational| certified::inv_sqrt(&(&finite[k] + tau), prec);
    let mut out = Vec::with_capacity(a.len());
    let one = Rational::one();
    let mut z = Interval::zero();
    for k in 0..a.len() {
        // x is increasing in k and decreasing in the tail.
        let x = Interval::new(x_at(k, &tau_hi).lo().clone(), x_at(k, &tau_lo).hi().clone());
        let increment = (k > 0).then(|| {
            // d(τ) = x_k(τ) − x_{k−1}(τ) is decreasing in τ.
            let lo = x_at(k, &tau_hi).lo() - x_at(k - 1, &tau_hi).hi();
            let hi = x_at(k, &tau_lo).hi() - x_at(k - 1, &tau_lo).lo();
            Interval::new(lo, hi)
        });
        z = match &increment {
            None => x.clone(),
            Some(d) => z.add(&d.min_rational(&one)),
        };
        out.push(ConvergentEntry { n: k + 1, x, increment, z: z.clone() });
    }
    Ok(out)
}
