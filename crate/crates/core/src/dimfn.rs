//! Dimension functions `f(r) = r·g(u(r))` built from a piecewise linear `g`:
//!
//! ```text
//! slow_growth: u(r) = max{1, −1 − ln r},  g increasing, g(1) = 1, slope <= 1
//! decaying:    u(r) = max{r^(-1/2), 1},   g decreasing to 0
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certified::{self, Interval};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DimFnError {
    #[error("step function has no nodes")]
    NoNodes,
    #[error("first node must sit at index 1, found {0}")]
    FirstNode(u64),
    #[error("node indices must be strictly increasing at index {0}")]
    Unsorted(u64),
    #[error("g is not {direction} at node {index}")]
    NotMonotone { direction: &'static str, index: u64 },
    #[error("g({0}) = {1} is negative")]
    Negative(u64, Rational),
    #[error("g(1) must equal 1, found {0}")]
    NotNormalized(Rational),
    #[error("slope of g exceeds 1 on [{0}, {1}]")]
    SlopeTooLarge(u64, u64),
    #[error("decaying mode needs the g(∞) = 0 convention")]
    NoVanishing,
    #[error("r = {0} must lie in (0, 1]")]
    OutOfRange(Rational),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// `g` on `[1, ∞)`, linear between consecutive nodes. Monotonicity is
/// non-strict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFn {
    pub nodes: Vec<(u64, Rational)>,
    pub direction: Direction,
    /// `g(x) -> 0` as `x -> ∞`; only used to bound `g` past the last node.
    #[serde(default)]
    pub vanishes_at_infinity: bool,
}

impl StepFn {
    pub fn new(nodes: Vec<(u64, Rational)>, direction: Direction, vanishes_at_infinity: bool) -> Result<Self, DimFnError> {
        let g = StepFn { nodes, direction, vanishes_at_infinity };
        g.validate()?;
        Ok(g)
    }

    /// Nodes `(i, g(i))` for `i = 1..=values.len()`.
    pub fn from_values(values: Vec<Rational>, direction: Direction, vanishes_at_infinity: bool) -> Result<Self, DimFnError> {
        Self::new((1..).zip(values).collect(), direction, vanishes_at_infinity)
    }

    pub fn validate(&self) -> Result<(), DimFnError> {
        let (first, _) = self.nodes.first().ok_or(DimFnError::NoNodes)?;
        if *first != 1 {
            return Err(DimFnError::FirstNode(*first));
        }
        if let Some((n, v)) = self.nodes.iter().find(|(_, v)| v.is_negative()) {
            return Err(DimFnError::Negative(*n, v.clone()));
        }
        for w in self.nodes.windows(2) {
            let ((a, ga), (b, gb)) = (&w[0], &w[1]);
            if b <= a {
                return Err(DimFnError::Unsorted(*b));
            }
            let ok = match self.direction {
                Direction::Increasing => gb >= ga,
                Direction::Decreasing => gb <= ga,
            };
            if !ok {
                let direction = match self.direction {
                    Direction::Increasing => "non-decreasing",
                    Direction::Decreasing => "non-increasing",
                };
                return Err(DimFnError::NotMonotone { direction, index: *b });
            }
        }
        Ok(())
    }

    fn last(&self) -> &(u64, Rational) {
        self.nodes.last().expect("validated step function")
    }

    fn last_slope(&self) -> Rational {
        match self.nodes.len() {
            0 | 1 => Rational::zero(),
            k => {
                let (a, ga) = &self.nodes[k - 2];
                let (b, gb) = &self.nodes[k - 1];
                (gb - ga) / Rational::from(b - a)
            }
        }
    }

    /// `g(x)` for `1 <= x` up to the last node; `None` past it.
    pub fn interpolate(&self, x: &Rational) -> Option<Rational> {
        let i = self.nodes.partition_point(|(n, _)| &Rational::from(*n) <= x);
        assert!(i > 0, "g is defined on [1, ∞), got {x}");
        let (a, ga) = &self.nodes[i - 1];
        if &Rational::from(*a) == x {
            return Some(ga.clone());
        }
        let (b, gb) = self.nodes.get(i)?;
        let t = (x - Rational::from(*a)) / Rational::from(b - a);
        Some(ga + &(t * (gb - ga)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `f(r) = r·g(max{1, −1 − ln r})`.
    SlowGrowth,
    /// `f(r) = r·g(max{r^(-1/2), 1})`.
    Decaying,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimFn {
    pub mode: Mode,
    pub g: StepFn,
}

impl DimFn {
    pub fn new(mode: Mode, g: StepFn) -> Result<Self, DimFnError> {
        let f = DimFn { mode, g };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), DimFnError> {
        self.g.validate()?;
        match self.mode {
            Mode::SlowGrowth => {
                if self.g.direction != Direction::Increasing {
                    return Err(DimFnError::NotMonotone { direction: "non-decreasing", index: 1 });
                }
                let g1 = &self.g.nodes[0].1;
                if g1 != &Rational::one() {
                    return Err(DimFnError::NotNormalized(g1.clone()));
                }
                for w in self.g.nodes.windows(2) {
                    let ((a, ga), (b, gb)) = (&w[0], &w[1]);
                    if gb - ga > Rational::from(b - a) {
                        return Err(DimFnError::SlopeTooLarge(*a, *b));
                    }
                }
            }
            Mode::Decaying => {
                if self.g.direction != Direction::Decreasing {
                    return Err(DimFnError::NotMonotone { direction: "non-increasing", index: 1 });
                }
                if !self.g.vanishes_at_infinity {
                    return Err(DimFnError::NoVanishing);
                }
            }
        }
        Ok(())
    }

    /// `g(x)` including the rule past the last node.
    fn g_at(&self, x: &Rational) -> Interval {
        if let Some(v) = self.g.interpolate(x) {
            return Interval::point(v);
        }
        let (b, gb) = self.g.last();
        match self.mode {
            Mode::SlowGrowth => {
                let slope = self.g.last_slope().min(Rational::one());
                Interval::point(gb + &(slope * (x - Rational::from(*b))))
            }
            Mode::Decaying => Interval::new(Rational::zero(), gb.clone()),
        }
    }

    /// Enclosure of the argument `u(r)` fed to `g`.
    pub fn argument(&self, r: &Interval, prec: u32) -> Interval {
        let one = Rational::one();
        match self.mode {
            Mode::SlowGrowth => {
                let t = certified::ln_interval(r, prec).neg().sub(&Interval::point(one.clone()));
                t.max_rational(&one)
            }
            Mode::Decaying => certified::inv_sqrt_interval(r, prec).max_rational(&one),
        }
    }

    /// Enclosure of `f(r)/r = g(u(r))`.
    pub fn ratio(&self, r: &Interval, prec: u32) -> Result<Interval, DimFnError> {
        check_r(r)?;
        let u = self.argument(r, prec);
        Ok(self.g_at(u.lo()).hull(&self.g_at(u.hi())))
    }
}

fn check_r(r: &Interval) -> Result<(), DimFnError> {
    if !r.lo().is_positive() {
        return Err(DimFnError::OutOfRange(r.lo().clone()));
    }
    if r.hi() > &Rational::one() {
        return Err(DimFnError::OutOfRange(r.hi().clone()));
    }
    Ok(())
}

/// Enclosure of `f(r)` for `r ∈ (0, 1]`.
pub fn dimfn_eval(f: &DimFn, r: &Rational, prec: u32) -> Result<Interval, DimFnError> {
    dimfn_eval_interval(f, &Interval::point(r.clone()), prec)
}

/// Enclosure of `f` over every `r` in a sub-interval of `(0, 1]`.
pub fn dimfn_eval_interval(f: &DimFn, r: &Interval, prec: u32) -> Result<Interval, DimFnError> {
    Ok(f.ratio(r, prec)?.mul(r))
}

/// Outcome of comparing consecutive grid points.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub verified: usize,
    /// Grid exponents `i` where the comparison of `i` and `i + 1` failed.
    pub violated: Vec<u32>,
    /// Overlapping enclosures.
    pub undetermined: Vec<u32>,
}

impl Tally {
    fn record(&mut self, i: u32, verdict: Option<bool>) {
        match verdict {
            Some(true) => self.verified += 1,
            Some(false) => self.violated.push(i),
            None => self.undetermined.push(i),
        }
    }

    pub fn holds(&self) -> bool {
        self.violated.is_empty() && self.undetermined.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub i: u32,
    pub f: Interval,
    pub ratio: Interval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridReport {
    pub points: Vec<GridPoint>,
    /// `f(2^-(i+1)) <= f(2^-i)`.
    pub monotone: Tally,
    /// `f(r)/r` non-decreasing (slow growth) or non-increasing (decaying) as `r` shrinks.
    pub ratio_direction: Tally,
}

impl GridReport {
    pub fn holds(&self) -> bool {
        self.monotone.holds() && self.ratio_direction.holds()
    }
}

fn le(a: &Interval, b: &Interval) -> Option<bool> {
    if a.hi() <= b.lo() {
        Some(true)
    } else if a.lo() > b.hi() {
        Some(false)
    } else {
        None
    }
}

/// Checks on `r = 2^-i` for `i = 0..=max_i`.
pub fn verify_grid(f: &DimFn, max_i: u32, prec: u32) -> Result<GridReport, DimFnError> {
    let points = (0..=max_i)
        .map(|i| {
            let r = Interval::point(Rational::from_bigints(1.into(), num_bigint::BigInt::from(1u8) << i as usize));
            let ratio = f.ratio(&r, prec)?;
            Ok(GridPoint { i, f: ratio.mul(&r), ratio })
        })
        .collect::<Result<Vec<_>, DimFnError>>()?;
    let mut monotone = Tally::default();
    let mut ratio_direction = Tally::default();
    for w in points.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        monotone.record(p.i, le(&q.f, &p.f));
        let v = match f.mode {
            Mode::SlowGrowth => le(&p.ratio, &q.ratio),
            Mode::Decaying => le(&q.ratio, &p.ratio),
        };
        ratio_direction.record(p.i, v);
    }
    Ok(GridReport { points, monotone, ratio_direction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    fn pow2_nodes(k: u32) -> Vec<(u64, Rational)> {
        (0..=k).map(|j| (1u64 << j, Rational::from_bigints(1.into(), num_bigint::BigInt::from(1u64 << j)))).collect()
    }

    #[test]
    fn constant_g_gives_identity() {
        let g = StepFn::from_values(vec![Rational::one(); 5], Direction::Increasing, false).unwrap();
        let f = DimFn::new(Mode::SlowGrowth, g).unwrap();
        for r in [rat(1, 1), rat(1, 3), rat(1, 1000), Rational::from_bigints(1.into(), num_bigint::BigInt::from(1u64 << 60))] {
            assert_eq!(dimfn_eval(&f, &r, 128).unwrap(), Interval::point(r));
        }
        assert!(verify_grid(&f, 64, 128).unwrap().holds());
    }

    #[test]
    fn decaying_ratio_halves_along_quarter_powers() {
        let g = StepFn::new(pow2_nodes(32), Direction::Decreasing, true).unwrap();
        let f = DimFn::new(Mode::Decaying, g).unwrap();
        for i in 0..=32u32 {
            let r = Interval::point(Rational::from_bigints(1.into(), num_bigint::BigInt::from(1u8) << (2 * i) as usize));
            let expect = Rational::from_bigints(1.into(), num_bigint::BigInt::from(1u8) << i as usize);
            assert_eq!(f.ratio(&r, 128).unwrap(), Interval::point(expect));
        }
        let report = verify_grid(&f, 64, 128).unwrap();
        assert!(report.holds(), "{report:?}");
        assert!(report.points.last().unwrap().ratio.hi() <= &rat(1, 1 << 30));
    }

    #[test]
    fn slow_growth_at_e_minus_two() {
        let g = StepFn::from_values((1..=50).map(|n| rat(n, 1)).collect(), Direction::Increasing, false).unwrap();
        let f = DimFn::new(Mode::SlowGrowth, g).unwrap();
        let r = certified::exp(&rat(-2, 1), 128);
        let v = dimfn_eval_interval(&f, &r, 128).unwrap();
        // g(1) = 1, so f(e^-2) = e^-2.
        assert!(v.contains_interval(&r));
        assert!(v.width() < rat(1, 1 << 60));
        assert!(verify_grid(&f, 64, 128).unwrap().holds());
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = StepFn::from_values(vec![rat(2, 1), rat(3, 1)], Direction::Increasing, false).unwrap();
        assert_eq!(DimFn::new(Mode::SlowGrowth, g), Err(DimFnError::NotNormalized(rat(2, 1))));
        let g = StepFn::from_values(vec![rat(1, 1), rat(3, 1)], Direction::Increasing, false).unwrap();
        assert_eq!(DimFn::new(Mode::SlowGrowth, g), Err(DimFnError::SlopeTooLarge(1, 2)));
        assert!(StepFn::from_values(vec![rat(1, 1), rat(1, 2)], Direction::Increasing, false).is_err());
        let g = StepFn::new(pow2_nodes(3), Direction::Decreasing, false).unwrap();
        assert_eq!(DimFn::new(Mode::Decaying, g), Err(DimFnError::NoVanishing));
        let g = StepFn::from_values(vec![Rational::one()], Direction::Increasing, false).unwrap();
        let f = DimFn::new(Mode::SlowGrowth, g).unwrap();
        assert!(dimfn_eval(&f, &rat(0, 1), 64).is_err());
        assert!(dimfn_eval(&f, &rat(3, 2), 64).is_err());
    }

    #[test]
    fn slow_growth_extends_past_last_node() {
        // Last slope 1/2, so g(x) = 2 + (x - 3)/2 past x = 3.
        let g = StepFn::from_values(vec![rat(1, 1), rat(3, 2), rat(2, 1)], Direction::Increasing, false).unwrap();
        let f = DimFn::new(Mode::SlowGrowth, g).unwrap();
        let r = rat(1, 1 << 20);
        let u = f.argument(&Interval::point(r.clone()), 128);
        let v = f.ratio(&Interval::point(r), 128).unwrap();
        let expect = u.sub(&Interval::point(rat(3, 1))).scale(&rat(1, 2)).add(&Interval::point(rat(2, 1)));
        assert!(expect.contains_interval(&v) && v.contains_interval(&expect));
    }

    proptest! {
        #[test]
        fn random_slow_growth_passes_grid(steps in proptest::collection::vec(0i64..=8, 1..60)) {
            let mut values = vec![Rational::one()];
            for s in steps {
                let last = values.last().unwrap().clone();
                values.push(last + rat(s, 8));
            }
            let g = StepFn::from_values(values, Direction::Increasing, false).unwrap();
            let f = DimFn::new(Mode::SlowGrowth, g).unwrap();
            let report = verify_grid(&f, 64, 128).unwrap();
            prop_assert!(report.monotone.holds());
            prop_assert!(report.ratio_direction.violated.is_empty());
        }

        #[test]
        fn interpolation_stays_between_nodes(a in 1u64..50, num in 0i64..=100) {
            let g = StepFn::from_values((1..=60).map(|n| rat(1, n)).collect(), Direction::Decreasing, true).unwrap();
            let x = Rational::from(a) + rat(num, 100);
            let v = g.interpolate(&x).unwrap();
            prop_assert!(v <= rat(1, a as i64) && v >= rat(1, a as i64 + 1));
        }
    }
}
