//! `verify`: invariant suites per field, reported as one row per check.
//!
//! Each check contributes a summary verdict (failure count `= 0`) and the
//! operands of up to [`MAX_LISTED_FAILURES`] failing cases.

use std::fmt::Display;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::{ExperimentConfig, FieldKind, SuiteConfig};
use super::report::{col, Relation, Report, MAX_LISTED_FAILURES};
use super::CliError;
use crate::borel_cantelli::{self, EventSystem};
use crate::circle::{self, CircleSet};
use crate::laurent::{self, PolyPsi, RadiusPolicy};
use crate::numtheory;
use crate::padic;
use crate::poly::{self, Poly};
use crate::psi::PsiSpec;
use crate::rational::Rational;

const DEFAULT_MAX_N: u64 = 300;
const DEFAULT_MAX_DEGREE: u64 = 4;
const MAX_DEGREE: u64 = 5;

/// Cases and failures of one named check.
struct Check {
    scope: String,
    name: &'static str,
    cases: u64,
    failures: u64,
}

impl Check {
    fn new(scope: impl Display, name: &'static str) -> Self {
        Check { scope: scope.to_string(), name, cases: 0, failures: 0 }
    }

    fn case(&mut self, r: &mut Report, item: impl Display, lhs: impl Display, rel: Relation, rhs: impl Display, holds: bool) {
        self.cases += 1;
        if !holds {
            self.failures += 1;
            if self.failures as usize <= MAX_LISTED_FAILURES {
                r.verdict(self.name, item, lhs, rel, rhs, false);
            }
        }
    }

    fn compare<T: PartialOrd + Display>(&mut self, r: &mut Report, item: impl Display, lhs: &T, rel: Relation, rhs: &T) {
        let holds = match rel {
            Relation::Le => lhs <= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        };
        self.case(r, item, lhs, rel, rhs, holds);
    }

    fn finish(self, r: &mut Report) {
        r.row(json!({"scope": self.scope, "check": self.name, "cases": self.cases, "failures": self.failures}));
        r.verdict(self.name, format!("{} failures", self.scope), self.failures, Relation::Eq, 0, self.failures == 0);
    }
}

pub(super) fn verify(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let suite = cfg.suite.clone().unwrap_or_default();
    let mut r = Report::new("verify", cfg.clone(), vec![col("scope"), col("check"), col("cases"), col("failures")]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match suite.field {
        FieldKind::Real => real(&mut r, suite.max_n.unwrap_or(DEFAULT_MAX_N), &mut rng)?,
        FieldKind::Padic => padic_suite(&mut r, &suite, &mut rng)?,
        FieldKind::Laurent => laurent_suite(&mut r, &suite, &mut rng)?,
    }
    Ok(r)
}

fn random_rational(rng: &mut ChaCha8Rng, max: i64, den_bound: i64) -> Rational {
    let b = rng.gen_range(1..=den_bound);
    Rational::new(rng.gen_range(0..=max * b), b)
}

/// Up to `size` distinct indices in `[lo, hi]` with random values in `[0, max]`.
fn random_psi(rng: &mut ChaCha8Rng, lo: u64, hi: u64, size: usize, max: i64) -> PsiSpec {
    let entries: Vec<(u64, Rational)> = (0..size).map(|_| (rng.gen_range(lo..=hi), random_rational(rng, max, 24))).collect();
    PsiSpec::table(entries).expect("nonnegative values")
}

fn real(r: &mut Report, max_n: u64, rng: &mut ChaCha8Rng) -> Result<(), CliError> {
    if max_n < 3 {
        return Err(super::invalid("--max-n must be at least 3"));
    }
    let half = Rational::new(1, 2);
    let two = Rational::from_integer(2);

    let mut exact = Check::new("real", "exact_measure");
    for n in 1..=max_n {
        for v in [Rational::new(1, 10), Rational::new(1, 3), half.clone()] {
            let measure = circle::build_e_n(n, &v).measure();
            let formula = &two * &v * Rational::from(numtheory::euler_phi(n)) / Rational::from(n);
            exact.compare(r, format!("n={n} psi={v}"), &measure, Relation::Eq, &formula);
        }
    }
    exact.finish(r);

    let mut bounds = Check::new("real", "measure_bounds");
    for _ in 0..1000 {
        let n = rng.gen_range(1..=max_n);
        let v = random_rational(rng, 5, 64);
        let mass = &v * &Rational::from(numtheory::euler_phi(n)) / Rational::from(n);
        let measure = circle::build_e_n(n, &v).measure();
        let item = format!("n={n} psi={v}");
        bounds.compare(r, &item, &mass.clone().min(half.clone()), Relation::Le, &measure);
        bounds.compare(r, &item, &measure, Relation::Le, &(&mass * &two).min(Rational::one()));
    }
    bounds.finish(r);

    let mut product = Check::new("real", "overlap_bound");
    let mut empty = Check::new("real", "empty_when_far");
    let mut max_pv: Option<Rational> = None;
    for c in [Rational::new(1, 10), Rational::new(1, 4), half.clone()] {
        let psi = PsiSpec::constant(c.clone(), 1, max_n);
        for n in 3..=max_n {
            for m in 2..n {
                let o = circle::intersect_measure(m, n, &psi)?;
                let item = format!("m={m} n={n} psi={c}");
                product.compare(r, &item, &o.measure, Relation::Le, &o.ds_bound);
                if o.d < half {
                    empty.compare(r, &item, &o.measure, Relation::Eq, &Rational::zero());
                }
                if let Some(pv) = o.pv_ratio {
                    if max_pv.as_ref().is_none_or(|b| &pv > b) {
                        max_pv = Some(pv);
                    }
                }
            }
        }
    }
    product.finish(r);
    empty.finish(r);
    if let Some(v) = max_pv {
        r.summarize("max_pv_ratio", v.to_string());
    }

    let mut scaling = Check::new("real", "union_scaling");
    for _ in 0..20 {
        let psi = random_psi(rng, 2, max_n, 8, 1);
        for t in [Rational::new(3, 2), two.clone(), Rational::from_integer(5)] {
            let c = circle::verify_scaling(&psi, &t)?;
            scaling.compare(r, format!("t={t}"), &c.lhs, Relation::Le, &c.rhs);
        }
    }
    scaling.finish(r);

    let mut bc = Check::new("real", "bc_lower_bound");
    let mut rescale = Check::new("real", "bc_weight_rescaling");
    for _ in 0..100 {
        let k = rng.gen_range(1..=6);
        let sets: Vec<CircleSet> = (0..k)
            .map(|_| {
                let arcs = (0..rng.gen_range(1..=3)).map(|_| {
                    let a = random_rational(rng, 1, 32);
                    let len = random_rational(rng, 1, 32) / Rational::from_integer(2);
                    (a.clone(), a + len)
                });
                CircleSet::from_arcs(arcs.collect::<Vec<_>>())
            })
            .collect();
        let weights: Vec<Rational> = (0..k).map(|_| Rational::new(rng.gen_range(1..=8), rng.gen_range(1..=8))).collect();
        let es = EventSystem::from_sets(&sets, Some(weights.clone()))?;
        let union = CircleSet::union_all(&sets).measure();
        if let Some((bound, prefix)) = borel_cantelli::bc_max_over_prefixes(&es) {
            bc.compare(r, format!("prefix={prefix}"), &bound, Relation::Le, &union);
            let scaled = es.with_weights(weights.iter().map(|w| w * &Rational::new(7, 3)).collect())?;
            let again = borel_cantelli::bc_lower_bound(&scaled, prefix)?;
            rescale.compare(r, format!("prefix={prefix}"), &again, Relation::Eq, &bound);
        }
    }
    bc.finish(r);
    rescale.finish(r);
    Ok(())
}

fn padic_suite(r: &mut Report, suite: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<(), CliError> {
    let max_n = suite.max_n.unwrap_or(60).max(8);
    for &p in &suite.primes {
        let mut radius = Check::new(format_args!("p={p}"), "ball_measure_at_most_radius");
        let mut kn = Check::new(format_args!("p={p}"), "k_n_at_most_centers_times_radius");
        for n in 1..=max_n {
            let v = random_rational(rng, 2, 64);
            if v.is_zero() {
                continue;
            }
            let rad = &v / &Rational::from(n);
            let z = padic::canonical_radius(p, &rad)?;
            let ball = Rational::from(p).pow(z as i32);
            radius.compare(r, format!("p={p} n={n} r={rad}"), &ball, Relation::Le, &rad);
            let centers = (-(n as i64)..=n as i64).filter(|a| numtheory::gcd(a.unsigned_abs(), n) == 1).count();
            let k = padic::build_k_n(p, n, &v)?.measure();
            let cap = (Rational::from(centers as u64) * ball).min(Rational::one());
            kn.compare(r, format!("p={p} n={n} psi={v}"), &k, Relation::Le, &cap);
        }
        radius.finish(r);
        kn.finish(r);

        let mut scaling = Check::new(format_args!("p={p}"), "union_scaling");
        let mut with_factor = 0u64;
        for _ in 0..100 {
            let psi = random_psi(rng, 1, max_n, 6, 1);
            for t in [Rational::from_integer(2), Rational::from_integer(3)] {
                let c = padic::verify_scaling_padic(p, &psi, &t)?;
                scaling.compare(r, format!("p={p} t={t}"), &c.lhs, Relation::Le, &c.rhs);
                with_factor += c.holds_with_factor_p as u64;
            }
        }
        r.summarize(&format!("p{p}_scaling_with_factor_p"), format!("{with_factor}/{}", scaling.cases));
        scaling.finish(r);

        let mut chain = Check::new(format_args!("p={p}"), "overlap_chain");
        for _ in 0..50 {
            let (m, n, psi) = padic::random_admissible_pair(p, max_n, rng);
            let c = padic::verify_overlap_chain(p, m, n, &psi)?;
            let item = format!("p={p} m={m} n={n}");
            chain.compare(r, &item, &c.lower, Relation::Le, &c.mid);
            chain.compare(r, &item, &c.mid, Relation::Le, &c.upper);
        }
        chain.finish(r);
    }
    Ok(())
}

fn laurent_suite(r: &mut Report, suite: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<(), CliError> {
    let max_deg = suite.max_n.unwrap_or(DEFAULT_MAX_DEGREE).clamp(1, MAX_DEGREE) as usize;
    for &q in &suite.fields {
        poly::check_field(q)?;
        let mut theta = Check::new(format_args!("q={q}"), "theta_matches_enumeration");
        let mut mobius = Check::new(format_args!("q={q}"), "mobius_divisor_sum");
        let mut general = Check::new(format_args!("q={q}"), "measure_general_bound");
        let mut sharp = Check::new(format_args!("q={q}"), "measure_sharp_bound");
        for n in 1..=max_deg {
            for qp in poly::monic_polys(q, n) {
                let mu: i64 = poly::monic_divisors(&qp)?.iter().map(|f| poly::mobius_poly(f).map(i64::from)).sum::<Result<_, _>>()?;
                mobius.compare(r, &qp, &mu, Relation::Eq, &0);
                for d in 1..=2u32 {
                    if (q as u128).pow(n as u32 * d) <= laurent::ENUMERATION_CAP {
                        let t = poly::theta_d(&qp, d)?;
                        let b = poly::theta_d_brute(&qp, d)?;
                        theta.compare(r, format!("{qp} d={d}"), &t, Relation::Eq, &b.into());
                    }
                    if (q as u128).pow(n as u32 * d) > 1 << 16 {
                        continue;
                    }
                    for j in 0..=2 {
                        let psi = Rational::from(q as u64).pow(-j);
                        let bnd = laurent::h_measure_bounds(&qp, &psi, d, RadiusPolicy::Strict)?;
                        let item = format!("{qp} d={d} psi={psi}");
                        general.compare(r, &item, &bnd.measure, Relation::Ge, &bnd.general_bound);
                        if let Some(s) = &bnd.sharp_bound {
                            sharp.compare(r, &item, &bnd.measure, Relation::Ge, s);
                        }
                    }
                }
            }
        }
        theta.finish(r);
        mobius.finish(r);
        general.finish(r);
        sharp.finish(r);

        if q == 2 {
            let xx1 = Poly::new(2, vec![0, 1, 1])?;
            let density = Rational::from(poly::theta_d(&xx1, 2)?) / Rational::from(16u64);
            let mut c = Check::new(format_args!("q={q}"), "theta_density_x_x_plus_1");
            c.compare(r, &xx1, &density, Relation::Eq, &Rational::new(9, 16));
            c.finish(r);

            let mut prod = Check::new(format_args!("q={q}"), "overlap_product_bound");
            let mut quasi = Check::new(format_args!("q={q}"), "overlap_quasi_independence");
            let polys: Vec<Poly> = (1..=max_deg.min(3)).flat_map(|n| poly::monic_polys(2, n)).collect();
            let values = [Rational::new(1, 2), Rational::new(1, 4)];
            let constant = Rational::new(laurent::QUASI_INDEPENDENCE_CONSTANT.0, laurent::QUASI_INDEPENDENCE_CONSTANT.1);
            for a in &polys {
                for b in polys.iter().filter(|b| *b != a) {
                    for va in &values {
                        for vb in &values {
                            let o = laurent::overlap_h(a, va, b, vb, 2)?;
                            let item = format!("{a} / {b} psi={va},{vb}");
                            prod.compare(r, &item, &o.measure, Relation::Le, &o.product_bound);
                            if let Some(k) = &o.quasi_constant {
                                quasi.compare(r, &item, k, Relation::Le, &constant);
                            }
                        }
                    }
                }
            }
            prod.finish(r);
            quasi.finish(r);
        }

        let mut translate = Check::new(format_args!("q={q}"), "translate_sum");
        for d in 1..=2 {
            for z1 in -2i64..=3 {
                for z2 in -2i64..=3 {
                    for g in -2i64..=2 {
                        let t = laurent::translate_sum(q, d, z1, z2, g)?;
                        translate.compare(r, format!("d={d} z1={z1} z2={z2} deg g={g}"), &t.sum, Relation::Le, &t.bound);
                    }
                }
            }
        }
        translate.finish(r);

        let mut sandwich = Check::new(format_args!("q={q}"), "ball_sandwich");
        for _ in 0..200 {
            let rad = Rational::new(rng.gen_range(1..=500), rng.gen_range(1..=500));
            let v = laurent::ball_measure(q, &rad)?;
            let item = format!("q={q} r={rad}");
            sandwich.compare(r, &item, &rad, Relation::Le, &v);
            sandwich.compare(r, &item, &v, Relation::Le, &(&rad * &Rational::from(q as u64)));
        }
        sandwich.finish(r);

        let mut scaling = Check::new(format_args!("q={q}"), "union_scaling");
        for _ in 0..20 {
            let entries = (0..rng.gen_range(1..=4))
                .map(|_| {
                    let deg = rng.gen_range(1..=3);
                    let mut c: Vec<u32> = (0..deg).map(|_| rng.gen_range(0..q)).collect();
                    c.push(1);
                    (c, Rational::new(rng.gen_range(1..=8), rng.gen_range(1..=40)))
                })
                .collect();
            let psi = PolyPsi { q, entries };
            for d in 1..=2 {
                for t in [Rational::new(3, 2), Rational::from_integer(2), Rational::from_integer(3)] {
                    let c = laurent::verify_scaling_laurent(&psi, &t, d)?;
                    scaling.compare(r, format!("q={q} d={d} t={t}"), &c.lhs, Relation::Le, &c.rhs);
                }
            }
        }
        scaling.finish(r);
    }
    Ok(())
}
