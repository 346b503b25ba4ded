//! One function per subcommand, each a pure map from configuration to report.

use serde_json::{json, Value};

use super::config::{ExperimentConfig, Field, SeriesMode};
use super::report::{col, rcol, Relation, Report};
use super::{invalid, CliError};
use crate::blocks::{self, BValue, BlockScheme};
use crate::borel_cantelli::{self, EventSystem, Threshold};
use crate::certified::Interval;
use crate::circle::{self, CircleSet};
use crate::dimfn;
use crate::laurent::{self, PolyPsi, RadiusPolicy};
use crate::numtheory;
use crate::padic;
use crate::poly::{self, Poly};
use crate::psi::PsiSpec;
use crate::psi_gen;
use crate::rational::Rational;
use crate::series::{self, TailBound};

/// Largest number of events for the pairwise table of `bc-bound`.
const MAX_EVENTS: usize = 2000;

/// Sequences longer than this are handled by certified rather than exact arithmetic.
const EXACT_SERIES_LEN: usize = 400;

fn s(r: &Rational) -> Value {
    Value::String(r.to_string())
}

fn iv(i: &Interval) -> Value {
    Value::String(i.to_string())
}

pub(super) fn scheme(cfg: &ExperimentConfig) -> BlockScheme {
    cfg.scheme.clone().unwrap_or(BlockScheme::Canonical)
}

/// Blocks a `blocks` run covers; two by default.
pub(super) fn block_range(cfg: &ExperimentConfig) -> (u32, u32) {
    let sc = scheme(cfg);
    let h0 = cfg.ranges.h_min.unwrap_or(sc.first());
    let h1 = cfg.ranges.h_max.unwrap_or((h0 + 1).min(sc.last()));
    (h0, h1)
}

fn psi(cfg: &ExperimentConfig) -> Result<PsiSpec, CliError> {
    let d = cfg.psi.as_ref().ok_or_else(|| invalid("no psi given (--psi or [psi] in the config)"))?;
    Ok(psi_gen::generate_psi(d, cfg.seed)?)
}

fn need<T: Copy>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| invalid(format!("missing {what}")))
}

pub(super) fn en_measure(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let lo = need(cfg.ranges.n, "--n")?;
    let hi = cfg.ranges.max_n.unwrap_or(lo);
    if lo == 0 || hi < lo {
        return Err(invalid(format!("empty range [{lo}, {hi}]")));
    }
    let psi = psi(cfg)?;
    let mut r = Report::new(
        "en-measure",
        cfg.clone(),
        vec![col("n"), rcol("psi"), col("phi"), rcol("measure"), rcol("lower"), rcol("upper")],
    );
    let half = Rational::new(1, 2);
    for n in lo..=hi {
        let v = psi.value(n);
        let phi = numtheory::euler_phi(n);
        let mass = &v * &Rational::from(phi) / Rational::from(n);
        let measure = circle::build_e_n(n, &v).measure();
        let lower = mass.clone().min(half.clone());
        let upper = (&mass * &Rational::from_integer(2)).min(Rational::one());
        r.assert_rel("lower_bound", n, &lower, Relation::Le, &measure);
        r.assert_rel("upper_bound", n, &measure, Relation::Le, &upper);
        if v <= half {
            r.assert_rel("exact_formula", n, &measure, Relation::Eq, &(&mass * &Rational::from_integer(2)));
        }
        r.row(json!({"n": n, "psi": s(&v), "phi": phi, "measure": s(&measure), "lower": s(&lower), "upper": s(&upper)}));
    }
    Ok(r)
}

pub(super) fn overlap(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let pairs: Vec<(u64, u64)> = match (cfg.ranges.m, cfg.ranges.n) {
        (Some(m), Some(n)) => vec![(m, n)],
        _ => {
            let hi = need(cfg.ranges.max_n, "--max-n or --m/--n")?;
            (2..=hi).flat_map(|n| (2..n).map(move |m| (m, n))).collect()
        }
    };
    let psi = psi(cfg)?;
    let mut r = Report::new(
        "overlap",
        cfg.clone(),
        vec![col("m"), col("n"), rcol("measure"), rcol("bound"), rcol("d"), rcol("pv_ratio")],
    );
    let mut max_ratio: Option<(Rational, u64, u64)> = None;
    let half = Rational::new(1, 2);
    for (m, n) in pairs {
        let o = circle::intersect_measure(m, n, &psi)?;
        let item = format!("{m},{n}");
        r.assert_rel("overlap_bound", &item, &o.measure, Relation::Le, &o.ds_bound);
        if o.d < half {
            r.assert_rel("empty_when_far", &item, &o.measure, Relation::Eq, &Rational::zero());
        }
        if let Some(pv) = &o.pv_ratio {
            if max_ratio.as_ref().is_none_or(|(b, _, _)| pv > b) {
                max_ratio = Some((pv.clone(), m, n));
            }
        }
        r.row(json!({
            "m": m, "n": n, "measure": s(&o.measure), "bound": s(&o.ds_bound), "d": s(&o.d),
            "pv_ratio": o.pv_ratio.as_ref().map(s),
        }));
    }
    if let Some((v, m, n)) = max_ratio {
        r.summarize("max_pv_ratio", s(&v));
        r.summarize("max_pv_ratio_at", format!("{m},{n}"));
    }
    Ok(r)
}

pub(super) fn union_z(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let psi = psi(cfg)?;
    let support = psi.finite_support()?;
    let mut r = Report::new("union-z", cfg.clone(), vec![col("n"), rcol("psi"), rcol("measure"), rcol("union")]);
    let mut acc = CircleSet::empty();
    let mut total = Rational::zero();
    for (n, v) in &support {
        let e = circle::build_e_n(*n, v);
        total += e.measure();
        acc = acc.union(&e);
        r.row(json!({"n": n, "psi": s(v), "measure": s(&e.measure()), "union": s(&acc.measure())}));
    }
    let union = acc.measure();
    r.assert_rel("subadditive", "all", &union, Relation::Le, &total);
    r.summarize("union", s(&union));
    r.summarize("sum_of_measures", s(&total));
    Ok(r)
}

pub(super) fn scaling(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let t = cfg.t.clone().ok_or_else(|| invalid("missing --t"))?;
    let psi = psi(cfg)?;
    let c = circle::verify_scaling(&psi, &t)?;
    let mut r = Report::new("scaling", cfg.clone(), vec![rcol("t"), rcol("lhs"), rcol("rhs")]);
    r.assert_rel("union_scaling", format!("t={t}"), &c.lhs, Relation::Le, &c.rhs);
    r.row(json!({"t": s(&t), "lhs": s(&c.lhs), "rhs": s(&c.rhs)}));
    Ok(r)
}

pub(super) fn blocks(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let sc = scheme(cfg);
    sc.validate()?;
    let (h0, h1) = block_range(cfg);
    let psi = psi(cfg)?;
    let mut r = Report::new(
        "blocks",
        cfg.clone(),
        vec![col("h"), rcol("S"), rcol("B"), rcol("Q"), rcol("R"), col("exact")],
    );
    for h in h0..=h1 {
        let st = match cfg.samples {
            Some(n) => blocks::block_stats_mc(&psi, &sc, h, n, cfg.seed.wrapping_add(h as u64))?,
            None => blocks::block_stats_exact_capped(&psi, &sc, h, cfg.caps.phi_cap)?,
        };
        let b = st.b.value().clone();
        if let (Some(total), Some(q)) = (&st.sum_measures, &st.q) {
            r.assert_rel("union_at_most_sum", h, &b, Relation::Le, total);
            if !(total + q).is_zero() {
                let lower = blocks::cauchy_schwarz_lower(total, q)?;
                r.assert_rel("second_moment_lower", h, &b, Relation::Ge, &lower);
            }
        }
        let mut row = json!({
            "h": h, "lo": st.lo, "hi": st.hi, "members": st.members,
            "S": s(&st.s), "B": s(&b), "Q": st.q.as_ref().map(s), "R": st.r.as_ref().map(s),
            "sum_measures": st.sum_measures.as_ref().map(s), "exact": st.exact,
        });
        if let BValue::Estimate { hits, samples, half_width, .. } = &st.b {
            row["hits"] = json!(hits);
            row["samples"] = json!(samples);
            row["half_width"] = json!(half_width);
        }
        r.row(row);
    }
    Ok(r)
}

pub(super) fn bc_bound(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let psi = psi(cfg)?;
    let support = psi.finite_support()?;
    if support.len() > MAX_EVENTS {
        return Err(invalid(format!("{} events exceed the limit of {MAX_EVENTS}", support.len())));
    }
    let sets: Vec<CircleSet> = support.iter().map(|(n, v)| circle::build_e_n(*n, v)).collect();
    let es = EventSystem::from_sets(&sets, None)?;
    let union = CircleSet::union_all(&sets).measure();
    let mut r = Report::new("bc-bound", cfg.clone(), vec![col("prefix"), col("n"), rcol("bound")]);
    for (k, (n, _)) in support.iter().enumerate() {
        let bound = borel_cantelli::bc_lower_bound(&es, k + 1).ok();
        if let Some(b) = &bound {
            r.assert_rel("lower_bound", k + 1, b, Relation::Le, &union);
        }
        r.row(json!({"prefix": k + 1, "n": n, "bound": bound.as_ref().map(s)}));
    }
    if let Some((b, k)) = borel_cantelli::bc_max_over_prefixes(&es) {
        r.summarize("max_bound", s(&b));
        r.summarize("max_prefix", k);
    }
    r.summarize("union", s(&union));
    Ok(r)
}

pub(super) fn criterion(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let sc = scheme(cfg);
    let h_max = cfg.ranges.h_max.unwrap_or(sc.last());
    let threshold = cfg.threshold.unwrap_or(Threshold::Three);
    let psi = psi(cfg)?;
    let rows = borel_cantelli::block_criterion(&psi, &sc, h_max, threshold)?;
    let mut r = Report::new("criterion", cfg.clone(), vec![col("h"), rcol("S"), col("term"), col("partial_sum")]);
    for row in &rows {
        r.row(json!({"h": row.h, "S": s(&row.s), "term": row.term.as_ref().map(iv), "partial_sum": iv(&row.partial_sum)}));
    }
    if threshold == Threshold::Three {
        r.warn("the term ln S/(h ln ln S) decreases in S on [3, e^e); use --threshold exp-e for a monotone criterion");
    }
    Ok(r)
}

pub(super) fn convolution(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let sc = scheme(cfg);
    let h = need(cfg.ranges.h_min, "--h")?;
    let psi = psi(cfg)?;
    let plan = borel_cantelli::convolution_select(&psi, &sc, h)?;
    let mut r = Report::new("convolution", cfg.clone(), vec![col("k"), rcol("objective")]);
    for (k, v) in plan.objective.iter().enumerate() {
        r.row(json!({"k": k, "objective": s(v)}));
    }
    let k = Rational::from_integer(plan.k);
    r.verdict("k_at_most_log_s", h, &k, Relation::Le, plan.ln_s.lo(), &k <= plan.ln_s.lo());
    r.verdict("omega_nonnegative", h, plan.omega.lo(), Relation::Ge, 0, !plan.omega.lo().is_negative());
    r.verdict("omega_at_most_one", h, plan.omega.hi(), Relation::Le, 1, plan.omega.hi() <= &Rational::one());
    let product = &plan.young.f_l1 * &plan.young.g_l1;
    r.assert_rel("young", h, &plan.young.conv_l1, Relation::Le, &product);
    if !plan.within_hypothesis {
        r.warn(format!("S_{h} exceeds exp(h ln h); omega was clamped from {}", plan.omega_raw));
    }
    r.summarize("S", s(&plan.s));
    r.summarize("k", plan.k);
    r.summarize("k_max", plan.k_max);
    r.summarize("y", iv(&plan.y));
    r.summarize("omega", iv(&plan.omega));
    r.summarize("omega_raw", iv(&plan.omega_raw));
    r.summarize("s_psibar", iv(&plan.s_psibar));
    Ok(r)
}

fn series_terms(cfg: &ExperimentConfig) -> Result<Vec<Rational>, CliError> {
    let sc = cfg.series.as_ref().ok_or_else(|| invalid("missing --terms"))?;
    if sc.terms.is_empty() {
        return Err(invalid("missing --terms"));
    }
    let len = sc.len.unwrap_or(sc.terms.len());
    Ok(sc.terms.iter().cycle().take(len).cloned().collect())
}

pub(super) fn series(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let terms = series_terms(cfg)?;
    let sc = cfg.series.as_ref().expect("checked by series_terms");
    let prec = cfg.caps.precision;
    match sc.mode {
        SeriesMode::Divergent => {
            let mut r = Report::new("series", cfg.clone(), vec![col("n"), col("y"), col("partial")]);
            if terms.len() <= EXACT_SERIES_LEN {
                let y = series::slow_divergent_transform(&terms)?;
                let mut partial = Rational::zero();
                for (k, (b, yk)) in terms.iter().zip(&y).enumerate() {
                    partial += b * yk;
                    r.row(json!({"n": k + 1, "y": s(yk), "partial": s(&partial)}));
                }
                for (k, w) in y.windows(2).enumerate() {
                    r.assert_rel("y_decreasing", k + 2, &w[1], Relation::Lt, &w[0]);
                }
            } else {
                let e = series::slow_divergent_certified(&terms, prec)?;
                for (k, (yk, pk)) in e.y.iter().zip(&e.partial).enumerate() {
                    r.row(json!({"n": k + 1, "y": iv(yk), "partial": iv(pk)}));
                }
                for (k, w) in e.y.windows(2).enumerate() {
                    r.verdict("y_decreasing", k + 2, &w[1], Relation::Lt, &w[0], w[1].certainly_lt(&w[0]));
                }
                r.summarize("partial", iv(e.partial.last().expect("nonempty")));
            }
            Ok(r)
        }
        SeriesMode::Convergent => {
            let tail = sc.tail.clone().unwrap_or(TailBound::Finite);
            let entries = series::accelerate_convergent_transform(&terms, Some(&tail), prec)?;
            let mut r = Report::new("series", cfg.clone(), vec![col("n"), col("x"), col("increment"), col("z")]);
            for e in &entries {
                if let Some(d) = &e.increment {
                    r.verdict("increment_positive", e.n, 0, Relation::Lt, d.lo(), d.lo().is_positive());
                }
                r.row(json!({"n": e.n, "x": iv(&e.x), "increment": e.increment.as_ref().map(iv), "z": iv(&e.z)}));
            }
            Ok(r)
        }
    }
}

pub(super) fn dimfn(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let dc = cfg.dimfn.as_ref().ok_or_else(|| invalid("missing dimension function"))?;
    let g = dimfn::verify_grid(&dc.function, dc.max_i, cfg.caps.precision)?;
    let mut r = Report::new("dimfn", cfg.clone(), vec![col("i"), col("f"), col("ratio")]);
    for p in &g.points {
        r.row(json!({"i": p.i, "f": iv(&p.f), "ratio": iv(&p.ratio)}));
    }
    let ratio_rel = match dc.function.mode {
        dimfn::Mode::SlowGrowth => Relation::Ge,
        dimfn::Mode::Decaying => Relation::Le,
    };
    for w in g.points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let item = format!("i={}", a.i);
        if !g.monotone.undetermined.contains(&a.i) {
            r.verdict("f_monotone", &item, &b.f, Relation::Le, &a.f, !g.monotone.violated.contains(&a.i));
        }
        if !g.ratio_direction.undetermined.contains(&a.i) {
            r.verdict("ratio_direction", &item, &b.ratio, ratio_rel, &a.ratio, !g.ratio_direction.violated.contains(&a.i));
        }
    }
    for (name, t) in [("f_monotone", &g.monotone), ("ratio_direction", &g.ratio_direction)] {
        if !t.undetermined.is_empty() {
            r.warn(format!("{name}: enclosures overlap at i = {:?}", t.undetermined));
        }
    }
    Ok(r)
}

pub(super) fn padic(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let Field::Padic { p } = cfg.field else {
        return Err(invalid("padic needs --p"));
    };
    let psi = psi(cfg)?;
    let support = psi.finite_support()?;
    let mut r = Report::new("padic", cfg.clone(), vec![col("n"), rcol("psi"), rcol("measure"), col("balls")]);
    for (n, v) in &support {
        let k = padic::build_k_n(p, *n, v)?;
        r.row(json!({"n": n, "psi": s(v), "measure": s(&k.measure()), "balls": k.balls().count()}));
    }
    r.summarize("union", s(&padic::union_k(p, &psi)?.measure()));
    if let Some(t) = &cfg.t {
        let c = padic::verify_scaling_padic(p, &psi, t)?;
        r.assert_rel("union_scaling", format!("t={t}"), &c.lhs, Relation::Le, &c.rhs);
        r.summarize("scaling_with_factor_p", c.holds_with_factor_p);
    }
    if let (Some(m), Some(n)) = (cfg.ranges.m, cfg.ranges.n) {
        let c = padic::verify_overlap_chain(p, m, n, &psi)?;
        let item = format!("{m},{n}");
        r.assert_rel("chain_lower", &item, &c.lower, Relation::Le, &c.mid);
        r.assert_rel("chain_upper", &item, &c.mid, Relation::Le, &c.upper);
    }
    Ok(r)
}

pub(super) fn laurent(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let Field::Laurent { q, d } = cfg.field else {
        return Err(invalid("laurent needs --q"));
    };
    let lc = cfg.laurent.as_ref().ok_or_else(|| invalid("laurent needs --modulus and --psi"))?;
    let qp = Poly::new(q, lc.modulus.clone())?;
    let mut r = Report::new(
        "laurent",
        cfg.clone(),
        vec![col("set"), col("depth"), col("cubes"), rcol("measure")],
    );
    let e = laurent::psi_exponent(q, &lc.psi, lc.policy)?;
    if e.rounded {
        r.warn(format!("psi = {} is not a power of {q}; radius rounded under policy {:?}", lc.psi, lc.policy));
    }
    let h = laurent::build_h_q(&qp, &lc.psi, d, lc.policy)?;
    r.row(json!({"set": format!("H_{{{qp}}}"), "depth": h.depth(), "cubes": h.len(), "measure": s(&h.measure())}));
    let b = laurent::h_measure_bounds(&qp, &lc.psi, d, lc.policy)?;
    r.assert_rel("measure_general_bound", &qp, &b.measure, Relation::Ge, &b.general_bound);
    if let Some(sharp) = &b.sharp_bound {
        r.assert_rel("measure_sharp_bound", &qp, &b.measure, Relation::Ge, sharp);
    }
    if d < 2 {
        r.warn("the 3/16 bound is stated for d >= 2; it is checked here for d = 1 as well");
    }
    if (q as u128).pow(qp.degree().unwrap_or(0) as u32 * d) <= laurent::ENUMERATION_CAP {
        let theta = poly::theta_d(&qp, d)?;
        let brute = poly::theta_d_brute(&qp, d)?;
        r.verdict("theta_matches_enumeration", &qp, &theta, Relation::Eq, brute, theta == brute.into());
    }
    if let Some(other) = &lc.other {
        let op = Poly::new(q, other.clone())?;
        let other_psi = lc.other_psi.clone().unwrap_or_else(|| lc.psi.clone());
        let o = laurent::overlap_h(&qp, &lc.psi, &op, &other_psi, d)?;
        let item = format!("{qp} / {op}");
        r.row(json!({"set": format!("H_{{{qp}}} ∩ H_{{{op}}}"), "measure": s(&o.measure)}));
        r.assert_rel("overlap_product_bound", &item, &o.measure, Relation::Le, &o.product_bound);
        if let Some(k) = &o.quasi_constant {
            let (n, dd) = laurent::QUASI_INDEPENDENCE_CONSTANT;
            r.assert_rel("overlap_quasi_independence", &item, k, Relation::Le, &Rational::new(n, dd));
        }
    }
    if let Some(t) = &cfg.t {
        let support = lc.support.clone().unwrap_or(PolyPsi { q, entries: vec![(lc.modulus.clone(), lc.psi.clone())] });
        let c = laurent::verify_scaling_laurent(&support, t, d)?;
        r.assert_rel("union_scaling", format!("t={t}"), &c.lhs, Relation::Le, &c.rhs);
        r.summarize("scaling_base", s(&c.base));
    }
    if lc.policy == RadiusPolicy::RoundDown {
        r.summarize("policy", "round_down");
    }
    Ok(r)
}
