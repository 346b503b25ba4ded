//! Command-line surface: argument parsing, configuration merging, dispatch
//! and report output.
//!
//! Exit codes: 0 when every verdict holds, 1 when an asserted relation
//! fails (its operands go to stderr), 2 for invalid input or configuration.

mod commands;
pub mod config;
pub mod report;
mod suites;

use std::ffi::OsString;
use std::fmt::{self, Display};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dimfn::Mode;
use crate::laurent::RadiusPolicy;
use crate::psi_gen::{Family, PsiDescriptor};
use crate::rational::Rational;
use crate::series::TailBound;
pub use config::{ExperimentConfig, Field, FieldKind, Format};
pub use report::{Relation, Report, Verdict};

/// Overrides the directory reports are written to.
pub const OUT_DIR_ENV: &str = "DSLAB_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

/// Any error that makes a run invalid (exit code 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError(pub String);

impl Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "dslab", version, about = "Exact experiments on coprime-fraction approximation sets")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML experiment configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Adds wall-clock time to the report, which is then no longer byte-stable.
    #[arg(long, global = true)]
    pub timing: bool,
}

/// `ψ` on the command line: a rational (constant on the indices the command
/// uses) or a JSON family descriptor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PsiArg {
    Value(Rational),
    Descriptor(PsiDescriptor),
}

fn parse_psi(s: &str) -> Result<PsiArg, String> {
    let t = s.trim();
    if t.starts_with('{') {
        serde_json::from_str(t).map(PsiArg::Descriptor).map_err(|e| format!("bad psi descriptor: {e}"))
    } else {
        t.parse().map(PsiArg::Value).map_err(|e| format!("psi is neither a rational nor a JSON descriptor: {e}"))
    }
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    s.trim().parse().map_err(|e| format!("{e}"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TailArg {
    Finite,
    AtMost(Rational),
}

fn parse_tail(s: &str) -> Result<TailArg, String> {
    match s.trim() {
        "finite" => Ok(TailArg::Finite),
        other => parse_rational(other).map(TailArg::AtMost),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact `λ(E_n)` for one `n` or a range, against its bounds.
    EnMeasure(EnMeasureArgs),
    /// `λ(E_m ∩ E_n)` for one pair or all pairs up to `--max-n`.
    Overlap(OverlapArgs),
    /// Measure of the finite union `Z(ψ)`.
    UnionZ(RangeArgs),
    /// `λ(Z(tψ)) <= t λ(Z(ψ))`.
    Scaling(ScalingArgs),
    /// Block statistics `S_h`, `B_h`, `Q_h`, `R_h`.
    Blocks(BlocksArgs),
    /// Weighted second-moment lower bound against the exact union.
    BcBound(RangeArgs),
    /// Terms and partial sums of the block divergence criterion.
    Criterion(CriterionArgs),
    /// Convolution choice of the damping exponent `k` on one block.
    Convolution(ConvolutionArgs),
    /// Slower divergent or faster convergent companion series.
    Series(SeriesArgs),
    /// Grid checks of a dimension function.
    Dimfn(DimfnArgs),
    /// `K_n` sets in `Z_p`: union measure, scaling, overlap chain.
    Padic(PadicArgs),
    /// `H_Q` sets in `L^d`: measure bounds, overlap, scaling.
    Laurent(LaurentArgs),
    /// Full invariant suite for one field.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::EnMeasure(_) => "en-measure",
            Command::Overlap(_) => "overlap",
            Command::UnionZ(_) => "union-z",
            Command::Scaling(_) => "scaling",
            Command::Blocks(_) => "blocks",
            Command::BcBound(_) => "bc-bound",
            Command::Criterion(_) => "criterion",
            Command::Convolution(_) => "convolution",
            Command::Series(_) => "series",
            Command::Dimfn(_) => "dimfn",
            Command::Padic(_) => "padic",
            Command::Laurent(_) => "laurent",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Args)]
pub struct EnMeasureArgs {
    #[arg(long)]
    pub n: Option<u64>,
    /// Last index of the range starting at `--n`.
    #[arg(long)]
    pub n_max: Option<u64>,
    #[arg(long, value_parser = parse_psi)]
    pub psi: Option<PsiArg>,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub n: Option<u64>,
    /// All pairs `2 <= m < n <= max_n` when `--m`/`--n` are absent.
    #[arg(long)]
    pub max_n: Option<u64>,
    #[arg(long, value_parser = parse_psi)]
    pub psi: Option<PsiArg>,
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    #[arg(long)]
    pub lo: Option<u64>,
    #[arg(long)]
    pub max_n: Option<u64>,
    #[arg(long, value_parser = parse_psi)]
    pub psi: Option<PsiArg>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub range: RangeArgs,
    #[arg(long, value_parser = parse_rational)]
    pub t: Option<Rational>,
}

#[derive(Debug, Args)]
pub struct SchemeArgs {
    /// Custom block boundaries `N_0 < N_1 < …`; canonical blocks otherwise.
    #[arg(long, value_delimiter = ',')]
    pub boundaries: Option<Vec<u64>>,
    #[arg(long, value_parser = parse_psi)]
    pub psi: Option<PsiArg>,
}

#[derive(Debug, Args)]
pub struct BlocksArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long)]
    pub h_min: Option<u32>,
    #[arg(long)]
    pub h_max: Option<u32>,
    /// Monte Carlo sample count; exact computation when absent.
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub phi_cap: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdArg {
    Three,
    ExpE,
}

#[derive(Debug, Args)]
pub struct CriterionArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long)]
    pub h_max: Option<u32>,
    #[arg(long, value_enum)]
    pub threshold: Option<ThresholdArg>,
}

#[derive(Debug, Args)]
pub struct ConvolutionArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long)]
    pub h: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    #[arg(long, value_enum)]
    pub mode: Option<config::SeriesMode>,
    /// Comma-separated terms, repeated cyclically up to `--len`.
    #[arg(long, value_delimiter = ',', value_parser = parse_rational)]
    pub terms: Option<Vec<Rational>>,
    #[arg(long)]
    pub len: Option<usize>,
    /// `finite`, or a bound on the sum of the omitted tail.
    #[arg(long, value_parser = parse_tail)]
    pub tail: Option<TailArg>,
    #[arg(long)]
    pub precision: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DimfnMode {
    SlowGrowth,
    Decaying,
}

#[derive(Debug, Args)]
pub struct DimfnArgs {
    #[arg(long, value_enum)]
    pub mode: Option<DimfnMode>,
    /// Values of `g` at the nodes.
    #[arg(long, value_delimiter = ',', value_parser = parse_rational)]
    pub g: Option<Vec<Rational>>,
    /// Node positions; `1, 2, …` when absent.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Option<Vec<u64>>,
    #[arg(long)]
    pub max_i: Option<u32>,
    #[arg(long)]
    pub precision: Option<u32>,
}

#[derive(Debug, Args)]
pub struct PadicArgs {
    #[arg(long)]
    pub p: Option<u64>,
    #[command(flatten)]
    pub range: RangeArgs,
    #[arg(long, value_parser = parse_rational)]
    pub t: Option<Rational>,
    /// Pair for the overlap chain.
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub n: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Strict,
    RoundDown,
    Literal,
}

#[derive(Debug, Args)]
pub struct LaurentArgs {
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long)]
    pub d: Option<u32>,
    /// Coefficients of `Q`, constant term first.
    #[arg(long, value_delimiter = ',')]
    pub modulus: Option<Vec<u32>>,
    #[arg(long, value_parser = parse_rational)]
    pub psi: Option<Rational>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long, value_delimiter = ',')]
    pub other: Option<Vec<u32>>,
    #[arg(long, value_parser = parse_rational)]
    pub other_psi: Option<Rational>,
    #[arg(long, value_parser = parse_rational)]
    pub t: Option<Rational>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub field: Option<FieldKind>,
    /// Largest index (real, p-adic) or largest degree (Laurent, at most 5).
    #[arg(long)]
    pub max_n: Option<u64>,
    /// Primes for the p-adic suite.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<u64>>,
    /// Field sizes for the Laurent suite.
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<u32>>,
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

/// Stores `ψ` in the config; a bare value becomes a constant on `[lo, hi]`.
fn set_psi(cfg: &mut ExperimentConfig, arg: Option<PsiArg>, lo: u64, hi: u64) -> Result<(), CliError> {
    match arg {
        Some(PsiArg::Descriptor(d)) => cfg.psi = Some(d),
        Some(PsiArg::Value(value)) => {
            if lo == 0 || lo > hi {
                return Err(invalid(format!("empty index range [{lo}, {hi}] for a constant psi")));
            }
            cfg.psi = Some(Family::Constant { value, lo, hi }.into());
        }
        None => {}
    }
    Ok(())
}

fn set_scheme(cfg: &mut ExperimentConfig, args: &SchemeArgs) -> Result<(), CliError> {
    if let Some(b) = &args.boundaries {
        cfg.scheme = Some(crate::blocks::BlockScheme::custom(b.clone())?);
    }
    Ok(())
}

/// Index span of blocks `h_min..=h_max` under the configured scheme.
fn block_span(cfg: &ExperimentConfig, h_min: u32, h_max: u32) -> Result<(u64, u64), CliError> {
    let scheme = commands::scheme(cfg);
    let (lo, _) = scheme.range(h_min)?;
    let (_, hi) = scheme.range(h_max)?;
    Ok((lo, hi))
}

impl Command {
    /// Folds flags into the configuration.
    pub fn apply(self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        let r = &mut cfg.ranges;
        match self {
            Command::EnMeasure(a) => {
                set(&mut r.n, a.n);
                set(&mut r.max_n, a.n_max);
                let n = r.n.ok_or_else(|| invalid("en-measure needs --n"))?;
                let hi = r.max_n.unwrap_or(n);
                set_psi(cfg, a.psi, n, hi)?;
            }
            Command::Overlap(a) => {
                set(&mut r.m, a.m);
                set(&mut r.n, a.n);
                set(&mut r.max_n, a.max_n);
                let hi = [r.m, r.n, r.max_n].into_iter().flatten().max().unwrap_or(0);
                set_psi(cfg, a.psi, 1, hi)?;
            }
            Command::UnionZ(a) | Command::BcBound(a) => apply_range(cfg, a)?,
            Command::Scaling(a) => {
                set(&mut cfg.t, a.t);
                apply_range(cfg, a.range)?;
            }
            Command::Blocks(a) => {
                set_scheme(cfg, &a.scheme)?;
                set(&mut cfg.ranges.h_min, a.h_min);
                set(&mut cfg.ranges.h_max, a.h_max);
                set(&mut cfg.samples, a.samples);
                if let Some(c) = a.phi_cap {
                    cfg.caps.phi_cap = c;
                }
                let (h0, h1) = commands::block_range(cfg);
                let (lo, hi) = block_span(cfg, h0, h1)?;
                set_psi(cfg, a.scheme.psi, lo, hi)?;
            }
            Command::Criterion(a) => {
                set_scheme(cfg, &a.scheme)?;
                set(&mut cfg.ranges.h_max, a.h_max);
                if let Some(t) = a.threshold {
                    cfg.threshold = Some(match t {
                        ThresholdArg::Three => crate::borel_cantelli::Threshold::Three,
                        ThresholdArg::ExpE => crate::borel_cantelli::Threshold::ExpE,
                    });
                }
                let scheme = commands::scheme(cfg);
                let h1 = cfg.ranges.h_max.unwrap_or(scheme.last()).min(scheme.last());
                let (lo, hi) = block_span(cfg, scheme.first(), h1)?;
                set_psi(cfg, a.scheme.psi, lo, hi)?;
            }
            Command::Convolution(a) => {
                set_scheme(cfg, &a.scheme)?;
                if a.h.is_some() {
                    cfg.ranges.h_min = a.h;
                    cfg.ranges.h_max = a.h;
                }
                let h = cfg.ranges.h_min.ok_or_else(|| invalid("convolution needs --h"))?;
                let (lo, hi) = block_span(cfg, h, h)?;
                set_psi(cfg, a.scheme.psi, lo, hi)?;
            }
            Command::Series(a) => {
                let s = cfg.series.get_or_insert_with(Default::default);
                if let Some(m) = a.mode {
                    s.mode = m;
                }
                if let Some(t) = a.terms {
                    s.terms = t;
                }
                set(&mut s.len, a.len);
                match a.tail {
                    Some(TailArg::Finite) => s.tail = Some(TailBound::Finite),
                    Some(TailArg::AtMost(bound)) => s.tail = Some(TailBound::AtMost { bound }),
                    None => {}
                }
                if let Some(p) = a.precision {
                    cfg.caps.precision = p;
                }
            }
            Command::Dimfn(a) => apply_dimfn(cfg, a)?,
            Command::Padic(a) => {
                if let Some(p) = a.p {
                    cfg.field = Field::Padic { p };
                }
                set(&mut cfg.t, a.t);
                set(&mut cfg.ranges.m, a.m);
                set(&mut cfg.ranges.n, a.n);
                apply_range(cfg, a.range)?;
            }
            Command::Laurent(a) => apply_laurent(cfg, a)?,
            Command::Verify(a) => {
                let s = cfg.suite.get_or_insert_with(Default::default);
                if let Some(f) = a.field {
                    s.field = f;
                }
                set(&mut s.max_n, a.max_n);
                if let Some(p) = a.p {
                    s.primes = p;
                }
                if let Some(q) = a.q {
                    s.fields = q;
                }
            }
        }
        Ok(())
    }
}

fn apply_range(cfg: &mut ExperimentConfig, a: RangeArgs) -> Result<(), CliError> {
    set(&mut cfg.ranges.lo, a.lo);
    set(&mut cfg.ranges.max_n, a.max_n);
    let lo = cfg.ranges.lo.unwrap_or(1);
    match (&a.psi, cfg.ranges.max_n) {
        (Some(PsiArg::Value(_)), None) => Err(invalid("a constant psi needs --max-n")),
        (_, hi) => set_psi(cfg, a.psi, lo, hi.unwrap_or(lo)),
    }
}

fn apply_dimfn(cfg: &mut ExperimentConfig, a: DimfnArgs) -> Result<(), CliError> {
    use crate::dimfn::{DimFn, Direction, StepFn};
    if let Some(p) = a.precision {
        cfg.caps.precision = p;
    }
    let existing = cfg.dimfn.clone();
    let mode = match a.mode {
        Some(DimfnMode::SlowGrowth) => Mode::SlowGrowth,
        Some(DimfnMode::Decaying) => Mode::Decaying,
        None => existing.as_ref().map(|c| c.function.mode).ok_or_else(|| invalid("dimfn needs --mode"))?,
    };
    let function = match (a.g, &existing) {
        (Some(values), _) => {
            let nodes: Vec<u64> = a.nodes.unwrap_or_else(|| (1..=values.len() as u64).collect());
            if nodes.len() != values.len() {
                return Err(invalid("--nodes and --g differ in length"));
            }
            let (direction, vanishes) = match mode {
                Mode::SlowGrowth => (Direction::Increasing, false),
                Mode::Decaying => (Direction::Decreasing, true),
            };
            DimFn::new(mode, StepFn::new(nodes.into_iter().zip(values).collect(), direction, vanishes)?)?
        }
        (None, Some(c)) => DimFn::new(mode, c.function.g.clone())?,
        (None, None) => return Err(invalid("dimfn needs --g")),
    };
    let max_i = a.max_i.or(existing.map(|c| c.max_i)).unwrap_or(32);
    cfg.dimfn = Some(config::DimFnConfig { function, max_i });
    Ok(())
}

fn apply_laurent(cfg: &mut ExperimentConfig, a: LaurentArgs) -> Result<(), CliError> {
    let (q0, d0) = match cfg.field {
        Field::Laurent { q, d } => (Some(q), Some(d)),
        _ => (None, None),
    };
    let q = a.q.or(q0).ok_or_else(|| invalid("laurent needs --q"))?;
    let d = a.d.or(d0).unwrap_or(1);
    cfg.field = Field::Laurent { q, d };
    set(&mut cfg.t, a.t);
    let existing = cfg.laurent.take();
    let modulus = a.modulus.or(existing.as_ref().map(|l| l.modulus.clone())).ok_or_else(|| invalid("laurent needs --modulus"))?;
    let psi = a.psi.or(existing.as_ref().map(|l| l.psi.clone())).ok_or_else(|| invalid("laurent needs --psi"))?;
    let policy = match a.policy {
        Some(PolicyArg::Strict) => RadiusPolicy::Strict,
        Some(PolicyArg::RoundDown) => RadiusPolicy::RoundDown,
        Some(PolicyArg::Literal) => RadiusPolicy::Literal,
        None => existing.as_ref().map(|l| l.policy).unwrap_or_default(),
    };
    cfg.laurent = Some(config::LaurentConfig {
        modulus,
        psi,
        policy,
        other: a.other.or(existing.as_ref().and_then(|l| l.other.clone())),
        other_psi: a.other_psi.or(existing.as_ref().and_then(|l| l.other_psi.clone())),
        support: existing.and_then(|l| l.support),
    });
    Ok(())
}

/// Computes the report for a fully merged configuration.
pub fn execute(command: &str, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    match command {
        "en-measure" => commands::en_measure(cfg),
        "overlap" => commands::overlap(cfg),
        "union-z" => commands::union_z(cfg),
        "scaling" => commands::scaling(cfg),
        "blocks" => commands::blocks(cfg),
        "bc-bound" => commands::bc_bound(cfg),
        "criterion" => commands::criterion(cfg),
        "convolution" => commands::convolution(cfg),
        "series" => commands::series(cfg),
        "dimfn" => commands::dimfn(cfg),
        "padic" => commands::padic(cfg),
        "laurent" => commands::laurent(cfg),
        "verify" => suites::verify(cfg),
        other => Err(invalid(format!("unknown command {other}"))),
    }
}

/// Where the report goes: the configured path, redirected into
/// `$DSLAB_OUT_DIR` when that is set; `None` means stdout.
pub fn destination(cfg: &ExperimentConfig, command: &str, out_dir: Option<&Path>) -> Option<PathBuf> {
    let ext = cfg.output.format.extension();
    match (out_dir, &cfg.output.path) {
        (Some(dir), Some(p)) => Some(dir.join(p.file_name().map(PathBuf::from).unwrap_or_else(|| format!("{command}.{ext}").into()))),
        (Some(dir), None) => Some(dir.join(format!("{command}.{ext}"))),
        (None, p) => p.clone(),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

pub fn emit(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    }
}

fn prepare(cli: Cli) -> Result<(String, ExperimentConfig, bool), CliError> {
    let mut cfg = match &cli.global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(f) = cli.global.format {
        cfg.output.format = f;
    }
    if let Some(p) = cli.global.out {
        cfg.output.path = Some(p);
    }
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    let name = cli.command.name().to_string();
    cli.command.apply(&mut cfg)?;
    Ok((name, cfg, cli.global.timing))
}

/// Parses, runs and writes; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    let (name, cfg, timing) = match prepare(cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let mut report = match execute(&name, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    if timing {
        report.timing_ms = Some(start.elapsed().as_millis() as u64);
    }
    let bytes = emit(&report, cfg.output.format);
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    match destination(&cfg, &name, out_dir.as_deref()) {
        Some(path) => {
            if let Err(e) = write_atomic(&path, &bytes) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_INVALID;
            }
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            if out.write_all(&bytes).and_then(|_| out.flush()).is_err() {
                return EXIT_INVALID;
            }
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if report.passed {
        EXIT_OK
    } else {
        for v in report.failures() {
            eprintln!("{v}");
        }
        EXIT_FAILED
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn merged(args: &[&str]) -> Result<(String, ExperimentConfig), CliError> {
        let cli = Cli::try_parse_from(std::iter::once("dslab").chain(args.iter().copied())).map_err(|e| invalid(e.to_string()))?;
        prepare(cli).map(|(n, c, _)| (n, c))
    }

    #[test]
    fn psi_argument_forms() {
        assert_eq!(parse_psi("1/2"), Ok(PsiArg::Value(Rational::new(1, 2))));
        let d = parse_psi(r#"{"family":"reciprocal","lo":1,"hi":9}"#).unwrap();
        assert!(matches!(d, PsiArg::Descriptor(PsiDescriptor { family: Family::Reciprocal { .. }, .. })));
        assert!(parse_psi("half").is_err());
        assert!(parse_psi("{\"family\":\"nope\"}").is_err());
    }

    #[test]
    fn constant_psi_covers_the_command_range() {
        let (_, c) = merged(&["en-measure", "--n", "5", "--psi", "1/2"]).unwrap();
        assert_eq!(c.psi.unwrap().family, Family::Constant { value: Rational::new(1, 2), lo: 5, hi: 5 });
        let (_, c) = merged(&["blocks", "--boundaries", "2,10,40", "--h-max", "2", "--psi", "1/4"]).unwrap();
        assert_eq!(c.psi.unwrap().family, Family::Constant { value: Rational::new(1, 4), lo: 3, hi: 40 });
        assert!(merged(&["union-z", "--psi", "1/2"]).is_err());
    }

    #[test]
    fn out_dir_redirects() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(destination(&cfg, "blocks", None), None);
        assert_eq!(destination(&cfg, "blocks", Some(Path::new("/tmp/o"))), Some(PathBuf::from("/tmp/o/blocks.json")));
        cfg.output.path = Some("a/b/r.csv".into());
        assert_eq!(destination(&cfg, "blocks", Some(Path::new("/tmp/o"))), Some(PathBuf::from("/tmp/o/r.csv")));
        assert_eq!(destination(&cfg, "blocks", None), Some(PathBuf::from("a/b/r.csv")));
    }
}
