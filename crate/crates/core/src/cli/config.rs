//! Experiment configuration; a single TOML document, overridden by flags.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::blocks::{BlockScheme, DEFAULT_PHI_CAP};
use crate::borel_cantelli::Threshold;
use crate::certified::DEFAULT_PRECISION;
use crate::dimfn::DimFn;
use crate::laurent::{PolyPsi, RadiusPolicy};
use crate::psi_gen::PsiDescriptor;
use crate::rational::Rational;
use crate::series::TailBound;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Field {
    #[default]
    Real,
    Padic { p: u64 },
    Laurent { q: u32, d: u32 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ranges {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_min: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<u32>,
}

fn default_phi_cap() -> u64 {
    DEFAULT_PHI_CAP
}

fn default_precision() -> u32 {
    DEFAULT_PRECISION
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    /// Largest `Σ φ(n)` for an exact block computation.
    #[serde(default = "default_phi_cap")]
    pub phi_cap: u64,
    /// Bits for certified enclosures.
    #[serde(default = "default_precision")]
    pub precision: u32,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { phi_cap: DEFAULT_PHI_CAP, precision: DEFAULT_PRECISION }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMode {
    /// `y_n = 1 / Σ_{k<=n} (b_k + 1/k²)`.
    #[default]
    Divergent,
    /// `x_n = 1 / sqrt(Σ_{k>=n} (a_k + 1/k²))` and the clamped `z_n`.
    Convergent,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    #[serde(default)]
    pub mode: SeriesMode,
    /// Repeated cyclically up to `len` terms.
    pub terms: Vec<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailBound>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimFnConfig {
    pub function: DimFn,
    pub max_i: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaurentConfig {
    /// Coefficients of `Q`, constant term first.
    pub modulus: Vec<u32>,
    pub psi: Rational,
    #[serde(default)]
    pub policy: RadiusPolicy,
    /// Second modulus for the overlap check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other_psi: Option<Rational>,
    /// Support for the scaling check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<PolyPsi>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    #[default]
    Real,
    Padic,
    Laurent,
}

fn default_primes() -> Vec<u64> {
    vec![2, 3, 5]
}

fn default_fields() -> Vec<u32> {
    vec![2, 3]
}

/// Parameters of `verify`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub field: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n: Option<u64>,
    #[serde(default = "default_primes")]
    pub primes: Vec<u64>,
    #[serde(default = "default_fields")]
    pub fields: Vec<u32>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { field: FieldKind::Real, max_n: None, primes: default_primes(), fields: default_fields() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Threshold>,
    #[serde(default)]
    pub field: Field,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<BlockScheme>,
    #[serde(default)]
    pub ranges: Ranges,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimfn: Option<DimFnConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laurent: Option<LaurentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimfn::{Direction, Mode, StepFn};
    use crate::psi_gen::Family;
    use crate::rational::rat;

    fn full() -> ExperimentConfig {
        ExperimentConfig {
            seed: 7,
            t: Some(rat(5, 2)),
            samples: Some(1000),
            threshold: Some(Threshold::ExpE),
            field: Field::Laurent { q: 2, d: 2 },
            psi: Some(PsiDescriptor {
                family: Family::Explicit { values: vec![(2, rat(1, 3)), (9, rat(5, 1))] },
                clamp_half: true,
                erdos_vaaler: false,
            }),
            scheme: Some(BlockScheme::Custom { boundaries: vec![2, 10, 40] }),
            ranges: Ranges { m: Some(3), n: Some(5), lo: None, max_n: Some(300), h_min: Some(1), h_max: Some(2) },
            caps: Caps { phi_cap: 1000, precision: 96 },
            series: Some(SeriesConfig {
                mode: SeriesMode::Convergent,
                terms: vec![rat(1, 2), rat(0, 1)],
                len: Some(10),
                tail: Some(TailBound::AtMost { bound: rat(1, 100) }),
            }),
            dimfn: Some(DimFnConfig {
                function: DimFn::new(
                    Mode::SlowGrowth,
                    StepFn::new(vec![(1, rat(1, 1)), (3, rat(2, 1))], Direction::Increasing, false).unwrap(),
                )
                .unwrap(),
                max_i: 20,
            }),
            laurent: Some(LaurentConfig {
                modulus: vec![0, 1, 1],
                psi: rat(1, 2),
                policy: RadiusPolicy::Literal,
                other: Some(vec![1, 1]),
                other_psi: Some(rat(1, 4)),
                support: Some(PolyPsi { q: 2, entries: vec![(vec![0, 1], rat(1, 4))] }),
            }),
            suite: Some(SuiteConfig { field: FieldKind::Padic, max_n: Some(40), primes: vec![3], fields: vec![2] }),
            output: OutputConfig { format: Format::Csv, path: Some("out/report.csv".into()) },
        }
    }

    #[test]
    fn toml_round_trip() {
        for c in [ExperimentConfig::default(), full()] {
            let text = c.to_toml();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c, "{text}");
        }
    }

    #[test]
    fn hand_written_config() {
        let text = r#"
seed = 3
[field]
kind = "padic"
p = 5
[psi]
family = "constant"
value = "1/2"
lo = 1
hi = 20
[ranges]
max_n = 20
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.field, Field::Padic { p: 5 });
        assert_eq!(c.caps, Caps::default());
        assert!(ExperimentConfig::from_toml("sed = 3").is_err());
    }
}
