//! Run configuration: JSON file, then environment, then command-line flags.
//!
//! Every section rejects unknown keys and fills missing ones from defaults,
//! so a file only needs the values it changes.

use std::path::{Path, PathBuf};

use finconn_core::renewal::ChiConvention;
use finconn_core::theorems::TimeOffset;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub walk: WalkSection,
    pub renewal: RenewalSection,
    pub theorem: TheoremSection,
    pub perc: PercSection,
    pub fit: FitSection,
    pub oracle: OracleSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: None,
            out: PathBuf::from("out"),
            walk: WalkSection::default(),
            renewal: RenewalSection::default(),
            theorem: TheoremSection::default(),
            perc: PercSection::default(),
            fit: FitSection::default(),
            oracle: OracleSection::default(),
        }
    }
}

/// Longest walk tabulated in rationals by default; denominators stay far
/// from the `i128` range.
pub const AUTO_EXACT_MAX_N: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkSection {
    /// Built-in name or path to a law file.
    pub law: Option<String>,
    pub n: usize,
    /// Start height of a one-dimensional walk.
    pub start: i64,
    /// Lateral start `(v, x)` of a coupled walk.
    pub start3: [i64; 2],
    /// Rational arithmetic; needs a law with exact weights. `None` picks it
    /// for exact laws up to [`AUTO_EXACT_MAX_N`] steps.
    pub exact: Option<bool>,
    pub window: Option<[i64; 2]>,
    pub leak_bound: f64,
    pub boundary_b: Option<String>,
    pub boundary_f: Option<String>,
    /// End gaps `(v, x)` for the fixed-horizon sum.
    pub ends: Vec<[i64; 2]>,
}

impl Default for WalkSection {
    fn default() -> Self {
        Self {
            law: None,
            n: 10,
            start: 0,
            start3: [0, 1],
            exact: None,
            window: None,
            leak_bound: 1e-12,
            boundary_b: None,
            boundary_f: None,
            ends: vec![[0, 1], [0, 2], [0, 3]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenewalSection {
    pub law: String,
    pub z_max: usize,
    pub chi_convention: ChiConvention,
    pub chi_horizon: Option<usize>,
    pub chi_depth: usize,
    pub r0s: Vec<usize>,
    /// 3D law for the tilt scan.
    pub tilt_law: String,
    /// `|λ|` values, scanned along `tilt_direction`.
    pub tilt_norms: Vec<f64>,
    pub tilt_direction: [f64; 2],
}

impl Default for RenewalSection {
    fn default() -> Self {
        Self {
            law: "srw".into(),
            z_max: 64,
            chi_convention: ChiConvention::Literal,
            chi_horizon: None,
            chi_depth: 4000,
            r0s: vec![0, 10, 50],
            tilt_law: "uniform3".into(),
            tilt_norms: vec![0.2, 0.1, 0.05, 0.02, 0.01],
            tilt_direction: [1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoremSection {
    /// Defaults to `srw` for `zn` and `uniform3` otherwise.
    pub law: Option<String>,
    /// Defaults: 2000 for `zn`, 1000 for `C`, 400 for `B`.
    pub n: Option<usize>,
    pub stride: Option<usize>,
    pub tol: Option<f64>,
    pub points: Vec<[i64; 2]>,
    pub start_gaps: Vec<i64>,
    pub end_gaps: Vec<i64>,
    pub offsets: Vec<TimeOffset>,
    pub gap_pairs: Vec<[i64; 2]>,
    pub boundary_b: Option<String>,
    pub boundary_f: Option<String>,
    pub laws1d: Vec<String>,
    pub laws3d: Vec<String>,
    pub n1: usize,
    pub n3: usize,
}

impl Default for TheoremSection {
    fn default() -> Self {
        Self {
            law: None,
            n: None,
            stride: None,
            tol: None,
            points: (1..=3).flat_map(|w| (1..=3).map(move |z| [w, z])).collect(),
            start_gaps: vec![1, 2, 3],
            end_gaps: vec![1, 2, 3],
            offsets: vec![TimeOffset::Mean, TimeOffset::MeanPlusSqrt],
            gap_pairs: vec![[1, 1], [1, 2], [2, 1], [2, 2], [3, 3]],
            boundary_b: None,
            boundary_f: None,
            laws1d: vec!["srw".into(), "lazy".into(), "jump2".into(), "tri".into()],
            laws3d: vec!["uniform3".into(), "mixed3".into()],
            n1: 200,
            n3: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PercSection {
    pub p: f64,
    pub n: Vec<i64>,
    pub samples: u64,
    /// Box margin; `None` picks the per-experiment default.
    pub margin: Option<i64>,
    /// When set, `g` samples in batches until this many hits.
    pub target_hits: Option<u64>,
    pub batch: u64,
    pub max_samples: u64,
    pub tau_window: [i64; 2],
    pub cone: [i64; 2],
    pub gap_range: [usize; 2],
    pub concavity_z: f64,
    /// Write sampled configurations to `samples.fcpd`.
    pub dump: bool,
}

impl Default for PercSection {
    fn default() -> Self {
        Self {
            p: 0.45,
            n: vec![4],
            samples: 1_000_000,
            margin: None,
            target_hits: None,
            batch: 1 << 20,
            max_samples: 100_000_000,
            tau_window: [6, 32],
            cone: [1, 1],
            gap_range: [2, 10],
            concavity_z: 3.0,
            dump: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// JSON array of `g` estimates.
    pub series: Option<PathBuf>,
    /// JSON correlation estimate supplying `τ̂` and its stderr.
    pub tau: Option<PathBuf>,
    pub tau_value: Option<f64>,
    pub tau_stderr: Option<f64>,
    /// Largest `N` kept when hit counts at the top of the grid fall short.
    pub truncate_to: i64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { series: None, tau: None, tau_value: None, tau_stderr: None, truncate_to: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub n: i64,
    pub p: f64,
    /// Monte Carlo samples compared against the enumeration; 0 skips.
    pub mc_samples: u64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { n: 1, p: 0.45, mc_samples: 0 }
    }
}

/// Parses a configuration; empty input yields the defaults.
pub fn parse(text: &str) -> Result<Config, Failure> {
    if text.trim().is_empty() {
        return Ok(Config::default());
    }
    serde_json::from_str(text).map_err(|e| Failure::Validation(format!("config: {e}")))
}

pub fn load(path: &Path) -> Result<Config, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Resource(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        Failure::Validation(m) => Failure::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("").unwrap(), Config::default());
        assert_eq!(parse("  \n").unwrap(), Config::default());
        assert_eq!(parse("{}").unwrap(), Config::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("{\n  \"seed\": 3,\n  \"perc\": { \"pp\": 0.3 }\n}").unwrap_err();
        let Failure::Validation(msg) = err else { panic!() };
        assert!(msg.contains("unknown field `pp`"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
        assert!(parse("{\"sed\": 1}").is_err());
    }

    #[test]
    fn partial_override_merges() {
        let c = parse(r#"{"perc": {"p": 0.3}, "renewal": {"z_max": 5}}"#).unwrap();
        assert_eq!(c.perc.p, 0.3);
        assert_eq!(c.perc.samples, PercSection::default().samples);
        assert_eq!(c.renewal.z_max, 5);
        assert_eq!(c.renewal.law, "srw");
        assert_eq!(c.seed, 1);
    }
}
