//! Command-line front end: configuration, seeding, artifact writing and the
//! run manifest.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod criteria;
pub mod manifest;

use config::Config;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad input or a failed verdict: exit 2.
    Validation(String),
    /// Numerical or I/O resources ran out: exit 3.
    Resource(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Resource(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "validation: {m}"),
            Failure::Resource(m) => write!(f, "resource: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<finconn_core::Error> for Failure {
    fn from(e: finconn_core::Error) -> Self {
        use finconn_core::Error as E;
        let msg = e.to_string();
        match e {
            E::ConfigInvalid(_)
            | E::InvalidLaw(_)
            | E::UnknownLaw(_)
            | E::NoExactWeights(_)
            | E::DegenerateDesign(_)
            | E::TargetUnreachable { .. } => Failure::Validation(msg),
            E::WindowTooSmall { .. }
            | E::TooLarge { .. }
            | E::BoxTooSmall(_)
            | E::InsufficientHits(_)
            | E::Io(_)
            | E::Json(_)
            | E::Csv(_) => Failure::Resource(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "finconn", version, about = "Walk tables, renewal checks and finite-connection Monte Carlo")]
pub struct Cli {
    #[arg(long, global = true, env = "FINCONN_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "FINCONN_THREADS")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "FINCONN_OUT")]
    pub out: Option<PathBuf>,
    /// JSON configuration file; flags override it.
    #[arg(long, global = true, env = "FINCONN_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One- and three-dimensional walk tables.
    Walk {
        #[arg(value_enum)]
        table: WalkCmd,
        #[command(flatten)]
        opts: WalkOpts,
    },
    /// Ladder heights, the renewal function and `χ`.
    Renewal {
        #[arg(value_enum)]
        what: RenewalCmd,
        #[command(flatten)]
        opts: RenewalOpts,
    },
    /// Ratio-convergence checks.
    Theorem {
        #[arg(value_enum)]
        which: TheoremCmd,
        #[command(flatten)]
        opts: TheoremOpts,
    },
    /// Bond percolation Monte Carlo.
    Perc {
        #[arg(value_enum)]
        what: PercCmd,
        #[command(flatten)]
        opts: PercOpts,
    },
    /// Fits over saved estimates.
    Fit {
        #[arg(value_enum)]
        what: FitCmd,
        #[command(flatten)]
        opts: FitOpts,
    },
    /// Exhaustive enumeration on a small box.
    Oracle {
        #[arg(value_enum)]
        what: OracleCmd,
        #[command(flatten)]
        opts: OracleOpts,
    },
    /// Runs acceptance criteria and writes `criterion_<k>.json`.
    Check {
        /// Criteria to run; all when omitted.
        #[arg(long = "criterion", value_parser = clap::value_parser!(u8).range(1..=12))]
        criteria: Vec<u8>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WalkCmd {
    Q,
    U,
    U0,
    R,
    P,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenewalCmd {
    F,
    #[value(name = "U")]
    BigU,
    Chi,
    Limit,
    TiltScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoremCmd {
    Zn,
    #[value(name = "B")]
    B,
    #[value(name = "C")]
    C,
    Apriori,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PercCmd {
    Sample,
    Tau,
    G,
    Geometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitCmd {
    Prefactor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleCmd {
    Enumerate,
}

#[derive(Debug, Default, Args)]
pub struct WalkOpts {
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<i64>,
    /// Lateral start of a coupled walk, as `V X`.
    #[arg(long, num_args = 2, value_names = ["V", "X"], allow_hyphen_values = true)]
    pub start3: Option<Vec<i64>>,
    #[arg(long)]
    pub exact: Option<bool>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    pub window: Option<Vec<i64>>,
    #[arg(long)]
    pub leak_bound: Option<f64>,
    #[arg(long)]
    pub boundary_b: Option<String>,
    #[arg(long)]
    pub boundary_f: Option<String>,
}

#[derive(Debug, Default, Args)]
pub struct RenewalOpts {
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long = "zmax")]
    pub z_max: Option<usize>,
    #[arg(long)]
    pub chi_horizon: Option<usize>,
    #[arg(long)]
    pub chi_depth: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct TheoremOpts {
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct PercOpts {
    #[arg(long)]
    pub p: Option<f64>,
    /// Distances `N`; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<i64>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub margin: Option<i64>,
    #[arg(long)]
    pub target_hits: Option<u64>,
    #[arg(long)]
    pub max_samples: Option<u64>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    pub window: Option<Vec<i64>>,
    #[arg(long)]
    pub dump: bool,
}

#[derive(Debug, Default, Args)]
pub struct FitOpts {
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long)]
    pub tau: Option<PathBuf>,
    #[arg(long)]
    pub tau_value: Option<f64>,
    #[arg(long)]
    pub tau_stderr: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct OracleOpts {
    #[arg(long)]
    pub n: Option<i64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub mc_samples: Option<u64>,
}

/// File configuration with the global flags applied.
pub fn resolve_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cfg.threads == Some(0) {
        return Err(Failure::Validation("threads must be positive".into()));
    }
    Ok(cfg)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let command: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = resolve_config(&cli).and_then(|cfg| {
        if let Some(t) = cfg.threads {
            // A second call in the same process keeps the first pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        commands::dispatch(cli.command, cfg, command)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("finconn: {e}");
            e.exit_code()
        }
    }
}
