//! Command-line surface and the resolved run configuration.
//!
//! Every numeric knob lives in [`Params`]. A run starts from the defaults,
//! overlays the optional JSON config file, then overlays the flags actually
//! given on the command line. The config hash is taken over the resolved
//! parameters, so the report directory depends on values, not on where they
//! came from.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "schottky-thermo",
    version,
    about = "Transfer operators, pressure and counting statistics for Schottky groups"
)]
pub struct Cli {
    /// JSON file of parameters; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root directory for reports.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a group or shift file and print the disk certificate.
    Validate(SourceArgs),
    /// Critical exponent δ from the transfer operator.
    Delta(SourceArgs),
    /// Pressure surface near 0: gradient, Hessian, σ and C(0).
    Pressure(SourceArgs),
    /// Spectral radius of the twisted operator on a (t, v, p) grid.
    Scan(ScanArgs),
    /// Orbit points d(o, γo) ≤ T per homology class.
    CountOrbit(OrbitArgs),
    /// Primitive closed geodesics ℓ ≤ L per homology class.
    CountGeodesics(GeodesicArgs),
    /// Vector orbit w₀Γ counted by norm (plane groups).
    CountVectors(VectorArgs),
    /// Holonomy histogram and character sums of closed geodesics (space groups).
    Holonomy(HolonomyArgs),
    /// CLT for the homology cocycle along Parry trajectories.
    Clt(CltArgs),
    /// Run the acceptance suite on the reference fixtures.
    VerifyAll(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Delta(_) => "delta",
            Command::Pressure(_) => "pressure",
            Command::Scan(_) => "scan",
            Command::CountOrbit(_) => "count-orbit",
            Command::CountGeodesics(_) => "count-geodesics",
            Command::CountVectors(_) => "count-vectors",
            Command::Holonomy(_) => "holonomy",
            Command::Clt(_) => "clt",
            Command::VerifyAll(_) => "verify-all",
        }
    }

    /// Flags given on the command line, keyed like [`Params`].
    fn flags(&self) -> Value {
        let v = match self {
            Command::Validate(a) | Command::Delta(a) | Command::Pressure(a) => serde_json::to_value(a),
            Command::Scan(a) => serde_json::to_value(a),
            Command::CountOrbit(a) => serde_json::to_value(a),
            Command::CountGeodesics(a) => serde_json::to_value(a),
            Command::CountVectors(a) => serde_json::to_value(a),
            Command::Holonomy(a) => serde_json::to_value(a),
            Command::Clt(a) => serde_json::to_value(a),
            Command::VerifyAll(a) => serde_json::to_value(a),
        };
        v.expect("flag structs serialize")
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SourceArgs {
    /// Group (`generators`, …) or tabulated shift (`transition`, …) JSON file.
    #[arg(long, value_name = "FILE", conflicts_with = "fixture")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<PathBuf>,
    /// Built-in reference input.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<Fixture>,
    /// Chebyshev nodes per disk for the collocated operator.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes_per_disk: Option<usize>,
    /// Finite-difference step for derivatives of the pressure.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    /// Smallest |t| of the scan.
    #[arg(long = "t-min")]
    #[serde(rename = "scan_t_min", skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    /// Largest |t| of the scan.
    #[arg(long = "t-max")]
    #[serde(rename = "scan_t_max", skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Number of t values.
    #[arg(long = "t-points")]
    #[serde(rename = "scan_t_points", skip_serializing_if = "Option::is_none")]
    pub t_points: Option<usize>,
    /// Points per torus coordinate of the character grid.
    #[arg(long = "v-points")]
    #[serde(rename = "scan_v_points", skip_serializing_if = "Option::is_none")]
    pub v_points: Option<usize>,
    /// Holonomy frequencies, comma separated.
    #[arg(long = "p", value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(rename = "scan_p", skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<i32>>,
    /// A grid point violates the gap when |λ| > 1 − margin.
    #[arg(long)]
    #[serde(rename = "scan_margin", skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OrbitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    /// Largest distance T; checkpoints cover [T/2, T].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Number of equally spaced checkpoints.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<usize>,
    /// Homology class to report, e.g. `--class 0 --class=-1` or `--class 1,0`.
    #[arg(long = "class", allow_hyphen_values = true)]
    #[serde(rename = "classes", skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<IntVec>>,
    /// Cap on enumerated records.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_points: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GeodesicArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    /// Largest length L; checkpoints cover [L/2, L].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_max: Option<f64>,
    /// Number of equally spaced checkpoints.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<usize>,
    /// Homology class to report (default: 0).
    #[arg(long = "class", allow_hyphen_values = true)]
    #[serde(rename = "classes", skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<IntVec>>,
    /// Cap on enumerated records.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_points: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VectorArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    /// Timelike base vector `x,y,z` (x² + y² < z²).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w0: Option<Vector3>,
    /// Norm on R³.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormArg>,
    /// Smallest log T.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_t_min: Option<f64>,
    /// Largest log T.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_t_max: Option<f64>,
    /// Number of checkpoints, equally spaced in log T.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<usize>,
    /// Cap on enumerated records.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_points: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HolonomyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    /// Largest length L; checkpoints cover [L/2, L].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_max: Option<f64>,
    /// Number of equally spaced checkpoints.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<usize>,
    /// Character frequencies, comma separated.
    #[arg(long = "p", value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(rename = "holonomy_p", skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<i32>>,
    /// Histogram bins on [0, 2π).
    #[arg(long)]
    #[serde(rename = "holonomy_bins", skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Cap on enumerated records.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_points: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CltArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    /// Master seed (required).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    /// Transitions per trajectory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Problem sizes: `small` finishes in minutes.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<Budget>,
    /// Master seed of the CLT check (default 42).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Chebyshev nodes per disk for the collocated operator.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes_per_disk: Option<usize>,
    /// Finite-difference step for derivatives of the pressure.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    /// (a) full 2-shift, unit roof, cocycle ±1
    #[value(name = "toy-two-shift", alias = "a")]
    ToyTwoShift,
    /// (b) two-generator plane group, d = 1
    #[value(name = "fuchsian-pair", alias = "b")]
    FuchsianPair,
    /// (b) with trivial homology
    #[value(name = "fuchsian-pair-d0")]
    FuchsianPairD0,
    /// (c) three-generator plane group, d = 2
    #[value(name = "fuchsian-triple", alias = "c")]
    FuchsianTriple,
    /// (d) two-generator space group, d = 0
    #[value(name = "kleinian-pair-d0", alias = "d0")]
    KleinianPairD0,
    /// (d) two-generator space group, d = 1
    #[value(name = "kleinian-pair-d1", alias = "d1")]
    KleinianPairD1,
}

impl Fixture {
    pub const ALL: [Fixture; 6] = [
        Fixture::ToyTwoShift,
        Fixture::FuchsianPair,
        Fixture::FuchsianPairD0,
        Fixture::FuchsianTriple,
        Fixture::KleinianPairD0,
        Fixture::KleinianPairD1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::ToyTwoShift => "toy-two-shift",
            Fixture::FuchsianPair => "fuchsian-pair",
            Fixture::FuchsianPairD0 => "fuchsian-pair-d0",
            Fixture::FuchsianTriple => "fuchsian-triple",
            Fixture::KleinianPairD0 => "kleinian-pair-d0",
            Fixture::KleinianPairD1 => "kleinian-pair-d1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormArg {
    Euclidean,
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Small,
    Full,
}

/// Comma-separated integer vector, e.g. a homology class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntVec(pub Vec<i64>);

impl FromStr for IntVec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|x| x.trim().parse::<i64>().map_err(|e| format!("`{x}`: {e}")))
            .collect::<Result<_, _>>()
            .map(IntVec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector3(pub [f64; 3]);

impl FromStr for Vector3 {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let xs: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
            .collect::<Result<_, _>>()?;
        let arr: [f64; 3] = xs.try_into().map_err(|_| "expected three comma-separated numbers".to_string())?;
        Ok(Vector3(arr))
    }
}

/// Fully resolved numeric configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub group: Option<PathBuf>,
    pub fixture: Option<Fixture>,
    pub nodes_per_disk: usize,
    pub fd_step: f64,
    pub seed: Option<u64>,
    pub t_max: f64,
    pub l_max: f64,
    pub checkpoints: usize,
    pub classes: Option<Vec<Vec<i64>>>,
    pub max_points: u64,
    pub scan_t_min: f64,
    pub scan_t_max: f64,
    pub scan_t_points: usize,
    pub scan_v_points: usize,
    pub scan_p: Vec<i32>,
    pub scan_margin: f64,
    pub w0: [f64; 3],
    pub norm: NormArg,
    pub log_t_min: f64,
    pub log_t_max: f64,
    pub holonomy_p: Vec<i32>,
    pub holonomy_bins: usize,
    pub trajectories: usize,
    pub steps: usize,
    pub budget: Budget,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            group: None,
            fixture: None,
            nodes_per_disk: 32,
            fd_step: 1e-3,
            seed: None,
            t_max: 16.0,
            l_max: 20.0,
            checkpoints: 9,
            classes: None,
            max_points: 2_000_000_000,
            scan_t_min: 0.05,
            scan_t_max: 5.0,
            scan_t_points: 25,
            scan_v_points: 16,
            scan_p: vec![0],
            scan_margin: 1e-3,
            w0: [0.3, 0.2, 1.5],
            norm: NormArg::Euclidean,
            log_t_min: 10.0,
            log_t_max: 20.0,
            holonomy_p: vec![1, 2, 3],
            holonomy_bins: 16,
            trajectories: 10_000,
            steps: 10_000,
            budget: Budget::Small,
        }
    }
}

impl Params {
    fn check(&self) -> Result<(), CliError> {
        let bad = |what: &str| Err(CliError::Config(what.to_string()));
        let positive = [
            ("fd_step", self.fd_step),
            ("t_max", self.t_max),
            ("l_max", self.l_max),
            ("scan_margin", self.scan_margin),
            ("log_t_min", self.log_t_min),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return bad(&format!("{name} must be a positive number"));
            }
        }
        let counts = [
            ("nodes_per_disk", self.nodes_per_disk),
            ("checkpoints", self.checkpoints),
            ("scan_t_points", self.scan_t_points),
            ("scan_v_points", self.scan_v_points),
            ("holonomy_bins", self.holonomy_bins),
            ("trajectories", self.trajectories),
            ("steps", self.steps),
        ];
        for (name, n) in counts {
            if n == 0 {
                return bad(&format!("{name} must be positive"));
            }
        }
        if self.max_points == 0 {
            return bad("max_points must be positive");
        }
        if self.checkpoints < 2 {
            return bad("need at least 2 checkpoints");
        }
        if self.fd_step >= 0.5 {
            return bad("fd_step must be below 0.5");
        }
        if !(self.scan_t_min.is_finite() && self.scan_t_max.is_finite() && self.scan_t_min <= self.scan_t_max) {
            return bad("scan_t_min must not exceed scan_t_max");
        }
        if !(self.log_t_max.is_finite() && self.log_t_max > self.log_t_min) {
            return bad("log_t_max must exceed log_t_min");
        }
        if self.w0.iter().any(|x| !x.is_finite()) {
            return bad("w0 must be finite");
        }
        Ok(())
    }
}

/// Where reports go and how many workers run; not part of the config hash.
#[derive(Debug, Clone)]
pub struct Settings {
    pub out: PathBuf,
    pub threads: Option<usize>,
}

/// Resolved invocation: the command, its parameters and their hash.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: &'static str,
    pub params: Params,
    pub settings: Settings,
    pub hash: String,
}

impl RunConfig {
    pub fn report_dir(&self) -> PathBuf {
        self.settings.out.join(format!("{}-{}", self.command, &self.hash[..12]))
    }
}

pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut map = match &cli.config {
        Some(path) => read_config(path)?,
        None => Map::new(),
    };
    let out_setting: Option<PathBuf> = take_setting(&mut map, "out")?;
    let threads_setting: Option<usize> = take_setting(&mut map, "threads")?;
    let out = cli.out.clone().or(out_setting).unwrap_or_else(|| PathBuf::from("out"));
    let threads = cli.threads.or(threads_setting);
    if threads == Some(0) {
        return Err(CliError::Config("threads must be positive".into()));
    }
    if let Value::Object(flags) = cli.command.flags() {
        map.extend(flags);
    }
    let params: Params =
        serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Config(format!("config: {e}")))?;
    params.check()?;
    let command = cli.command.name();
    let hash = config_hash(command, &params);
    Ok(RunConfig { command, params, settings: Settings { out, threads }, hash })
}

fn read_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Config(format!("config {} must be a JSON object", path.display()))),
        Err(e) => Err(CliError::Config(format!("config {}: {e}", path.display()))),
    }
}

fn take_setting<T: serde::de::DeserializeOwned>(
    map: &mut Map<String, Value>,
    key: &str,
) -> Result<Option<T>, CliError> {
    map.remove(key)
        .map(|v| serde_json::from_value(v).map_err(|e| CliError::Config(format!("config key `{key}`: {e}"))))
        .transpose()
}

/// SHA-256 over the command name and the resolved parameters.
pub fn config_hash(command: &str, params: &Params) -> String {
    let body = serde_json::to_vec(&(command, params)).expect("params serialize");
    hex(&Sha256::digest(&body))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
