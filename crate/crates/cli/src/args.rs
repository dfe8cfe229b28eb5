use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kalman_cascade::{CascadeConfig64, Regime, SampleSchedule};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Parser, Debug)]
#[command(name = "kcascade", version, about = "Precision growth of word-of-mouth Kalman filter chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Deterministic precision trajectory of the public belief.
    Precision(PrecisionArgs),
    /// Fitted growth rate against the theoretical prediction.
    Rate(RateArgs),
    /// Seeded simulation comparing the empirical MSE with 1/rho_k.
    Montecarlo(McArgs),
    /// Generic Riccati-like sequence: predicted against empirical limit.
    Riccati(RiccatiArgs),
    /// Bayes update against direct joint-Gaussian conditioning.
    GaussianCheck(GaussianArgs),
    /// Runs the acceptance checks and prints a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeArg {
    Unscaled,
    Scaled,
    Zeroed,
    ScaledLast,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Unscaled => Regime::Unscaled,
            RegimeArg::Scaled => Regime::Scaled,
            RegimeArg::Zeroed => Regime::ZeroedPrior,
            RegimeArg::ScaledLast => Regime::ScaledLast,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sample {
    All,
    #[default]
    Geometric,
}

/// Lower-order term `f` of a Riccati-like sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FPreset {
    /// `f(x) = x`
    Linear,
    /// `f(x) = c + x`
    Affine(f64),
    /// `f(x) = x^p`, `0 < p <= 1`
    Power(f64),
}

impl FPreset {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            FPreset::Linear => x,
            FPreset::Affine(c) => c + x,
            FPreset::Power(p) => x.powf(p),
        }
    }
}

impl FromStr for FPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64, String> {
            let a = a.ok_or_else(|| format!("preset '{name}' needs a parameter, e.g. {name}:1"))?;
            a.parse::<f64>().map_err(|e| format!("bad parameter '{a}': {e}"))
        };
        match name {
            "linear" if arg.is_none() => Ok(FPreset::Linear),
            "affine" => {
                let c = num(arg)?;
                if !(c.is_finite() && c >= 0.0) {
                    return Err(format!("affine offset must be finite and >= 0, got {c}"));
                }
                Ok(FPreset::Affine(c))
            }
            "power" => {
                let p = num(arg)?;
                if !(p > 0.0 && p <= 1.0) {
                    return Err(format!("power exponent must lie in (0, 1], got {p}"));
                }
                Ok(FPreset::Power(p))
            }
            _ => Err(format!("unknown f preset '{s}' (expected linear, affine:C or power:P)")),
        }
    }
}

impl fmt::Display for FPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FPreset::Linear => write!(f, "linear"),
            FPreset::Affine(c) => write!(f, "affine:{c}"),
            FPreset::Power(p) => write!(f, "power:{p}"),
        }
    }
}

/// Keys a `--config` JSON file may set. Names match the long flags; flags
/// given on the command line take precedence.
#[derive(Deserialize, Debug, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub m: Option<usize>,
    pub lambda_e: Option<f64>,
    pub lambda_w: Option<OneOrMany>,
    pub rho0: Option<f64>,
    pub delta: Option<f64>,
    pub regime: Option<RegimeArg>,
    pub kmax: Option<u64>,
    pub sample: Option<Sample>,
    pub points_per_decade: Option<u32>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub window_lo: Option<u64>,
    pub window_hi: Option<u64>,
    pub tail_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub checkpoints: Option<Vec<u64>>,
    pub theta_bar: Option<f64>,
    pub c: Option<f64>,
    pub n: Option<u32>,
    pub f: Option<String>,
    pub x0: Option<f64>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    pub quick: Option<bool>,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl From<OneOrMany> for Vec<f64> {
    fn from(v: OneOrMany) -> Self {
        match v {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

pub fn read_config(path: &Path) -> Result<FileConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("bad config {}: {e}", path.display())))
}

#[derive(Args, Debug, Default)]
pub struct OutputArgs {
    /// Output format [default: csv].
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON file with default values for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl OutputArgs {
    /// Loads the config file, if any, and fills the output settings from it.
    pub fn load(&mut self) -> Result<FileConfig, Failure> {
        let file = match &self.config {
            Some(p) => read_config(p)?,
            None => FileConfig::default(),
        };
        self.format = self.format.or(file.format);
        if self.output.is_none() {
            self.output = file.output.clone();
        }
        Ok(file)
    }
}

#[derive(Args, Debug, Default)]
pub struct CascadeArgs {
    /// Number of agents [default: 2].
    #[arg(long)]
    pub m: Option<usize>,
    /// Observation noise variance [default: 1].
    #[arg(long)]
    pub lambda_e: Option<f64>,
    /// Transmission noise variances, comma separated; a single value is
    /// used for every transmitting agent [default: 1].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda_w: Option<Vec<f64>>,
    /// Initial public precision [default: 1].
    #[arg(long, allow_hyphen_values = true)]
    pub rho0: Option<f64>,
    /// Prior scaling exponent [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// [default: unscaled]
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
}

impl CascadeArgs {
    pub fn fill(&mut self, f: &FileConfig) {
        self.m = self.m.or(f.m);
        self.lambda_e = self.lambda_e.or(f.lambda_e);
        if self.lambda_w.is_none() {
            self.lambda_w = f.lambda_w.clone().map(Into::into);
        }
        self.rho0 = self.rho0.or(f.rho0);
        self.delta = self.delta.or(f.delta);
        self.regime = self.regime.or(f.regime);
    }

    pub fn build(&self) -> Result<CascadeConfig64, Failure> {
        let m = self.m.unwrap_or(2);
        let lambda_w = match self.lambda_w.as_deref() {
            None => vec![1.0; m.saturating_sub(1)],
            Some([w]) => vec![*w; m.saturating_sub(1)],
            Some(ws) => ws.to_vec(),
        };
        let config = CascadeConfig64 {
            m,
            lambda_e: self.lambda_e.unwrap_or(1.0),
            lambda_w,
            rho0: self.rho0.unwrap_or(1.0),
            delta: self.delta.unwrap_or(0.0),
            regime: self.regime.unwrap_or(RegimeArg::Unscaled).into(),
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug, Default)]
pub struct ScheduleArgs {
    /// Last step.
    #[arg(long)]
    pub kmax: Option<u64>,
    /// Which steps to record [default: geometric].
    #[arg(long, value_enum)]
    pub sample: Option<Sample>,
    /// Density of geometric sampling [default: 32].
    #[arg(long)]
    pub points_per_decade: Option<u32>,
}

impl ScheduleArgs {
    pub fn fill(&mut self, f: &FileConfig) {
        self.kmax = self.kmax.or(f.kmax);
        self.sample = self.sample.or(f.sample);
        self.points_per_decade = self.points_per_decade.or(f.points_per_decade);
    }

    pub fn k_max(&self, default: u64) -> Result<u64, Failure> {
        match self.kmax.unwrap_or(default) {
            0 => Err(Failure::Usage("--kmax must be at least 1".into())),
            k => Ok(k),
        }
    }

    pub fn schedule(&self) -> Result<SampleSchedule, Failure> {
        match self.sample.unwrap_or_default() {
            Sample::All => Ok(SampleSchedule::All),
            Sample::Geometric => match self.points_per_decade.unwrap_or(kalman_cascade::schedule::POINTS_PER_DECADE) {
                0 => Err(Failure::Usage("--points-per-decade must be at least 1".into())),
                n => Ok(SampleSchedule::Geometric(n)),
            },
        }
    }
}

#[derive(Args, Debug)]
pub struct PrecisionArgs {
    #[command(flatten)]
    pub cascade: CascadeArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct RateArgs {
    #[command(flatten)]
    pub cascade: CascadeArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// First step of the fit window [default: kmax / 100].
    #[arg(long)]
    pub window_lo: Option<u64>,
    /// Last step of the fit window [default: kmax].
    #[arg(long)]
    pub window_hi: Option<u64>,
    /// Share of the log range averaged for the constant [default: 0.25].
    #[arg(long)]
    pub tail_fraction: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct McArgs {
    #[command(flatten)]
    pub cascade: CascadeArgs,
    /// RNG seed; required.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of independent paths [default: 1000].
    #[arg(long)]
    pub paths: Option<usize>,
    /// Comma-separated steps to report [default: 1,10,100,1000,10000 up to kmax].
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<u64>>,
    /// Last simulated step [default: last checkpoint].
    #[arg(long)]
    pub kmax: Option<u64>,
    /// Prior mean of theta [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub theta_bar: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct RiccatiArgs {
    /// Leading coefficient C [default: 1].
    #[arg(long)]
    pub c: Option<f64>,
    /// Degree N [default: 1].
    #[arg(long)]
    pub n: Option<u32>,
    /// Scaling exponent in [0, 1] [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// linear, affine:C or power:P [default: linear].
    #[arg(long)]
    pub f: Option<FPreset>,
    /// Initial value [default: 1].
    #[arg(long)]
    pub x0: Option<f64>,
    /// Last step [default: 1000000].
    #[arg(long)]
    pub kmax: Option<u64>,
    /// [default: 0.25]
    #[arg(long)]
    pub tail_fraction: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct GaussianArgs {
    /// Number of random updates [default: 100000].
    #[arg(long)]
    pub samples: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest accepted relative error [default: 1e-12].
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Skip the slowest checks.
    #[arg(long)]
    pub quick: bool,
    /// Observation noise variance used by the chain checks [default: 1].
    #[arg(long)]
    pub lambda_e: Option<f64>,
    /// Transmission noise variance of every agent [default: 1].
    #[arg(long)]
    pub lambda_w: Option<f64>,
    /// [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    pub rho0: Option<f64>,
    /// Seed of the Monte Carlo and randomized checks [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutputArgs,
}
