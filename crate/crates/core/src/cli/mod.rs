//! `detthin generate | fit | estimate | validate`.
//!
//! Every command takes `--config <json>`; keys of that object override the
//! corresponding flags. `DETTHIN_THREADS` caps the worker threads. Next to its
//! primary output each command writes `<out>.manifest.json` with the resolved
//! configuration, input/output hashes and timing.
//!
//! Exit codes: 0 success, 2 input error, 3 fit did not converge, 4 numeric failure.

mod estimate;
mod fit;
mod generate;
mod validate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::EstimatorError;
use crate::fitting::FitError;
use crate::geometry::{Point, Window};
use crate::io::{self, IoError};
use crate::kernels::KernelError;
use crate::model::ModelError;

pub use estimate::{cmd_estimate, EstimateArgs, EstimateMethod, EstimateOutput, Quantity, ScalarOutput};
pub use fit::{cmd_fit, FitArgs};
pub use generate::{cmd_generate, GenerateArgs};
pub use validate::{cmd_validate, CurveComparison, ValidateArgs, ValidationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "DETTHIN_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Kernel(KernelError::Numeric { .. } | KernelError::NotPsd { .. } | KernelError::NotMarginal { .. })
            | ModelError::QualityOverflow { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Model(m) => m.into(),
            EstimatorError::InvalidArgument(_) => CliError::Input(e.to_string()),
            EstimatorError::UnstableConditioning { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Model(m) => m.into(),
            FitError::OptimizationFailure { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<crate::geometry::GeometryError> for CliError {
    fn from(e: crate::geometry::GeometryError) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "detthin", version, about = "Determinantally-thinned Poisson point processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate training pairs (realization, retained indices) as JSON lines.
    Generate(GenerateArgs),
    /// Fit θ and σ by maximum likelihood; writes a model file.
    Fit(FitArgs),
    /// Estimate a functional of a model: curve CSV or scalar JSON.
    Estimate(EstimateArgs),
    /// Compare a model with fresh samples of a reference thinning.
    Validate(ValidateArgs),
}

/// Reference thinning rules, plus `model` for samples of a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Matern2,
    Triangle,
    Poisson,
    Model,
}

/// Parameters of a reference thinning.
#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct CaseParams {
    /// Intensity of the underlying Poisson process.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Matérn II inhibition radius.
    #[arg(long)]
    pub rm: Option<f64>,
    /// Triangle rule threshold on d1 + d2 + d3.
    #[arg(long)]
    pub rt: Option<f64>,
    /// Retention probability of the independent (poisson) thinning.
    #[arg(long, default_value_t = 1.0)]
    pub retain: f64,
    /// Observation window: `disk:R`, `disk:X,Y,R` or `rect:X0,X1,Y0,Y1`.
    #[arg(long)]
    pub window: Option<String>,
}

impl CaseParams {
    pub(crate) fn test_case(
        &self,
        kind: CaseKind,
        default_lambda: Option<f64>,
        default_window: Window,
    ) -> Result<crate::testcases::TestCase, CliError> {
        use crate::testcases::TestCase;
        let window = match &self.window {
            Some(spec) => parse_window(spec)?,
            None => default_window,
        };
        let lambda = self
            .lambda
            .or(default_lambda)
            .ok_or_else(|| CliError::Input("--lambda is required".into()))?;
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::Input(format!("--{flag} is required")));
        Ok(match kind {
            CaseKind::Matern2 => TestCase::matern2(lambda, need(self.rm, "rm")?, window)?,
            CaseKind::Triangle => TestCase::triangle(lambda, need(self.rt, "rt")?, window)?,
            CaseKind::Poisson => TestCase::independent(lambda, self.retain, window)?,
            CaseKind::Model => return Err(CliError::Input("the model case has no rule parameters".into())),
        })
    }
}

/// `disk:R`, `disk:X,Y,R`, `rect:X0,X1,Y0,Y1`.
pub fn parse_window(spec: &str) -> Result<Window, CliError> {
    let bad = || CliError::Input(format!("invalid window {spec:?}; use disk:R, disk:X,Y,R or rect:X0,X1,Y0,Y1"));
    let (shape, rest) = spec.split_once(':').ok_or_else(bad)?;
    let nums: Vec<f64> = rest.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let window = match (shape, nums.as_slice()) {
        ("disk", [r]) => Window::disk(Point::ORIGIN, *r),
        ("disk", [x, y, r]) => Window::disk(Point::new(*x, *y), *r),
        ("rect" | "rectangle", [x0, x1, y0, y1]) => Window::rectangle([*x0, *x1], [*y0, *y1]),
        _ => return Err(bad()),
    };
    Ok(window?)
}

pub(crate) fn parse_point(v: &[f64], flag: &str) -> Result<Point, CliError> {
    match v {
        [x, y] => Ok(Point::new(*x, *y)),
        _ => Err(CliError::Input(format!("--{flag} takes two comma-separated coordinates"))),
    }
}

/// Applies the keys of a JSON config object on top of parsed flags.
pub(crate) fn merge_config<T>(args: &T, config: Option<&Path>) -> Result<T, CliError>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let mut value = serde_json::to_value(args).expect("arguments serialize");
    if let Some(path) = config {
        let overrides: serde_json::Value = io::read_json(path)?;
        let serde_json::Value::Object(overrides) = overrides else {
            return Err(CliError::Input(format!("{}: config must be a JSON object", path.display())));
        };
        let target = value.as_object_mut().expect("arguments are a struct");
        for (key, v) in overrides {
            if !target.contains_key(&key) {
                return Err(CliError::Input(format!("{}: unknown config key {key:?}", path.display())));
            }
            target.insert(key, v);
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Input(format!("invalid configuration: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written next to a command's primary output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    #[serde(default)]
    pub details: serde_json::Value,
    pub started_unix_seconds: f64,
    pub duration_seconds: f64,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

pub(crate) struct RunRecorder {
    command: &'static str,
    started: Instant,
    started_unix: f64,
}

impl RunRecorder {
    pub(crate) fn start(command: &'static str) -> Self {
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
        Self { command, started: Instant::now(), started_unix }
    }

    pub(crate) fn finish<C: Serialize>(
        self,
        config: &C,
        seed: Option<u64>,
        inputs: &[&Path],
        outputs: &[&Path],
        details: serde_json::Value,
    ) -> Result<(), CliError> {
        let hash = |p: &&Path| -> Result<FileHash, CliError> {
            Ok(FileHash { path: p.to_path_buf(), sha256: io::sha256_file(p)? })
        };
        let manifest = RunManifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            seed,
            inputs: inputs.iter().map(hash).collect::<Result<_, _>>()?,
            outputs: outputs.iter().map(hash).collect::<Result<_, _>>()?,
            details,
            started_unix_seconds: self.started_unix,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let primary = outputs.first().expect("a primary output");
        io::write_json(&manifest_path(primary), &manifest)?;
        Ok(())
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a).map(|_| EXIT_OK),
        Command::Fit(a) => cmd_fit(a).map(|r| if r.converged { EXIT_OK } else { EXIT_NOT_CONVERGED }),
        Command::Estimate(a) => cmd_estimate(a).map(|_| EXIT_OK),
        Command::Validate(a) => cmd_validate(a).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_specs() {
        assert_eq!(parse_window("disk:1").unwrap(), Window::unit_disk());
        assert_eq!(parse_window("disk:1,2,0.5").unwrap(), Window::disk(Point::new(1.0, 2.0), 0.5).unwrap());
        assert_eq!(parse_window("rect:0,1,0,2").unwrap(), Window::rectangle([0.0, 1.0], [0.0, 2.0]).unwrap());
        for bad in ["disk", "disk:-1", "square:1", "rect:0,1"] {
            assert!(parse_window(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(manifest_path(Path::new("out/model.json")), PathBuf::from("out/model.manifest.json"));
        assert_eq!(manifest_path(Path::new("train.jsonl")), PathBuf::from("train.manifest.json"));
    }
}
