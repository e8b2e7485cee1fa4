use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{merge_config, CaseKind, CaseParams, CliError, RunRecorder};
use crate::estimators::underlying_pattern;
use crate::fitting::TrainingPair;
use crate::geometry::Window;
use crate::io;
use crate::model::thin;
use crate::seeds::replicate_rng;

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// Thinning rule; `model` samples a fitted model given by `--model`.
    #[arg(value_enum)]
    pub kind: CaseKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: CaseParams,
    /// Model file, for `generate model`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Margin for the underlying process of `generate model`.
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
    /// Number of training pairs.
    #[arg(long = "T", default_value_t = 100)]
    #[serde(rename = "T")]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON-lines file.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON object overriding any of the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Writes `count` pairs; pair `t` only depends on `(seed, t)`.
pub fn cmd_generate(args: &GenerateArgs) -> Result<Vec<TrainingPair>, CliError> {
    let run = RunRecorder::start("generate");
    let a = merge_config(args, args.config.as_deref())?;
    let sampler: Box<dyn Fn(u64) -> Result<TrainingPair, CliError> + Sync> = match a.kind {
        CaseKind::Model => {
            let path = a.model.as_deref().ok_or_else(|| CliError::Input("generate model needs --model".into()))?;
            let (_, m) = io::read_model(path)?;
            if !(a.margin >= 0.0 && a.margin.is_finite()) {
                return Err(CliError::Input("--margin must be non-negative".into()));
            }
            let margin = a.margin;
            Box::new(move |t| {
                let mut rng = replicate_rng(a.seed, "generate", t);
                let full = underlying_pattern(&m, margin, &mut rng)?;
                let kept = thin(&m, &full, &mut rng)?;
                Ok(TrainingPair::new(full, kept)?)
            })
        }
        kind => {
            let case = a.params.test_case(kind, None, Window::unit_disk())?;
            Box::new(move |t| Ok(case.sample_pair(&mut replicate_rng(a.seed, "generate", t))?))
        }
    };
    let pairs = (0..a.count as u64).into_par_iter().map(|t| sampler(t)).collect::<Result<Vec<_>, _>>()?;
    io::write_training(&a.out, &pairs)?;
    let inputs: Vec<&std::path::Path> = a.model.iter().map(PathBuf::as_path).collect();
    run.finish(&a, Some(a.seed), &inputs, &[&a.out], serde_json::json!({ "pairs": pairs.len() }))?;
    log::info!("wrote {} pairs to {}", pairs.len(), a.out.display());
    Ok(pairs)
}
