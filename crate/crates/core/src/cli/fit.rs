use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{merge_config, CliError, RunRecorder};
use crate::fitting::{self, FitConfig, FitResult};
use crate::geometry::PoissonModel;
use crate::io::{self, ModelFile};
use crate::model::{ThinningModel, FEATURE_DIM};

const PARAMETER_NAMES: [&str; FEATURE_DIM] = ["theta0", "theta1", "theta2", "theta3"];

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Training pairs as JSON lines.
    #[arg(long)]
    pub training: PathBuf,
    /// Comma-separated σ grid; defaults to 0 plus log-spaced values around
    /// the mean nearest-neighbour distance.
    #[arg(long, value_delimiter = ',')]
    pub sigma_grid: Option<Vec<f64>>,
    /// Free parameters among theta0..theta3 and sigma. With sigma fixed the
    /// grid must hold one value (default 0).
    #[arg(long, value_delimiter = ',', default_value = "theta0,theta1,theta2,theta3,sigma")]
    pub mask: Vec<String>,
    /// Starting θ, also the value of fixed components.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init_theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub grad_tol: f64,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl FitArgs {
    fn fit_config(&self) -> Result<FitConfig, CliError> {
        let mut theta_mask = [false; FEATURE_DIM];
        let mut sigma_free = false;
        for name in &self.mask {
            match PARAMETER_NAMES.iter().position(|p| p == name) {
                Some(k) => theta_mask[k] = true,
                None if name == "sigma" => sigma_free = true,
                None => return Err(CliError::Input(format!("unknown parameter {name:?} in --mask"))),
            }
        }
        let sigma_grid = match (&self.sigma_grid, sigma_free) {
            (grid, true) => grid.clone(),
            (None, false) => Some(vec![0.0]),
            (Some(g), false) if g.len() == 1 => Some(g.clone()),
            (Some(_), false) => {
                return Err(CliError::Input("sigma is fixed: give a single --sigma-grid value".into()))
            }
        };
        let init_theta = match &self.init_theta {
            None => [0.0; FEATURE_DIM],
            Some(v) => v
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Input(format!("--init-theta needs {FEATURE_DIM} values")))?,
        };
        let cfg = FitConfig {
            sigma_grid,
            theta_mask,
            init_theta,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            ..FitConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fits, writes the model file with the fit attached, prints a summary.
/// A fit that hits `max_iters` is still written; the caller reports it.
pub fn cmd_fit(args: &FitArgs) -> Result<FitResult, CliError> {
    let run = RunRecorder::start("fit");
    let a = merge_config(args, args.config.as_deref())?;
    let cfg = a.fit_config()?;
    let data = io::read_training(&a.training)?;
    let window = *data.first().ok_or_else(|| CliError::Input(format!("{}: no training pairs", a.training.display())))?.full().window();
    if data.iter().any(|p| *p.full().window() != window) {
        return Err(CliError::Input("training pairs must share one window".into()));
    }
    let lambda = fitting::estimate_intensity(&data)?;
    let result = fitting::fit(&data, &cfg)?;
    let poisson = PoissonModel::new(lambda, window)
        .map_err(|e| CliError::Input(format!("cannot estimate the Poisson intensity: {e}")))?;
    let model = ThinningModel::gaussian(result.theta_star, result.sigma_star, poisson)?;
    let mut file = ModelFile::from_model(&model)?;
    file.fit = Some(result.clone());
    io::write_json(&a.out, &file)?;

    println!("pairs      {}", data.len());
    println!("lambda     {lambda:.6}");
    println!("sigma      {:.6}", result.sigma_star);
    for k in 0..FEATURE_DIM {
        let se = result.std_errors[k].map_or(String::from("fixed"), |s| format!("se {s:.4}"));
        println!("{:<10} {:+.6}  ({se})", PARAMETER_NAMES[k], result.theta_star[k]);
    }
    println!("loglik     {:.6}", result.loglik_star);
    println!("iterations {} (converged: {})", result.iterations, result.converged);

    let details = serde_json::json!({ "fit_config": cfg, "lambda": lambda });
    run.finish(&a, None, &[&a.training], &[&a.out], details)?;
    if !result.converged {
        log::warn!("θ ascent stopped at max_iters = {}", cfg.max_iters);
    }
    Ok(result)
}
