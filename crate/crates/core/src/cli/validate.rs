use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{merge_config, CaseKind, CaseParams, CliError, RunRecorder};
use crate::estimators::{
    self, underlying_pattern, uniform_grid, EstimateCurve, MCConfig, DEFAULT_GRID_POINTS,
};
use crate::geometry::{nearest_neighbour_distance, Point, PointPattern};
use crate::io;
use crate::model::{thin, ThinningModel};
use crate::seeds::replicate_rng;
use crate::testcases::TestCase;

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    /// Fitted model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Reference process; `model` compares the model with its own samples.
    #[arg(long, value_enum, default_value = "matern2")]
    pub case: CaseKind,
    /// Rule parameters; intensity and window default to the model's.
    #[command(flatten)]
    #[serde(flatten)]
    pub params: CaseParams,
    /// Reference samples, also the replicate count of the model estimators.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest admissible sup distance between checked curves.
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    /// Margin for the underlying process of the model estimators.
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// One model curve against its reference counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveComparison {
    pub name: String,
    pub description: String,
    pub radii: Vec<f64>,
    pub model: Vec<f64>,
    pub model_se: Vec<f64>,
    pub reference: Vec<f64>,
    pub reference_se: Vec<f64>,
    pub sup_distance: f64,
    pub max_z_score: f64,
    /// `None` for informational comparisons.
    pub pass: Option<bool>,
}

impl CurveComparison {
    fn new(name: &str, description: &str, model: &EstimateCurve, reference: &EstimateCurve, threshold: Option<f64>) -> Self {
        let len = model.len().min(reference.len());
        let (m, r) = (prefix(model, len), prefix(reference, len));
        let sup = m.sup_distance(&r).expect("shared grid");
        Self {
            name: name.into(),
            description: description.into(),
            radii: m.radii.clone(),
            model: m.values.clone(),
            model_se: m.std_errors.clone(),
            reference: r.values.clone(),
            reference_se: r.std_errors.clone(),
            sup_distance: sup,
            max_z_score: m.max_z_score(&r).expect("shared grid"),
            pass: threshold.map(|t| sup <= t),
        }
    }
}

fn prefix(c: &EstimateCurve, len: usize) -> EstimateCurve {
    EstimateCurve {
        radii: c.radii[..len].to_vec(),
        values: c.values[..len].to_vec(),
        std_errors: c.std_errors[..len].to_vec(),
        n_samples: c.n_samples,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub case: CaseKind,
    pub reference: Option<TestCase>,
    pub center: [f64; 2],
    pub n: usize,
    pub seed: u64,
    pub threshold: f64,
    pub calibration_note: String,
    pub comparisons: Vec<CurveComparison>,
    /// All checked comparisons passed.
    pub pass: bool,
}

enum Reference<'a> {
    Case(TestCase),
    Model(&'a ThinningModel),
}

impl Reference<'_> {
    fn thinned(&self, seed: u64, i: u64) -> Result<PointPattern, CliError> {
        let mut rng = replicate_rng(seed, "validate-reference", i);
        match self {
            Reference::Case(c) => Ok(c.sample_thinned(&mut rng)?),
            Reference::Model(m) => {
                let phi = underlying_pattern(m, 0.0, &mut rng)?;
                let kept = thin(m, &phi, &mut rng)?;
                Ok(phi.subset(&kept)?)
            }
        }
    }

    /// `None` when the planted point is removed.
    fn planted(&self, u: Point, seed: u64, i: u64) -> Result<Option<Option<f64>>, CliError> {
        let mut rng = replicate_rng(seed, "validate-reference-planted", i);
        match self {
            Reference::Case(c) => Ok(c.sample_planted_nn(u, &mut rng)?),
            Reference::Model(m) => {
                let phi = underlying_pattern(m, 0.0, &mut rng)?.with_appended(&[u])?;
                let planted = phi.len() - 1;
                let kept = thin(m, &phi, &mut rng)?;
                if !kept.contains(planted) {
                    return Ok(None);
                }
                let psi = phi.subset(&kept)?;
                let i = psi.index_of(&u).expect("planted point retained");
                Ok(Some(nearest_neighbour_distance(&psi, i)))
            }
        }
    }
}

/// Compares the model's contact distribution and nearest-neighbour
/// distribution at the window centre with fresh reference samples.
pub fn cmd_validate(args: &ValidateArgs) -> Result<ValidationReport, CliError> {
    let run = RunRecorder::start("validate");
    let a = merge_config(args, args.config.as_deref())?;
    let (_, model) = io::read_model(&a.model)?;
    if a.n == 0 || a.grid_points < 2 || !(a.threshold > 0.0) {
        return Err(CliError::Input("need n ≥ 1, grid_points ≥ 2 and a positive threshold".into()));
    }
    let window = model.poisson.window;
    let reference = match a.case {
        CaseKind::Model => Reference::Model(&model),
        kind => Reference::Case(a.params.test_case(kind, Some(model.poisson.intensity), window)?),
    };
    if let Reference::Case(c) = &reference {
        if c.window() != window {
            return Err(CliError::Input("reference and model windows differ".into()));
        }
    }
    let o = window.center();
    let grid = uniform_grid(window.distance_to_boundary(&o), a.grid_points);
    let cfg = MCConfig::new(a.n, a.seed).with_grid(grid.clone()).with_margin(a.margin);
    cfg.validate()?;

    let samples = (0..a.n as u64)
        .into_par_iter()
        .map(|i| reference.thinned(a.seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    let (pooled_g, ref_h, _) = estimators::empirical_summaries(&samples, &grid)?;
    let planted = (0..a.n as u64)
        .into_par_iter()
        .map(|i| reference.planted(o, a.seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    let retained: Vec<Option<f64>> = planted.into_iter().flatten().collect();
    if retained.is_empty() {
        return Err(CliError::Numeric("the planted reference point was never retained".into()));
    }
    let ref_g = estimators::nearest_neighbour_curve(&retained, &grid);
    let ref_j = EstimateCurve::j_function(&ref_g, &ref_h)?;

    let model_h = estimators::contact_dist(&model, o, &cfg)?;
    let model_g = estimators::nearest_neighbour_dist(&model, o, &cfg)?;
    let model_j = EstimateCurve::j_function(&model_g, &model_h)?;
    let model_pooled = estimators::mean_nearest_neighbour_dist(&model, &cfg)?;

    let t = Some(a.threshold);
    let comparisons = vec![
        CurveComparison::new("H", "contact distribution at the window centre", &model_h, &ref_h, t),
        CurveComparison::new("G", "nearest-neighbour distribution of a point at the window centre", &model_g, &ref_g, t),
        CurveComparison::new("J", "(1 - G) / (1 - H) at the window centre", &model_j, &ref_j, None),
        CurveComparison::new(
            "G_pooled",
            "nearest-neighbour distribution pooled over all points in the window",
            &model_pooled,
            &pooled_g,
            None,
        ),
    ];
    let pass = comparisons.iter().all(|c| c.pass != Some(false));
    let noise = 0.5 / (retained.len() as f64).sqrt();
    let report = ValidationReport {
        case: a.case,
        reference: match reference {
            Reference::Case(c) => Some(c),
            Reference::Model(_) => None,
        },
        center: [o.x, o.y],
        n: a.n,
        seed: a.seed,
        threshold: a.threshold,
        calibration_note: format!(
            "The threshold is a calibration default, not a statistical test. The largest binomial standard \
             error of a reference CDF value here is about {noise:.4}; the planted point was retained in {} of {} \
             trials. max_z_score compares pointwise differences with their combined standard errors.",
            retained.len(),
            a.n
        ),
        comparisons,
        pass,
    };
    io::write_json(&a.out, &report)?;
    for c in &report.comparisons {
        let verdict = match c.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "info",
        };
        println!("{:<9} sup {:.4}  max z {:>7.2}  {verdict}", c.name, c.sup_distance, c.max_z_score);
    }
    run.finish(&a, Some(a.seed), &[&a.model], &[&a.out], serde_json::json!({ "grid": grid }))?;
    Ok(report)
}
