use std::path::PathBuf;

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{merge_config, parse_point, parse_window, CliError, RunRecorder};
use crate::estimators::{
    self, underlying_pattern, uniform_grid, Estimate, EstimateCurve, EstimatorError, MCConfig,
    DEFAULT_GRID_POINTS,
};
use crate::geometry::{Point, PointPattern, Window};
use crate::io;
use crate::model::{thin, ThinningModel};
use crate::seeds::replicate_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Quantity {
    /// Nearest-neighbour distance distribution of a point at `--at`.
    #[value(name = "G")]
    #[serde(rename = "G")]
    G,
    /// Contact distribution at `--center`.
    #[value(name = "H")]
    #[serde(rename = "H")]
    H,
    /// `(1 - G) / (1 - H)` at `--center`.
    #[value(name = "J")]
    #[serde(rename = "J")]
    J,
    /// Probability of no thinned point in the region.
    #[serde(rename = "void")]
    Void,
    /// `E exp(-Σ f(x))` over thinned points.
    #[serde(rename = "laplace")]
    Laplace,
    /// Expected number of thinned points in the region.
    #[serde(rename = "intensity")]
    Intensity,
    /// Probability that a point at `--at` is retained.
    #[serde(rename = "retention")]
    Retention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    /// Determinant formulas averaged over the Poisson process only.
    SemiAnalytic,
    /// Frequencies over simulated thinned patterns.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub quantity: Quantity,
    /// Centre of H, J and of disk regions; defaults to the window centre.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    /// Location for G and retention; defaults to the centre.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub at: Option<Vec<f64>>,
    /// Disk radius for void and intensity.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Region for void and intensity as a window spec; overrides `--radius`.
    #[arg(long)]
    pub region: Option<String>,
    /// Laplace test function: `zero`, `norm` or `const:C`.
    #[arg(long, default_value = "norm")]
    pub f: String,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    /// Largest radius of curves; defaults to the distance to the boundary.
    #[arg(long)]
    pub r_max: Option<f64>,
    /// The Poisson process is simulated on the window grown by this margin.
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
    /// Project curves onto non-decreasing functions.
    #[arg(long)]
    pub isotonic: bool,
    #[arg(long, value_enum, default_value = "semi-analytic")]
    pub method: EstimateMethod,
    /// G averaged over a uniform location in the window instead of `--at`.
    #[arg(long)]
    pub mean_measure: bool,
    /// Curve CSV or scalar JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Scalar result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarOutput {
    pub quantity: Quantity,
    pub method: EstimateMethod,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimateOutput {
    Curve(EstimateCurve),
    Scalar(ScalarOutput),
}

/// `zero`, `norm`, `const:C` with `C ≥ 0`.
fn parse_test_function(spec: &str) -> Result<Box<dyn Fn(&Point) -> f64 + Sync>, CliError> {
    match spec.split_once(':') {
        None if spec == "zero" => Ok(Box::new(|_| 0.0)),
        None if spec == "norm" => Ok(Box::new(Point::norm)),
        Some(("const", c)) => match c.parse::<f64>() {
            Ok(c) if c >= 0.0 && c.is_finite() => Ok(Box::new(move |_| c)),
            _ => Err(CliError::Input(format!("invalid constant in --f {spec:?}"))),
        },
        _ => Err(CliError::Input(format!("unknown test function {spec:?}; use zero, norm or const:C"))),
    }
}

struct Resolved {
    model: ThinningModel,
    cfg: MCConfig,
    center: Point,
    at: Point,
}

impl EstimateArgs {
    fn region(&self, center: Point) -> Result<Window, CliError> {
        match (&self.region, self.radius) {
            (Some(spec), _) => parse_window(spec),
            (None, Some(r)) => Ok(Window::disk(center, r)?),
            (None, None) => Err(CliError::Input("give --region or --radius".into())),
        }
    }

    fn curve_grid(&self, window: &Window, x: &Point) -> Result<Vec<f64>, CliError> {
        let r_max = self.r_max.unwrap_or_else(|| window.distance_to_boundary(x));
        if !(r_max > 0.0 && r_max.is_finite()) || self.grid_points < 2 {
            return Err(CliError::Input("curves need r_max > 0 and at least 2 grid points".into()));
        }
        Ok(uniform_grid(r_max, self.grid_points))
    }
}

/// Thinned samples for pooled empirical summaries.
fn thinned_samples(m: &ThinningModel, cfg: &MCConfig) -> Result<Vec<PointPattern>, EstimatorError> {
    (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(cfg.seed, "empirical-pooled", i);
            let phi = underlying_pattern(m, cfg.margin, &mut rng)?;
            let kept = thin(m, &phi, &mut rng)?;
            Ok(phi.subset(&kept)?)
        })
        .collect()
}

fn g_curve(a: &EstimateArgs, r: &Resolved) -> Result<EstimateCurve, CliError> {
    let window = r.model.poisson.window;
    let (m, method) = (&r.model, a.method);
    if a.mean_measure {
        let cfg = r.cfg.clone().with_grid(a.curve_grid(&window, &window.center())?);
        return Ok(match method {
            EstimateMethod::SemiAnalytic => estimators::mean_nearest_neighbour_dist(m, &cfg)?,
            EstimateMethod::Empirical => estimators::empirical_summaries(&thinned_samples(m, &cfg)?, &cfg.grid)?.0,
        });
    }
    let cfg = r.cfg.clone().with_grid(a.curve_grid(&window, &r.at)?);
    Ok(match method {
        EstimateMethod::SemiAnalytic => estimators::nearest_neighbour_dist(m, r.at, &cfg)?,
        EstimateMethod::Empirical => estimators::empirical_nearest_neighbour(m, r.at, &cfg)?,
    })
}

fn h_curve(a: &EstimateArgs, r: &Resolved) -> Result<EstimateCurve, CliError> {
    let cfg = r.cfg.clone().with_grid(a.curve_grid(&r.model.poisson.window, &r.center)?);
    Ok(match a.method {
        EstimateMethod::SemiAnalytic => estimators::contact_dist(&r.model, r.center, &cfg)?,
        EstimateMethod::Empirical => estimators::empirical_contact(&r.model, r.center, &cfg)?,
    })
}

fn scalar(a: &EstimateArgs, r: &Resolved) -> Result<Estimate, CliError> {
    let (m, cfg) = (&r.model, &r.cfg);
    let semi = a.method == EstimateMethod::SemiAnalytic;
    Ok(match a.quantity {
        Quantity::Void => {
            let b = a.region(r.center)?;
            if semi { estimators::void_probability(m, &b, cfg)? } else { estimators::empirical_void(m, &b, cfg)? }
        }
        Quantity::Intensity => {
            let b = a.region(r.center)?;
            if semi {
                estimators::intensity_measure(m, &b, cfg)?
            } else {
                estimators::empirical_intensity(m, &b, cfg)?
            }
        }
        Quantity::Laplace => {
            let f = parse_test_function(&a.f)?;
            if semi {
                estimators::laplace_functional(m, f.as_ref(), cfg)?
            } else {
                estimators::empirical_laplace(m, f.as_ref(), cfg)?
            }
        }
        Quantity::Retention => {
            if semi {
                estimators::retention_probability(m, r.at, cfg)?
            } else {
                estimators::empirical_retention(m, r.at, cfg)?
            }
        }
        Quantity::G | Quantity::H | Quantity::J => unreachable!("curves are handled separately"),
    })
}

/// Runs one estimator and writes its output.
pub fn cmd_estimate(args: &EstimateArgs) -> Result<EstimateOutput, CliError> {
    let run = RunRecorder::start("estimate");
    let a = merge_config(args, args.config.as_deref())?;
    let (_, model) = io::read_model(&a.model)?;
    let window = model.poisson.window;
    let center = match &a.center {
        Some(c) => parse_point(c, "center")?,
        None => window.center(),
    };
    let at = match &a.at {
        Some(c) => parse_point(c, "at")?,
        None => center,
    };
    let cfg = MCConfig::new(a.n, a.seed).with_margin(a.margin);
    cfg.validate()?;
    let r = Resolved { model, cfg, center, at };

    let iso = |c: EstimateCurve| if a.isotonic { c.isotonized() } else { c };
    let output = match a.quantity {
        Quantity::G => EstimateOutput::Curve(iso(g_curve(&a, &r)?)),
        Quantity::H => EstimateOutput::Curve(iso(h_curve(&a, &r)?)),
        Quantity::J => {
            let r = Resolved { at: r.center, ..r };
            let g = iso(g_curve(&EstimateArgs { mean_measure: false, ..a.clone() }, &r)?);
            let h = iso(h_curve(&a, &r)?);
            EstimateOutput::Curve(EstimateCurve::j_function(&g, &h)?)
        }
        _ => {
            let e = scalar(&a, &r)?;
            EstimateOutput::Scalar(ScalarOutput {
                quantity: a.quantity,
                method: a.method,
                value: e.value,
                std_error: e.std_error,
                n_samples: e.n_samples,
            })
        }
    };
    let grid = match &output {
        EstimateOutput::Curve(c) => {
            io::write_curve(&a.out, c)?;
            Some(c.radii.clone())
        }
        EstimateOutput::Scalar(s) => {
            io::write_json(&a.out, s)?;
            None
        }
    };
    let details = serde_json::json!({
        "center": [center.x, center.y],
        "at": [at.x, at.y],
        "margin": a.margin,
        "grid": grid,
    });
    run.finish(&a, Some(a.seed), &[&a.model], &[&a.out], details)?;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_functions() {
        let x = Point::new(3.0, 4.0);
        assert_eq!(parse_test_function("zero").unwrap()(&x), 0.0);
        assert_eq!(parse_test_function("norm").unwrap()(&x), 5.0);
        assert_eq!(parse_test_function("const:0.25").unwrap()(&x), 0.25);
        for bad in ["const:-1", "const:x", "square"] {
            assert!(parse_test_function(bad).is_err());
        }
    }
}
