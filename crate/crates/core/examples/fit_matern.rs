//! Fit a quality/diversity thinning model to Matérn II training pairs and
//! compare its contact distribution with fresh Matérn samples.
//!
//! cargo run --release --example fit_matern -- [T] [seed]

use detthin::estimators::{contact_curve, contact_dist, MCConfig};
use detthin::fitting::{fit, estimate_intensity, FitConfig};
use detthin::geometry::{Point, PoissonModel, Window};
use detthin::model::ThinningModel;
use detthin::seeds::component_rng;
use detthin::testcases::TestCase;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let t: usize = args.get(1).map_or(Ok(100), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(7), |s| s.parse())?;
    let window = Window::unit_disk();
    let case = TestCase::matern2(10.0, 0.2530, window)?;

    let mut rng = component_rng(seed, "training");
    let data = (0..t).map(|_| case.sample_pair(&mut rng)).collect::<Result<Vec<_>, _>>()?;
    let cfg = FitConfig { theta_mask: [true, false, false, false], ..FitConfig::default() };
    let result = fit(&data, &cfg)?;
    for run in &result.per_sigma {
        println!("sigma {:>8.5}  theta0 {:>9.5}  loglik {:?}", run.sigma, run.theta[0], run.loglik);
    }
    println!(
        "best: theta0 = {:.4}, sigma = {:.4}, loglik = {:.4}, converged = {}",
        result.theta_star[0], result.sigma_star, result.loglik_star, result.converged
    );

    let poisson = PoissonModel::new(estimate_intensity(&data)?, window)?;
    let model = ThinningModel::gaussian(result.theta_star, result.sigma_star, poisson)?;
    let mc = MCConfig::new(2000, seed);
    let h_model = contact_dist(&model, Point::ORIGIN, &mc)?;
    let mut rng = component_rng(seed, "validation");
    let samples = (0..2000).map(|_| case.sample_thinned(&mut rng)).collect::<Result<Vec<_>, _>>()?;
    let h_data = contact_curve(&samples, &Point::ORIGIN, &h_model.radii);
    println!("contact distribution sup-distance: {:.4}", h_model.sup_distance(&h_data)?);
    Ok(())
}
