//! Reference thinnings with edge protection: Matérn II against its closed-form
//! intensity, and the triangle rule whose intensity is only known by simulation.
//!
//! cargo run --release --example matern_and_triangle -- [replicates] [seed]

use detthin::estimators::Estimate;
use detthin::geometry::Window;
use detthin::seeds::replicate_rng;
use detthin::testcases::{matern2_intensity, TestCase};
use rayon::prelude::*;

fn intensity(case: &TestCase, runs: u64, seed: u64, tag: &str) -> Result<Estimate, detthin::geometry::GeometryError> {
    let area = case.window().area();
    let counts = (0..runs)
        .into_par_iter()
        .map(|i| Ok(case.sample_thinned(&mut replicate_rng(seed, tag, i))?.len() as f64 / area))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(Estimate::from_samples(&counts))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let runs: u64 = args.get(1).map_or(Ok(1000), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(11), |s| s.parse())?;
    let window = Window::unit_disk();

    let matern = TestCase::matern2(10.0, 0.253, window)?;
    let m = intensity(&matern, runs, seed, "matern")?;
    let exact = matern2_intensity(10.0, 0.253);
    println!("Matérn II  r_m = 0.253: {:.4} ± {:.4}  (closed form {exact:.4})", m.value, m.std_error);

    let triangle = TestCase::triangle(10.0, 0.6325, window)?;
    let t = intensity(&triangle, runs, seed, "triangle")?;
    println!("triangle   r_t = 0.6325: {:.4} ± {:.4}", t.value, t.std_error);

    // The Poisson process is drawn on the window grown by the rule's reach so
    // points near the boundary see all their neighbours.
    println!("margins: Matérn {}, triangle {}", matern.margin(), triangle.margin());
    let mut rng = replicate_rng(seed, "show", 0);
    let pair = matern.sample_pair(&mut rng)?;
    println!("one Matérn pair: {} of {} points retained", pair.retained().len(), pair.full().len());
    Ok(())
}
