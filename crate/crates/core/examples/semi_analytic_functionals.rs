//! Semi-analytic estimators of a repulsive thinning next to their
//! simulation-based counterparts.
//!
//! cargo run --release --example semi_analytic_functionals -- [n] [seed]

use detthin::estimators::{
    contact_dist, empirical_contact, empirical_intensity, empirical_laplace, empirical_nearest_neighbour,
    empirical_retention, empirical_void, intensity_measure, laplace_functional, nearest_neighbour_dist,
    retention_probability, void_probability, EstimateCurve, MCConfig,
};
use detthin::geometry::{Point, PoissonModel, Window};
use detthin::model::ThinningModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(Ok(2000), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(5), |s| s.parse())?;
    let window = Window::unit_disk();
    let model = ThinningModel::gaussian([0.8, 0.0, 0.0, 0.0], 0.25, PoissonModel::new(10.0, window)?)?;
    let cfg = MCConfig::new(n, seed);
    let o = Point::ORIGIN;
    let b = Window::disk(o, 0.3)?;
    let f = |x: &Point| 0.1 * x.norm();

    let rows = [
        ("retention at o", retention_probability(&model, o, &cfg)?, empirical_retention(&model, o, &cfg)?),
        ("E count in B(o, 0.3)", intensity_measure(&model, &b, &cfg)?, empirical_intensity(&model, &b, &cfg)?),
        ("void of B(o, 0.3)", void_probability(&model, &b, &cfg)?, empirical_void(&model, &b, &cfg)?),
        ("Laplace, f = |x| / 10", laplace_functional(&model, &f, &cfg)?, empirical_laplace(&model, &f, &cfg)?),
    ];
    println!("{:<22} {:>17} {:>17} {:>6}", "", "semi-analytic", "empirical", "z");
    for (name, semi, emp) in rows {
        println!(
            "{name:<22} {:>9.5} ± {:.5} {:>9.5} ± {:.5} {:>6.2}",
            semi.value,
            semi.std_error,
            emp.value,
            emp.std_error,
            semi.z_score(&emp)
        );
    }

    let g = nearest_neighbour_dist(&model, o, &cfg)?;
    let h = contact_dist(&model, o, &cfg)?;
    let j = EstimateCurve::j_function(&g, &h)?;
    let g_emp = empirical_nearest_neighbour(&model, o, &cfg)?;
    let h_emp = empirical_contact(&model, o, &cfg)?;
    println!("G: max z against simulation {:.2}", g.max_z_score(&g_emp)?);
    println!("H: max z against simulation {:.2}", h.max_z_score(&h_emp)?);
    println!("{:>6} {:>8} {:>8} {:>8}", "r", "G", "H", "J");
    // J is only informative while 1 - H is not tiny.
    for i in (0..j.len()).step_by(4).take_while(|&i| h.values[i] < 0.99) {
        println!("{:>6.3} {:>8.4} {:>8.4} {:>8.4}", j.radii[i], g.values[i], h.values[i], j.values[i]);
    }
    Ok(())
}
