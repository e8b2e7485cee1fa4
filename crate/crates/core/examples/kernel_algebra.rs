//! Exact finite-state algebra of a DPP built from five points: the L to K
//! map, inclusion and void probabilities, counts, and both Palm kernels.
//!
//! cargo run --example kernel_algebra

use detthin::geometry::{Point, PointPattern, PoissonModel, Window};
use detthin::kernels::{
    brute_force_enumerate, count_distribution, inclusion_probability, k_to_l, palm_borodin_rains, palm_kernel_schur,
    void_probability_discrete, SubsetIndex,
};
use detthin::model::ThinningModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let window = Window::unit_disk();
    let points = [(0.0, 0.0), (0.15, 0.0), (0.0, 0.4), (-0.5, -0.2), (0.6, 0.5)];
    let pattern = PointPattern::new(points.iter().map(|&(x, y)| Point::new(x, y)).collect(), window)?;
    let model = ThinningModel::gaussian([0.5, 0.0, 0.0, 0.0], 0.3, PoissonModel::new(10.0, window)?)?;

    let l = model.build_l(&pattern)?;
    let k = model.build_k(&pattern)?;
    let back = k_to_l(&k)?;
    let drift = (l.entries() - back.entries()).abs().max();
    println!("K diagonal (retention probabilities): {:.4?}", k.diagonal_entries());
    println!("max |L - k_to_l(l_to_k(L))| = {drift:.2e}");

    // Closed forms against brute-force sums over all 32 subsets.
    let law = brute_force_enumerate(&l)?;
    for s in [vec![0], vec![0, 1], vec![2, 3, 4]] {
        let s = SubsetIndex::new(s)?;
        println!(
            "{:?}: P(contains) det {:.6} / sum {:.6}   P(misses) det {:.6} / sum {:.6}",
            s.indices(),
            inclusion_probability(&k, &s)?,
            law.inclusion(&s),
            void_probability_discrete(&k, &s)?,
            law.void(&s)
        );
    }
    let counts = count_distribution(&k)?;
    println!("P(|Ψ| = n), n = 0..5: {counts:.4?}");

    // The close pair (0, 1) repels: conditioning on 0 lowers the retention of 1.
    let cond = SubsetIndex::singleton(0);
    let schur = palm_kernel_schur(&k, &cond)?;
    let (_, br) = palm_borodin_rains(&l, &cond)?;
    let gap = (schur.entries() - br.entries()).abs().max();
    println!("Palm retention of point 1: {:.4} (was {:.4})", schur.get(0, 0), k.get(1, 1));
    println!("max |Schur - Borodin-Rains| = {gap:.2e}");
    Ok(())
}
