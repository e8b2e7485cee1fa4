//! Spectral sampling: empirical subset frequencies of 100 000 draws against
//! the exact L-ensemble law on four points.
//!
//! cargo run --release --example spectral_sampling -- [draws] [seed]

use detthin::kernels::{brute_force_enumerate, l_to_k, sample_dpp, SymmetricKernel};
use detthin::seeds::component_rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let draws: usize = args.get(1).map_or(Ok(100_000), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(3), |s| s.parse())?;

    #[rustfmt::skip]
    let l = SymmetricKernel::from_row_slice(4, &[
        1.2, 0.6, 0.1, 0.0,
        0.6, 0.9, 0.3, 0.2,
        0.1, 0.3, 2.0, 0.7,
        0.0, 0.2, 0.7, 0.5,
    ])?;
    let k = l_to_k(&l)?;
    let law = brute_force_enumerate(&l)?;

    let mut rng = component_rng(seed, "sampler");
    let mut hits = vec![0usize; 16];
    for _ in 0..draws {
        hits[sample_dpp(&k, &mut rng)?.to_mask() as usize] += 1;
    }
    println!("{:<14} {:>9} {:>9} {:>7}", "subset", "exact", "freq", "z");
    let mut worst = 0.0_f64;
    for (s, p) in law.iter() {
        let freq = hits[s.to_mask() as usize] as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let z = if se > 0.0 { (freq - p) / se } else { 0.0 };
        worst = worst.max(z.abs());
        println!("{:<14} {:>9.5} {:>9.5} {:>7.2}", format!("{:?}", s.indices()), p, freq, z);
    }
    println!("largest |z| over 16 subsets: {worst:.2}");
    Ok(())
}
