use rand::Rng;

use super::{all_neighbour_features, PointPattern};
use crate::kernels::SubsetIndex;

/// Matérn II rule: every point gets a uniform mark and survives iff no other
/// point within distance `r_m` (inclusive) carries a strictly smaller mark.
pub fn matern2_retained<R: Rng + ?Sized>(p: &PointPattern, r_m: f64, rng: &mut R) -> SubsetIndex {
    let marks: Vec<f64> = (0..p.len()).map(|_| rng.random::<f64>()).collect();
    let r2 = r_m * r_m;
    let pts = p.points();
    (0..pts.len())
        .filter(|&i| {
            !(0..pts.len()).any(|j| j != i && marks[j] < marks[i] && pts[i].distance_squared(&pts[j]) <= r2)
        })
        .collect()
}

pub fn matern2_thin<R: Rng + ?Sized>(p: &PointPattern, r_m: f64, rng: &mut R) -> PointPattern {
    p.subset(&matern2_retained(p, r_m, rng)).expect("indices from the pattern")
}

/// Triangle rule, evaluated in one simultaneous pass on the input pattern:
/// keep `x` iff `d1 + d2 + d3 <= r_t`.
pub fn triangle_retained(p: &PointPattern, r_t: f64) -> SubsetIndex {
    all_neighbour_features(p)
        .iter()
        .enumerate()
        .filter(|(_, f)| f.perimeter() <= r_t)
        .map(|(i, _)| i)
        .collect()
}

pub fn triangle_thin(p: &PointPattern, r_t: f64) -> PointPattern {
    p.subset(&triangle_retained(p, r_t)).expect("indices from the pattern")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{neighbour_features, sample_poisson, Point, PoissonModel, Window};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pattern(points: &[(f64, f64)], radius: f64) -> PointPattern {
        PointPattern::new(
            points.iter().map(|&(x, y)| Point::new(x, y)).collect(),
            Window::disk(Point::ORIGIN, radius).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn matern_single_point_survives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = pattern(&[(0.2, 0.1)], 1.0);
        for _ in 0..10 {
            assert_eq!(matern2_thin(&p, 0.5, &mut rng).len(), 1);
        }
    }

    #[test]
    fn matern_close_pair_keeps_exactly_one() {
        let p = pattern(&[(0.0, 0.0), (0.1, 0.0)], 1.0);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let marks: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kept = matern2_retained(&p, 0.2, &mut rng);
            let expected = if marks[0] < marks[1] { 0 } else { 1 };
            assert_eq!(kept.indices(), &[expected]);
        }
    }

    #[test]
    fn matern_output_is_hard_core() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = PoissonModel::new(30.0, Window::unit_disk()).unwrap();
        for _ in 0..200 {
            let thinned = matern2_thin(&sample_poisson(&model, &mut rng), 0.2, &mut rng);
            let pts = thinned.points();
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    assert!(pts[i].distance(&pts[j]) > 0.2);
                }
            }
        }
    }

    #[test]
    fn triangle_equilateral_triple() {
        let s = 0.3;
        let h = s * 3f64.sqrt() / 2.0;
        let p = pattern(&[(0.0, 0.0), (s, 0.0), (0.5 * s, h)], 5.0);
        assert_eq!(triangle_thin(&p, 3.0 * s + 1e-9).len(), 3);
        assert_eq!(triangle_thin(&p, 3.0 * s - 1e-9).len(), 0);
    }

    #[test]
    fn triangle_sparse_pattern_removed() {
        let p = pattern(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0), (-2.0, -2.0)], 5.0);
        assert!(triangle_thin(&p, 1.0).is_empty());
    }

    #[test]
    fn triangle_rule_uses_original_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = PoissonModel::new(10.0, Window::unit_disk()).unwrap();
        for _ in 0..50 {
            let p = sample_poisson(&model, &mut rng);
            let kept = triangle_retained(&p, 0.6325);
            assert_eq!(kept, triangle_retained(&p, 0.6325));
            for i in 0..p.len() {
                let f = neighbour_features(&p, i).unwrap();
                assert_eq!(kept.contains(i), f.perimeter() <= 0.6325);
            }
        }
    }
}
