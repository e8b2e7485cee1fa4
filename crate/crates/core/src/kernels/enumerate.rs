use super::{normalizer, KernelError, SubsetIndex, SymmetricKernel};

/// Enumeration is exponential in the order; this caps it at 4096 subsets.
pub const MAX_ENUMERATION_ORDER: usize = 12;

/// Exact law of an L-ensemble, indexed by subset bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetDistribution {
    order: usize,
    probs: Vec<f64>,
}

/// Every subset probability `det(L_s) / det(I + L)` of a small ground set.
pub fn brute_force_enumerate(l: &SymmetricKernel) -> Result<SubsetDistribution, KernelError> {
    let order = l.order();
    if order > MAX_ENUMERATION_ORDER {
        return Err(KernelError::TooLarge { order, max: MAX_ENUMERATION_ORDER });
    }
    let z = normalizer(l);
    let probs = (0..1u64 << order)
        .map(|mask| {
            let s = SubsetIndex::from_mask(mask, order);
            l.restrict(&s).map(|sub| sub.determinant() / z)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SubsetDistribution { order, probs })
}

impl SubsetDistribution {
    /// Builds a distribution from bitmask-indexed probabilities.
    pub fn from_probabilities(order: usize, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), 1 << order);
        Self { order, probs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn probability(&self, s: &SubsetIndex) -> f64 {
        self.probs[s.to_mask() as usize]
    }

    pub fn probability_of_mask(&self, mask: u64) -> f64 {
        self.probs[mask as usize]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubsetIndex, f64)> + '_ {
        let order = self.order;
        self.probs
            .iter()
            .enumerate()
            .map(move |(mask, &p)| (SubsetIndex::from_mask(mask as u64, order), p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `P(Ψ ⊇ s)` by summing over supersets.
    pub fn inclusion(&self, s: &SubsetIndex) -> f64 {
        let m = s.to_mask() as usize;
        self.probs
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask & m == m)
            .map(|(_, p)| p)
            .sum()
    }

    /// `P(Ψ ∩ s = ∅)` by summing over disjoint subsets.
    pub fn void(&self, s: &SubsetIndex) -> f64 {
        let m = s.to_mask() as usize;
        self.probs
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask & m == 0)
            .map(|(_, p)| p)
            .sum()
    }

    /// `E[g(Ψ)]` for a function of the subset bitmask.
    pub fn expectation<F: Fn(u64) -> f64>(&self, g: F) -> f64 {
        self.probs.iter().enumerate().map(|(mask, p)| p * g(mask as u64)).sum()
    }

    /// Law of `|Ψ|`.
    pub fn cardinality(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.order + 1];
        for (mask, p) in self.probs.iter().enumerate() {
            out[mask.count_ones() as usize] += p;
        }
        out
    }

    pub fn total_variation(&self, other: &SubsetDistribution) -> f64 {
        assert_eq!(self.order, other.order);
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}
