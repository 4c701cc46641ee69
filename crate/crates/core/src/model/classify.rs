use serde::{Deserialize, Serialize};

use crate::Vector;

/// Partition of the samples by their multiplier `(−λ)ⱼ`.
///
/// - support: `0 < (−λ)ⱼ ≤ C`
/// - active support: `(−λ)ⱼ ∈ (0, C)`
/// - non-support: `(−λ)ⱼ = 0`
///
/// Boundary comparisons are widened by `tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleClassification {
    pub support: Vec<usize>,
    pub active_support: Vec<usize>,
    pub non_support: Vec<usize>,
    pub tol: f64,
}

impl SampleClassification {
    pub fn n_support(&self) -> usize {
        self.support.len()
    }

    pub fn n_active_support(&self) -> usize {
        self.active_support.len()
    }
}

/// Boundary tolerance used when none is given: `1e-8·C`.
pub fn default_classify_tol(c: f64) -> f64 {
    1e-8 * c
}

pub fn classify_samples(lambda: &Vector, c: f64, tol: f64) -> SampleClassification {
    let mut out = SampleClassification {
        support: Vec::new(),
        active_support: Vec::new(),
        non_support: Vec::new(),
        tol,
    };
    for (j, &l) in lambda.iter().enumerate() {
        let m = -l;
        if m <= tol {
            out.non_support.push(j);
        } else {
            out.support.push(j);
            if m < c - tol {
                out.active_support.push(j);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_way_example() {
        let c = 2.0;
        let lam = Vector::from_vec(vec![0.0, -c / 2.0, -c]);
        let cls = classify_samples(&lam, c, 0.0);
        assert_eq!(cls.non_support, vec![0]);
        assert_eq!(cls.active_support, vec![1]);
        assert_eq!(cls.support, vec![1, 2]);
    }

    #[test]
    fn all_zero_is_non_support() {
        let cls = classify_samples(&Vector::zeros(5), 1.0, 1e-8);
        assert_eq!(cls.non_support.len(), 5);
        assert!(cls.support.is_empty());
    }

    proptest! {
        #[test]
        fn partitions_indices(vals in proptest::collection::vec(-1.5f64..0.5, 1..40), tol in 0.0f64..0.1) {
            let c = 1.0;
            let lam = Vector::from_vec(vals.clone());
            let cls = classify_samples(&lam, c, tol);
            let mut all: Vec<usize> = cls.support.iter().chain(&cls.non_support).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..vals.len()).collect::<Vec<_>>());
            for j in &cls.active_support {
                prop_assert!(cls.support.contains(j));
            }
        }
    }
}
