//! The runtime plurality vote over collected annotations.

use std::collections::BTreeMap;

use rand::Rng;

use super::EnsembleError;
use crate::classes::ClassId;

/// Returns the class with the most votes. Ties are broken uniformly at
/// random among the tied classes, drawing from `rng`.
pub fn plurality_vote(
    labels: &[ClassId],
    rng: &mut impl Rng,
) -> Result<ClassId, EnsembleError> {
    if labels.is_empty() {
        return Err(EnsembleError::EmptyVote);
    }
    let mut counts: BTreeMap<ClassId, u32> = BTreeMap::new();
    for &label in labels {
        *counts.entry(label).or_insert(0) += 1;
    }
    let top = *counts.values().max().expect("nonempty");
    let tied: Vec<ClassId> = counts
        .iter()
        .filter(|(_, &n)| n == top)
        .map(|(&id, _)| id)
        .collect();
    Ok(tied[rng.gen_range(0..tied.len())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn strict_plurality_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let labels = [ClassId(7), ClassId(7), ClassId(3)];
        assert_eq!(plurality_vote(&labels, &mut rng).unwrap(), ClassId(7));
        let labels = [ClassId(1), ClassId(1), ClassId(2), ClassId(2), ClassId(2)];
        assert_eq!(plurality_vote(&labels, &mut rng).unwrap(), ClassId(2));
    }

    #[test]
    fn empty_input_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            plurality_vote(&[], &mut rng).unwrap_err(),
            EnsembleError::EmptyVote
        );
    }

    #[test]
    fn two_way_tie_splits_evenly_over_seeds() {
        let labels = [ClassId(2), ClassId(5)];
        let mut first = 0u32;
        let trials = 10_000;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if plurality_vote(&labels, &mut rng).unwrap() == ClassId(2) {
                first += 1;
            }
        }
        let freq = first as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.02, "freq={freq}");
    }

    #[test]
    fn k_way_tie_is_uniform() {
        for k in [3usize, 4] {
            let labels: Vec<ClassId> = (1..=k as u8).map(ClassId).collect();
            let trials = 10_000u64;
            let mut hits = vec![0u32; k];
            for seed in 0..trials {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let won = plurality_vote(&labels, &mut rng).unwrap();
                hits[won.index()] += 1;
            }
            for (i, &h) in hits.iter().enumerate() {
                let freq = h as f64 / trials as f64;
                assert!(
                    (freq - 1.0 / k as f64).abs() < 0.02,
                    "k={k} class {i}: freq={freq}"
                );
            }
        }
    }
}
