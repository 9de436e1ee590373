use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Dataset, KanoLabel};

/// Random undersampling to the size of the smallest class.
///
/// For each label (in code order) the retained reviews are a uniform sample
/// without replacement drawn from one ChaCha8 stream seeded with `seed`.
/// Retained reviews keep their original relative order.
pub fn undersample(dataset: &Dataset, seed: u64) -> Result<Dataset, CorpusError> {
    dataset.require_all_labels()?;
    let per_class = *dataset.label_counts().iter().min().expect("four labels");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; dataset.len()];
    for label in KanoLabel::ALL {
        let members: Vec<usize> = positions_of(dataset, label);
        for chosen in index::sample(&mut rng, members.len(), per_class) {
            keep[members[chosen]] = true;
        }
    }
    let indices: Vec<usize> = (0..dataset.len()).filter(|&i| keep[i]).collect();
    Ok(dataset.select(dataset.name(), &indices))
}

fn positions_of(dataset: &Dataset, label: KanoLabel) -> Vec<usize> {
    dataset
        .reviews()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.label == label)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FoldStrategy {
    /// Per-label shuffles dealt round-robin, continuing the deal across labels.
    #[default]
    Stratified,
    /// One shuffle of the whole dataset dealt round-robin.
    Random,
}

/// Assignment of every review of a dataset to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    k: usize,
    /// `(review id, fold)` in dataset order.
    assignments: Vec<(String, usize)>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[(String, usize)] {
        &self.assignments
    }

    pub fn fold_of(&self, position: usize) -> usize {
        self.assignments[position].1
    }

    pub fn fold_of_id(&self, id: &str) -> Option<usize> {
        self.assignments
            .iter()
            .find(|(rid, _)| rid == id)
            .map(|&(_, f)| f)
    }

    /// Dataset positions held out in `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i].1 == fold)
            .collect()
    }

    /// Dataset positions used for training when `fold` is held out.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i].1 != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &(_, f) in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Splits `dataset` into `k` folds whose sizes differ by at most one.
/// With [`FoldStrategy::Stratified`] per-label counts per fold also differ
/// by at most one.
pub fn make_folds(
    dataset: &Dataset,
    k: usize,
    seed: u64,
    strategy: FoldStrategy,
) -> Result<FoldPlan, CorpusError> {
    if k < 2 || k > dataset.len() {
        return Err(CorpusError::InvalidFolds {
            k,
            size: dataset.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = match strategy {
        FoldStrategy::Stratified => KanoLabel::ALL
            .into_iter()
            .map(|l| positions_of(dataset, l))
            .collect(),
        FoldStrategy::Random => vec![(0..dataset.len()).collect()],
    };
    let mut folds = vec![0; dataset.len()];
    let mut dealt = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for position in group {
            folds[position] = dealt % k;
            dealt += 1;
        }
    }
    let assignments = dataset
        .reviews()
        .iter()
        .zip(folds)
        .map(|(r, f)| (r.id.clone(), f))
        .collect();
    Ok(FoldPlan { k, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Agreement, Review};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn dataset_with_counts(counts: [usize; 4]) -> Dataset {
        let mut reviews = Vec::new();
        for label in KanoLabel::ALL {
            for j in 0..counts[label.index()] {
                reviews.push(Review {
                    id: format!("{}-{j}", label.name()),
                    text: format!("review {j} about {label}"),
                    label,
                    agreement: Agreement::Unknown,
                    source: "t".into(),
                });
            }
        }
        // interleave so that labels are not contiguous
        reviews.sort_by_key(|r| r.id.len() * 7 % 5);
        Dataset::new("t", reviews).unwrap()
    }

    #[test]
    fn stanik_distribution_balances_to_648() {
        let d = dataset_with_counts([1440, 1530, 648, 2452]);
        let u = undersample(&d, 7).unwrap();
        assert_eq!(u.label_counts(), [648; 4]);
        assert_eq!(u.len(), 2592);
    }

    #[test]
    fn combined_distribution_balances_to_743() {
        let d = dataset_with_counts([1440 + 1102, 1530 + 395, 648 + 95, 2452 + 30]);
        let u = undersample(&d, 7).unwrap();
        assert_eq!(u.label_counts(), [743; 4]);
        assert_eq!(u.len(), 2972);
    }

    #[test]
    fn balanced_input_is_identity() {
        let d = dataset_with_counts([5, 5, 5, 5]);
        assert_eq!(undersample(&d, 3).unwrap(), d);
    }

    #[test]
    fn undersample_needs_every_label() {
        let d = dataset_with_counts([3, 0, 2, 2]);
        assert!(matches!(
            undersample(&d, 1).unwrap_err(),
            CorpusError::MissingLabel(KanoLabel::Performance)
        ));
    }

    #[test]
    fn undersample_is_seeded() {
        let d = dataset_with_counts([30, 10, 12, 40]);
        assert_eq!(undersample(&d, 11).unwrap(), undersample(&d, 11).unwrap());
        assert_ne!(undersample(&d, 11).unwrap(), undersample(&d, 12).unwrap());
    }

    #[test]
    fn balanced_2592_into_ten_folds() {
        let d = dataset_with_counts([648; 4]);
        let plan = make_folds(&d, 10, 5, FoldStrategy::Stratified).unwrap();
        for (fold, size) in plan.fold_sizes().into_iter().enumerate() {
            assert!(size == 259 || size == 260, "fold {fold} has {size}");
            let held = d.select("f", &plan.test_indices(fold));
            for c in held.label_counts() {
                assert!(c == 64 || c == 65, "per-label count {c}");
            }
        }
    }

    #[test]
    fn four_reviews_two_folds() {
        let d = dataset_with_counts([1; 4]);
        let plan = make_folds(&d, 2, 0, FoldStrategy::Stratified).unwrap();
        for fold in 0..2 {
            let held = d.select("f", &plan.test_indices(fold));
            assert_eq!(held.len(), 2);
            assert_ne!(held.reviews()[0].label, held.reviews()[1].label);
        }
        assert_eq!(
            plan,
            make_folds(&d, 2, 0, FoldStrategy::Stratified).unwrap()
        );
    }

    #[test]
    fn invalid_k() {
        let d = dataset_with_counts([1; 4]);
        assert!(make_folds(&d, 5, 0, FoldStrategy::Random).is_err());
        assert!(make_folds(&d, 1, 0, FoldStrategy::Random).is_err());
    }

    proptest! {
        #[test]
        fn undersample_output_is_uniform_subset(
            counts in proptest::array::uniform4(1usize..40),
            seed in any::<u64>(),
        ) {
            let d = dataset_with_counts(counts);
            let u = undersample(&d, seed).unwrap();
            let m = *counts.iter().min().unwrap();
            prop_assert_eq!(u.label_counts(), [m; 4]);
            let input: HashSet<&str> = d.reviews().iter().map(|r| r.id.as_str()).collect();
            prop_assert!(u.reviews().iter().all(|r| input.contains(r.id.as_str())));
        }

        #[test]
        fn folds_partition_the_dataset(
            counts in proptest::array::uniform4(0usize..25),
            k in 2usize..12,
            seed in any::<u64>(),
            stratified in any::<bool>(),
        ) {
            let d = dataset_with_counts(counts);
            prop_assume!(d.len() >= k);
            let strategy = if stratified { FoldStrategy::Stratified } else { FoldStrategy::Random };
            let plan = make_folds(&d, k, seed, strategy).unwrap();
            let mut seen = vec![0usize; d.len()];
            for fold in 0..k {
                for i in plan.test_indices(fold) {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&n| n == 1));
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            if stratified {
                for label in KanoLabel::ALL {
                    let per_fold: Vec<usize> = (0..k)
                        .map(|f| plan.test_indices(f).iter().filter(|&&i| d.reviews()[i].label == label).count())
                        .collect();
                    prop_assert!(per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap() <= 1);
                }
            }
        }
    }
}
