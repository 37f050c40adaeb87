use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Result, SaaError};
use crate::rng::{stream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub labels_per_class: usize,
    pub seed: u64,
}

/// Labeled subset plus the full unlabeled pool.
#[derive(Clone, Debug)]
pub struct LabelSplit {
    pub labeled: Dataset,
    /// Index of each labeled example in the source dataset.
    pub labeled_indices: Vec<usize>,
    /// Every training image, labels removed. Sample id = index in the source dataset.
    pub unlabeled: Dataset,
}

/// Draws exactly `labels_per_class` examples of each class by a seeded shuffle.
/// The unlabeled pool keeps all training images, including the labeled ones.
pub fn split_labels(dataset: &Dataset, spec: &SplitSpec) -> Result<LabelSplit> {
    let labels = dataset
        .labels()
        .ok_or_else(|| SaaError::invalid("cannot split a dataset without labels"))?;
    if spec.labels_per_class == 0 {
        return Err(SaaError::config("labels_per_class must be positive"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.classes()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut labeled_indices = Vec::with_capacity(spec.labels_per_class * dataset.classes());
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.len() < spec.labels_per_class {
            return Err(SaaError::invalid(format!(
                "class {class} has {} examples, {} requested",
                members.len(),
                spec.labels_per_class
            )));
        }
        members.shuffle(&mut stream(spec.seed, Purpose::Split, class as u64, 0));
        labeled_indices.extend_from_slice(&members[..spec.labels_per_class]);
    }
    Ok(LabelSplit {
        labeled: dataset.subset(&labeled_indices)?,
        labeled_indices,
        unlabeled: dataset.without_labels(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic;

    #[test]
    fn split_is_class_balanced_and_keeps_full_pool() {
        let (train, _) = gen_synthetic(0, 4, 100, 4, 8).unwrap();
        let s = split_labels(&train, &SplitSpec { labels_per_class: 4, seed: 1 }).unwrap();
        assert_eq!(s.labeled.class_counts(), vec![4; 4]);
        assert_eq!(s.unlabeled.len(), 100);
        assert!(s.unlabeled.labels().is_none());
        for (k, &i) in s.labeled_indices.iter().enumerate() {
            assert_eq!(s.labeled.image(k), train.image(i));
        }
    }

    #[test]
    fn all_examples_labeled_still_full_pool() {
        let (train, _) = gen_synthetic(0, 4, 20, 4, 8).unwrap();
        let s = split_labels(&train, &SplitSpec { labels_per_class: 5, seed: 1 }).unwrap();
        assert_eq!(s.labeled.len(), 20);
        assert_eq!(s.unlabeled.len(), 20);
    }

    #[test]
    fn seed_changes_split() {
        let (train, _) = gen_synthetic(0, 4, 200, 4, 8).unwrap();
        let a = split_labels(&train, &SplitSpec { labels_per_class: 4, seed: 1 }).unwrap();
        let b = split_labels(&train, &SplitSpec { labels_per_class: 4, seed: 2 }).unwrap();
        assert_ne!(a.labeled_indices, b.labeled_indices);
        assert_eq!(b.labeled.class_counts(), vec![4; 4]);
    }

    #[test]
    fn insufficient_members() {
        let (train, _) = gen_synthetic(0, 4, 8, 4, 8).unwrap();
        assert!(split_labels(&train, &SplitSpec { labels_per_class: 3, seed: 0 }).is_err());
    }
}
