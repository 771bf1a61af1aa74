//! Yes/no filtering and the train/dev/test reconstruction: the original
//! dev set becomes the test set and 500 seeded-random training samples
//! become the new dev set.

use rand::seq::SliceRandom;

use crate::corpus::Sample;
use crate::error::{KcsError, Result};
use crate::rng::derive_rng;

pub const DEV_SIZE: usize = 500;

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub dev: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Drop samples whose answer is "yes"/"no" (case-insensitive) or empty.
pub fn filter_answerable(samples: Vec<Sample>) -> Vec<Sample> {
    samples
        .into_iter()
        .filter(|s| !s.is_yes_no() && !s.answer.trim().is_empty())
        .collect()
}

/// Extract 500 seeded-random samples from `train` as the new dev set, keep
/// the remainder as train, and use `orig_dev` as the test set. Yes/no
/// filtering is applied to each split after the extraction, so a dev draw
/// from unfiltered data may end up smaller than 500.
pub fn make_splits(
    train: Vec<Sample>,
    orig_dev: Vec<Sample>,
    seed: u64,
) -> Result<DatasetSplit> {
    if train.len() <= DEV_SIZE {
        return Err(KcsError::Data(format!(
            "need more than {DEV_SIZE} training samples to extract a dev set, got {}",
            train.len()
        )));
    }

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = derive_rng(seed, &["make-splits"]);
    order.shuffle(&mut rng);
    let dev_indices: std::collections::HashSet<usize> =
        order[..DEV_SIZE].iter().copied().collect();

    let mut dev = Vec::with_capacity(DEV_SIZE);
    let mut rest = Vec::with_capacity(train.len() - DEV_SIZE);
    for (i, sample) in train.into_iter().enumerate() {
        if dev_indices.contains(&i) {
            dev.push(sample);
        } else {
            rest.push(sample);
        }
    }

    Ok(DatasetSplit {
        train: filter_answerable(rest),
        dev: filter_answerable(dev),
        test: filter_answerable(orig_dev),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ContextDocument, SentenceRef};

    fn sample(id: usize, answer: &str) -> Sample {
        Sample::new(
            format!("s{id}"),
            answer.into(),
            "q?".into(),
            vec![ContextDocument {
                title: format!("T{id}"),
                sentences: vec![format!("sentence {id}.")],
            }],
            vec![SentenceRef::new(0, 0)],
        )
        .unwrap()
    }

    #[test]
    fn filter_drops_yes_no_only() {
        let kept = filter_answerable(vec![sample(0, "yes"), sample(1, "Paris"), sample(2, "No")]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].answer, "Paris");
        assert!(filter_answerable(vec![]).is_empty());
    }

    #[test]
    fn filter_count_matches_direct_count() {
        let samples: Vec<Sample> = (0..100)
            .map(|i| sample(i, if i < 30 { "yes" } else { "answer" }))
            .collect();
        assert_eq!(filter_answerable(samples).len(), 70);
    }

    #[test]
    fn splits_have_expected_sizes_and_are_disjoint() {
        let train: Vec<Sample> = (0..1000).map(|i| sample(i, "a")).collect();
        let split = make_splits(train, vec![sample(9999, "a")], 7).unwrap();
        assert_eq!(split.train.len(), 500);
        assert_eq!(split.dev.len(), 500);
        assert_eq!(split.test.len(), 1);
        let train_ids: std::collections::HashSet<_> =
            split.train.iter().map(|s| s.id.clone()).collect();
        assert!(split.dev.iter().all(|s| !train_ids.contains(&s.id)));
    }

    #[test]
    fn splits_are_deterministic_in_seed() {
        let mk = || (0..700).map(|i| sample(i, "a")).collect::<Vec<_>>();
        let a = make_splits(mk(), vec![], 42).unwrap();
        let b = make_splits(mk(), vec![], 42).unwrap();
        let ids = |v: &[Sample]| v.iter().map(|s| s.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a.dev), ids(&b.dev));
        assert_eq!(ids(&a.train), ids(&b.train));
        let c = make_splits(mk(), vec![], 43).unwrap();
        assert_ne!(ids(&a.dev), ids(&c.dev));
    }

    #[test]
    fn too_small_train_is_an_error() {
        let train: Vec<Sample> = (0..500).map(|i| sample(i, "a")).collect();
        assert!(make_splits(train, vec![], 0).is_err());
    }

    #[test]
    fn dev_shrinks_when_drawn_from_unfiltered_data() {
        // Every 10th sample is yes/no; the dev draw loses roughly that share.
        let train: Vec<Sample> = (0..2000)
            .map(|i| sample(i, if i % 10 == 0 { "yes" } else { "a" }))
            .collect();
        let split = make_splits(train, vec![], 3).unwrap();
        assert!(split.dev.len() < 500);
        assert!(split.dev.len() > 400);
    }
}
