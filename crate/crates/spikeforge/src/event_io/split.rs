//! Seeded stratified train/validation split.

use super::{EventError, Sample, Split};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Split samples per class, preserving class proportions within one
/// sample. Deterministic given the seed; partitions are disjoint and
/// exhaustive.
pub fn stratified_split(
    samples: Vec<Sample>,
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>), EventError> {
    assert!(
        train_frac > 0.0 && train_frac < 1.0,
        "train_frac must be in (0, 1)"
    );
    if samples.is_empty() {
        return Err(EventError::EmptyClass);
    }
    // BTreeMap keeps class iteration order independent of insertion order
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_class.entry(s.label()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_train = vec![false; samples.len()];
    for (_, mut indices) in by_class {
        indices.shuffle(&mut rng);
        let n_train = ((indices.len() as f64) * train_frac).round() as usize;
        for &i in indices.iter().take(n_train) {
            is_train[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (mut sample, tag) in samples.into_iter().zip(is_train) {
        if tag {
            sample.split_tag = Some(Split::Train);
            train.push(sample);
        } else {
            sample.split_tag = Some(Split::Val);
            val.push(sample);
        }
    }
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_io::{BoundingBox, EventStream};

    fn sample(label: u32) -> Sample {
        Sample {
            stream: EventStream::empty((8, 8)),
            boxes: vec![BoundingBox::new(0.0, 0.0, 2.0, 2.0, 1.0, label)],
            split_tag: None,
        }
    }

    #[test]
    fn single_class_80_20() {
        let samples: Vec<Sample> = (0..10).map(|_| sample(0)).collect();
        let (train, val) = stratified_split(samples, 0.8, 7).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(val.len(), 2);
        assert!(train.iter().all(|s| s.split_tag == Some(Split::Train)));
        assert!(val.iter().all(|s| s.split_tag == Some(Split::Val)));
    }

    #[test]
    fn per_class_proportions() {
        let mut samples: Vec<Sample> = (0..10).map(|_| sample(0)).collect();
        samples.extend((0..5).map(|_| sample(1)));
        let (train, val) = stratified_split(samples, 0.8, 11).unwrap();
        let count = |set: &[Sample], label| set.iter().filter(|s| s.label() == label).count();
        assert_eq!(count(&train, 0), 8);
        assert_eq!(count(&val, 0), 2);
        assert_eq!(count(&train, 1), 4);
        assert_eq!(count(&val, 1), 1);
    }

    #[test]
    fn replay_is_identical() {
        let make = || -> Vec<Sample> {
            (0..40)
                .map(|i| {
                    let mut s = sample(i % 3);
                    s.stream.duration_us = i; // distinguish samples
                    s
                })
                .collect()
        };
        let (t1, v1) = stratified_split(make(), 0.8, 99).unwrap();
        let (t2, v2) = stratified_split(make(), 0.8, 99).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(v1, v2);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            stratified_split(Vec::new(), 0.8, 0),
            Err(EventError::EmptyClass)
        ));
    }
}
