use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Stratified k-fold split: each class's indices are shuffled and dealt
/// round-robin, continuing the rotation from one class to the next so fold
/// sizes stay within one of each other. Each fold is sorted ascending.
pub fn stratified_kfold(y: &[u32], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &c) in y.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    if let Some((&class, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::ClassTooSmall {
            class,
            count: members.len(),
            k,
        });
    }
    let mut rng = SplitMix64::new(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in by_class.values_mut() {
        rng.shuffle(members);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_division() {
        let y = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let folds = stratified_kfold(&y, 5, 3).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 2);
            assert_eq!(f.iter().filter(|&&i| y[i] == 0).count(), 1);
        }
    }

    #[test]
    fn rejects_bad_k() {
        assert!(matches!(stratified_kfold(&[0, 0, 1, 1], 1, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            stratified_kfold(&[0, 0, 0, 1], 2, 0),
            Err(Error::ClassTooSmall { class: 1, count: 1, k: 2 })
        ));
    }

    #[test]
    fn seeded() {
        let y: Vec<u32> = (0..50).map(|i| i % 3).collect();
        assert_eq!(stratified_kfold(&y, 5, 7).unwrap(), stratified_kfold(&y, 5, 7).unwrap());
        assert_ne!(stratified_kfold(&y, 5, 7).unwrap(), stratified_kfold(&y, 5, 8).unwrap());
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(seed in any::<u64>(), k in 2usize..7, sizes in prop::collection::vec(0usize..30, 1..5)) {
            let mut y = Vec::new();
            for (c, s) in sizes.iter().enumerate() {
                y.extend(std::iter::repeat_n(c as u32, s + k));
            }
            let folds = stratified_kfold(&y, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
            for (c, s) in sizes.iter().enumerate() {
                let expected = (s + k) as f64 / k as f64;
                for f in &folds {
                    let got = f.iter().filter(|&&i| y[i] == c as u32).count() as f64;
                    prop_assert!((got - expected).abs() <= 1.0);
                }
            }
        }
    }
}
