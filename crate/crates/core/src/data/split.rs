use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// One train/validation partition of a repeated k-fold run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub repeat: usize,
    pub fold: usize,
    /// Row ids, ascending.
    pub train: Vec<usize>,
    /// Row ids, ascending.
    pub validation: Vec<usize>,
}

/// Repeated stratified k-fold splits over `labels` (class ids `0..n_classes`).
///
/// Each repeat shuffles the members of every class and deals them round-robin
/// over the folds, continuing the deal across classes. Fold sizes therefore
/// differ by at most one, as do per-class counts between folds.
pub fn stratified_kfold(
    labels: &[usize],
    class_names: &[String],
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<Split>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if repeats == 0 {
        return Err(Error::Config("need at least one repeat".into()));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1).max(class_names.len());
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < folds {
            return Err(Error::Stratification {
                class: class_names.get(c).cloned().unwrap_or_else(|| c.to_string()),
                count: m.len(),
                folds,
            });
        }
    }

    let mut splits = Vec::with_capacity(folds * repeats);
    for repeat in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[repeat as u64]));
        let mut assignment = vec![0usize; labels.len()];
        let mut dealt = 0usize;
        for m in &members {
            let mut shuffled = m.clone();
            shuffled.shuffle(&mut rng);
            for &i in &shuffled {
                assignment[i] = dealt % folds;
                dealt += 1;
            }
        }
        for fold in 0..folds {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| assignment[i] == fold);
            splits.push(Split {
                repeat,
                fold,
                train,
                validation,
            });
        }
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|c| format!("c{c}")).collect()
    }

    #[test]
    fn twenty_five_splits_covering_each_repeat() {
        let labels: Vec<usize> = (0..53).map(|i| i % 3).collect();
        let splits = stratified_kfold(&labels, &names(3), 5, 5, 1).unwrap();
        assert_eq!(splits.len(), 25);
        for repeat in 0..5 {
            let mut seen = vec![0; labels.len()];
            for s in splits.iter().filter(|s| s.repeat == repeat) {
                for &i in &s.validation {
                    seen[i] += 1;
                }
                assert_eq!(s.train.len() + s.validation.len(), labels.len());
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn class_proportions_within_one() {
        let labels: Vec<usize> = (0..97).map(|i| if i < 60 { 0 } else if i < 88 { 1 } else { 2 }).collect();
        let splits = stratified_kfold(&labels, &names(3), 5, 2, 9).unwrap();
        for s in &splits {
            for c in 0..3 {
                let total = labels.iter().filter(|&&l| l == c).count() as f64;
                let got = s.validation.iter().filter(|&&i| labels[i] == c).count() as f64;
                assert!((got - total / 5.0).abs() < 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let a = stratified_kfold(&labels, &names(2), 5, 5, 3).unwrap();
        let b = stratified_kfold(&labels, &names(2), 5, 5, 3).unwrap();
        assert_eq!(a, b);
        let c = stratified_kfold(&labels, &names(2), 5, 5, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn small_class_names_the_class() {
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1];
        match stratified_kfold(&labels, &names(2), 5, 1, 0) {
            Err(Error::Stratification { class, count, .. }) => {
                assert_eq!(class, "c1");
                assert_eq!(count, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
