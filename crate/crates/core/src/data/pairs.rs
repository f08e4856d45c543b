use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Training record `(x, y, s)`: two distinct rows and whether they share a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTriplet {
    pub x: usize,
    pub y: usize,
    pub same: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMode {
    /// Every ordered pair of distinct rows: `N(N-1)` records.
    OrderedFull,
    /// Every unordered pair once: `N(N-1)/2` records.
    UnorderedUnique,
    /// `count` unordered pairs drawn without replacement.
    Sampled { count: usize, seed: u64 },
}

impl PairMode {
    pub fn name(&self) -> String {
        match self {
            PairMode::OrderedFull => "ordered-full".into(),
            PairMode::UnorderedUnique => "unordered-unique".into(),
            PairMode::Sampled { count, .. } => format!("sampled:{count}"),
        }
    }

    /// Parses `ordered-full`, `unordered-unique` or `sampled:<count>`.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        match s {
            "ordered-full" => Ok(PairMode::OrderedFull),
            "unordered-unique" => Ok(PairMode::UnorderedUnique),
            other => {
                let count = other
                    .strip_prefix("sampled:")
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::Config(format!("unknown pair mode `{other}`")))?;
                Ok(PairMode::Sampled { count, seed })
            }
        }
    }
}

/// Number of records `mode` produces for `n` rows.
pub fn pair_count(n: usize, mode: &PairMode) -> usize {
    match mode {
        PairMode::OrderedFull => n * n.saturating_sub(1),
        PairMode::UnorderedUnique => n * n.saturating_sub(1) / 2,
        PairMode::Sampled { count, .. } => *count,
    }
}

/// Pairs over local indices `0..labels.len()`.
pub fn pairs_over(labels: &[usize], mode: &PairMode) -> Result<Vec<PairTriplet>> {
    let n = labels.len();
    let triplet = |x: usize, y: usize| PairTriplet {
        x,
        y,
        same: labels[x] == labels[y],
    };
    match *mode {
        PairMode::OrderedFull => {
            let mut out = Vec::with_capacity(pair_count(n, mode));
            for x in 0..n {
                for y in 0..n {
                    if x != y {
                        out.push(triplet(x, y));
                    }
                }
            }
            Ok(out)
        }
        PairMode::UnorderedUnique => {
            let mut out = Vec::with_capacity(pair_count(n, mode));
            for x in 0..n {
                for y in x + 1..n {
                    out.push(triplet(x, y));
                }
            }
            Ok(out)
        }
        PairMode::Sampled { count, seed } => {
            let population = pair_count(n, &PairMode::UnorderedUnique);
            if count > population {
                return Err(Error::Config(format!(
                    "cannot sample {count} pairs from {population} unordered pairs"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = index::sample(&mut rng, population, count).into_vec();
            picked.sort_unstable();
            // walk the row-major upper triangle alongside the sorted indices
            let mut out = Vec::with_capacity(count);
            let (mut x, mut row_start) = (0usize, 0usize);
            for k in picked {
                while k >= row_start + (n - 1 - x) {
                    row_start += n - 1 - x;
                    x += 1;
                }
                out.push(triplet(x, x + 1 + (k - row_start)));
            }
            Ok(out)
        }
    }
}

/// Pairs over the dataset rows `rows`, reported with dataset row ids.
pub fn build_pairs(ds: &Dataset, rows: &[usize], mode: &PairMode) -> Result<Vec<PairTriplet>> {
    if let Some(&bad) = rows.iter().find(|&&r| r >= ds.len()) {
        return Err(Error::Config(format!("row id {bad} outside dataset of {}", ds.len())));
    }
    let labels: Vec<usize> = rows.iter().map(|&r| ds.labels()[r]).collect();
    Ok(pairs_over(&labels, mode)?
        .into_iter()
        .map(|p| PairTriplet {
            x: rows[p.x],
            y: rows[p.y],
            same: p.same,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn closed_form_counts_for_ten_rows() {
        let labels = vec![0; 10];
        assert_eq!(pairs_over(&labels, &PairMode::OrderedFull).unwrap().len(), 90);
        assert_eq!(pairs_over(&labels, &PairMode::UnorderedUnique).unwrap().len(), 45);
    }

    #[test]
    fn labels_follow_class_equality() {
        let pairs = pairs_over(&[0, 0, 1], &PairMode::UnorderedUnique).unwrap();
        assert_eq!(
            pairs,
            vec![
                PairTriplet { x: 0, y: 1, same: true },
                PairTriplet { x: 0, y: 2, same: false },
                PairTriplet { x: 1, y: 2, same: false },
            ]
        );
    }

    #[test]
    fn sampling_draws_distinct_unordered_pairs() {
        let labels: Vec<usize> = (0..30).map(|i| i % 4).collect();
        let mode = PairMode::Sampled { count: 200, seed: 5 };
        let pairs = pairs_over(&labels, &mode).unwrap();
        assert_eq!(pairs.len(), 200);
        let set: HashSet<(usize, usize)> = pairs.iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(set.len(), 200);
        assert!(pairs.iter().all(|p| p.x < p.y && p.y < 30));
        assert!(pairs.iter().all(|p| p.same == (labels[p.x] == labels[p.y])));
        assert_eq!(pairs, pairs_over(&labels, &mode).unwrap());
    }

    #[test]
    fn sampling_everything_equals_unordered_unique() {
        let labels: Vec<usize> = (0..9).map(|i| i % 2).collect();
        let all = pairs_over(&labels, &PairMode::Sampled { count: 36, seed: 1 }).unwrap();
        assert_eq!(all, pairs_over(&labels, &PairMode::UnorderedUnique).unwrap());
    }

    #[test]
    fn oversampling_is_a_config_error() {
        let r = pairs_over(&[0, 1, 0], &PairMode::Sampled { count: 4, seed: 0 });
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn parse_modes() {
        assert_eq!(PairMode::parse("ordered-full", 0).unwrap(), PairMode::OrderedFull);
        assert_eq!(
            PairMode::parse("sampled:12", 4).unwrap(),
            PairMode::Sampled { count: 12, seed: 4 }
        );
        assert!(PairMode::parse("bogus", 0).is_err());
    }
}
