use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub assignment: BTreeMap<String, Split>,
    pub seed: u64,
    /// `[train, val, test]`.
    pub ratios: [f64; 3],
}

impl DatasetSplit {
    pub fn count(&self, split: Split) -> usize {
        self.assignment.values().filter(|&&s| s == split).count()
    }
}

/// Largest-remainder apportionment of `n` items; ties go to the earlier split.
pub fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: [usize; 3] = std::array::from_fn(|k| exact[k].floor() as usize);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Shuffles the (sorted, deduplicated) ids with a seeded ChaCha8 permutation and
/// cuts train/val/test by largest-remainder counts.
pub fn split_dataset(image_ids: &[String], ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    if image_ids.is_empty() {
        return Err(Error::invalid("cannot split an empty id list"));
    }
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::invalid("split ratios must be non-negative"));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split ratios sum to {sum}, expected 1")));
    }
    let mut ids: Vec<String> = image_ids.to_vec();
    ids.sort();
    let before = ids.len();
    ids.dedup();
    if ids.len() != before {
        return Err(Error::invalid("duplicate image ids in split input"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let [n_train, n_val, _] = apportion(ids.len(), ratios);
    let assignment = ids
        .into_iter()
        .enumerate()
        .map(|(k, id)| {
            let s = if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            (id, s)
        })
        .collect();
    Ok(DatasetSplit { assignment, seed, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|k| format!("img-{k:05}")).collect()
    }

    #[test]
    fn exact_and_small_counts() {
        let s = split_dataset(&ids(100), DEFAULT_RATIOS, 7).unwrap();
        assert_eq!((s.count(Split::Train), s.count(Split::Val), s.count(Split::Test)), (80, 10, 10));
        let s = split_dataset(&ids(10), DEFAULT_RATIOS, 7).unwrap();
        assert_eq!((s.count(Split::Train), s.count(Split::Val), s.count(Split::Test)), (8, 1, 1));
    }

    #[test]
    fn deterministic_and_order_independent() {
        let a = split_dataset(&ids(57), DEFAULT_RATIOS, 42).unwrap();
        let b = split_dataset(&ids(57), DEFAULT_RATIOS, 42).unwrap();
        assert_eq!(a, b);
        let mut rev = ids(57);
        rev.reverse();
        assert_eq!(split_dataset(&rev, DEFAULT_RATIOS, 42).unwrap(), a);
        assert_ne!(split_dataset(&ids(57), DEFAULT_RATIOS, 43).unwrap().assignment, a.assignment);
    }

    #[test]
    fn bad_ratios() {
        assert!(split_dataset(&ids(10), [0.8, 0.1, 0.2], 1).is_err());
        assert!(split_dataset(&[], DEFAULT_RATIOS, 1).is_err());
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(split_dataset(&dup, DEFAULT_RATIOS, 1).is_err());
    }

    #[test]
    fn apportion_within_one() {
        for n in 1..300 {
            let c = apportion(n, DEFAULT_RATIOS);
            assert_eq!(c.iter().sum::<usize>(), n);
            for k in 0..3 {
                assert!((c[k] as f64 - DEFAULT_RATIOS[k] * n as f64).abs() < 1.0);
            }
        }
    }
}
