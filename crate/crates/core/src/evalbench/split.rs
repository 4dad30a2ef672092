//! Stratified k-fold and holdout splits.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, EvalError};
use crate::rng;
use crate::train::Targets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    KFold { k: usize },
    /// 80/10/10 train, validation and test.
    StratifiedHoldout,
}

/// Index sets for one round. In k-fold mode `validation` is the held-out
/// fold and `test` is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub splits: Vec<Split>,
}

/// Groups row indices by label, or by target decile for regression, each
/// group shuffled with `seed`.
fn strata(dataset: &Dataset, seed: u64) -> Vec<Vec<usize>> {
    let mut groups = match &dataset.y {
        Targets::Labels { labels, n_classes } => {
            let mut g = vec![Vec::new(); *n_classes];
            for (i, &l) in labels.iter().enumerate() {
                g[l].push(i);
            }
            g
        }
        Targets::Real(y) => {
            let n = y.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
            let mut g = vec![Vec::new(); 10];
            for (rank, &i) in order.iter().enumerate() {
                g[rank * 10 / n].push(i);
            }
            g
        }
    };
    let mut r = rng::seeded(seed);
    for g in &mut groups {
        g.shuffle(&mut r);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

/// Splits `dataset` deterministically in `seed`. Every index lands in exactly
/// one validation fold (k-fold) or one part (holdout).
pub fn split_folds(dataset: &Dataset, mode: SplitMode, seed: u64) -> Result<SplitPlan, EvalError> {
    let n = dataset.len();
    let strata = strata(dataset, seed);
    let splits = match mode {
        SplitMode::KFold { k } => {
            if k < 2 {
                return Err(EvalError::InvalidArgument(format!("k = {k}; need k ≥ 2")));
            }
            if n < k {
                return Err(EvalError::TooFewSamplesPerStratum(format!(
                    "{n} samples for {k} folds"
                )));
            }
            if matches!(dataset.y, Targets::Labels { .. }) {
                if let Some(small) = strata.iter().find(|g| g.len() < k) {
                    return Err(EvalError::TooFewSamplesPerStratum(format!(
                        "a class has {} samples for {k} folds",
                        small.len()
                    )));
                }
            }
            let mut fold_of = vec![0usize; n];
            // Dealing the concatenated strata round-robin balances both fold
            // sizes and per-stratum counts to within one sample.
            for (pos, &i) in strata.iter().flatten().enumerate() {
                fold_of[i] = pos % k;
            }
            (0..k)
                .map(|f| Split {
                    train: (0..n).filter(|&i| fold_of[i] != f).collect(),
                    validation: (0..n).filter(|&i| fold_of[i] == f).collect(),
                    test: Vec::new(),
                })
                .collect()
        }
        SplitMode::StratifiedHoldout => {
            let mut split = Split {
                train: Vec::new(),
                validation: Vec::new(),
                test: Vec::new(),
            };
            for g in &strata {
                let tenth = (g.len() as f64 * 0.1).round() as usize;
                split.validation.extend(&g[..tenth]);
                split.test.extend(&g[tenth..2 * tenth]);
                split.train.extend(&g[2 * tenth..]);
            }
            if split.validation.is_empty() || split.train.is_empty() {
                return Err(EvalError::TooFewSamplesPerStratum(format!(
                    "{n} samples cannot fill an 80/10/10 split"
                )));
            }
            for part in [&mut split.train, &mut split.validation, &mut split.test] {
                part.sort_unstable();
            }
            vec![split]
        }
    };
    Ok(SplitPlan { mode, splits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalbench::{make_dataset, DatasetKind};
    use proptest::prelude::*;

    fn labelled(labels: Vec<usize>, n_classes: usize) -> Dataset {
        let x = labels.iter().map(|&l| vec![l as f64]).collect();
        Dataset::new("t", x, Targets::Labels { labels, n_classes }, vec!["x".into()]).unwrap()
    }

    #[test]
    fn kfold_partitions_iris() {
        let d = make_dataset(DatasetKind::IrisRegression3f, 0).unwrap();
        let plan = split_folds(&d, SplitMode::KFold { k: 5 }, 1).unwrap();
        let mut seen = vec![0; 150];
        for s in &plan.splits {
            assert_eq!(s.validation.len(), 30);
            assert_eq!(s.train.len(), 120);
            for &i in &s.validation {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn kfold_stratifies_classes() {
        let d = labelled((0..90).map(|i| i % 3).collect(), 3);
        let plan = split_folds(&d, SplitMode::KFold { k: 5 }, 2).unwrap();
        let Targets::Labels { labels, .. } = &d.y else { panic!() };
        for s in &plan.splits {
            for c in 0..3 {
                let count = s.validation.iter().filter(|&&i| labels[i] == c).count();
                assert_eq!(count, 6);
            }
        }
    }

    #[test]
    fn holdout_balanced_150() {
        let d = labelled((0..150).map(|i| i % 3).collect(), 3);
        let plan = split_folds(&d, SplitMode::StratifiedHoldout, 0).unwrap();
        let s = &plan.splits[0];
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (120, 15, 15));
        let Targets::Labels { labels, .. } = &d.y else { panic!() };
        for part in [&s.validation, &s.test] {
            for c in 0..3 {
                assert_eq!(part.iter().filter(|&&i| labels[i] == c).count(), 5);
            }
        }
    }

    #[test]
    fn too_few_per_stratum() {
        let d = labelled(vec![0, 0, 0, 0, 0, 1], 2);
        assert!(matches!(
            split_folds(&d, SplitMode::KFold { k: 5 }, 0),
            Err(EvalError::TooFewSamplesPerStratum(_))
        ));
        let d = labelled(vec![0, 1, 0, 1], 2);
        assert!(matches!(
            split_folds(&d, SplitMode::StratifiedHoldout, 0),
            Err(EvalError::TooFewSamplesPerStratum(_))
        ));
        assert!(matches!(
            split_folds(&d, SplitMode::KFold { k: 1 }, 0),
            Err(EvalError::InvalidArgument(_))
        ));
    }

    #[test]
    fn deterministic_in_seed() {
        let d = make_dataset(DatasetKind::SyntheticRegression { features: 2 }, 0).unwrap();
        let a = split_folds(&d, SplitMode::KFold { k: 5 }, 9).unwrap();
        let b = split_folds(&d, SplitMode::KFold { k: 5 }, 9).unwrap();
        let c = split_folds(&d, SplitMode::KFold { k: 5 }, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn kfold_is_a_partition(n in 10usize..120, k in 2usize..8, seed: u64) {
            let y: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64).collect();
            let x = (0..n).map(|i| vec![i as f64]).collect();
            let d = Dataset::new("p", x, Targets::Real(y), vec!["x".into()]).unwrap();
            let plan = split_folds(&d, SplitMode::KFold { k }, seed).unwrap();
            let mut count = vec![0; n];
            for s in &plan.splits {
                prop_assert_eq!(s.train.len() + s.validation.len(), n);
                prop_assert!(s.validation.len().abs_diff(n / k) <= 1);
                for &i in &s.validation { count[i] += 1; }
                prop_assert!(s.train.iter().all(|i| !s.validation.contains(i)));
            }
            prop_assert!(count.iter().all(|&c| c == 1));
        }

        #[test]
        fn holdout_per_stratum_proportions(per_class in proptest::collection::vec(10usize..60, 2..5), seed: u64) {
            let labels: Vec<usize> = per_class.iter().enumerate().flat_map(|(c, &m)| std::iter::repeat_n(c, m)).collect();
            let d = labelled(labels.clone(), per_class.len());
            let s = &split_folds(&d, SplitMode::StratifiedHoldout, seed).unwrap().splits[0];
            prop_assert_eq!(s.train.len() + s.validation.len() + s.test.len(), labels.len());
            for (c, &m) in per_class.iter().enumerate() {
                for (part, frac) in [(&s.train, 0.8), (&s.validation, 0.1), (&s.test, 0.1)] {
                    let got = part.iter().filter(|&&i| labels[i] == c).count() as f64;
                    prop_assert!((got - frac * m as f64).abs() <= 1.0);
                }
            }
        }
    }
}
