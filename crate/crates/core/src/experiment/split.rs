use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Master seed; each repetition derives its own permutation from it.
    pub seed: RngSeed,
    pub test_fraction: f64,
    /// Fraction of the non-test utterances held out for validation.
    pub validation_fraction: f64,
    pub repetition: u64,
}

impl SplitPlan {
    pub fn new(seed: RngSeed, repetition: u64) -> Self {
        SplitPlan {
            seed,
            test_fraction: 0.2,
            validation_fraction: 0.2,
            repetition,
        }
    }
}

/// Utterance ids per split, each list sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

pub const MIN_UTTERANCES: usize = 5;

/// `|test| = round(f_test·N)`, `|validation| = round(f_val·(1 − f_test)·N)`,
/// the rest is training. The permutation depends only on the sorted ids,
/// the master seed and the repetition index.
pub fn make_splits(utterance_ids: &[String], plan: &SplitPlan) -> Result<Splits> {
    let mut ids: Vec<String> = utterance_ids.to_vec();
    ids.sort();
    let n = ids.len();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("utterance ids must be unique".into()));
    }
    if n < MIN_UTTERANCES {
        return Err(Error::Config(format!("need at least {MIN_UTTERANCES} utterances to split, found {n}")));
    }
    let ok = |f: f64| (0.0..1.0).contains(&f) && f > 0.0;
    if !ok(plan.test_fraction) || !ok(plan.validation_fraction) {
        return Err(Error::Config(format!(
            "split fractions must lie in (0, 1), got test {} and validation {}",
            plan.test_fraction, plan.validation_fraction
        )));
    }
    let n_test = libm::round(plan.test_fraction * n as f64) as usize;
    let n_val = libm::round(plan.validation_fraction * (1.0 - plan.test_fraction) * n as f64) as usize;
    if n_test == 0 || n_val == 0 || n_test + n_val >= n {
        return Err(Error::Config(format!(
            "{n} utterances give {n_test} test and {n_val} validation utterances; every split must be non-empty"
        )));
    }
    let mut rng = plan.seed.derive("split", plan.repetition).rng();
    rng.shuffle(&mut ids);
    let mut test = ids[..n_test].to_vec();
    let mut validation = ids[n_test..n_test + n_val].to_vec();
    let mut train = ids[n_test + n_val..].to_vec();
    test.sort();
    validation.sort();
    train.sort();
    Ok(Splits {
        train,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("utt{i:03}")).collect()
    }

    #[test]
    fn hundred_utterances() {
        let s = make_splits(&ids(100), &SplitPlan::new(RngSeed(1), 0)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (64, 16, 20));
        let all: BTreeSet<&String> = s.train.iter().chain(&s.validation).chain(&s.test).collect();
        assert_eq!(all.len(), 100);
    }

    #[test]
    fn deterministic_and_order_free() {
        let plan = SplitPlan::new(RngSeed(5), 2);
        let a = make_splits(&ids(30), &plan).unwrap();
        let mut rev = ids(30);
        rev.reverse();
        assert_eq!(a, make_splits(&rev, &plan).unwrap());
    }

    #[test]
    fn too_few_utterances() {
        assert!(matches!(make_splits(&ids(4), &SplitPlan::new(RngSeed(0), 0)), Err(Error::Config(_))));
        let s = make_splits(&ids(5), &SplitPlan::new(RngSeed(0), 0)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (3, 1, 1));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut v = ids(10);
        v[3] = v[4].clone();
        assert!(make_splits(&v, &SplitPlan::new(RngSeed(0), 0)).is_err());
    }
}
