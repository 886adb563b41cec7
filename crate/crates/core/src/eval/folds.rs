// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synthgen::ManifestEntry;

#[derive(Debug, Error, PartialEq)]
pub enum FoldError {
    #[error("unknown design {0:?}")]
    UnknownDesign(String),
    #[error("validation fraction {0} outside [0, 1)")]
    ValFraction(f64),
}

/// One leave-one-design-out fold. Lists hold indices into the manifest
/// entries the plan was made from, ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub holdout: String,
    pub test: Vec<usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub seed: u64,
}

/// Every entry of `holdout` goes to the test set. The rest are shuffled with
/// `seed`; the first `floor(val_fraction * n)` become validation graphs.
pub fn make_folds(
    entries: &[ManifestEntry],
    holdout: &str,
    val_fraction: f64,
    seed: u64,
) -> Result<FoldPlan, FoldError> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(FoldError::ValFraction(val_fraction));
    }
    let (test, mut rest): (Vec<usize>, Vec<usize>) =
        (0..entries.len()).partition(|&i| entries[i].design == holdout);
    if test.is_empty() {
        return Err(FoldError::UnknownDesign(holdout.to_string()));
    }
    rest.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (val_fraction * rest.len() as f64).floor() as usize;
    let mut val = rest[..n_val].to_vec();
    let mut train = rest[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok(FoldPlan { holdout: holdout.to_string(), test, train, val, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::StateEncoding;

    fn corpus(designs: usize, variants: u8) -> Vec<ManifestEntry> {
        (0..designs)
            .flat_map(|d| {
                (1..=variants).map(move |v| ManifestEntry {
                    design: format!("d{d}"),
                    variant: v,
                    encoding: StateEncoding::OneHot,
                    path: format!("d{d}_{v}.json"),
                    n_registers: 4,
                    n_state_registers: 1,
                })
            })
            .collect()
    }

    #[test]
    fn ten_by_four_holdout() {
        let e = corpus(10, 4);
        let p = make_folds(&e, "d3", 0.2, 1).unwrap();
        assert_eq!(p.test, vec![12, 13, 14, 15]);
        assert_eq!(p.train.len() + p.val.len(), 36);
        assert_eq!(p.val.len(), 7);
        let mut all: Vec<usize> = p.test.iter().chain(&p.train).chain(&p.val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        assert_eq!(make_folds(&e, "d3", 0.2, 1).unwrap(), p);
        assert_ne!(make_folds(&e, "d3", 0.2, 2).unwrap().val, p.val);
    }

    #[test]
    fn unknown_design() {
        assert_eq!(
            make_folds(&corpus(2, 4), "nope", 0.2, 0),
            Err(FoldError::UnknownDesign("nope".into()))
        );
    }
}
