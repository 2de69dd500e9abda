//! Cross-validation plans.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

use super::Dataset;

/// A repeated k-fold assignment. `assignments[rep][row]` is the fold index
/// of `row` in repetition `rep`.
#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub folds: usize,
    pub reps: usize,
    pub assignments: Vec<Vec<u32>>,
}

impl CvPlan {
    /// Train and test row indices for one (repetition, fold) pair.
    pub fn train_test(&self, rep: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let assignment = &self.assignments[rep];
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (row, &f) in assignment.iter().enumerate() {
            if f as usize == fold {
                test.push(row);
            } else {
                train.push(row);
            }
        }
        (train, test)
    }
}

/// Build a repeated k-fold plan, stratified by class for classification.
///
/// Within every repetition each class is shuffled and dealt round-robin, with
/// the deal position carried across classes so overall fold sizes stay within
/// one of each other. Deterministic in `seed`.
pub fn make_cv_plan(ds: &Dataset, k: usize, reps: usize, seed: u64) -> Result<CvPlan> {
    let n = ds.n();
    if k < 2 || k > n {
        return Err(Error::InvalidFolds { k, n });
    }
    if reps == 0 {
        return Err(Error::InvalidFolds { k: 0, n });
    }

    let mut assignments = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = stream_rng(seed, rep as u64);
        let mut assignment = vec![0u32; n];
        let mut position = 0usize;
        match ds.class_codes() {
            Some(codes) => {
                let num_classes = ds.num_classes();
                for class in 0..num_classes as u32 {
                    let mut rows: Vec<usize> =
                        (0..n).filter(|&i| codes[i] == class).collect();
                    rows.shuffle(&mut rng);
                    for row in rows {
                        assignment[row] = (position % k) as u32;
                        position += 1;
                    }
                }
            }
            None => {
                let mut rows: Vec<usize> = (0..n).collect();
                rows.shuffle(&mut rng);
                for row in rows {
                    assignment[row] = (position % k) as u32;
                    position += 1;
                }
            }
        }
        assignments.push(assignment);
    }
    Ok(CvPlan {
        folds: k,
        reps,
        assignments,
    })
}
