//! Evaluation measures for classification and regression.
//!
//! All functions are pure. `evaluate` dispatches a [`Measure`] over
//! prediction vectors that may contain uncovered rows (e.g. rows without any
//! out-of-bag tree); uncovered rows are excluded and their count reported.

use crate::data::TaskKind;
use crate::error::{Error, Result};

/// Direction in which a measure improves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// A named evaluation measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// Mean misclassification error.
    Mmce,
    /// Area under the ROC curve (binary tasks only).
    Auc,
    /// Mean squared distance to the positive-class indicator, range [0, 1].
    BrierBinary,
    /// Sum-over-classes squared distance to the one-hot truth, range [0, 2].
    BrierMulticlass,
    /// Mean negative log predicted probability of the true class.
    LogLoss,
    /// Mean squared error.
    Mse,
}

/// Default probability clip for [`logloss`].
pub const LOGLOSS_EPS: f64 = 1e-15;

impl Measure {
    pub fn direction(self) -> Direction {
        match self {
            Measure::Auc => Direction::Maximize,
            _ => Direction::Minimize,
        }
    }

    pub fn needs_probabilities(self) -> bool {
        matches!(
            self,
            Measure::Auc | Measure::BrierBinary | Measure::BrierMulticlass | Measure::LogLoss
        )
    }

    /// Parse a CLI measure name: `mmce|auc|brier|logloss|mse`. `brier` uses
    /// the sum-over-classes convention.
    pub fn parse_cli(name: &str) -> Option<Measure> {
        match name {
            "mmce" => Some(Measure::Mmce),
            "auc" => Some(Measure::Auc),
            "brier" => Some(Measure::BrierMulticlass),
            "logloss" => Some(Measure::LogLoss),
            "mse" => Some(Measure::Mse),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Mmce => "mmce",
            Measure::Auc => "auc",
            Measure::BrierBinary => "brier_binary",
            Measure::BrierMulticlass => "brier",
            Measure::LogLoss => "logloss",
            Measure::Mse => "mse",
        }
    }

    /// Default tuning measure for a task.
    pub fn default_for(task: TaskKind) -> Measure {
        match task {
            TaskKind::Classification => Measure::BrierMulticlass,
            TaskKind::Regression => Measure::Mse,
        }
    }

    /// Check task compatibility (`num_classes` is 0 for regression).
    pub fn check_task(self, task: TaskKind, num_classes: usize) -> Result<()> {
        let incompatible = |reason: &str| Error::IncompatibleMeasure {
            measure: self.name().to_string(),
            reason: reason.to_string(),
        };
        match (self, task) {
            (Measure::Mse, TaskKind::Regression) => Ok(()),
            (Measure::Mse, TaskKind::Classification) => {
                Err(incompatible("classification task"))
            }
            (_, TaskKind::Regression) => Err(incompatible("regression task")),
            (Measure::Auc, TaskKind::Classification) if num_classes != 2 => {
                Err(incompatible("auc needs a binary task"))
            }
            _ => Ok(()),
        }
    }

    /// Orient a value so that smaller is always better.
    pub fn orient(self, value: f64) -> f64 {
        match self.direction() {
            Direction::Minimize => value,
            Direction::Maximize => -value,
        }
    }
}

/// Fraction of mismatching labels.
pub fn mmce(truth: &[u32], predicted: &[u32]) -> Result<f64> {
    check_lengths(truth.len(), predicted.len())?;
    let wrong = truth
        .iter()
        .zip(predicted)
        .filter(|(t, p)| t != p)
        .count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half (Mann-Whitney form). Computed in O(n log n) from
/// average ranks. `truth` holds 0/1 class indices; 1 is the positive class.
pub fn auc(truth: &[u32], scores: &[f64]) -> Result<f64> {
    check_lengths(truth.len(), scores.len())?;
    let positives = truth.iter().filter(|&&t| t == 1).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Average ranks within tied groups; ranks are 1-based.
    let mut positive_rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank = ((i + 1) + (j + 1)) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if truth[idx] == 1 {
                positive_rank_sum += rank;
            }
        }
        i = j + 1;
    }

    let p = positives as f64;
    let n = negatives as f64;
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Brier score convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrierConvention {
    /// Mean (p_pos - y)^2, range [0, 1]; binary tasks only.
    Binary,
    /// Mean sum over classes of (p_k - 1[y=k])^2, range [0, 2].
    Multiclass,
}

/// Brier score of probability vectors against true class indices.
pub fn brier(truth: &[u32], probs: &[Vec<f64>], convention: BrierConvention) -> Result<f64> {
    check_lengths(truth.len(), probs.len())?;
    check_probability_rows(probs)?;
    let total = match convention {
        BrierConvention::Binary => truth
            .iter()
            .zip(probs)
            .map(|(&t, p)| {
                let y = if t == 1 { 1.0 } else { 0.0 };
                let p_pos = p.get(1).copied().unwrap_or(0.0);
                (p_pos - y) * (p_pos - y)
            })
            .sum::<f64>(),
        BrierConvention::Multiclass => truth
            .iter()
            .zip(probs)
            .map(|(&t, p)| {
                p.iter()
                    .enumerate()
                    .map(|(k, &pk)| {
                        let y = if k as u32 == t { 1.0 } else { 0.0 };
                        (pk - y) * (pk - y)
                    })
                    .sum::<f64>()
            })
            .sum::<f64>(),
    };
    Ok(total / truth.len() as f64)
}

/// Mean of -log(max(p_true, eps)).
pub fn logloss(truth: &[u32], probs: &[Vec<f64>], eps: f64) -> Result<f64> {
    check_lengths(truth.len(), probs.len())?;
    check_probability_rows(probs)?;
    let total: f64 = truth
        .iter()
        .zip(probs)
        .map(|(&t, p)| {
            let p_true = p.get(t as usize).copied().unwrap_or(0.0);
            -(p_true.max(eps)).ln()
        })
        .sum();
    Ok(total / truth.len() as f64)
}

/// Mean squared difference.
pub fn mse(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(truth.len(), predicted.len())?;
    let total: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(total / truth.len() as f64)
}

/// Predictions to evaluate: per-row entries are `None` when the row is
/// uncovered (e.g. no out-of-bag tree voted on it).
#[derive(Debug, Clone)]
pub enum EvalInput<'a> {
    /// Classification probabilities aligned with class indices.
    Probabilities {
        truth: &'a [u32],
        probs: &'a [Option<Vec<f64>>],
        num_classes: usize,
    },
    /// Regression predictions.
    Values {
        truth: &'a [f64],
        predicted: &'a [Option<f64>],
    },
}

/// Result of [`evaluate`]: the measure value over covered rows plus the
/// number of excluded rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub excluded: usize,
}

/// Dispatch a measure over (possibly partially covered) predictions.
pub fn evaluate(measure: Measure, input: &EvalInput) -> Result<Evaluation> {
    match input {
        EvalInput::Probabilities {
            truth,
            probs,
            num_classes,
        } => {
            measure.check_task(TaskKind::Classification, *num_classes)?;
            check_lengths(truth.len(), probs.len())?;
            let mut kept_truth = Vec::with_capacity(truth.len());
            let mut kept_probs: Vec<Vec<f64>> = Vec::with_capacity(truth.len());
            for (&t, p) in truth.iter().zip(probs.iter()) {
                if let Some(p) = p {
                    kept_truth.push(t);
                    kept_probs.push(p.clone());
                }
            }
            let excluded = truth.len() - kept_truth.len();
            if kept_truth.is_empty() {
                return Err(Error::EmptyInput);
            }
            let value = match measure {
                Measure::Mmce => {
                    let labels: Vec<u32> =
                        kept_probs.iter().map(|p| argmax_class(p)).collect();
                    mmce(&kept_truth, &labels)?
                }
                Measure::Auc => {
                    let scores: Vec<f64> = kept_probs
                        .iter()
                        .map(|p| p.get(1).copied().unwrap_or(0.0))
                        .collect();
                    auc(&kept_truth, &scores)?
                }
                Measure::BrierBinary => {
                    if *num_classes != 2 {
                        return Err(Error::IncompatibleMeasure {
                            measure: measure.name().to_string(),
                            reason: "binary convention needs a binary task".to_string(),
                        });
                    }
                    brier(&kept_truth, &kept_probs, BrierConvention::Binary)?
                }
                Measure::BrierMulticlass => {
                    brier(&kept_truth, &kept_probs, BrierConvention::Multiclass)?
                }
                Measure::LogLoss => logloss(&kept_truth, &kept_probs, LOGLOSS_EPS)?,
                Measure::Mse => unreachable!("rejected by check_task"),
            };
            Ok(Evaluation { value, excluded })
        }
        EvalInput::Values { truth, predicted } => {
            measure.check_task(TaskKind::Regression, 0)?;
            check_lengths(truth.len(), predicted.len())?;
            let mut kept_truth = Vec::with_capacity(truth.len());
            let mut kept_pred = Vec::with_capacity(truth.len());
            for (&t, p) in truth.iter().zip(predicted.iter()) {
                if let Some(p) = p {
                    kept_truth.push(t);
                    kept_pred.push(*p);
                }
            }
            let excluded = truth.len() - kept_truth.len();
            if kept_truth.is_empty() {
                return Err(Error::EmptyInput);
            }
            let value = mse(&kept_truth, &kept_pred)?;
            Ok(Evaluation { value, excluded })
        }
    }
}

/// Index of the largest probability, ties broken towards the earlier class.
pub fn argmax_class(probs: &[f64]) -> u32 {
    let mut best = 0usize;
    for (k, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = k;
        }
    }
    best as u32
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

fn check_probability_rows(probs: &[Vec<f64>]) -> Result<()> {
    for (i, p) in probs.iter().enumerate() {
        if p.is_empty() {
            return Err(Error::MalformedProbability(format!("row {i} is empty")));
        }
        if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::MalformedProbability(format!(
                "row {i} has a negative or non-finite entry"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::MalformedProbability(format!(
                "row {i} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// O(n^2) pair-counting AUC used as an oracle.
    pub fn auc_pair_counting(truth: &[u32], scores: &[f64]) -> f64 {
        let mut concordant = 0.0f64;
        let mut pairs = 0.0f64;
        for i in 0..truth.len() {
            if truth[i] != 1 {
                continue;
            }
            for j in 0..truth.len() {
                if truth[j] != 0 {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    concordant += 1.0;
                } else if scores[i] == scores[j] {
                    concordant += 0.5;
                }
            }
        }
        concordant / pairs
    }

    #[test]
    fn mmce_basics() {
        assert_eq!(mmce(&[0, 1, 0], &[0, 1, 0]).unwrap(), 0.0);
        assert_eq!(mmce(&[0, 1], &[1, 0]).unwrap(), 1.0);
        assert_eq!(mmce(&[0, 0, 0, 0], &[0, 0, 0, 1]).unwrap(), 0.25);
        assert!(matches!(mmce(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(
            mmce(&[0], &[0, 1]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn auc_basics() {
        assert_eq!(auc(&[1, 1, 0, 0], &[0.9, 0.8, 0.2, 0.1]).unwrap(), 1.0);
        assert_eq!(auc(&[1, 0], &[0.4, 0.6]).unwrap(), 0.0);
        assert_eq!(auc(&[1, 1, 0, 0], &[0.9, 0.4, 0.6, 0.2]).unwrap(), 0.75);
        assert!(matches!(auc(&[1, 1], &[0.5, 0.6]), Err(Error::SingleClass)));
    }

    #[test]
    fn auc_matches_pair_counting_with_ties() {
        let truth = [1, 0, 1, 0, 1, 0, 0, 1, 1, 0];
        let scores = [0.5, 0.5, 0.7, 0.1, 0.5, 0.7, 0.2, 0.9, 0.1, 0.9];
        assert_eq!(
            auc(&truth, &scores).unwrap(),
            auc_pair_counting(&truth, &scores)
        );
    }

    #[test]
    fn brier_basics() {
        let confident = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(
            brier(&[1, 0], &confident, BrierConvention::Binary).unwrap(),
            0.0
        );
        let uniform = vec![vec![0.5, 0.5]];
        assert_eq!(
            brier(&[1], &uniform, BrierConvention::Binary).unwrap(),
            0.25
        );
        assert_eq!(
            brier(&[1], &uniform, BrierConvention::Multiclass).unwrap(),
            0.5
        );
    }

    #[test]
    fn brier_rejects_malformed_rows() {
        let bad = vec![vec![0.7, 0.7]];
        assert!(matches!(
            brier(&[0], &bad, BrierConvention::Multiclass),
            Err(Error::MalformedProbability(_))
        ));
    }

    #[test]
    fn logloss_basics() {
        let confident = vec![vec![0.0, 1.0]];
        assert_eq!(logloss(&[1], &confident, LOGLOSS_EPS).unwrap(), 0.0);
        let half = vec![vec![0.5, 0.5]];
        let v = logloss(&[0], &half, LOGLOSS_EPS).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
        // Clipped: a zero probability stays finite.
        let zero = vec![vec![1.0, 0.0]];
        let v = logloss(&[1], &zero, LOGLOSS_EPS).unwrap();
        assert!((v - 34.538776394910684).abs() < 1e-9);
    }

    #[test]
    fn mse_basics() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        let v = mse(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_excludes_uncovered_rows() {
        let truth = [0u32, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let probs: Vec<Option<Vec<f64>>> = truth
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                if i < 2 {
                    None
                } else {
                    let mut p = vec![0.0, 0.0];
                    p[t as usize] = 1.0;
                    Some(p)
                }
            })
            .collect();
        let eval = evaluate(
            Measure::Mmce,
            &EvalInput::Probabilities {
                truth: &truth,
                probs: &probs,
                num_classes: 2,
            },
        )
        .unwrap();
        assert_eq!(eval.excluded, 2);
        assert_eq!(eval.value, 0.0);
    }

    #[test]
    fn evaluate_rejects_incompatible_measures() {
        let truth = [0.5, 1.5];
        let predicted = [Some(0.5), Some(1.5)];
        assert!(matches!(
            evaluate(
                Measure::Mmce,
                &EvalInput::Values {
                    truth: &truth,
                    predicted: &predicted
                }
            ),
            Err(Error::IncompatibleMeasure { .. })
        ));

        let t = [0u32, 1, 2];
        let probs: Vec<Option<Vec<f64>>> = t
            .iter()
            .map(|&c| {
                let mut p = vec![0.0; 3];
                p[c as usize] = 1.0;
                Some(p)
            })
            .collect();
        assert!(matches!(
            evaluate(
                Measure::Auc,
                &EvalInput::Probabilities {
                    truth: &t,
                    probs: &probs,
                    num_classes: 3
                }
            ),
            Err(Error::IncompatibleMeasure { .. })
        ));
    }

    #[test]
    fn multiclass_brier_of_uniform_is_k_minus_one_over_k() {
        for k in 2..6usize {
            let probs = vec![vec![1.0 / k as f64; k]];
            let v = brier(&[0], &probs, BrierConvention::Multiclass).unwrap();
            assert!((v - (k as f64 - 1.0) / k as f64).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn auc_equals_pair_counting(
            labels in proptest::collection::vec(0u32..2, 4..60),
            raw in proptest::collection::vec(0u32..8, 4..60),
        ) {
            let n = labels.len().min(raw.len());
            let truth = &labels[..n];
            // coarse grid of scores to force plenty of ties
            let scores: Vec<f64> = raw[..n].iter().map(|&v| v as f64 / 8.0).collect();
            prop_assume!(truth.iter().any(|&t| t == 1) && truth.iter().any(|&t| t == 0));
            let fast = auc(truth, &scores).unwrap();
            let slow = auc_pair_counting(truth, &scores);
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn auc_complement_symmetry(
            labels in proptest::collection::vec(0u32..2, 4..40),
            raw in proptest::collection::vec(0.0f64..1.0, 4..40),
        ) {
            let n = labels.len().min(raw.len());
            let truth = &labels[..n];
            prop_assume!(truth.iter().any(|&t| t == 1) && truth.iter().any(|&t| t == 0));
            // strictly increasing transform leaves AUC unchanged
            let scores = &raw[..n];
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
            let a = auc(truth, scores).unwrap();
            let b = auc(truth, &transformed).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            // negated scores flip the ranking (scores here are tie-free a.s.)
            let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
            let c = auc(truth, &negated).unwrap();
            prop_assert!((a + c - 1.0).abs() < 1e-9);
        }
    }
}
