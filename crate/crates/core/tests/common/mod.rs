//! Independent oracles for the acceptance suite. These re-derive expected
//! values from definitions, without touching the library's computation
//! paths.

use foresttune_core::forest::TargetView;

/// Exhaustive split search over every feature and every midpoint between
/// consecutive distinct values, recomputing child statistics from scratch
/// for each cut. Returns (feature, threshold, gain) of the first maximal
/// positive-gain cut in (feature, cutpoint) order.
pub fn brute_force_best_split(
    columns: &[Vec<f64>],
    rows: &[u32],
    target: &TargetView,
) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (feature, col) in columns.iter().enumerate() {
        let mut values: Vec<f64> = rows.iter().map(|&r| col[r as usize]).collect();
        values.sort_unstable_by(|a, b| a.total_cmp(b));
        values.dedup();
        for pair in values.windows(2) {
            let threshold = (pair[0] + pair[1]) / 2.0;
            let left: Vec<u32> = rows
                .iter()
                .copied()
                .filter(|&r| col[r as usize] < threshold)
                .collect();
            let right: Vec<u32> = rows
                .iter()
                .copied()
                .filter(|&r| col[r as usize] >= threshold)
                .collect();
            if left.is_empty() || right.is_empty() {
                continue;
            }
            let gain = match target {
                TargetView::Classes { codes, num_classes } => {
                    let impurity = |subset: &[u32]| {
                        let mut counts = vec![0u32; *num_classes];
                        for &r in subset {
                            counts[codes[r as usize] as usize] += 1;
                        }
                        let total = subset.len() as f64;
                        let mut sum_sq = 0.0;
                        for &c in &counts {
                            let frac = f64::from(c) / total;
                            sum_sq += frac * frac;
                        }
                        1.0 - sum_sq
                    };
                    let n = rows.len() as f64;
                    impurity(rows)
                        - (left.len() as f64 / n) * impurity(&left)
                        - (right.len() as f64 / n) * impurity(&right)
                }
                TargetView::Reals(values) => {
                    let sse = |subset: &[u32]| {
                        let mut sum = 0.0;
                        let mut sum_sq = 0.0;
                        for &r in subset {
                            let y = values[r as usize];
                            sum += y;
                            sum_sq += y * y;
                        }
                        (sum_sq - sum * sum / subset.len() as f64).max(0.0)
                    };
                    sse(rows) - sse(&left) - sse(&right)
                }
            };
            let better = match &best {
                None => gain > 0.0,
                Some((_, _, best_gain)) => gain > *best_gain,
            };
            if better {
                best = Some((feature, threshold, gain));
            }
        }
    }
    best
}

/// O(n^2) pair-counting AUC: fraction of (positive, negative) pairs where
/// the positive outscores the negative, ties counted one half.
pub fn pair_counting_auc(truth: &[u32], scores: &[f64]) -> f64 {
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

/// Direct multiclass Brier recomputation: per observation, the summed
/// squared distance to the one-hot truth, averaged last.
pub fn direct_brier_multiclass(truth: &[u32], probs: &[Vec<f64>]) -> f64 {
    let per_row: Vec<f64> = truth
        .iter()
        .zip(probs)
        .map(|(&t, p)| {
            let mut total = 0.0;
            for (k, &pk) in p.iter().enumerate() {
                let y = if k as u32 == t { 1.0 } else { 0.0 };
                total += (pk - y) * (pk - y);
            }
            total
        })
        .collect();
    per_row.iter().sum::<f64>() / per_row.len() as f64
}

/// Direct log-loss recomputation with the same clip.
pub fn direct_logloss(truth: &[u32], probs: &[Vec<f64>], eps: f64) -> f64 {
    let per_row: Vec<f64> = truth
        .iter()
        .zip(probs)
        .map(|(&t, p)| -(p[t as usize].max(eps)).ln())
        .collect();
    per_row.iter().sum::<f64>() / per_row.len() as f64
}
