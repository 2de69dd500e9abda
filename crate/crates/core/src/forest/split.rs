//! Split criteria and the per-node split search.
//!
//! Exhaustive rules scan every midpoint between consecutive distinct values
//! of each candidate feature (categorical features are pre-encoded to
//! target-ordered ranks, so they scan like numerics). The randomized rule
//! draws cutpoints uniformly inside the node-local value range. Ties are
//! broken towards the lowest (feature, cutpoint) pair; only strictly positive
//! gains split.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::SplitRule;

/// Borrowed view of the full-length target vector; node membership is
/// expressed through row indices, never by slicing.
#[derive(Debug, Clone, Copy)]
pub enum TargetView<'a> {
    Classes { codes: &'a [u32], num_classes: usize },
    Reals(&'a [f64]),
}

/// A chosen split: rows with `value < threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Gini impurity `1 - sum_k (n_k / n)^2` of a class-count vector.
pub fn gini_impurity(counts: &[u32]) -> Result<f64> {
    let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    if total == 0 {
        return Err(Error::EmptyNode);
    }
    Ok(gini_from_counts(counts, total as f64))
}

fn gini_from_counts(counts: &[u32], total: f64) -> f64 {
    let mut sum_sq = 0.0;
    for &c in counts {
        let frac = f64::from(c) / total;
        sum_sq += frac * frac;
    }
    1.0 - sum_sq
}

/// Sum of squared deviations from the mean, from sufficient statistics.
fn sse_from_stats(sum: f64, sum_sq: f64, n: f64) -> f64 {
    (sum_sq - sum * sum / n).max(0.0)
}

fn class_gain(
    parent_impurity: f64,
    left: &[u32],
    right: &[u32],
    n_left: f64,
    n_right: f64,
) -> f64 {
    let n = n_left + n_right;
    parent_impurity
        - (n_left / n) * gini_from_counts(left, n_left)
        - (n_right / n) * gini_from_counts(right, n_right)
}

fn real_gain(parent_sse: f64, left: (f64, f64, f64), right: (f64, f64, f64)) -> f64 {
    parent_sse - sse_from_stats(left.0, left.1, left.2) - sse_from_stats(right.0, right.1, right.2)
}

/// Gain of splitting `rows` on `feature` at `threshold`, computed directly
/// from the definition: classification is the drop in size-weighted Gini
/// impurity, regression the drop in summed squared deviations.
pub fn split_gain(
    columns: &[Vec<f64>],
    rows: &[u32],
    target: &TargetView,
    feature: usize,
    threshold: f64,
    rule: &SplitRule,
) -> Result<f64> {
    check_rule_target(rule, target)?;
    let col = &columns[feature];
    let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
        rows.iter().partition(|&&r| col[r as usize] < threshold);
    if left_rows.is_empty() || right_rows.is_empty() {
        return Err(Error::Forest(
            "split produces an empty child".to_string(),
        ));
    }
    match target {
        TargetView::Classes { codes, num_classes } => {
            let count = |rows: &[u32]| {
                let mut counts = vec![0u32; *num_classes];
                for &r in rows {
                    counts[codes[r as usize] as usize] += 1;
                }
                counts
            };
            let parent = count(rows);
            let left = count(&left_rows);
            let right = count(&right_rows);
            let parent_impurity = gini_from_counts(&parent, rows.len() as f64);
            Ok(class_gain(
                parent_impurity,
                &left,
                &right,
                left_rows.len() as f64,
                right_rows.len() as f64,
            ))
        }
        TargetView::Reals(values) => {
            let stats = |rows: &[u32]| {
                let mut sum = 0.0;
                let mut sum_sq = 0.0;
                for &r in rows {
                    let y = values[r as usize];
                    sum += y;
                    sum_sq += y * y;
                }
                (sum, sum_sq, rows.len() as f64)
            };
            let (ps, pq, pn) = stats(rows);
            Ok(real_gain(
                sse_from_stats(ps, pq, pn),
                stats(&left_rows),
                stats(&right_rows),
            ))
        }
    }
}

fn check_rule_target(rule: &SplitRule, target: &TargetView) -> Result<()> {
    match (rule, target) {
        (SplitRule::GiniImpurity, TargetView::Reals(_)) => Err(Error::TaskMismatch(
            "gini split rule needs a classification target".into(),
        )),
        (SplitRule::WeightedVariance, TargetView::Classes { .. }) => Err(Error::TaskMismatch(
            "variance split rule needs a regression target".into(),
        )),
        _ => Ok(()),
    }
}

/// Best split over the candidate features, or `None` when no cut produces
/// two non-empty children with positive gain. `candidates` must be sorted
/// ascending; ties go to the lowest (feature, cutpoint).
pub fn best_split(
    columns: &[Vec<f64>],
    rows: &[u32],
    target: &TargetView,
    candidates: &[usize],
    rule: &SplitRule,
    rng: &mut ChaCha8Rng,
) -> Option<SplitCandidate> {
    debug_assert!(candidates.windows(2).all(|w| w[0] < w[1]));
    if rows.len() < 2 {
        return None;
    }

    match target {
        TargetView::Classes { codes, num_classes } => {
            let mut parent = vec![0u32; *num_classes];
            for &r in rows {
                parent[codes[r as usize] as usize] += 1;
            }
            let m = rows.len() as f64;
            let parent_impurity = gini_from_counts(&parent, m);
            if parent_impurity == 0.0 {
                return None; // pure node
            }
            match rule {
                SplitRule::GiniImpurity => {
                    best_class_exhaustive(columns, rows, codes, &parent, parent_impurity, candidates)
                }
                SplitRule::ExtraRandom { num_random_cuts } => best_class_random(
                    columns,
                    rows,
                    codes,
                    &parent,
                    parent_impurity,
                    candidates,
                    *num_random_cuts,
                    rng,
                ),
                SplitRule::WeightedVariance => None, // rejected by validation
            }
        }
        TargetView::Reals(values) => {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for &r in rows {
                let y = values[r as usize];
                sum += y;
                sum_sq += y * y;
            }
            let m = rows.len() as f64;
            let parent_sse = sse_from_stats(sum, sum_sq, m);
            // Treat numerically-constant targets as pure: the accumulated
            // rounding of the sufficient statistics scales with m * eps.
            if parent_sse <= (sum_sq.abs() + sum * sum / m) * m * f64::EPSILON {
                return None;
            }
            match rule {
                SplitRule::WeightedVariance => best_real_exhaustive(
                    columns,
                    rows,
                    values,
                    (sum, sum_sq),
                    parent_sse,
                    candidates,
                ),
                SplitRule::ExtraRandom { num_random_cuts } => best_real_random(
                    columns,
                    rows,
                    values,
                    (sum, sum_sq),
                    parent_sse,
                    candidates,
                    *num_random_cuts,
                    rng,
                ),
                SplitRule::GiniImpurity => None, // rejected by validation
            }
        }
    }
}

fn update_best(best: &mut Option<SplitCandidate>, feature: usize, threshold: f64, gain: f64) {
    let better = match best {
        Some(b) => gain > b.gain,
        None => gain > 0.0,
    };
    if better {
        *best = Some(SplitCandidate {
            feature,
            threshold,
            gain,
        });
    }
}

fn best_class_exhaustive(
    columns: &[Vec<f64>],
    rows: &[u32],
    codes: &[u32],
    parent: &[u32],
    parent_impurity: f64,
    candidates: &[usize],
) -> Option<SplitCandidate> {
    let m = rows.len();
    let mut best = None;
    let mut pairs: Vec<(f64, u32)> = Vec::with_capacity(m);
    let mut left = vec![0u32; parent.len()];
    let mut right = vec![0u32; parent.len()];
    for &feature in candidates {
        let col = &columns[feature];
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (col[r as usize], codes[r as usize])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        left.iter_mut().for_each(|c| *c = 0);
        for i in 0..m - 1 {
            left[pairs[i].1 as usize] += 1;
            if pairs[i].0 < pairs[i + 1].0 {
                let n_left = (i + 1) as f64;
                let n_right = (m - i - 1) as f64;
                for (r, (&p, &l)) in right.iter_mut().zip(parent.iter().zip(left.iter())) {
                    *r = p - l;
                }
                let gain = class_gain(parent_impurity, &left, &right, n_left, n_right);
                let threshold = (pairs[i].0 + pairs[i + 1].0) / 2.0;
                update_best(&mut best, feature, threshold, gain);
            }
        }
    }
    best
}

fn best_real_exhaustive(
    columns: &[Vec<f64>],
    rows: &[u32],
    values: &[f64],
    parent_stats: (f64, f64),
    parent_sse: f64,
    candidates: &[usize],
) -> Option<SplitCandidate> {
    let m = rows.len();
    let (total_sum, total_sq) = parent_stats;
    let mut best = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(m);
    for &feature in candidates {
        let col = &columns[feature];
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (col[r as usize], values[r as usize])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for i in 0..m - 1 {
            let y = pairs[i].1;
            left_sum += y;
            left_sq += y * y;
            if pairs[i].0 < pairs[i + 1].0 {
                let n_left = (i + 1) as f64;
                let n_right = (m - i - 1) as f64;
                let gain = real_gain(
                    parent_sse,
                    (left_sum, left_sq, n_left),
                    (total_sum - left_sum, total_sq - left_sq, n_right),
                );
                let threshold = (pairs[i].0 + pairs[i + 1].0) / 2.0;
                update_best(&mut best, feature, threshold, gain);
            }
        }
    }
    best
}

fn node_range(col: &[f64], rows: &[u32]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &r in rows {
        let v = col[r as usize];
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    (lo, hi)
}

fn draw_cuts(lo: f64, hi: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut cuts: Vec<f64> = (0..count)
        .map(|_| lo + rng.gen::<f64>() * (hi - lo))
        .collect();
    cuts.sort_unstable_by(|a, b| a.total_cmp(b));
    cuts
}

#[allow(clippy::too_many_arguments)]
fn best_class_random(
    columns: &[Vec<f64>],
    rows: &[u32],
    codes: &[u32],
    parent: &[u32],
    parent_impurity: f64,
    candidates: &[usize],
    num_cuts: usize,
    rng: &mut ChaCha8Rng,
) -> Option<SplitCandidate> {
    let m = rows.len() as f64;
    let mut best = None;
    let mut left = vec![0u32; parent.len()];
    let mut right = vec![0u32; parent.len()];
    for &feature in candidates {
        let col = &columns[feature];
        let (lo, hi) = node_range(col, rows);
        if !(hi > lo) {
            continue;
        }
        for cut in draw_cuts(lo, hi, num_cuts, rng) {
            left.iter_mut().for_each(|c| *c = 0);
            let mut n_left = 0u32;
            for &r in rows {
                if col[r as usize] < cut {
                    left[codes[r as usize] as usize] += 1;
                    n_left += 1;
                }
            }
            if n_left == 0 || n_left as usize == rows.len() {
                continue;
            }
            for (r, (&p, &l)) in right.iter_mut().zip(parent.iter().zip(left.iter())) {
                *r = p - l;
            }
            let gain = class_gain(
                parent_impurity,
                &left,
                &right,
                f64::from(n_left),
                m - f64::from(n_left),
            );
            update_best(&mut best, feature, cut, gain);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn best_real_random(
    columns: &[Vec<f64>],
    rows: &[u32],
    values: &[f64],
    parent_stats: (f64, f64),
    parent_sse: f64,
    candidates: &[usize],
    num_cuts: usize,
    rng: &mut ChaCha8Rng,
) -> Option<SplitCandidate> {
    let (total_sum, total_sq) = parent_stats;
    let mut best = None;
    for &feature in candidates {
        let col = &columns[feature];
        let (lo, hi) = node_range(col, rows);
        if !(hi > lo) {
            continue;
        }
        for cut in draw_cuts(lo, hi, num_cuts, rng) {
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            let mut n_left = 0usize;
            for &r in rows {
                let v = col[r as usize];
                if v < cut {
                    let y = values[r as usize];
                    left_sum += y;
                    left_sq += y * y;
                    n_left += 1;
                }
            }
            if n_left == 0 || n_left == rows.len() {
                continue;
            }
            let n_right = rows.len() - n_left;
            let gain = real_gain(
                parent_sse,
                (left_sum, left_sq, n_left as f64),
                (total_sum - left_sum, total_sq - left_sq, n_right as f64),
            );
            update_best(&mut best, feature, cut, gain);
        }
    }
    best
}
