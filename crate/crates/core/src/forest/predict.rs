//! Prediction paths: batch rows, datasets, and out-of-bag aggregation.

use rayon::prelude::*;

use crate::data::{ColumnData, ColumnType, Dataset};
use crate::error::{Error, Result};
use crate::metrics::argmax_class;

use super::tree::LeafValue;
use super::{Forest, TaskInfo};

/// One feature value of a prediction row.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Numeric(f64),
    Categorical(String),
}

/// Batch prediction output.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    /// Class indices into the forest's class label list.
    Classes(Vec<u32>),
    Values(Vec<f64>),
}

/// Out-of-bag aggregation: per row, the prediction over trees whose bag
/// excludes the row (`None` when no such tree exists) and the OOB tree count.
#[derive(Debug, Clone, PartialEq)]
pub enum OobPredictions {
    Probabilities {
        probs: Vec<Option<Vec<f64>>>,
        tree_counts: Vec<u32>,
    },
    Values {
        values: Vec<Option<f64>>,
        tree_counts: Vec<u32>,
    },
}

impl OobPredictions {
    pub fn tree_counts(&self) -> &[u32] {
        match self {
            OobPredictions::Probabilities { tree_counts, .. } => tree_counts,
            OobPredictions::Values { tree_counts, .. } => tree_counts,
        }
    }

    pub fn covered_rows(&self) -> usize {
        self.tree_counts().iter().filter(|&&c| c > 0).count()
    }
}

impl LeafValue {
    /// Class frequencies of a counts leaf.
    pub(crate) fn frequencies(&self) -> Vec<f64> {
        match self {
            LeafValue::Counts(counts) => {
                let total: u32 = counts.iter().sum();
                counts
                    .iter()
                    .map(|&c| f64::from(c) / f64::from(total))
                    .collect()
            }
            LeafValue::Mean { .. } => panic!("regression leaf has no class frequencies"),
        }
    }

    pub(crate) fn mean(&self) -> f64 {
        match self {
            LeafValue::Mean { value, .. } => *value,
            LeafValue::Counts(_) => panic!("classification leaf has no mean"),
        }
    }
}

impl Forest {
    pub fn num_classes(&self) -> usize {
        self.task.num_classes()
    }

    /// Encode one cell against the stored schema. Unseen categorical levels
    /// map below every trained rank, so they descend to the left child.
    fn encode_cell(&self, feature: usize, value: &CellValue) -> Result<f64> {
        let schema = &self.features[feature];
        match (&schema.ty, value) {
            (ColumnType::Numeric, CellValue::Numeric(v)) => Ok(*v),
            (ColumnType::Categorical { levels }, CellValue::Categorical(label)) => {
                let order = self.category_orders[feature]
                    .as_ref()
                    .expect("categorical feature has an order");
                Ok(levels
                    .iter()
                    .position(|l| l == label)
                    .map(|idx| f64::from(order[idx]))
                    .unwrap_or(f64::NEG_INFINITY))
            }
            (ColumnType::Numeric, CellValue::Categorical(label)) => Err(Error::SchemaMismatch(
                format!(
                    "feature {:?} is numeric but got label {label:?}",
                    schema.name
                ),
            )),
            (ColumnType::Categorical { .. }, CellValue::Numeric(v)) => Err(Error::SchemaMismatch(
                format!("feature {:?} is categorical but got number {v}", schema.name),
            )),
        }
    }

    /// Encode a full row in schema order.
    pub fn encode_row(&self, row: &[CellValue]) -> Result<Vec<f64>> {
        if row.len() != self.features.len() {
            return Err(Error::SchemaMismatch(format!(
                "row has {} values, forest expects {}",
                row.len(),
                self.features.len()
            )));
        }
        row.iter()
            .enumerate()
            .map(|(f, v)| self.encode_cell(f, v))
            .collect()
    }

    /// Column-major encoding of a dataset's predictors against this forest's
    /// schema. Feature names, order and kinds must match; categorical values
    /// are mapped by label, unseen labels encode below every rank.
    pub(crate) fn encode_dataset(&self, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
        if ds.p() != self.features.len() {
            return Err(Error::SchemaMismatch(format!(
                "dataset has {} predictors, forest expects {}",
                ds.p(),
                self.features.len()
            )));
        }
        let mut encoded = Vec::with_capacity(ds.p());
        for (f, (col, schema)) in ds.columns.iter().zip(&self.features).enumerate() {
            if col.name != schema.name {
                return Err(Error::SchemaMismatch(format!(
                    "feature {f} is named {:?}, forest expects {:?}",
                    col.name, schema.name
                )));
            }
            let values = match (&col.data, &schema.ty) {
                (ColumnData::Numeric(values), ColumnType::Numeric) => values.clone(),
                (
                    ColumnData::Categorical { levels, codes },
                    ColumnType::Categorical {
                        levels: trained_levels,
                    },
                ) => {
                    let order = self.category_orders[f]
                        .as_ref()
                        .expect("categorical feature has an order");
                    // rank per dataset level, by label
                    let rank_of: Vec<f64> = levels
                        .iter()
                        .map(|label| {
                            trained_levels
                                .iter()
                                .position(|l| l == label)
                                .map(|idx| f64::from(order[idx]))
                                .unwrap_or(f64::NEG_INFINITY)
                        })
                        .collect();
                    codes.iter().map(|&c| rank_of[c as usize]).collect()
                }
                _ => {
                    return Err(Error::SchemaMismatch(format!(
                        "feature {:?} kind differs from the trained schema",
                        col.name
                    )))
                }
            };
            encoded.push(values);
        }
        Ok(encoded)
    }

    /// Average the class-frequency vectors of every tree's leaf for one
    /// encoded row.
    fn proba_for_encoded(&self, value_at: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let k = self.num_classes();
        let mut acc = vec![0.0f64; k];
        for tree in &self.trees {
            let freq = tree.leaf_for(value_at).frequencies();
            for (a, f) in acc.iter_mut().zip(&freq) {
                *a += f;
            }
        }
        let t = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= t);
        acc
    }

    fn value_for_encoded(&self, value_at: &dyn Fn(usize) -> f64) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .map(|tree| tree.leaf_for(value_at).mean())
            .sum();
        sum / self.trees.len() as f64
    }

    /// Per-tree leaf means for one encoded row (regression forests).
    pub(crate) fn per_tree_values(&self, value_at: &dyn Fn(usize) -> f64) -> Vec<f64> {
        self.trees
            .iter()
            .map(|tree| tree.leaf_for(value_at).mean())
            .collect()
    }

    /// Class-probability vectors for rows of cell values (classification).
    pub fn predict_proba_rows(&self, rows: &[Vec<CellValue>]) -> Result<Vec<Vec<f64>>> {
        self.require_classification()?;
        let encoded: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| self.encode_row(row))
            .collect::<Result<_>>()?;
        Ok(encoded
            .par_iter()
            .map(|row| self.proba_for_encoded(&|f| row[f]))
            .collect())
    }

    /// Labels (classification) or means (regression) for rows of cell values.
    pub fn predict_rows(&self, rows: &[Vec<CellValue>]) -> Result<Predictions> {
        match self.task {
            TaskInfo::Classification { .. } => {
                let probs = self.predict_proba_rows(rows)?;
                Ok(Predictions::Classes(
                    probs.iter().map(|p| argmax_class(p)).collect(),
                ))
            }
            TaskInfo::Regression => {
                let encoded: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|row| self.encode_row(row))
                    .collect::<Result<_>>()?;
                Ok(Predictions::Values(
                    encoded
                        .par_iter()
                        .map(|row| self.value_for_encoded(&|f| row[f]))
                        .collect(),
                ))
            }
        }
    }

    /// Class-probability vectors for every row of a dataset.
    pub fn predict_proba(&self, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
        self.require_classification()?;
        let encoded = self.encode_dataset(ds)?;
        Ok((0..ds.n())
            .into_par_iter()
            .map(|i| self.proba_for_encoded(&|f| encoded[f][i]))
            .collect())
    }

    /// Labels or means for every row of a dataset.
    pub fn predict(&self, ds: &Dataset) -> Result<Predictions> {
        match self.task {
            TaskInfo::Classification { .. } => {
                let probs = self.predict_proba(ds)?;
                Ok(Predictions::Classes(
                    probs.iter().map(|p| argmax_class(p)).collect(),
                ))
            }
            TaskInfo::Regression => {
                let encoded = self.encode_dataset(ds)?;
                Ok(Predictions::Values(
                    (0..ds.n())
                        .into_par_iter()
                        .map(|i| self.value_for_encoded(&|f| encoded[f][i]))
                        .collect(),
                ))
            }
        }
    }

    /// Out-of-bag aggregation over the training dataset: row `i` averages
    /// only trees whose bag excludes `i`, in tree order.
    pub fn oob_predictions(&self, ds: &Dataset) -> Result<OobPredictions> {
        if ds.n() != self.n_train {
            return Err(Error::SchemaMismatch(format!(
                "dataset has {} rows, forest was trained on {}",
                ds.n(),
                self.n_train
            )));
        }
        let encoded = self.encode_dataset(ds)?;
        let in_bag = self.in_bag_masks();

        match &self.task {
            TaskInfo::Classification { classes } => {
                let k = classes.len();
                let per_row: Vec<(Option<Vec<f64>>, u32)> = (0..self.n_train)
                    .into_par_iter()
                    .map(|i| {
                        let mut acc = vec![0.0f64; k];
                        let mut count = 0u32;
                        for (t, tree) in self.trees.iter().enumerate() {
                            if in_bag[t][i] {
                                continue;
                            }
                            let freq = tree.leaf_for(&|f| encoded[f][i]).frequencies();
                            for (a, f) in acc.iter_mut().zip(&freq) {
                                *a += f;
                            }
                            count += 1;
                        }
                        if count == 0 {
                            (None, 0)
                        } else {
                            acc.iter_mut().for_each(|a| *a /= f64::from(count));
                            (Some(acc), count)
                        }
                    })
                    .collect();
                let mut probs = Vec::with_capacity(self.n_train);
                let mut tree_counts = Vec::with_capacity(self.n_train);
                for (p, c) in per_row {
                    probs.push(p);
                    tree_counts.push(c);
                }
                Ok(OobPredictions::Probabilities { probs, tree_counts })
            }
            TaskInfo::Regression => {
                let per_row: Vec<(Option<f64>, u32)> = (0..self.n_train)
                    .into_par_iter()
                    .map(|i| {
                        let mut acc = 0.0f64;
                        let mut count = 0u32;
                        for (t, tree) in self.trees.iter().enumerate() {
                            if in_bag[t][i] {
                                continue;
                            }
                            acc += tree.leaf_for(&|f| encoded[f][i]).mean();
                            count += 1;
                        }
                        if count == 0 {
                            (None, 0)
                        } else {
                            (Some(acc / f64::from(count)), count)
                        }
                    })
                    .collect();
                let mut values = Vec::with_capacity(self.n_train);
                let mut tree_counts = Vec::with_capacity(self.n_train);
                for (v, c) in per_row {
                    values.push(v);
                    tree_counts.push(c);
                }
                Ok(OobPredictions::Values {
                    values,
                    tree_counts,
                })
            }
        }
    }

    /// Per-tree in-bag membership masks.
    pub(crate) fn in_bag_masks(&self) -> Vec<Vec<bool>> {
        self.bags
            .iter()
            .map(|bag| {
                let mut mask = vec![false; self.n_train];
                for &i in bag {
                    mask[i as usize] = true;
                }
                mask
            })
            .collect()
    }

    fn require_classification(&self) -> Result<()> {
        match self.task {
            TaskInfo::Classification { .. } => Ok(()),
            TaskInfo::Regression => Err(Error::TaskMismatch(
                "probability prediction needs a classification forest".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Dataset, TaskKind, Target};
    use crate::forest::HyperParams;

    fn toy(n: usize) -> Dataset {
        Dataset::new(
            "toy",
            vec![Column {
                name: "x".into(),
                data: ColumnData::Numeric((0..n).map(|i| i as f64).collect()),
            }],
            "y",
            Target::Classification {
                classes: vec!["a".into(), "b".into()],
                codes: (0..n).map(|i| u32::from(i >= n / 2)).collect(),
            },
        )
        .unwrap()
    }

    #[test]
    fn single_leaf_forest_predicts_class_priors() {
        let ds = toy(10);
        let mut params = HyperParams::defaults(TaskKind::Classification, 1);
        params.min_node_size = 10;
        params.num_trees = 3;
        params.replace = false;
        let forest = Forest::train(&ds, &params, 0, 1).unwrap();
        let probs = forest.predict_proba(&ds).unwrap();
        for p in probs {
            assert_eq!(p, vec![0.5, 0.5]);
        }
        // exact tie goes to the first class
        if let Predictions::Classes(labels) = forest.predict(&ds).unwrap() {
            assert!(labels.iter().all(|&l| l == 0));
        } else {
            panic!("classification output expected");
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let ds = toy(40);
        let mut params = HyperParams::defaults(TaskKind::Classification, 1);
        params.num_trees = 25;
        let forest = Forest::train(&ds, &params, 5, 2).unwrap();
        for p in forest.predict_proba(&ds).unwrap() {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn regression_prediction_is_mean_of_tree_means() {
        let ds = Dataset::new(
            "r",
            vec![Column {
                name: "x".into(),
                data: ColumnData::Numeric(vec![0.0, 1.0, 2.0, 3.0]),
            }],
            "y",
            Target::Regression(vec![1.0, 1.0, 3.0, 3.0]),
        )
        .unwrap();
        let mut params = HyperParams::defaults(TaskKind::Regression, 1);
        params.num_trees = 10;
        params.min_node_size = 1;
        let forest = Forest::train(&ds, &params, 2, 1).unwrap();
        if let Predictions::Values(values) = forest.predict(&ds).unwrap() {
            let per_tree = forest.per_tree_values(&|_| 0.0);
            let mean = per_tree.iter().sum::<f64>() / per_tree.len() as f64;
            assert!((values[0] - mean).abs() < 1e-12);
        } else {
            panic!("regression output expected");
        }
    }

    #[test]
    fn oob_empty_when_full_sample_without_replacement() {
        let ds = toy(10);
        let mut params = HyperParams::defaults(TaskKind::Classification, 1);
        params.replace = false;
        params.num_trees = 4;
        let forest = Forest::train(&ds, &params, 0, 1).unwrap();
        let oob = forest.oob_predictions(&ds).unwrap();
        assert_eq!(oob.covered_rows(), 0);
    }

    #[test]
    fn oob_coverage_without_replacement_is_complement() {
        let ds = toy(10);
        let mut params = HyperParams::defaults(TaskKind::Classification, 1);
        params.replace = false;
        params.sample_fraction = 0.5;
        params.num_trees = 1;
        let forest = Forest::train(&ds, &params, 9, 1).unwrap();
        let oob = forest.oob_predictions(&ds).unwrap();
        assert_eq!(oob.covered_rows(), 5);
        if let OobPredictions::Probabilities { probs, .. } = &oob {
            for p in probs.iter().flatten() {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        // per-tree OOB fraction is exactly 1 - round(f*n)/n
        let ds = toy(100);
        let mut params = HyperParams::defaults(TaskKind::Classification, 1);
        params.replace = false;
        params.sample_fraction = 0.63;
        params.num_trees = 1;
        let forest = Forest::train(&ds, &params, 3, 1).unwrap();
        let oob = forest.oob_predictions(&ds).unwrap();
        assert_eq!(oob.covered_rows(), 37);
    }

    #[test]
    fn monks2_high_mtry_forest_is_confident_on_a_positive_row() {
        use crate::data::synth_monks2;
        let ds = synth_monks2(2);
        // a tuned configuration: all features as candidates, subsampling
        // without replacement near the upper fraction bound
        let params = HyperParams {
            mtry: 6,
            sample_fraction: 0.9,
            replace: false,
            min_node_size: 2,
            num_trees: 200,
            split_rule: crate::forest::SplitRule::GiniImpurity,
            max_depth: None,
        };
        let forest = Forest::train(&ds, &params, 7, 2).unwrap();
        // exactly two attributes at level "2": the outcome is class "1"
        let row: Vec<CellValue> = ["2", "2", "1", "1", "1", "1"]
            .iter()
            .map(|l| CellValue::Categorical((*l).to_string()))
            .collect();
        let probs = forest.predict_proba_rows(&[row]).unwrap();
        assert!(probs[0][1] > 0.9, "P(class 1) = {}", probs[0][1]);
    }

    #[test]
    fn unseen_level_goes_left_and_schema_mismatch_errors() {
        let ds = Dataset::new(
            "c",
            vec![Column {
                name: "color".into(),
                data: ColumnData::Categorical {
                    levels: vec!["red".into(), "blue".into()],
                    codes: vec![0, 0, 1, 1],
                },
            }],
            "y",
            Target::Classification {
                classes: vec!["n".into(), "p".into()],
                codes: vec![0, 0, 1, 1],
            },
        )
        .unwrap();
        let mut params = HyperParams::defaults(TaskKind::Classification, 1);
        params.num_trees = 5;
        let forest = Forest::train(&ds, &params, 1, 1).unwrap();

        // unseen label is accepted and routed deterministically
        let rows = vec![vec![CellValue::Categorical("green".into())]];
        let probs = forest.predict_proba_rows(&rows).unwrap();
        assert_eq!(probs.len(), 1);

        // wrong cell kind is a schema error
        let rows = vec![vec![CellValue::Numeric(1.0)]];
        assert!(matches!(
            forest.predict_proba_rows(&rows),
            Err(Error::SchemaMismatch(_))
        ));

        // wrong row width is a schema error
        let rows = vec![vec![]];
        assert!(matches!(
            forest.predict_proba_rows(&rows),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn oob_rejects_row_count_mismatch() {
        let ds = toy(10);
        let params = HyperParams::defaults(TaskKind::Classification, 1);
        let forest = Forest::train(&ds, &params, 0, 1).unwrap();
        let other = toy(12);
        assert!(matches!(
            forest.oob_predictions(&other),
            Err(Error::SchemaMismatch(_))
        ));
    }
}
