//! Columnar datasets: loading, validation, cross-validation plans and
//! synthetic fixtures.
//!
//! A [`Dataset`] is a set of equally long predictor columns plus one target.
//! Columns are either numeric or categorical; categorical values are stored
//! as codes into an ordered, duplicate-free level list. Missing values are
//! rejected at load time, so downstream split search never has to deal with
//! them.

mod csv_io;
mod cv;
mod synth;

pub use csv_io::{load_csv, load_csv_reader, write_csv, write_csv_writer, TypeHint};
pub use cv::{make_cv_plan, CvPlan};
pub use synth::{
    synth_monks2, synth_sparse_signal, synth_sparse_signal_with_shift, MONKS2_LEVEL_COUNTS,
    SPARSE_SIGNAL_SHIFT,
};

use crate::error::{Error, Result};

/// Learning task of a dataset or trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Classification,
    Regression,
}

/// Schema of a single predictor column.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnType {
    Numeric,
    /// Ordered, duplicate-free level labels (first-appearance order at load).
    Categorical { levels: Vec<String> },
}

/// Values of a single predictor column.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    /// `codes[i]` indexes into `levels`.
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_type(&self) -> ColumnType {
        match &self.data {
            ColumnData::Numeric(_) => ColumnType::Numeric,
            ColumnData::Categorical { levels, .. } => ColumnType::Categorical {
                levels: levels.clone(),
            },
        }
    }
}

/// Target column of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// `codes[i]` indexes into the ordered class label list.
    Classification { classes: Vec<String>, codes: Vec<u32> },
    Regression(Vec<f64>),
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Classification { codes, .. } => codes.len(),
            Target::Regression(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A validated in-memory dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub columns: Vec<Column>,
    pub target_name: String,
    pub target: Target,
}

impl Dataset {
    /// Build and validate a dataset. All columns and the target must have the
    /// same non-zero length, there must be at least one predictor, level and
    /// class lists must be non-empty and duplicate-free, and every code must
    /// index into its list.
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        target_name: impl Into<String>,
        target: Target,
    ) -> Result<Self> {
        let ds = Dataset {
            name: name.into(),
            columns,
            target_name: target_name.into(),
            target,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let n = self.target.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.columns.is_empty() {
            return Err(Error::InvalidDataset("no predictor columns".into()));
        }
        for col in &self.columns {
            if col.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "column {:?} has {} values, expected {}",
                    col.name,
                    col.len(),
                    n
                )));
            }
            if let ColumnData::Categorical { levels, codes } = &col.data {
                check_labels(levels, &col.name)?;
                if codes.iter().any(|&c| c as usize >= levels.len()) {
                    return Err(Error::InvalidDataset(format!(
                        "column {:?} has a code outside its level list",
                        col.name
                    )));
                }
            }
        }
        if let Target::Classification { classes, codes } = &self.target {
            check_labels(classes, &self.target_name)?;
            if codes.iter().any(|&c| c as usize >= classes.len()) {
                return Err(Error::InvalidDataset(
                    "target has a code outside the class list".into(),
                ));
            }
        }
        Ok(())
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.target.len()
    }

    /// Number of predictor columns.
    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn task(&self) -> TaskKind {
        match self.target {
            Target::Classification { .. } => TaskKind::Classification,
            Target::Regression(_) => TaskKind::Regression,
        }
    }

    /// Class labels for classification tasks.
    pub fn class_labels(&self) -> Option<&[String]> {
        match &self.target {
            Target::Classification { classes, .. } => Some(classes),
            Target::Regression(_) => None,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_labels().map_or(0, |c| c.len())
    }

    /// Target class codes (classification only).
    pub fn class_codes(&self) -> Option<&[u32]> {
        match &self.target {
            Target::Classification { codes, .. } => Some(codes),
            Target::Regression(_) => None,
        }
    }

    /// Target values (regression only).
    pub fn regression_values(&self) -> Option<&[f64]> {
        match &self.target {
            Target::Regression(v) => Some(v),
            Target::Classification { .. } => None,
        }
    }

    /// New dataset containing the given rows (duplicates allowed, order kept).
    /// Level and class lists are carried over unchanged.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let columns = self
            .columns
            .iter()
            .map(|col| Column {
                name: col.name.clone(),
                data: match &col.data {
                    ColumnData::Numeric(v) => {
                        ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect())
                    }
                    ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                        levels: levels.clone(),
                        codes: rows.iter().map(|&r| codes[r]).collect(),
                    },
                },
            })
            .collect();
        let target = match &self.target {
            Target::Classification { classes, codes } => Target::Classification {
                classes: classes.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
            Target::Regression(v) => {
                Target::Regression(rows.iter().map(|&r| v[r]).collect())
            }
        };
        Dataset::new(self.name.clone(), columns, self.target_name.clone(), target)
    }
}

fn check_labels(labels: &[String], column: &str) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::InvalidDataset(format!(
            "column {column:?} has an empty level list"
        )));
    }
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::InvalidDataset(format!(
                "column {column:?} has duplicate level {a:?}"
            )));
        }
    }
    Ok(())
}
