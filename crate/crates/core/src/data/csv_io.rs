//! CSV reading and writing.
//!
//! Dialect: UTF-8, header row, comma separator, `.` decimal point. A cell
//! that is empty after trimming is a missing value and rejects the file.
//! A column becomes numeric when every cell parses as a finite float and no
//! override says otherwise; all other columns become categorical with levels
//! in first-appearance order. Row numbers in diagnostics are 1-based data
//! rows (the header is not counted).

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Column, ColumnData, Dataset, Target};

/// Per-column type override for [`load_csv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeHint {
    Numeric,
    Categorical,
}

/// Load a dataset from a CSV file.
///
/// `target` names the target column; `overrides` forces the type of
/// individual columns (an override on the target switches the task: a
/// categorical target yields classification, otherwise regression).
pub fn load_csv(
    path: impl AsRef<Path>,
    target: &str,
    overrides: &HashMap<String, TypeHint>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::FileRead {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    load_csv_reader(file, &name, target, overrides)
}

/// Load a dataset from any reader; see [`load_csv`].
pub fn load_csv_reader<R: Read>(
    reader: R,
    name: &str,
    target: &str,
    overrides: &HashMap<String, TypeHint>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyDataset);
    }
    for (i, h) in headers.iter().enumerate() {
        if headers[..i].contains(h) {
            return Err(Error::InvalidDataset(format!("duplicate column {h:?}")));
        }
    }
    for key in overrides.keys() {
        if !headers.iter().any(|h| h == key) {
            return Err(Error::InvalidDataset(format!(
                "type override for unknown column {key:?}"
            )));
        }
    }
    let target_idx = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingTarget(target.to_string()))?;

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    let mut row = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        row += 1;
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                row,
                expected: headers.len(),
                found: record.len(),
            });
        }
        for (c, field) in record.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::MissingValue {
                    row,
                    column: headers[c].clone(),
                });
            }
            cells[c].push(field.to_string());
        }
    }
    if row == 0 {
        return Err(Error::EmptyDataset);
    }

    let mut columns = Vec::with_capacity(headers.len().saturating_sub(1));
    let mut target_data = None;
    for (c, header) in headers.iter().enumerate() {
        let data = type_column(header, &cells[c], overrides.get(header).copied())?;
        if c == target_idx {
            target_data = Some(data);
        } else {
            columns.push(Column {
                name: header.clone(),
                data,
            });
        }
    }

    let target = match target_data.expect("target column present") {
        ColumnData::Numeric(values) => Target::Regression(values),
        ColumnData::Categorical { levels, codes } => Target::Classification {
            classes: levels,
            codes,
        },
    };
    Dataset::new(name, columns, headers[target_idx].clone(), target)
}

fn type_column(name: &str, raw: &[String], hint: Option<TypeHint>) -> Result<ColumnData> {
    let parsed: Option<Vec<f64>> = raw
        .iter()
        .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    match hint {
        Some(TypeHint::Numeric) => parsed.map(ColumnData::Numeric).ok_or_else(|| {
            Error::InvalidDataset(format!(
                "column {name:?} declared numeric but holds non-numeric values"
            ))
        }),
        Some(TypeHint::Categorical) => Ok(categorical_from(raw)),
        None => Ok(match parsed {
            Some(values) => ColumnData::Numeric(values),
            None => categorical_from(raw),
        }),
    }
}

fn categorical_from(raw: &[String]) -> ColumnData {
    let mut levels: Vec<String> = Vec::new();
    let mut index: HashMap<&str, u32> = HashMap::new();
    let mut codes = Vec::with_capacity(raw.len());
    for value in raw {
        let code = match index.get(value.as_str()) {
            Some(&c) => c,
            None => {
                let c = levels.len() as u32;
                index.insert(value.as_str(), c);
                levels.push(value.clone());
                c
            }
        };
        codes.push(code);
    }
    ColumnData::Categorical { levels, codes }
}

/// Write a dataset as CSV: predictor columns in order, target last.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::FileWrite {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_writer(ds, file)
}

/// Write a dataset as CSV to any writer; see [`write_csv`].
pub fn write_csv_writer<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.columns.iter().map(|c| c.name.as_str()).collect();
    header.push(&ds.target_name);
    wtr.write_record(&header)
        .map_err(|e| Error::Csv(e.to_string()))?;

    for i in 0..ds.n() {
        let mut record: Vec<String> = Vec::with_capacity(ds.p() + 1);
        for col in &ds.columns {
            record.push(match &col.data {
                ColumnData::Numeric(v) => format!("{}", v[i]),
                ColumnData::Categorical { levels, codes } => {
                    levels[codes[i] as usize].clone()
                }
            });
        }
        record.push(match &ds.target {
            Target::Classification { classes, codes } => classes[codes[i] as usize].clone(),
            Target::Regression(v) => format!("{}", v[i]),
        });
        wtr.write_record(&record)
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}
