//! CSV ingestion and export.
//!
//! Input schema: a header row naming a `subgroup` column (string labels), a
//! `y` column (outcome) and at least one covariate column; covariates keep
//! their file order. Comma delimited, UTF-8, `.` as decimal point, no
//! missing or non-finite values. Errors name the first offending data row
//! (1-based, header excluded) and column.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::weights::WeightedSample;

pub const SUBGROUP_COLUMN: &str = "subgroup";
pub const OUTCOME_COLUMN: &str = "y";

fn csv_error(err: csv::Error) -> Error {
    let row = err.position().map_or(0, |p| p.record().max(1) as usize);
    match err.kind() {
        csv::ErrorKind::Io(e) => Error::Io(e.to_string()),
        csv::ErrorKind::Utf8 { .. } => Error::Data { row, column: String::new(), message: "invalid UTF-8".into() },
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Data {
            row,
            column: String::new(),
            message: format!("expected {expected_len} fields, found {len}"),
        },
        _ => Error::Data { row, column: String::new(), message: err.to_string() },
    }
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let header: Vec<String> = csv.headers().map_err(csv_error)?.iter().map(|h| h.trim().to_string()).collect();
    for (i, name) in header.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::Data { row: 0, column: format!("#{}", i + 1), message: "empty column name".into() });
        }
        if header[..i].contains(name) {
            return Err(Error::Data { row: 0, column: name.clone(), message: "duplicate column".into() });
        }
    }
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Data {
            row: 0,
            column: name.to_string(),
            message: "required column missing from header".into(),
        })
    };
    let subgroup_col = find(SUBGROUP_COLUMN)?;
    let y_col = find(OUTCOME_COLUMN)?;
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&i| i != subgroup_col && i != y_col).collect();
    if feature_cols.is_empty() {
        return Err(Error::Data { row: 0, column: String::new(), message: "no covariate columns".into() });
    }

    let mut values: Vec<f64> = Vec::new();
    let mut outcome = Vec::new();
    let mut subgroup = Vec::new();
    for (index, record) in csv.records().enumerate() {
        let row = index + 1;
        let record = record.map_err(csv_error)?;
        let field = |col: usize| record.get(col).unwrap_or("").trim();
        let number = |col: usize| -> Result<f64> {
            let raw = field(col);
            let bad = |message: &str| Error::Data { row, column: header[col].clone(), message: message.into() };
            if raw.is_empty() {
                return Err(bad("missing value"));
            }
            let v: f64 = raw.parse().map_err(|_| bad(&format!("cannot parse {raw:?} as a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad("non-finite value"))
            }
        };
        let label = field(subgroup_col);
        if label.is_empty() {
            return Err(Error::Data { row, column: SUBGROUP_COLUMN.into(), message: "missing value".into() });
        }
        subgroup.push(label.to_string());
        outcome.push(number(y_col)?);
        for &col in &feature_cols {
            values.push(number(col)?);
        }
    }
    if outcome.is_empty() {
        return Err(Error::Empty("csv has no data rows"));
    }
    let d = feature_cols.len();
    let x = DMatrix::from_row_slice(outcome.len(), d, &values);
    Dataset::new(x, outcome, subgroup, feature_cols.iter().map(|&c| header[c].clone()).collect())
}

pub fn parse_dataset(bytes: &[u8]) -> Result<Dataset> {
    read_dataset(bytes)
}

fn write_rows<W: Write>(
    writer: W,
    data: &Dataset,
    leading: &[&str],
    extra: impl Fn(usize) -> Vec<String>,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = vec![SUBGROUP_COLUMN];
    header.extend_from_slice(leading);
    header.push(OUTCOME_COLUMN);
    header.extend(data.feature_names().iter().map(String::as_str));
    csv.write_record(&header).map_err(csv_error)?;
    let x = data.covariates();
    for i in 0..data.n_rows() {
        let mut record = vec![data.subgroup()[i].clone()];
        record.extend(extra(i));
        record.push(data.outcome()[i].to_string());
        record.extend((0..data.n_features()).map(|j| x[(i, j)].to_string()));
        csv.write_record(&record).map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

/// Writes `subgroup, y, <covariates...>`.
pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    write_rows(writer, data, &[], |_| Vec::new())
}

/// Writes `subgroup, weight, y, <covariates...>`.
pub fn write_weighted_sample<W: Write>(sample: &WeightedSample, writer: W) -> Result<()> {
    write_rows(writer, &sample.data, &["weight"], |i| vec![sample.weights[i].to_string()])
}
