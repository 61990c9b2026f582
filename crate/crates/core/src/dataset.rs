//! The tabular container shared by every stage of the pipeline.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Covariates, outcome and subgroup membership for `n` observations.
///
/// Rows keep their insertion order; subgroup labels are arbitrary strings
/// (simulated data uses `"0"`, `"1"`, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: DMatrix<f64>,
    outcome: Vec<f64>,
    subgroup: Vec<String>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        covariates: DMatrix<f64>,
        outcome: Vec<f64>,
        subgroup: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = covariates.nrows();
        let d = covariates.ncols();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows"));
        }
        if d == 0 {
            return Err(Error::Empty("dataset has no covariates"));
        }
        if outcome.len() != n {
            return Err(Error::LengthMismatch { left: n, right: outcome.len() });
        }
        if subgroup.len() != n {
            return Err(Error::LengthMismatch { left: n, right: subgroup.len() });
        }
        if feature_names.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: feature_names.len() });
        }
        if let Some(pos) = covariates.iter().position(|v| !v.is_finite()) {
            // column-major storage
            return Err(Error::Data {
                row: pos % n,
                column: feature_names[pos / n].clone(),
                message: "non-finite covariate".into(),
            });
        }
        if let Some(row) = outcome.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data { row, column: "y".into(), message: "non-finite outcome".into() });
        }
        Ok(Self { covariates, outcome, subgroup, feature_names })
    }

    /// Builds a dataset from row-major covariate rows.
    pub fn from_rows(
        rows: &[Vec<f64>],
        outcome: Vec<f64>,
        subgroup: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, actual: bad.len() });
        }
        let covariates = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(covariates, outcome, subgroup, feature_names)
    }

    pub fn n_rows(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn subgroup(&self) -> &[String] {
        &self.subgroup
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Distinct subgroup labels in order of first appearance.
    pub fn subgroup_labels(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for label in &self.subgroup {
            if !seen.iter().any(|s| s == label) {
                seen.push(label.clone());
            }
        }
        seen
    }

    pub fn rows_of(&self, label: &str) -> Vec<usize> {
        self.subgroup
            .iter()
            .enumerate()
            .filter_map(|(i, s)| (s == label).then_some(i))
            .collect()
    }

    /// New dataset made of the given rows (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("row selection"));
        }
        let covariates = self.covariates.select_rows(rows.iter());
        Ok(Self {
            covariates,
            outcome: rows.iter().map(|&i| self.outcome[i]).collect(),
            subgroup: rows.iter().map(|&i| self.subgroup[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
        })
    }

    pub fn subset(&self, label: &str) -> Result<Self> {
        let rows = self.rows_of(label);
        if rows.is_empty() {
            return Err(Error::UnknownSubgroup {
                label: label.to_string(),
                available: self.subgroup_labels(),
            });
        }
        self.select_rows(&rows)
    }

    /// Splits into the target subgroup and one dataset per remaining
    /// subgroup, the latter in order of first appearance.
    pub fn split_target(&self, target: &str) -> Result<(Self, Vec<Self>)> {
        let target_data = self.subset(target)?;
        let externals = self
            .subgroup_labels()
            .into_iter()
            .filter(|l| l != target)
            .map(|l| self.subset(&l))
            .collect::<Result<Vec<_>>>()?;
        Ok((target_data, externals))
    }

    pub fn same_schema(&self, other: &Self) -> bool {
        self.feature_names == other.feature_names
    }

    /// Row-wise concatenation; all parts must share the feature schema.
    pub fn concat(parts: &[&Self]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("nothing to concatenate"))?;
        if let Some(bad) = parts.iter().find(|p| !p.same_schema(first)) {
            return Err(Error::SchemaMismatch(format!(
                "features {:?} vs {:?}",
                first.feature_names, bad.feature_names
            )));
        }
        let n: usize = parts.iter().map(|p| p.n_rows()).sum();
        let d = first.n_features();
        let mut covariates = DMatrix::zeros(n, d);
        let mut outcome = Vec::with_capacity(n);
        let mut subgroup = Vec::with_capacity(n);
        let mut offset = 0;
        for part in parts {
            covariates
                .view_mut((offset, 0), (part.n_rows(), d))
                .copy_from(&part.covariates);
            outcome.extend_from_slice(&part.outcome);
            subgroup.extend(part.subgroup.iter().cloned());
            offset += part.n_rows();
        }
        Ok(Self { covariates, outcome, subgroup, feature_names: first.feature_names.clone() })
    }

    /// Replaces the outcome vector, keeping everything else.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Self> {
        Self::new(
            self.covariates.clone(),
            outcome,
            self.subgroup.clone(),
            self.feature_names.clone(),
        )
    }

    /// Covariates with the outcome appended as a last column.
    pub fn covariates_with_outcome(&self) -> DMatrix<f64> {
        let d = self.n_features();
        let mut z = self.covariates.clone().insert_column(d, 0.0);
        z.column_mut(d).copy_from_slice(&self.outcome);
        z
    }
}
