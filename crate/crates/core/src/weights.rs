//! Similarity weights for external subgroups.
//!
//! For every external subgroup a logistic model separates the target rows
//! (label 1) from that subgroup's rows (label 0) using the covariates *and*
//! the outcome as predictors. An external observation then receives
//!
//! ```text
//! w_j = p_j / max(AUC, 0.5)
//! ```
//!
//! where `p_j` is its in-sample probability of target membership and `AUC`
//! is the probability that a random target row scores above a random row
//! of that external subgroup (ties count one half). Target rows always get
//! weight 1. Optionally, external rows whose `p_j` falls below a percentile
//! of the target scores are zeroed.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::glm::{fit_logistic, LogisticFit, LogisticOptions};
use crate::stats::percentile;

/// Default truncation percentile when truncation is switched on.
pub const DEFAULT_TRUNCATION_PERCENTILE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityComparison {
    pub target_label: String,
    pub external_label: String,
    pub fit: LogisticFit,
    pub p_target: Vec<f64>,
    pub p_external: Vec<f64>,
    pub auc: f64,
    pub auc_clamped: f64,
}

/// How external propensity scores are turned into weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    /// `p_j / max(AUC, 0.5)`.
    Adjusted,
    /// `p_j` alone, without the subgroup-level factor.
    PropensityOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightingOptions {
    pub logistic: LogisticOptions,
    pub scheme: WeightScheme,
    pub truncation_percentile: Option<f64>,
}

impl Default for WeightingOptions {
    fn default() -> Self {
        Self {
            logistic: LogisticOptions::default(),
            scheme: WeightScheme::Adjusted,
            truncation_percentile: None,
        }
    }
}

/// Per-external-subgroup record inside a [`WeightedSample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalResult {
    pub label: String,
    pub n_rows: usize,
    pub comparison: Option<PropensityComparison>,
    /// Set when the propensity fit failed; all rows of the subgroup then
    /// carry weight zero.
    pub failure: Option<String>,
    pub truncation_threshold: Option<f64>,
    pub mean_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    /// Target rows first, then each external subgroup in input order.
    pub data: Dataset,
    pub weights: Vec<f64>,
    pub n_target: usize,
    pub ess: f64,
    pub ess_ratio: f64,
    pub scheme: WeightScheme,
    pub truncation_percentile: Option<f64>,
    pub externals: Vec<ExternalResult>,
}

impl WeightedSample {
    pub fn failed_externals(&self) -> usize {
        self.externals.iter().filter(|e| e.failure.is_some()).count()
    }
}

fn first_label(data: &Dataset) -> String {
    data.subgroup()[0].clone()
}

/// Fits the target-vs-external propensity model on `[covariates, outcome]`.
pub fn fit_propensity(
    target: &Dataset,
    external: &Dataset,
    options: &LogisticOptions,
) -> Result<PropensityComparison> {
    if !target.same_schema(external) {
        return Err(Error::SchemaMismatch(format!(
            "target features {:?} vs external features {:?}",
            target.feature_names(),
            external.feature_names()
        )));
    }
    let stacked = Dataset::concat(&[target, external])?;
    let z = stacked.covariates_with_outcome();
    let n_target = target.n_rows();
    let labels: Vec<bool> = (0..stacked.n_rows()).map(|i| i < n_target).collect();
    let fit = fit_logistic(&z, &labels, None, options)?;
    let p_target = fit.fitted_probabilities[..n_target].to_vec();
    let p_external = fit.fitted_probabilities[n_target..].to_vec();
    let auc = compute_auc(&p_target, &p_external)?;
    Ok(PropensityComparison {
        target_label: first_label(target),
        external_label: first_label(external),
        fit,
        p_target,
        p_external,
        auc,
        auc_clamped: auc.max(0.5),
    })
}

/// Tie-corrected Mann-Whitney estimate of `P(p_target > p_external)`.
///
/// Counting is done in integer half-units, so the result is the correctly
/// rounded value of `(#greater + #ties / 2) / (n_t * n_e)`.
pub fn compute_auc(p_target: &[f64], p_external: &[f64]) -> Result<f64> {
    if p_target.is_empty() || p_external.is_empty() {
        return Err(Error::Empty("auc needs scores from both groups"));
    }
    let mut sorted = p_external.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut half_units: u128 = 0;
    for &t in p_target {
        let below = sorted.partition_point(|&e| e < t);
        let not_above = sorted.partition_point(|&e| e <= t);
        half_units += 2 * below as u128 + (not_above - below) as u128;
    }
    let pairs = 2 * p_target.len() as u128 * p_external.len() as u128;
    Ok(half_units as f64 / pairs as f64)
}

/// Target weights (all 1) and external weights under `scheme`.
pub fn compute_weights(comparison: &PropensityComparison, scheme: WeightScheme) -> (Vec<f64>, Vec<f64>) {
    let target = vec![1.0; comparison.p_target.len()];
    let factor = match scheme {
        WeightScheme::Adjusted => 1.0 / comparison.auc_clamped,
        WeightScheme::PropensityOnly => 1.0,
    };
    let external = comparison.p_external.iter().map(|p| p * factor).collect();
    (target, external)
}

fn check_percentile(pct: f64) -> Result<()> {
    if (0.0..100.0).contains(&pct) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("truncation percentile {pct} outside [0, 100)")))
    }
}

/// Score below which external observations are dropped: the given
/// percentile (type 7) of the target propensity scores. A percentile of 0
/// disables truncation (threshold `-inf`).
pub fn truncation_threshold(comparison: &PropensityComparison, pct: f64) -> Result<f64> {
    check_percentile(pct)?;
    if pct == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    percentile(&comparison.p_target, pct)
}

/// Zeroes every external weight whose propensity score lies strictly below
/// the threshold; other weights are returned unchanged.
pub fn truncate_weights(
    comparison: &PropensityComparison,
    external_weights: &[f64],
    pct: f64,
) -> Result<Vec<f64>> {
    if external_weights.len() != comparison.p_external.len() {
        return Err(Error::LengthMismatch {
            left: comparison.p_external.len(),
            right: external_weights.len(),
        });
    }
    let threshold = truncation_threshold(comparison, pct)?;
    Ok(comparison
        .p_external
        .iter()
        .zip(external_weights)
        .map(|(&p, &w)| if p < threshold { 0.0 } else { w })
        .collect())
}

/// Kish effective sample size, `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(weights: &[f64]) -> Result<f64> {
    if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidParameter(format!("weight {bad} is not a finite nonnegative number")));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::AllZero);
    }
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    Ok(sum * sum / sum_sq)
}

/// Runs one propensity comparison per external subgroup.
pub fn compare_externals(
    target: &Dataset,
    externals: &[Dataset],
    options: &LogisticOptions,
) -> Vec<Result<PropensityComparison>> {
    externals.iter().map(|ext| fit_propensity(target, ext, options)).collect()
}

/// Concatenates target and external rows with their weights, reusing
/// already computed comparisons (one per external, same order).
pub fn assemble_weighted_sample(
    target: &Dataset,
    externals: &[Dataset],
    comparisons: &[Result<PropensityComparison>],
    scheme: WeightScheme,
    truncation_percentile: Option<f64>,
) -> Result<WeightedSample> {
    if externals.is_empty() {
        return Err(Error::Empty("no external subgroups"));
    }
    if comparisons.len() != externals.len() {
        return Err(Error::LengthMismatch { left: externals.len(), right: comparisons.len() });
    }
    if let Some(pct) = truncation_percentile {
        check_percentile(pct)?;
    }
    for ext in externals {
        if !target.same_schema(ext) {
            return Err(Error::SchemaMismatch(format!(
                "target features {:?} vs external features {:?}",
                target.feature_names(),
                ext.feature_names()
            )));
        }
    }

    let n_target = target.n_rows();
    let mut weights = vec![1.0; n_target];
    let mut records = Vec::with_capacity(externals.len());
    for (ext, comparison) in externals.iter().zip(comparisons) {
        let (ext_weights, record) = match comparison {
            Ok(cmp) => {
                let (_, mut w) = compute_weights(cmp, scheme);
                let mut threshold = None;
                if let Some(pct) = truncation_percentile {
                    w = truncate_weights(cmp, &w, pct)?;
                    threshold = Some(truncation_threshold(cmp, pct)?);
                }
                let mean_weight = w.iter().sum::<f64>() / w.len() as f64;
                let record = ExternalResult {
                    label: first_label(ext),
                    n_rows: ext.n_rows(),
                    comparison: Some(cmp.clone()),
                    failure: None,
                    truncation_threshold: threshold,
                    mean_weight,
                };
                (w, record)
            }
            Err(Error::SchemaMismatch(msg)) => return Err(Error::SchemaMismatch(msg.clone())),
            Err(err) => {
                let record = ExternalResult {
                    label: first_label(ext),
                    n_rows: ext.n_rows(),
                    comparison: None,
                    failure: Some(err.to_string()),
                    truncation_threshold: None,
                    mean_weight: 0.0,
                };
                (vec![0.0; ext.n_rows()], record)
            }
        };
        weights.extend(ext_weights);
        records.push(record);
    }

    let mut parts: Vec<&Dataset> = vec![target];
    parts.extend(externals.iter());
    let data = Dataset::concat(&parts)?;
    let ess = effective_sample_size(&weights)?;
    Ok(WeightedSample {
        data,
        weights,
        n_target,
        ess,
        ess_ratio: ess / n_target as f64,
        scheme,
        truncation_percentile,
        externals: records,
    })
}

/// Full pipeline: one propensity comparison per external subgroup, weights,
/// optional truncation and ESS accounting. A subgroup whose propensity fit
/// fails gets all-zero weights and a failure note instead of aborting.
pub fn build_weighted_sample(
    target: &Dataset,
    externals: &[Dataset],
    options: &WeightingOptions,
) -> Result<WeightedSample> {
    if externals.is_empty() {
        return Err(Error::Empty("no external subgroups"));
    }
    let comparisons = compare_externals(target, externals, &options.logistic);
    assemble_weighted_sample(target, externals, &comparisons, options.scheme, options.truncation_percentile)
}
