//! Prediction-error estimation for one target subgroup of real data.
//!
//! The estimator is the .632+ bootstrap of Efron & Tibshirani (1997):
//!
//! * `apparent`: mean loss of the full-data fit on the target rows;
//! * `gamma`: no-information error, the mean loss over all pairs
//!   `(y_i, prediction_j)` of target rows;
//! * `oob`: leave-one-out bootstrap error. Each target row's losses are
//!   averaged over the replicates that did not draw it, then averaged over
//!   rows with at least one such replicate;
//! * `R = (min(oob, gamma) - apparent) / (gamma - apparent)`, clipped to
//!   `[0, 1]` (0 when `gamma <= apparent`);
//! * `w = 0.632 / (1 - 0.368 R)`;
//! * `estimate = (1 - w) * apparent + w * min(oob, gamma)`.
//!
//! Resampling is stratified: every subgroup is resampled with replacement
//! to its own size, and the whole training pipeline (including the
//! similarity weights) is rerun on each resample. Outcomes may be
//! transformed before fitting; predictions are mapped back before any loss
//! is computed.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::glm::{fit_weighted_linear, predict_linear};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::percentile_sorted;
use crate::weights::{build_weighted_sample, effective_sample_size, WeightingOptions};

/// Forward Box-Cox transform.
///
/// `lambda = 2` squares the values (the plain power form, without the
/// usual `(y^2 - 1) / 2` rescaling), `lambda = 0` takes logs and any other
/// value uses `(y^lambda - 1) / lambda`.
pub fn box_cox(y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda {lambda} is not finite")));
    }
    let squaring = lambda == 2.0;
    y.iter()
        .enumerate()
        .map(|(index, &v)| {
            if v < 0.0 || (!squaring && v == 0.0 && lambda <= 0.0) {
                return Err(Error::NegativeInput { index, value: v });
            }
            Ok(if squaring {
                v * v
            } else if lambda == 0.0 {
                v.ln()
            } else {
                (v.powf(lambda) - 1.0) / lambda
            })
        })
        .collect()
}

/// Inverse of [`box_cox`]. Values outside the transform's range (for example
/// negative predictions on the squared scale) are mapped to the boundary.
pub fn inverse_box_cox(z: &[f64], lambda: f64) -> Vec<f64> {
    z.iter()
        .map(|&v| {
            if lambda == 2.0 {
                v.max(0.0).sqrt()
            } else if lambda == 0.0 {
                v.exp()
            } else {
                (lambda * v + 1.0).max(0.0).powf(1.0 / lambda)
            }
        })
        .collect()
}

/// Right-continuous step function `F(t) = sum(w_j [v_j <= t]) / sum(w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCdf {
    pub support: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl WeightedCdf {
    pub fn evaluate(&self, t: f64) -> f64 {
        let k = self.support.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }
}

pub fn weighted_cdf(values: &[f64], weights: &[f64]) -> Result<WeightedCdf> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch { left: values.len(), right: weights.len() });
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidParameter(format!("weight {bad} is not a finite nonnegative number")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("cdf values must be finite".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut support: Vec<f64> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    for i in order {
        if weights[i] == 0.0 {
            continue;
        }
        match support.last() {
            Some(&last) if last == values[i] => *mass.last_mut().expect("paired") += weights[i],
            _ => {
                support.push(values[i]);
                mass.push(weights[i]);
            }
        }
    }
    let mut running = 0.0;
    let mut cumulative: Vec<f64> = mass
        .iter()
        .map(|m| {
            running += m;
            running
        })
        .collect();
    let total = running;
    if total <= 0.0 {
        return Err(Error::AllZero);
    }
    for c in &mut cumulative {
        *c /= total;
    }
    Ok(WeightedCdf { support, cumulative })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Weighted,
    Global,
    Local,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Weighted, Method::Global, Method::Local];

    pub fn name(self) -> &'static str {
        match self {
            Method::Weighted => "weighted",
            Method::Global => "global",
            Method::Local => "local",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    Absolute,
    Squared,
}

impl Loss {
    pub fn eval(self, actual: f64, predicted: f64) -> f64 {
        match self {
            Loss::Absolute => (actual - predicted).abs(),
            Loss::Squared => (actual - predicted) * (actual - predicted),
        }
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "absolute" | "abs" => Ok(Loss::Absolute),
            "squared" | "sq" => Ok(Loss::Squared),
            other => Err(Error::InvalidParameter(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub loss: Loss,
    pub seed: u64,
    pub box_cox_lambda: Option<f64>,
    pub weighting: WeightingOptions,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 1000,
            loss: Loss::Absolute,
            seed: 1,
            box_cox_lambda: None,
            weighting: WeightingOptions::default(),
        }
    }
}

/// The .632+ ingredients and result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate632 {
    pub apparent: f64,
    pub oob: f64,
    pub gamma: f64,
    pub relative_overfitting: f64,
    pub weight: f64,
    pub estimate: f64,
    /// `gamma <= apparent`; the relative overfitting rate was set to 0.
    pub degenerate_gamma: bool,
}

pub fn estimate_632plus(apparent: f64, oob: f64, gamma: f64) -> Estimate632 {
    let capped = oob.min(gamma);
    let degenerate_gamma = gamma <= apparent;
    let relative_overfitting = if degenerate_gamma {
        0.0
    } else {
        ((capped - apparent) / (gamma - apparent)).clamp(0.0, 1.0)
    };
    let weight = 0.632 / (1.0 - 0.368 * relative_overfitting);
    Estimate632 {
        apparent,
        oob,
        gamma,
        relative_overfitting,
        weight,
        estimate: (1.0 - weight) * apparent + weight * capped,
        degenerate_gamma,
    }
}

/// Out-of-bag predictions of one bootstrap replicate, on the original
/// outcome scale. `target_positions` index into the target rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub target_positions: Vec<usize>,
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationError {
    /// Row index in the input dataset.
    pub row: usize,
    pub y: f64,
    pub n_oob: usize,
    pub mean_abs_error: f64,
    pub p05: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    #[serde(flatten)]
    pub estimate: Estimate632,
    /// Effective size of the full-data training sample.
    pub ess: f64,
    pub n_train: usize,
    pub failed_replicates: usize,
    /// Some target row had fewer than two out-of-bag losses.
    pub degenerate_bands: bool,
    pub observations: Vec<ObservationError>,
    /// Outcome distribution of the full-data training sample.
    pub cdf: WeightedCdf,
    #[serde(skip)]
    pub replicates: Vec<Option<ReplicateRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub target_label: String,
    pub replicates: usize,
    pub loss: Loss,
    pub box_cox_lambda: Option<f64>,
    pub methods: Vec<MethodReport>,
}

/// Training rows and weights for a method.
fn training_sample(
    data: &Dataset,
    target_label: &str,
    method: Method,
    weighting: &WeightingOptions,
) -> Result<(Dataset, Vec<f64>)> {
    match method {
        Method::Global => Ok((data.clone(), vec![1.0; data.n_rows()])),
        Method::Local => {
            let target = data.subset(target_label)?;
            let n = target.n_rows();
            Ok((target, vec![1.0; n]))
        }
        Method::Weighted => {
            let (target, externals) = data.split_target(target_label)?;
            if externals.is_empty() {
                return Err(Error::UnknownSubgroup {
                    label: "<external>".into(),
                    available: data.subgroup_labels(),
                });
            }
            let sample = build_weighted_sample(&target, &externals, weighting)?;
            Ok((sample.data, sample.weights))
        }
    }
}

/// Fits on `train` and predicts `eval` rows, back on the original scale.
fn fit_predict(train: &Dataset, weights: &[f64], eval: &Dataset, lambda: Option<f64>) -> Result<Vec<f64>> {
    let fit = fit_weighted_linear(train.covariates(), train.outcome(), weights)?;
    let raw = predict_linear(&fit, eval.covariates())?;
    Ok(match lambda {
        Some(l) => inverse_box_cox(&raw, l),
        None => raw,
    })
}

/// Row indices of a stratified bootstrap resample.
fn stratified_resample(strata: &[Vec<usize>], seed: u64, replicate: usize) -> Vec<usize> {
    let mut rng = stream_rng(derive_seed(&[seed, replicate as u64]), 0);
    let mut rows = Vec::new();
    for members in strata {
        for _ in 0..members.len() {
            rows.push(members[rng.random_range(0..members.len())]);
        }
    }
    rows
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Leave-one-out bootstrap error from recorded replicates.
pub fn oob_error(records: &[Option<ReplicateRecord>], y_target: &[f64], loss: Loss) -> f64 {
    let mut per_row: Vec<Vec<f64>> = vec![Vec::new(); y_target.len()];
    for rec in records.iter().flatten() {
        for (&pos, &pred) in rec.target_positions.iter().zip(&rec.predictions) {
            per_row[pos].push(loss.eval(y_target[pos], pred));
        }
    }
    let row_means: Vec<f64> = per_row.iter().filter(|l| !l.is_empty()).map(|l| mean_of(l)).collect();
    if row_means.is_empty() {
        f64::NAN
    } else {
        mean_of(&row_means)
    }
}

/// .632+ bootstrap for one method on one target subgroup.
pub fn bootstrap_632plus(
    data: &Dataset,
    target_label: &str,
    method: Method,
    options: &BootstrapOptions,
) -> Result<MethodReport> {
    if options.replicates == 0 {
        return Err(Error::InvalidParameter("at least one bootstrap replicate is required".into()));
    }
    let target_rows = data.rows_of(target_label);
    if target_rows.is_empty() {
        return Err(Error::UnknownSubgroup { label: target_label.into(), available: data.subgroup_labels() });
    }
    if target_rows.len() < data.n_features() + 2 {
        return Err(Error::InvalidParameter(format!(
            "target subgroup {target_label:?} has {} rows; at least {} are required",
            target_rows.len(),
            data.n_features() + 2
        )));
    }
    let lambda = options.box_cox_lambda;
    let work = match lambda {
        Some(l) => data.with_outcome(box_cox(data.outcome(), l)?)?,
        None => data.clone(),
    };
    let y_target: Vec<f64> = target_rows.iter().map(|&i| data.outcome()[i]).collect();
    let target_eval = work.select_rows(&target_rows)?;

    let (train, weights) = training_sample(&work, target_label, method, &options.weighting)?;
    let full_pred = fit_predict(&train, &weights, &target_eval, lambda)?;
    let loss = options.loss;
    let n = y_target.len();
    let apparent = mean_of(&y_target.iter().zip(&full_pred).map(|(&y, &p)| loss.eval(y, p)).collect::<Vec<_>>());
    let mut gamma_sum = 0.0;
    for &y in &y_target {
        for &p in &full_pred {
            gamma_sum += loss.eval(y, p);
        }
    }
    let gamma = gamma_sum / (n * n) as f64;

    let strata: Vec<Vec<usize>> = data.subgroup_labels().iter().map(|l| data.rows_of(l)).collect();
    let records: Vec<Option<ReplicateRecord>> = (0..options.replicates)
        .into_par_iter()
        .map(|b| {
            let rows = stratified_resample(&strata, options.seed, b);
            let mut drawn = vec![false; data.n_rows()];
            for &r in &rows {
                drawn[r] = true;
            }
            let positions: Vec<usize> = (0..n).filter(|&p| !drawn[target_rows[p]]).collect();
            if positions.is_empty() {
                return Some(ReplicateRecord { target_positions: vec![], predictions: vec![] });
            }
            let resample = work.select_rows(&rows).ok()?;
            let (train, weights) = training_sample(&resample, target_label, method, &options.weighting).ok()?;
            let eval_rows: Vec<usize> = positions.iter().map(|&p| target_rows[p]).collect();
            let eval = work.select_rows(&eval_rows).ok()?;
            let predictions = fit_predict(&train, &weights, &eval, lambda).ok()?;
            Some(ReplicateRecord { target_positions: positions, predictions })
        })
        .collect();
    let failed_replicates = records.iter().filter(|r| r.is_none()).count();

    let oob = oob_error(&records, &y_target, loss);
    let estimate = estimate_632plus(apparent, oob, gamma);

    let mut abs_errors: Vec<Vec<f64>> = vec![Vec::new(); n];
    for rec in records.iter().flatten() {
        for (&pos, &pred) in rec.target_positions.iter().zip(&rec.predictions) {
            abs_errors[pos].push((y_target[pos] - pred).abs());
        }
    }
    let mut degenerate_bands = false;
    let observations = abs_errors
        .into_iter()
        .enumerate()
        .map(|(pos, mut errs)| {
            degenerate_bands |= errs.len() < 2;
            errs.sort_by(f64::total_cmp);
            let (mean_abs_error, p05, p95) = if errs.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                (mean_of(&errs), percentile_sorted(&errs, 5.0), percentile_sorted(&errs, 95.0))
            };
            ObservationError { row: target_rows[pos], y: y_target[pos], n_oob: errs.len(), mean_abs_error, p05, p95 }
        })
        .collect();

    let original_train_y = match lambda {
        Some(l) => inverse_box_cox(train.outcome(), l),
        None => train.outcome().to_vec(),
    };
    Ok(MethodReport {
        method,
        estimate,
        ess: effective_sample_size(&weights)?,
        n_train: train.n_rows(),
        failed_replicates,
        degenerate_bands,
        observations,
        cdf: weighted_cdf(&original_train_y, &weights)?,
        replicates: records,
    })
}

/// Runs all three methods on the same resamples for one target subgroup.
pub fn evaluate_target(data: &Dataset, target_label: &str, options: &BootstrapOptions) -> Result<BootstrapReport> {
    let methods = Method::ALL
        .iter()
        .map(|&m| bootstrap_632plus(data, target_label, m, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(BootstrapReport {
        target_label: target_label.to_string(),
        replicates: options.replicates,
        loss: options.loss,
        box_cox_lambda: options.box_cox_lambda,
        methods,
    })
}
