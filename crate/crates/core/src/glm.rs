//! Weighted logistic and linear regression.
//!
//! Both models always carry an unpenalized intercept as the first
//! coefficient. Covariates are used as given; nothing is standardized.
//!
//! The logistic fit maximizes
//!
//! ```text
//! sum_i w_i * (y_i * eta_i - log(1 + exp(eta_i))) - ridge / 2 * |slopes|^2
//! ```
//!
//! by iteratively reweighted least squares with step halving. The penalty is
//! not normalized by the sample size or the weight total, so an integer
//! weight `w_i` is exactly equivalent to replicating row `i` `w_i` times
//! under the same `ridge`. Scaling all weights by `c` is equivalent to
//! dividing `ridge` by `c`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_FLOOR: f64 = 1e-15;
const VARIANCE_FLOOR: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    pub ridge: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self { ridge: 1e-6, max_iter: 100, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    /// Intercept first, then one slope per column.
    pub coefficients: Vec<f64>,
    pub fitted_probabilities: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Penalized deviance, `-2 * objective`.
    pub final_deviance: f64,
    pub ridge_penalty: f64,
}

impl LogisticFit {
    pub fn n_features(&self) -> usize {
        self.coefficients.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Intercept first, then one slope per column.
    pub coefficients: Vec<f64>,
    pub training_weight_total: f64,
}

impl LinearFit {
    pub fn n_features(&self) -> usize {
        self.coefficients.len() - 1
    }
}

/// Numerically stable logistic function, clamped to the open unit interval.
pub fn logistic(eta: f64) -> f64 {
    let p = if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// `log(1 + exp(eta))` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

fn linear_predictor(design: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
    design * beta
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::LengthMismatch { left: n, right: weights.len() });
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidParameter(format!("weight {bad} is not a finite nonnegative number")));
    }
    Ok(())
}

/// Minimizes `sum_i w_i (z_i - a_i' beta)^2 + ridge * |beta[1..]|^2` by a
/// column-equilibrated QR factorization of the (augmented) weighted design.
/// Returns `None` when the system is numerically rank deficient.
fn solve_penalized_wls(
    design: &DMatrix<f64>,
    response: &[f64],
    weights: &[f64],
    ridge: f64,
) -> Option<DVector<f64>> {
    let n = design.nrows();
    let p = design.ncols();
    let extra = if ridge > 0.0 { p - 1 } else { 0 };
    let mut a = DMatrix::zeros(n + extra, p);
    let mut b = DVector::zeros(n + extra);
    for i in 0..n {
        let sw = weights[i].sqrt();
        for j in 0..p {
            a[(i, j)] = sw * design[(i, j)];
        }
        b[i] = sw * response[i];
    }
    let sr = ridge.sqrt();
    for j in 1..=extra {
        a[(n + j - 1, j)] = sr;
    }

    let mut scale = vec![1.0; p];
    for (j, s) in scale.iter_mut().enumerate() {
        let norm = a.column(j).norm();
        if norm == 0.0 {
            return None;
        }
        *s = norm;
        a.column_mut(j).unscale_mut(norm);
    }

    if a.nrows() < p {
        return None;
    }
    let qr = a.qr();
    let r = qr.r();
    if (0..p).any(|j| r[(j, j)].abs() < RANK_TOL) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    let mut beta = r.solve_upper_triangular(&qtb)?;
    for j in 0..p {
        beta[j] /= scale[j];
    }
    beta.iter().all(|v| v.is_finite()).then_some(beta)
}

fn penalized_deviance(
    eta: &DVector<f64>,
    labels: &[bool],
    weights: &[f64],
    beta: &DVector<f64>,
    ridge: f64,
) -> f64 {
    let loglik: f64 = eta
        .iter()
        .zip(labels)
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|((&e, &y), &w)| w * (if y { e } else { 0.0 } - softplus(e)))
        .sum();
    let penalty: f64 = beta.iter().skip(1).map(|b| b * b).sum::<f64>() * ridge / 2.0;
    -2.0 * (loglik - penalty)
}

/// Fits a (weighted, ridge-penalized) logistic regression by IRLS.
///
/// Convergence is declared when the relative change of the penalized
/// deviance, `|D_new - D_old| / (|D_new| + 0.1)`, drops below `tol`.
pub fn fit_logistic(
    x: &DMatrix<f64>,
    labels: &[bool],
    weights: Option<&[f64]>,
    options: &LogisticOptions,
) -> Result<LogisticFit> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::LengthMismatch { left: n, right: labels.len() });
    }
    if n == 0 || x.ncols() == 0 {
        return Err(Error::Empty("logistic design"));
    }
    if !(options.ridge >= 0.0 && options.ridge.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge {} must be >= 0", options.ridge)));
    }
    let ones;
    let weights = match weights {
        Some(w) => {
            check_weights(w, n)?;
            w
        }
        None => {
            ones = vec![1.0; n];
            &ones[..]
        }
    };

    let (pos, neg) = labels.iter().zip(weights).filter(|(_, w)| **w > 0.0).fold(
        (0.0, 0.0),
        |(p, q), (&y, &w)| if y { (p + w, q) } else { (p, q + w) },
    );
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::SingleClass);
    }

    let design = with_intercept(x);
    let p = design.ncols();
    let ridge = options.ridge;
    let mut beta = DVector::zeros(p);
    beta[0] = (pos / neg).ln();
    let mut eta = linear_predictor(&design, &beta);
    let mut deviance = penalized_deviance(&eta, labels, weights, &beta, ridge);

    let mut converged = false;
    let mut iterations = 0;
    let mut working_weights = vec![0.0; n];
    let mut working_response = vec![0.0; n];

    while iterations < options.max_iter {
        iterations += 1;
        for i in 0..n {
            let mu = logistic(eta[i]);
            let v = (mu * (1.0 - mu)).max(VARIANCE_FLOOR);
            let y = if labels[i] { 1.0 } else { 0.0 };
            working_weights[i] = weights[i] * v;
            working_response[i] = eta[i] + (y - mu) / v;
        }
        let proposal = solve_penalized_wls(&design, &working_response, &working_weights, ridge)
            .ok_or_else(|| {
                Error::NumericalFailure("weighted design matrix is rank deficient".into())
            })?;

        let step = &proposal - &beta;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &beta + &step * scale;
            let cand_eta = linear_predictor(&design, &candidate);
            let cand_dev = penalized_deviance(&cand_eta, labels, weights, &candidate, ridge);
            if cand_dev.is_finite() && cand_dev <= deviance * (1.0 + 1e-12) + 1e-12 {
                accepted = Some((candidate, cand_eta, cand_dev));
                break;
            }
            scale *= 0.5;
        }
        let Some((new_beta, new_eta, new_dev)) = accepted else {
            // No descent direction left; we are at the optimum to working precision.
            converged = true;
            break;
        };
        let change = (new_dev - deviance).abs() / (new_dev.abs() + 0.1);
        beta = new_beta;
        eta = new_eta;
        deviance = new_dev;
        if change < options.tol {
            converged = true;
            break;
        }
    }

    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NumericalFailure("non-finite coefficients".into()));
    }
    Ok(LogisticFit {
        fitted_probabilities: eta.iter().map(|&e| logistic(e)).collect(),
        coefficients: beta.iter().copied().collect(),
        converged,
        iterations,
        final_deviance: deviance,
        ridge_penalty: ridge,
    })
}

fn linear_part(coefficients: &[f64], x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let d = coefficients.len() - 1;
    if x.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: x.ncols() });
    }
    Ok(x.row_iter()
        .map(|row| coefficients[0] + row.iter().zip(&coefficients[1..]).map(|(a, b)| a * b).sum::<f64>())
        .collect())
}

pub fn predict_proba(fit: &LogisticFit, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(linear_part(&fit.coefficients, x)?.into_iter().map(logistic).collect())
}

/// Weighted least squares with intercept. Rows with zero weight have no
/// influence on the solution.
pub fn fit_weighted_linear(x: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Result<LinearFit> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    check_weights(weights, n)?;
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZero);
    }
    let active: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    if active.len() < x.ncols() + 1 {
        return Err(Error::RankDeficient);
    }
    let design = with_intercept(&x.select_rows(active.iter()));
    let ys: Vec<f64> = active.iter().map(|&i| y[i]).collect();
    let ws: Vec<f64> = active.iter().map(|&i| weights[i]).collect();
    let beta = solve_penalized_wls(&design, &ys, &ws, 0.0).ok_or(Error::RankDeficient)?;
    Ok(LinearFit { coefficients: beta.iter().copied().collect(), training_weight_total: total })
}

pub fn predict_linear(fit: &LinearFit, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    linear_part(&fit.coefficients, x)
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: actual.len() });
    }
    if predicted.is_empty() {
        return Err(Error::Empty("rmse input"));
    }
    let sse: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sse / predicted.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    fn objective(b0: f64, b1: f64, x: &[f64], y: &[bool], ridge: f64) -> f64 {
        let mut ll = 0.0;
        for (xi, yi) in x.iter().zip(y) {
            let eta = b0 + b1 * xi;
            ll += if *yi { eta } else { 0.0 } - (1.0 + eta.exp()).ln();
        }
        ll - ridge * b1 * b1 / 2.0
    }

    /// Exhaustive grid search over [-10, 10]^2 followed by a finer grid
    /// around the best coarse point.
    fn grid_search(x: &[f64], y: &[bool], ridge: f64) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        let coarse = 0.05;
        for i in 0..=400 {
            for j in 0..=400 {
                let (b0, b1) = (-10.0 + i as f64 * coarse, -10.0 + j as f64 * coarse);
                let v = objective(b0, b1, x, y, ridge);
                if v > best.0 {
                    best = (v, b0, b1);
                }
            }
        }
        let (c0, c1) = (best.1, best.2);
        let fine = 1e-4;
        for i in -1000..=1000 {
            for j in -1000..=1000 {
                let (b0, b1) = (c0 + i as f64 * fine, c1 + j as f64 * fine);
                let v = objective(b0, b1, x, y, ridge);
                if v > best.0 {
                    best = (v, b0, b1);
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn balanced_independent_labels_give_zero_coefficients() {
        let x = column(&[-1.0, -1.0, 1.0, 1.0]);
        let fit = fit_logistic(&x, &[false, true, false, true], None, &LogisticOptions::default())
            .unwrap();
        assert!(fit.converged);
        for c in &fit.coefficients {
            assert!(c.abs() < 1e-9, "{c}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = column(&[1.0, 2.0, 3.0]);
        let err = fit_logistic(&x, &[true, true, true], None, &LogisticOptions::default());
        assert_eq!(err.unwrap_err(), Error::SingleClass);
        // zero-weighted rows do not count as a second class
        let err = fit_logistic(&x, &[true, true, false], Some(&[1.0, 1.0, 0.0]), &LogisticOptions::default());
        assert_eq!(err.unwrap_err(), Error::SingleClass);
    }

    #[test]
    fn irls_matches_grid_search_oracle() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        let ys = [false, true, false, true, true, true];
        let (g0, g1) = grid_search(&xs, &ys, 1e-6);
        let opts = LogisticOptions { ridge: 1e-6, ..Default::default() };
        let fit = fit_logistic(&column(&xs), &ys, None, &opts).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - g0).abs() < 1e-3, "{:?} vs {g0}", fit.coefficients);
        assert!((fit.coefficients[1] - g1).abs() < 1e-3, "{:?} vs {g1}", fit.coefficients);
    }

    #[test]
    fn converged_fit_satisfies_score_equations() {
        let x = DMatrix::from_row_slice(8, 2, &[
            0.1, 1.0, -0.4, 0.3, 1.2, -0.7, 0.5, 0.5, -1.1, 0.2, 0.9, -0.3, 0.0, 1.4, -0.6, -0.9,
        ]);
        let y = [true, false, true, true, false, false, true, false];
        let w = [1.0, 2.0, 0.5, 1.0, 1.5, 1.0, 0.3, 2.0];
        let ridge = 0.1;
        let fit = fit_logistic(&x, &y, Some(&w), &LogisticOptions { ridge, ..Default::default() }).unwrap();
        assert!(fit.converged);
        let design = with_intercept(&x);
        for j in 0..3 {
            let mut g: f64 = (0..8)
                .map(|i| w[i] * (if y[i] { 1.0 } else { 0.0 } - fit.fitted_probabilities[i]) * design[(i, j)])
                .sum();
            if j > 0 {
                g -= ridge * fit.coefficients[j];
            }
            assert!(g.abs() < 1e-6, "score {j}: {g}");
        }
    }

    #[test]
    fn integer_weights_match_replication() {
        let xs = [0.3, -1.2, 0.8, 2.0, -0.5, 1.1];
        let ys = [true, false, false, true, true, false];
        let w = [2.0, 1.0, 3.0, 1.0, 2.0, 1.0];
        let opts = LogisticOptions { ridge: 0.05, ..Default::default() };
        let weighted = fit_logistic(&column(&xs), &ys, Some(&w), &opts).unwrap();
        let mut rx = Vec::new();
        let mut ry = Vec::new();
        for i in 0..6 {
            for _ in 0..w[i] as usize {
                rx.push(xs[i]);
                ry.push(ys[i]);
            }
        }
        let replicated = fit_logistic(&column(&rx), &ry, None, &opts).unwrap();
        for (a, b) in weighted.coefficients.iter().zip(&replicated.coefficients) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn separable_data_with_ridge_stays_finite() {
        let x = column(&[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = [false, false, false, true, true, true];
        let fit = fit_logistic(&x, &y, None, &LogisticOptions::default()).unwrap();
        assert!(fit.coefficients.iter().all(|c| c.is_finite()));
        assert!(fit.fitted_probabilities.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn collinear_design_without_ridge_fails_loudly() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let y = [false, true, false, true];
        let err = fit_logistic(&x, &y, None, &LogisticOptions { ridge: 0.0, ..Default::default() });
        assert!(matches!(err, Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn predict_proba_examples() {
        let fit = LogisticFit {
            coefficients: vec![1.0, 2.0],
            fitted_probabilities: vec![],
            converged: true,
            iterations: 0,
            final_deviance: 0.0,
            ridge_penalty: 0.0,
        };
        let p = predict_proba(&fit, &column(&[1.0])).unwrap();
        let expected = 3f64.exp() / (1.0 + 3f64.exp());
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.95257).abs() < 1e-5);

        let zero = LogisticFit { coefficients: vec![0.0, 0.0, 0.0], ..fit.clone() };
        let x = DMatrix::from_row_slice(2, 2, &[5.0, -3.0, 0.1, 100.0]);
        assert_eq!(predict_proba(&zero, &x).unwrap(), vec![0.5, 0.5]);

        let unit = LogisticFit { coefficients: vec![0.0, 1.0], ..fit.clone() };
        assert_eq!(predict_proba(&unit, &column(&[0.0])).unwrap(), vec![0.5]);

        assert_eq!(
            predict_proba(&fit, &x).unwrap_err(),
            Error::DimensionMismatch { expected: 1, actual: 2 }
        );
    }

    #[test]
    fn linear_examples() {
        let fit = fit_weighted_linear(&column(&[0.0, 1.0, 2.0]), &[0.0, 1.0, 2.0], &[1.0; 3]).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);

        let fit = fit_weighted_linear(
            &column(&[0.0, 1.0, 2.0, 100.0]),
            &[0.0, 1.0, 2.0, -50.0],
            &[1.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);
        assert_eq!(fit.training_weight_total, 3.0);
    }

    #[test]
    fn integer_weighted_linear_matches_replication() {
        let xs = [0.5, 1.7, -0.3];
        let ys = [1.0, 2.5, 0.2];
        let w = [2.0, 1.0, 3.0];
        let weighted = fit_weighted_linear(&column(&xs), &ys, &w).unwrap();
        let (mut rx, mut ry) = (Vec::new(), Vec::new());
        for i in 0..3 {
            for _ in 0..w[i] as usize {
                rx.push(xs[i]);
                ry.push(ys[i]);
            }
        }
        let replicated = fit_weighted_linear(&column(&rx), &ry, &vec![1.0; rx.len()]).unwrap();
        for (a, b) in weighted.coefficients.iter().zip(&replicated.coefficients) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn linear_rank_deficiency() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        assert_eq!(fit_weighted_linear(&x, &[1.0, 2.0, 3.0, 4.0], &[1.0; 4]).unwrap_err(), Error::RankDeficient);
        // too few positively weighted rows
        let x = column(&[1.0, 2.0, 3.0]);
        assert_eq!(fit_weighted_linear(&x, &[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0]).unwrap_err(), Error::RankDeficient);
        assert_eq!(fit_weighted_linear(&x, &[1.0, 2.0, 3.0], &[0.0; 3]).unwrap_err(), Error::AllZero);
    }

    #[test]
    fn predict_linear_examples() {
        let f = |c: Vec<f64>| LinearFit { coefficients: c, training_weight_total: 1.0 };
        assert_eq!(predict_linear(&f(vec![0.0, 1.0]), &column(&[3.0])).unwrap(), vec![3.0]);
        assert_eq!(predict_linear(&f(vec![2.0, 0.0]), &column(&[-7.5])).unwrap(), vec![2.0]);
        let x = DMatrix::from_row_slice(1, 2, &[2.0, 3.0]);
        assert_eq!(predict_linear(&f(vec![1.0, 2.0, -1.0]), &x).unwrap(), vec![2.0]);
        assert!(matches!(predict_linear(&f(vec![1.0, 2.0]), &x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355339).abs() < 1e-6);
        assert_eq!(rmse(&[1.0], &[1.0, 2.0]).unwrap_err(), Error::LengthMismatch { left: 1, right: 2 });
        assert!(matches!(rmse(&[], &[]), Err(Error::Empty(_))));

        let a: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..10).map(|i| (i as f64 * 1.91).cos()).collect();
        let mut acc = 0.0;
        for i in 0..10 {
            acc += (a[i] - b[i]) * (a[i] - b[i]);
        }
        assert_eq!(rmse(&a, &b).unwrap(), (acc / 10.0).sqrt());
    }

    fn ols_closed_form(x: &[f64], y: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        (my - slope * mx, slope)
    }

    proptest! {
        #[test]
        fn unit_weights_equal_closed_form_ols(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4..20)
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let mx = x.iter().sum::<f64>() / x.len() as f64;
            prop_assume!(x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() > 1e-2);
            let fit = fit_weighted_linear(&column(&x), &y, &vec![1.0; x.len()]).unwrap();
            let (b0, b1) = ols_closed_form(&x, &y);
            prop_assert!((fit.coefficients[0] - b0).abs() < 1e-10);
            prop_assert!((fit.coefficients[1] - b1).abs() < 1e-10);
        }

        #[test]
        fn weight_scaling_leaves_fits_unchanged(
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0.1f64..3.0), 6..20),
            c in 0.01f64..100.0,
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let w: Vec<f64> = pts.iter().map(|p| p.2).collect();
            let ws: Vec<f64> = w.iter().map(|v| v * c).collect();
            let mx = x.iter().sum::<f64>() / x.len() as f64;
            prop_assume!(x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() > 1e-1);
            let a = fit_weighted_linear(&column(&x), &y, &w).unwrap();
            let b = fit_weighted_linear(&column(&x), &y, &ws).unwrap();
            for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
                prop_assert!((u - v).abs() < 1e-10);
            }

            // Non-separable labels so the unpenalized MLE exists.
            let labels: Vec<bool> = (0..x.len()).map(|i| (y[i] + 0.7 * x[i]) > 0.0).collect();
            let xs = column(&x);
            let opts = LogisticOptions { ridge: 0.0, ..Default::default() };
            let mut labels = labels;
            labels[0] = !labels[0];
            labels[1] = !labels[1];
            // In one dimension the MLE exists iff the classes overlap on both sides.
            let span = |cls: bool| {
                let v: Vec<f64> = x.iter().zip(&labels).filter(|(_, &l)| l == cls).map(|(a, _)| *a).collect();
                (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            };
            let ((t_lo, t_hi), (f_lo, f_hi)) = (span(true), span(false));
            prop_assume!(t_lo < f_hi && f_lo < t_hi);
            if let (Ok(l1), Ok(l2)) = (
                fit_logistic(&xs, &labels, Some(&w), &opts),
                fit_logistic(&xs, &labels, Some(&ws), &opts),
            ) {
                if l1.converged && l2.converged && l1.coefficients.iter().all(|c| c.abs() < 20.0) {
                    for (u, v) in l1.coefficients.iter().zip(&l2.coefficients) {
                        prop_assert!((u - v).abs() < 1e-5, "{} vs {}", u, v);
                    }
                }
            }
        }

        #[test]
        fn predict_proba_is_monotone(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let fit = LogisticFit {
                coefficients: vec![0.0, 1.0],
                fitted_probabilities: vec![],
                converged: true,
                iterations: 0,
                final_deviance: 0.0,
                ridge_penalty: 0.0,
            };
            let p = predict_proba(&fit, &column(&[a, b])).unwrap();
            prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
            if a <= b { prop_assert!(p[0] <= p[1]); } else { prop_assert!(p[0] >= p[1]); }
        }
    }
}
