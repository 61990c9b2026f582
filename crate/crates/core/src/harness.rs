//! Simulation study over a grid of scenarios.
//!
//! Each cell simulates a target subgroup plus `external_count` shifted
//! external subgroups, trains four linear models and scores them on a fresh
//! target test draw shared by all four (paired design):
//!
//! * `local`: target rows only, unit weights;
//! * `global`: all rows, unit weights;
//! * `weighted`: similarity weights `p / max(AUC, 0.5)`;
//! * `p_only`: propensity scores alone, reusing the same propensity fits.
//!
//! Cell seeds are derived from `(master_seed, cell_index, replicate)`, so
//! results do not depend on the number of worker threads.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::glm::{fit_weighted_linear, predict_linear, rmse, LogisticOptions};
use crate::rng::derive_seed;
use crate::scm::{make_shift_vector, simulate, simulate_target_test, ScenarioKind, ScenarioSpec, Similarity};
use crate::stats::{mean, percentile_sorted};
use crate::weights::{assemble_weighted_sample, compare_externals, effective_sample_size, WeightScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kinds: Vec<ScenarioKind>,
    pub similarities: Vec<Similarity>,
    pub external_counts: Vec<usize>,
    pub external_sizes: Vec<usize>,
    pub target_sizes: Vec<usize>,
    pub k: usize,
    pub c: usize,
    pub replicates: usize,
    pub n_test: usize,
    pub master_seed: u64,
    pub truncation_percentile: Option<f64>,
    pub logistic: LogisticOptions,
}

impl GridSpec {
    /// Full design: 3 kinds, 3 similarity levels, 1/3/5/7 externals of
    /// 10..=50 rows, targets of 10..=20 rows, 100 replicates.
    pub fn full() -> Self {
        Self {
            kinds: ScenarioKind::ALL.to_vec(),
            similarities: Similarity::ALL.to_vec(),
            external_counts: vec![1, 3, 5, 7],
            external_sizes: vec![10, 20, 30, 40, 50],
            target_sizes: vec![10, 12, 14, 16, 18, 20],
            k: 3,
            c: 1,
            replicates: 100,
            n_test: 100,
            master_seed: 1,
            truncation_percentile: None,
            logistic: LogisticOptions::default(),
        }
    }

    /// Desk-scale design used by default.
    pub fn reduced() -> Self {
        Self {
            external_sizes: vec![10, 30, 50],
            target_sizes: vec![10, 15, 20],
            replicates: 30,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("kinds", self.kinds.is_empty()),
            ("similarities", self.similarities.is_empty()),
            ("external_counts", self.external_counts.is_empty()),
            ("external_sizes", self.external_sizes.is_empty()),
            ("target_sizes", self.target_sizes.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidParameter(format!("{name} must not be empty")));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be at least 1".into()));
        }
        if self.n_test == 0 || self.k == 0 {
            return Err(Error::InvalidParameter("n_test and k must be at least 1".into()));
        }
        let zero = |v: &[usize]| v.iter().any(|&x| x == 0);
        if zero(&self.external_counts) || zero(&self.external_sizes) || zero(&self.target_sizes) {
            return Err(Error::InvalidParameter("counts and sizes must be positive".into()));
        }
        if let Some(p) = self.truncation_percentile {
            if !(0.0..100.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("truncation percentile {p} outside [0, 100)")));
            }
        }
        Ok(())
    }

    /// Enumerates the cross product times replicates in a fixed order.
    pub fn cells(&self) -> Vec<CellCoords> {
        let mut out = Vec::new();
        let mut index = 0;
        for &kind in &self.kinds {
            for &similarity in &self.similarities {
                for &external_count in &self.external_counts {
                    for &external_size in &self.external_sizes {
                        for &target_size in &self.target_sizes {
                            for replicate in 0..self.replicates {
                                out.push(CellCoords {
                                    cell_index: index,
                                    kind,
                                    similarity,
                                    external_count,
                                    external_size,
                                    target_size,
                                    replicate,
                                });
                            }
                            index += 1;
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCoords {
    pub cell_index: usize,
    pub kind: ScenarioKind,
    pub similarity: Similarity,
    pub external_count: usize,
    pub external_size: usize,
    pub target_size: usize,
    pub replicate: usize,
}

/// Knobs shared by all cells of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellSettings {
    pub k: usize,
    pub c: usize,
    pub n_test: usize,
    pub master_seed: u64,
    pub truncation_percentile: Option<f64>,
    pub logistic: LogisticOptions,
    /// Diagnostic override: every external row gets this weight in the
    /// weighted and p-only samples.
    pub forced_external_weight: Option<f64>,
}

impl From<&GridSpec> for CellSettings {
    fn from(spec: &GridSpec) -> Self {
        Self {
            k: spec.k,
            c: spec.c,
            n_test: spec.n_test,
            master_seed: spec.master_seed,
            truncation_percentile: spec.truncation_percentile,
            logistic: spec.logistic,
            forced_external_weight: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleType {
    Weighted,
    PropensityOnly,
    Local,
    Global,
}

impl SampleType {
    pub const ALL: [SampleType; 4] =
        [SampleType::Weighted, SampleType::PropensityOnly, SampleType::Local, SampleType::Global];
}

/// One row of the results table. Comparators whose fit failed carry NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell_index: usize,
    pub kind: ScenarioKind,
    pub similarity: Similarity,
    pub external_count: usize,
    pub external_size: usize,
    pub target_size: usize,
    pub replicate: usize,
    pub seed: u64,
    pub rmse_weighted: f64,
    pub rmse_p_only: f64,
    pub rmse_local: f64,
    pub rmse_global: f64,
    pub ess_weighted: f64,
    pub ess_p_only: f64,
    pub ess_ratio_rounded: i64,
    pub failed_propensity_fits: usize,
    pub failure: String,
}

impl CellResult {
    pub fn rmse(&self, sample: SampleType) -> f64 {
        match sample {
            SampleType::Weighted => self.rmse_weighted,
            SampleType::PropensityOnly => self.rmse_p_only,
            SampleType::Local => self.rmse_local,
            SampleType::Global => self.rmse_global,
        }
    }

    pub fn ess_ratio_weighted(&self) -> f64 {
        self.ess_weighted / self.target_size as f64
    }

    pub fn ess_ratio_p_only(&self) -> f64 {
        self.ess_p_only / self.target_size as f64
    }

    pub fn is_complete(&self) -> bool {
        SampleType::ALL.iter().all(|&s| self.rmse(s).is_finite())
    }
}

fn fit_and_score(train: &Dataset, weights: &[f64], test: &Dataset) -> Result<f64> {
    let fit = fit_weighted_linear(train.covariates(), train.outcome(), weights)?;
    let predicted = predict_linear(&fit, test.covariates())?;
    rmse(&predicted, test.outcome())
}

pub fn cell_seed(master_seed: u64, coords: &CellCoords) -> u64 {
    derive_seed(&[master_seed, coords.cell_index as u64, coords.replicate as u64])
}

/// Simulates, weights, fits and scores a single cell.
pub fn run_cell(coords: &CellCoords, settings: &CellSettings) -> Result<CellResult> {
    let seed = cell_seed(settings.master_seed, coords);
    let shifts = make_shift_vector(coords.external_count, coords.similarity)?;
    let mut sizes = vec![coords.target_size];
    sizes.extend(std::iter::repeat_n(coords.external_size, coords.external_count));
    let spec = ScenarioSpec::new(coords.kind, shifts, sizes, settings.k, settings.c, seed);
    let sim = simulate(&spec)?;
    let test = simulate_target_test(&spec, settings.n_test)?;
    let (target, externals) = sim.data.split_target("0")?;

    let comparisons = compare_externals(&target, &externals, &settings.logistic);
    let failed_propensity_fits = comparisons.iter().filter(|c| c.is_err()).count();
    let mut weighted = assemble_weighted_sample(
        &target,
        &externals,
        &comparisons,
        WeightScheme::Adjusted,
        settings.truncation_percentile,
    )?;
    let mut p_only = assemble_weighted_sample(
        &target,
        &externals,
        &comparisons,
        WeightScheme::PropensityOnly,
        settings.truncation_percentile,
    )?;
    if let Some(forced) = settings.forced_external_weight {
        for sample in [&mut weighted, &mut p_only] {
            for w in &mut sample.weights[sample.n_target..] {
                *w = forced;
            }
            sample.ess = effective_sample_size(&sample.weights)?;
            sample.ess_ratio = sample.ess / sample.n_target as f64;
        }
    }

    let mut failures = Vec::new();
    let mut score = |name: &str, train: &Dataset, weights: &[f64]| match fit_and_score(train, weights, &test) {
        Ok(v) => v,
        Err(err) => {
            failures.push(format!("{name}: {err}"));
            f64::NAN
        }
    };
    let rmse_local = score("local", &target, &vec![1.0; target.n_rows()]);
    let rmse_global = score("global", &sim.data, &vec![1.0; sim.data.n_rows()]);
    let rmse_weighted = score("weighted", &weighted.data, &weighted.weights);
    let rmse_p_only = score("p_only", &p_only.data, &p_only.weights);

    Ok(CellResult {
        cell_index: coords.cell_index,
        kind: coords.kind,
        similarity: coords.similarity,
        external_count: coords.external_count,
        external_size: coords.external_size,
        target_size: coords.target_size,
        replicate: coords.replicate,
        seed,
        rmse_weighted,
        rmse_p_only,
        rmse_local,
        rmse_global,
        ess_weighted: weighted.ess,
        ess_p_only: p_only.ess,
        ess_ratio_rounded: weighted.ess_ratio.round() as i64,
        failed_propensity_fits,
        failure: failures.join("; "),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleAverage {
    pub sample: SampleType,
    /// Mean RMSE over cells where this comparator could be fitted.
    pub average_rmse: f64,
    pub completed: usize,
    pub failed: usize,
}

/// Quartiles and mean of one comparator's RMSE inside a stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub ess_ratio: i64,
    pub similarity: Similarity,
    pub kind: ScenarioKind,
    pub sample: SampleType,
    pub count: usize,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub cells: usize,
    /// Cells where at least one comparator failed or a propensity fit
    /// soft-failed.
    pub failed_cells: usize,
    pub average_rmse_weighted: f64,
    pub average_rmse_p_only: f64,
    pub average_rmse_local: f64,
    pub average_rmse_global: f64,
    pub average_ess_ratio_weighted: f64,
    pub average_ess_ratio_p_only: f64,
    pub samples: Vec<SampleAverage>,
    pub strata: Vec<Stratum>,
}

fn finite_mean<I: Iterator<Item = f64>>(values: I) -> (f64, usize, usize) {
    let (mut sum, mut ok, mut bad) = (0.0, 0, 0);
    for v in values {
        if v.is_finite() {
            sum += v;
            ok += 1;
        } else {
            bad += 1;
        }
    }
    (if ok > 0 { sum / ok as f64 } else { f64::NAN }, ok, bad)
}

/// Groups cells by (rounded weighted ESS ratio, similarity, kind) and
/// reports, for each comparator, the mean and type-7 quartiles of its RMSE.
/// Strata without any finite value are omitted.
pub fn summarize_by_ess_ratio(results: &[CellResult]) -> Vec<Stratum> {
    let mut groups: BTreeMap<(i64, Similarity, ScenarioKind, SampleType), Vec<f64>> = BTreeMap::new();
    for r in results {
        for sample in SampleType::ALL {
            let v = r.rmse(sample);
            if v.is_finite() {
                groups.entry((r.ess_ratio_rounded, r.similarity, r.kind, sample)).or_default().push(v);
            }
        }
    }
    groups
        .into_iter()
        .map(|((ess_ratio, similarity, kind, sample), mut values)| {
            values.sort_by(f64::total_cmp);
            Stratum {
                ess_ratio,
                similarity,
                kind,
                sample,
                count: values.len(),
                mean: mean(&values).unwrap_or(f64::NAN),
                q1: percentile_sorted(&values, 25.0),
                median: percentile_sorted(&values, 50.0),
                q3: percentile_sorted(&values, 75.0),
            }
        })
        .collect()
}

pub fn summarize(results: &[CellResult]) -> GridSummary {
    let samples: Vec<SampleAverage> = SampleType::ALL
        .iter()
        .map(|&sample| {
            let (average_rmse, completed, failed) = finite_mean(results.iter().map(|r| r.rmse(sample)));
            SampleAverage { sample, average_rmse, completed, failed }
        })
        .collect();
    let avg = |s: SampleType| samples.iter().find(|a| a.sample == s).map_or(f64::NAN, |a| a.average_rmse);
    GridSummary {
        cells: results.len(),
        failed_cells: results
            .iter()
            .filter(|r| !r.is_complete() || r.failed_propensity_fits > 0)
            .count(),
        average_rmse_weighted: avg(SampleType::Weighted),
        average_rmse_p_only: avg(SampleType::PropensityOnly),
        average_rmse_local: avg(SampleType::Local),
        average_rmse_global: avg(SampleType::Global),
        average_ess_ratio_weighted: finite_mean(results.iter().map(|r| r.ess_ratio_weighted())).0,
        average_ess_ratio_p_only: finite_mean(results.iter().map(|r| r.ess_ratio_p_only())).0,
        samples,
        strata: summarize_by_ess_ratio(results),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutput {
    pub results: Vec<CellResult>,
    pub summary: GridSummary,
    /// Cells that could not be simulated at all, with the reason.
    pub errors: Vec<(CellCoords, String)>,
}

/// Runs every cell of the grid on `jobs` worker threads (0 = all cores).
pub fn run_grid(spec: &GridSpec, jobs: usize) -> Result<GridOutput> {
    spec.validate()?;
    let settings = CellSettings::from(spec);
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    let outcomes: Vec<(CellCoords, Result<CellResult>)> =
        pool.install(|| cells.par_iter().map(|c| (*c, run_cell(c, &settings))).collect());

    let mut results = Vec::with_capacity(outcomes.len());
    let mut errors = Vec::new();
    for (coords, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => errors.push((coords, e.to_string())),
        }
    }
    let mut summary = summarize(&results);
    summary.failed_cells += errors.len();
    Ok(GridOutput { results, summary, errors })
}

/// Writes one CSV row per cell, with a header matching the field names of
/// [`CellResult`].
pub fn write_results_csv<W: Write>(results: &[CellResult], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for r in results {
        csv.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> CellSettings {
        CellSettings { k: 3, c: 1, n_test: 100, master_seed: 42, ..Default::default() }
    }

    fn coords(kind: ScenarioKind, similarity: Similarity) -> CellCoords {
        CellCoords {
            cell_index: 0,
            kind,
            similarity,
            external_count: 3,
            external_size: 20,
            target_size: 12,
            replicate: 0,
        }
    }

    #[test]
    fn forced_unit_weights_reproduce_global() {
        let s = CellSettings { forced_external_weight: Some(1.0), ..settings() };
        let r = run_cell(&coords(ScenarioKind::Covariate, Similarity::Similar), &s).unwrap();
        assert!((r.rmse_weighted - r.rmse_global).abs() < 1e-10);
        assert!((r.rmse_p_only - r.rmse_global).abs() < 1e-10);
    }

    #[test]
    fn forced_zero_weights_reproduce_local() {
        let s = CellSettings { forced_external_weight: Some(0.0), ..settings() };
        let r = run_cell(&coords(ScenarioKind::Outcome, Similarity::Dissimilar), &s).unwrap();
        assert_eq!(r.rmse_weighted, r.rmse_local);
        assert_eq!(r.ess_weighted, 12.0);
        assert_eq!(r.ess_ratio_rounded, 1);
    }

    #[test]
    fn small_cell_is_reproducible() {
        let c = CellCoords {
            cell_index: 3,
            kind: ScenarioKind::Outcome,
            similarity: Similarity::Similar,
            external_count: 1,
            external_size: 10,
            target_size: 10,
            replicate: 2,
        };
        let a = run_cell(&c, &settings()).unwrap();
        let b = run_cell(&c, &settings()).unwrap();
        assert_eq!(a.rmse_weighted.to_bits(), b.rmse_weighted.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn single_cell_summary_is_identity() {
        let spec = GridSpec {
            kinds: vec![ScenarioKind::Covariate],
            similarities: vec![Similarity::Medium],
            external_counts: vec![3],
            external_sizes: vec![20],
            target_sizes: vec![15],
            replicates: 1,
            ..GridSpec::reduced()
        };
        let out = run_grid(&spec, 1).unwrap();
        assert_eq!(out.results.len(), 1);
        let r = &out.results[0];
        let s = &out.summary;
        assert_eq!(s.cells, 1);
        assert_eq!(s.average_rmse_weighted, r.rmse_weighted);
        assert_eq!(s.average_rmse_p_only, r.rmse_p_only);
        assert_eq!(s.average_rmse_local, r.rmse_local);
        assert_eq!(s.average_rmse_global, r.rmse_global);
        assert_eq!(s.average_ess_ratio_weighted, r.ess_weighted / 15.0);
        assert_eq!(s.average_ess_ratio_p_only, r.ess_p_only / 15.0);
    }

    fn synthetic(ess: i64, sim: Similarity, kind: ScenarioKind, rmse: [f64; 4]) -> CellResult {
        CellResult {
            cell_index: 0,
            kind,
            similarity: sim,
            external_count: 1,
            external_size: 10,
            target_size: 10,
            replicate: 0,
            seed: 0,
            rmse_weighted: rmse[0],
            rmse_p_only: rmse[1],
            rmse_local: rmse[2],
            rmse_global: rmse[3],
            ess_weighted: ess as f64 * 10.0,
            ess_p_only: ess as f64 * 10.0,
            ess_ratio_rounded: ess,
            failed_propensity_fits: 0,
            failure: String::new(),
        }
    }

    #[test]
    fn strata_quartiles_match_direct_computation() {
        let values = [3.0, 1.0, 4.0, 1.5, 9.0];
        let results: Vec<CellResult> = values
            .iter()
            .map(|&v| synthetic(2, Similarity::Similar, ScenarioKind::Outcome, [v, 0.0, 0.0, 0.0]))
            .collect();
        let strata = summarize_by_ess_ratio(&results);
        let w = strata.iter().find(|s| s.sample == SampleType::Weighted).unwrap();
        // sorted: 1, 1.5, 3, 4, 9 ; type 7 positions 1, 2, 3 (0-based)
        assert_eq!(w.count, 5);
        assert_eq!(w.q1, 1.5);
        assert_eq!(w.median, 3.0);
        assert_eq!(w.q3, 4.0);
        assert!((w.mean - 18.5 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn strata_grouping_and_omission() {
        let results = vec![
            synthetic(1, Similarity::Similar, ScenarioKind::Outcome, [1.0, 1.0, 1.0, 1.0]),
            synthetic(1, Similarity::Similar, ScenarioKind::Outcome, [2.0, 2.0, 2.0, f64::NAN]),
        ];
        let strata = summarize_by_ess_ratio(&results);
        let count = |s: SampleType| strata.iter().find(|x| x.sample == s).map(|x| x.count);
        assert_eq!(count(SampleType::Weighted), count(SampleType::Local));
        assert_eq!(count(SampleType::Global), Some(1));
        assert!(strata.iter().all(|s| s.ess_ratio == 1));
        assert_eq!(strata.len(), 4);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let spec = GridSpec { kinds: vec![], ..GridSpec::reduced() };
        assert!(matches!(run_grid(&spec, 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn csv_header_is_stable() {
        let mut buf = Vec::new();
        write_results_csv(
            &[synthetic(1, Similarity::Medium, ScenarioKind::CovariateOutcome, [1.0, 2.0, 3.0, f64::NAN])],
            &mut buf,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "cell_index,kind,similarity,external_count,external_size,target_size,replicate,seed,\
             rmse_weighted,rmse_p_only,rmse_local,rmse_global,ess_weighted,ess_p_only,\
             ess_ratio_rounded,failed_propensity_fits,failure"
        );
        assert!(lines.next().unwrap().starts_with("0,covariate-outcome,medium,1,10,10,0,0,1.0,2.0,3.0,NaN,"));
    }
}
