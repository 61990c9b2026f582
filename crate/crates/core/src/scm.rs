//! Data generation from three linear structural causal models with a
//! subgroup-specific mean shift `a`.
//!
//! All noise terms are independent standard normals. With `k` subgroup-
//! specific covariates `x_s`, `c` global covariates `x_g` and the default
//! structural coefficients:
//!
//! | kind                | `h`       | `x_s,p`       | `y`                                   |
//! |---------------------|-----------|---------------|---------------------------------------|
//! | `Covariate`         | `e_h`     | `e + h + a`   | `sum x_g + sum x_s + 2h + e_y`        |
//! | `Outcome`           | `e_h`     | `e + h`       | `sum x_g + sum x_s + 2h + e_y + a`    |
//! | `CovariateOutcome`  | `e_h + a` | `e + h`       | `sum x_g + sum x_s + 2h + e_y`        |
//!
//! and `x_g,i = e` in every kind.
//!
//! Per-row draw order is `e_h`, `e_xs[0..k]`, `e_xg[0..c]`, `e_y`, using
//! ChaCha8 streams and the ziggurat normal sampler of `rand_distr`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

const TEST_STREAM: u64 = 1 << 63;
const MEMBERSHIP_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Covariate,
    Outcome,
    CovariateOutcome,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] =
        [ScenarioKind::Covariate, ScenarioKind::Outcome, ScenarioKind::CovariateOutcome];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Covariate => "covariate",
            ScenarioKind::Outcome => "outcome",
            ScenarioKind::CovariateOutcome => "covariate-outcome",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "covariate" => Ok(ScenarioKind::Covariate),
            "outcome" => Ok(ScenarioKind::Outcome),
            "covariate-outcome" | "covariate+outcome" => Ok(ScenarioKind::CovariateOutcome),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario {other:?} (expected covariate, outcome or covariate-outcome)"
            ))),
        }
    }
}

/// Similarity level; determines the largest shift among the externals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    Similar,
    Medium,
    Dissimilar,
}

impl Similarity {
    pub const ALL: [Similarity; 3] = [Similarity::Similar, Similarity::Medium, Similarity::Dissimilar];

    pub fn max_shift(self) -> f64 {
        match self {
            Similarity::Similar => 1.0,
            Similarity::Medium => 2.0,
            Similarity::Dissimilar => 3.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Similarity::Similar => "similar",
            Similarity::Medium => "medium",
            Similarity::Dissimilar => "dissimilar",
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "similar" => Ok(Similarity::Similar),
            "medium" => Ok(Similarity::Medium),
            "dissimilar" => Ok(Similarity::Dissimilar),
            other => Err(Error::InvalidParameter(format!(
                "unknown similarity {other:?} (expected similar, medium or dissimilar)"
            ))),
        }
    }
}

/// `[0, s/n, 2s/n, ..., s]` for `n` externals and max shift `s`.
pub fn make_shift_vector(num_external: usize, similarity: Similarity) -> Result<Vec<f64>> {
    if num_external == 0 {
        return Err(Error::InvalidParameter("at least one external subgroup is required".into()));
    }
    let max = similarity.max_shift();
    Ok((0..=num_external).map(|i| max * i as f64 / num_external as f64).collect())
}

/// How rows are assigned to subgroups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    /// Subgroup `g` gets exactly `subgroup_sizes[g]` rows, in block order.
    #[default]
    FixedBlocks,
    /// `sum(subgroup_sizes)` rows, each assigned uniformly at random.
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralCoefficients {
    pub global: f64,
    pub specific: f64,
    pub confounder: f64,
}

impl Default for StructuralCoefficients {
    fn default() -> Self {
        Self { global: 1.0, specific: 1.0, confounder: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// One shift per subgroup; entry 0 belongs to the target.
    pub shift_vector: Vec<f64>,
    pub subgroup_sizes: Vec<usize>,
    /// Number of subgroup-specific covariates.
    pub k: usize,
    /// Number of global covariates.
    pub c: usize,
    pub seed: u64,
    pub membership: Membership,
    pub coefficients: StructuralCoefficients,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, shift_vector: Vec<f64>, subgroup_sizes: Vec<usize>, k: usize, c: usize, seed: u64) -> Self {
        Self {
            kind,
            shift_vector,
            subgroup_sizes,
            k,
            c,
            seed,
            membership: Membership::default(),
            coefficients: StructuralCoefficients::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.shift_vector.len() < 2 {
            return Err(Error::InvalidParameter("need at least two subgroups".into()));
        }
        if self.shift_vector.len() != self.subgroup_sizes.len() {
            return Err(Error::LengthMismatch {
                left: self.shift_vector.len(),
                right: self.subgroup_sizes.len(),
            });
        }
        if self.subgroup_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter("subgroup sizes must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.shift_vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("shifts must be finite".into()));
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        (1..=self.k)
            .map(|p| format!("x_s{p}"))
            .chain((1..=self.c).map(|i| format!("x_g{i}")))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    /// Subgroup labels are `"0"` (target) to `"m-1"`.
    pub data: Dataset,
    pub true_shifts: Vec<f64>,
    pub hidden_h: Vec<f64>,
}

struct Row {
    covariates: Vec<f64>,
    y: f64,
    h: f64,
}

fn draw_row<R: Rng>(rng: &mut R, spec: &ScenarioSpec, shift: f64) -> Row {
    let coef = &spec.coefficients;
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let e_h = normal();
    let h = match spec.kind {
        ScenarioKind::CovariateOutcome => e_h + shift,
        _ => e_h,
    };
    let mut covariates = Vec::with_capacity(spec.k + spec.c);
    for _ in 0..spec.k {
        let e = normal();
        covariates.push(match spec.kind {
            ScenarioKind::Covariate => e + h + shift,
            _ => e + h,
        });
    }
    for _ in 0..spec.c {
        covariates.push(normal());
    }
    let e_y = normal();
    let specific: f64 = covariates[..spec.k].iter().sum();
    let global: f64 = covariates[spec.k..].iter().sum();
    let mut y = coef.global * global + coef.specific * specific + coef.confounder * h + e_y;
    if spec.kind == ScenarioKind::Outcome {
        y += shift;
    }
    Row { covariates, y, h }
}

fn assemble(spec: &ScenarioSpec, rows: Vec<(usize, Row)>) -> Result<(Dataset, Vec<f64>)> {
    let d = spec.k + spec.c;
    let n = rows.len();
    let mut x = DMatrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut hidden = Vec::with_capacity(n);
    for (i, (group, row)) in rows.into_iter().enumerate() {
        for (j, v) in row.covariates.iter().enumerate() {
            x[(i, j)] = *v;
        }
        y.push(row.y);
        hidden.push(row.h);
        labels.push(group.to_string());
    }
    Ok((Dataset::new(x, y, labels, spec.feature_names())?, hidden))
}

/// Draws the training data for every subgroup.
pub fn simulate(spec: &ScenarioSpec) -> Result<SimulatedData> {
    spec.validate()?;
    let m = spec.shift_vector.len();
    let mut streams: Vec<_> = (0..m).map(|g| stream_rng(spec.seed, g as u64)).collect();
    let membership: Vec<usize> = match spec.membership {
        Membership::FixedBlocks => spec
            .subgroup_sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &size)| std::iter::repeat_n(g, size))
            .collect(),
        Membership::Categorical => {
            let total: usize = spec.subgroup_sizes.iter().sum();
            let mut rng = stream_rng(spec.seed, MEMBERSHIP_STREAM);
            (0..total).map(|_| rng.random_range(0..m)).collect()
        }
    };
    let rows = membership
        .into_iter()
        .map(|g| {
            let row = draw_row(&mut streams[g], spec, spec.shift_vector[g]);
            (g, row)
        })
        .collect();
    let (data, hidden_h) = assemble(spec, rows)?;
    Ok(SimulatedData { data, true_shifts: spec.shift_vector.clone(), hidden_h })
}

/// Fresh target-subgroup rows (shift 0) from a stream disjoint from the
/// training streams.
pub fn simulate_target_test(spec: &ScenarioSpec, n_test: usize) -> Result<Dataset> {
    spec.validate()?;
    if n_test == 0 {
        return Err(Error::InvalidParameter("n_test must be at least 1".into()));
    }
    let mut rng = stream_rng(spec.seed, TEST_STREAM);
    let rows = (0..n_test).map(|_| (0, draw_row(&mut rng, spec, 0.0))).collect();
    Ok(assemble(spec, rows)?.0)
}
