use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use simweight::glm::LogisticOptions;
use simweight::scm::{simulate, ScenarioKind, ScenarioSpec};
use simweight::weights::{build_weighted_sample, fit_propensity, WeightScheme, WeightingOptions};
use simweight::Dataset;

fn normal_group(label: &str, n: usize, shift: f64, rng: &mut ChaCha8Rng) -> Dataset {
    let x: Vec<f64> = (0..n).map(|_| Distribution::<f64>::sample(&StandardNormal, rng) + shift).collect();
    let y: Vec<f64> = x.iter().map(|v| v + Distribution::<f64>::sample(&StandardNormal, rng)).collect();
    Dataset::new(DMatrix::from_column_slice(n, 1, &x), y, vec![label.to_string(); n], vec!["x".into()]).unwrap()
}

#[test]
fn same_distribution_gives_auc_near_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let target = normal_group("t", 1000, 0.0, &mut rng);
    let external = normal_group("e", 1000, 0.0, &mut rng);
    let cmp = fit_propensity(&target, &external, &LogisticOptions::default()).unwrap();
    assert!((0.48..=0.56).contains(&cmp.auc), "auc {}", cmp.auc);
    let sample = build_weighted_sample(&target, &[external], &WeightingOptions::default()).unwrap();
    let mean = sample.externals[0].mean_weight;
    assert!((0.85..=1.15).contains(&mean), "mean weight {mean}");
    assert!((1.8..=2.0).contains(&sample.ess_ratio), "ess ratio {}", sample.ess_ratio);
}

#[test]
fn large_shift_gives_near_perfect_separation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let target = normal_group("t", 200, 0.0, &mut rng);
    let external = normal_group("e", 200, 10.0, &mut rng);
    let cmp = fit_propensity(&target, &external, &LogisticOptions::default()).unwrap();
    assert!(cmp.auc >= 0.99, "auc {}", cmp.auc);
    assert!(cmp.fit.coefficients.iter().all(|b| b.is_finite()));
}

#[test]
fn dissimilar_covariate_shift_gives_predominantly_zero_weights() {
    let shifts = vec![0.0, 3.0, 3.0, 3.0];
    let sim = simulate(&ScenarioSpec::new(ScenarioKind::Covariate, shifts, vec![20, 30, 30, 30], 3, 1, 8)).unwrap();
    let (target, externals) = sim.data.split_target("0").unwrap();
    let options = WeightingOptions { truncation_percentile: Some(5.0), ..Default::default() };
    let sample = build_weighted_sample(&target, &externals, &options).unwrap();
    let ext = &sample.weights[sample.n_target..];
    let zero = ext.iter().filter(|&&w| w == 0.0).count();
    assert!(zero * 2 > ext.len(), "{zero} of {} external weights are zero", ext.len());

    // Without truncation the weights are small but strictly positive.
    let sample = build_weighted_sample(&target, &externals, &WeightingOptions::default()).unwrap();
    let mut ext = sample.weights[sample.n_target..].to_vec();
    ext.sort_by(f64::total_cmp);
    assert!(ext[0] > 0.0);
    assert!(ext[ext.len() / 2] < 0.01, "median {}", ext[ext.len() / 2]);
}

#[test]
fn all_zero_external_leaves_target_ess() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let target = normal_group("t", 15, 0.0, &mut rng);
    let external = normal_group("e", 15, 12.0, &mut rng);
    let options = WeightingOptions { truncation_percentile: Some(5.0), ..Default::default() };
    let sample = build_weighted_sample(&target, &[external], &options).unwrap();
    assert!(sample.weights[15..].iter().all(|&w| w == 0.0));
    assert_eq!(sample.ess, 15.0);
    assert_eq!(sample.ess_ratio, 1.0);
}

fn external_weights_by_label(sample: &simweight::weights::WeightedSample) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    let mut offset = sample.n_target;
    for e in &sample.externals {
        out.push((e.label.clone(), sample.weights[offset..offset + e.n_rows].to_vec()));
        offset += e.n_rows;
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn externals_order_does_not_matter(seed in 0u64..1000, trunc in prop::option::of(0.0f64..50.0)) {
        let spec = ScenarioSpec::new(ScenarioKind::Outcome, vec![0.0, 0.5, 1.5, 2.5], vec![12, 15, 18, 21], 2, 1, seed);
        let sim = simulate(&spec).unwrap();
        let (target, mut externals) = sim.data.split_target("0").unwrap();
        let options = WeightingOptions { truncation_percentile: trunc, ..Default::default() };
        let a = build_weighted_sample(&target, &externals, &options).unwrap();
        externals.reverse();
        externals.swap(0, 1);
        let b = build_weighted_sample(&target, &externals, &options).unwrap();
        prop_assert_eq!(external_weights_by_label(&a), external_weights_by_label(&b));
        prop_assert!((a.ess - b.ess).abs() <= 1e-12 * a.ess);
    }

    #[test]
    fn weights_bounded_and_target_fixed(seed in 0u64..1000, kind in 0usize..3) {
        let spec = ScenarioSpec::new(ScenarioKind::ALL[kind], vec![0.0, 0.2, 1.0], vec![10, 10, 25], 3, 1, seed);
        let sim = simulate(&spec).unwrap();
        let (target, externals) = sim.data.split_target("0").unwrap();
        for scheme in [WeightScheme::Adjusted, WeightScheme::PropensityOnly] {
            let options = WeightingOptions { scheme, truncation_percentile: Some(5.0), ..Default::default() };
            let s = build_weighted_sample(&target, &externals, &options).unwrap();
            prop_assert!(s.weights[..s.n_target].iter().all(|&w| w == 1.0));
            prop_assert!(s.weights[s.n_target..].iter().all(|&w| (0.0..=2.0).contains(&w)));
            prop_assert!(s.ess >= s.n_target as f64 - 1e-9);
            prop_assert!(s.ess <= s.weights.len() as f64 + 1e-9);
        }
    }
}
