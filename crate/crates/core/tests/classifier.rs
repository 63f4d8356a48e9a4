mod common;

use common::*;
use nndm::classifier::{
    bayes_probability, brier_score, fit_classifier, roc_auc, threshold_metrics, ClassifierOptions, PriorSource,
};
use nndm::Dataset;
use proptest::prelude::*;
use rand::Rng;

fn blobs(per_class: usize, p: usize, seed: u64) -> (Dataset, Vec<u8>) {
    let g = gaussian_data(2 * per_class, p, seed);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in g.rows().enumerate() {
        let class = u8::from(i >= per_class);
        let shift = if class == 1 { 5.0 } else { -5.0 };
        values.extend(row.iter().map(|v| v + shift));
        labels.push(class);
    }
    (Dataset::new(values, 2 * per_class, p).unwrap(), labels)
}

#[test]
fn priors_from_prevalence_or_user() {
    let (x, y) = blobs(30, 2, 1);
    let m = fit_classifier(&x, &y, &ClassifierOptions::default()).unwrap();
    assert_eq!(m.priors(), (0.5, 0.5));
    assert_eq!(m.prior_source(), PriorSource::TrainPrevalence);
    let user = ClassifierOptions {
        priors: Some((0.9, 0.1)),
        ..Default::default()
    };
    let m = fit_classifier(&x, &y, &user).unwrap();
    assert_eq!(m.priors(), (0.9, 0.1));
    assert_eq!(m.prior_source(), PriorSource::User);
}

#[test]
fn separable_blobs() {
    let (x, y) = blobs(200, 2, 2);
    let m = fit_classifier(&x, &y, &ClassifierOptions::default()).unwrap();
    let probs: Vec<f64> = m.predict_mean_batch(&rows(&x)).unwrap().iter().map(|q| q.prob).collect();
    let metrics = threshold_metrics(&probs, &y, 0.5).unwrap();
    assert!(metrics.accuracy > 0.99);
    let draws = m.predict_draws(&rows(&x)[..20], 30, 4).unwrap();
    assert_eq!(draws.len(), 30);
    assert!(draws.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
    assert_eq!(draws, m.predict_draws(&rows(&x)[..20], 30, 4).unwrap());
}

#[test]
fn standardization_leaves_separable_problem_solved() {
    let (x, y) = blobs(60, 3, 3);
    let scaled = Dataset::new(
        x.rows().flat_map(|r| vec![r[0] * 1000.0, r[1], r[2] * 1e-3]).collect(),
        x.n(),
        3,
    )
    .unwrap();
    let opts = ClassifierOptions {
        standardize: true,
        ..Default::default()
    };
    let m = fit_classifier(&scaled, &y, &opts).unwrap();
    assert!(m.standardization().is_some());
    let probs: Vec<f64> = m.predict_mean_batch(&rows(&scaled)).unwrap().iter().map(|q| q.prob).collect();
    assert_eq!(threshold_metrics(&probs, &y, 0.5).unwrap().accuracy, 1.0);
}

proptest! {
    #[test]
    fn complementarity_and_monotonicity(a in -50.0f64..5.0, b in -50.0f64..5.0, p1 in 0.01f64..0.99, dp in 0.0f64..0.5, c in -30.0f64..30.0) {
        let q = bayes_probability(a, b, (1.0 - p1, p1));
        prop_assert!((0.0..=1.0).contains(&q.prob));
        prop_assert_eq!(q.prob + q.class0(), 1.0);
        let p2 = (p1 + dp).min(0.99);
        prop_assert!(bayes_probability(a, b, (1.0 - p2, p2)).prob >= q.prob - 1e-15);
        let shifted = bayes_probability(a + c, b + c, (1.0 - p1, p1));
        prop_assert!((shifted.prob - q.prob).abs() < 1e-12);
    }
}

#[test]
fn brier_matches_direct_formula() {
    let mut r = rng(9);
    let labels: Vec<u8> = (0..15).map(|_| u8::from(r.random::<bool>())).collect();
    let draws: Vec<Vec<f64>> = (0..4).map(|_| (0..15).map(|_| r.random()).collect()).collect();
    let report = brier_score(&draws, &labels).unwrap();
    for (t, d) in draws.iter().enumerate() {
        let mut s = 0.0;
        for j in 0..15 {
            let e = d[j] - labels[j] as f64;
            s += e * e;
        }
        assert!((report.per_draw[t] - s / 15.0).abs() < 1e-15);
    }
    assert!((report.mean - report.per_draw.iter().sum::<f64>() / 4.0).abs() < 1e-15);
}

#[test]
fn auc_cases() {
    let labels = [0u8, 0, 0, 1, 1];
    assert_eq!(roc_auc(&[0.1, 0.2, 0.3, 0.8, 0.9], &labels).unwrap().auc, 1.0);
    let mut r = rng(10);
    let n = 4000;
    let labels: Vec<u8> = (0..n).map(|_| u8::from(r.random::<bool>())).collect();
    let scores: Vec<f64> = (0..n).map(|_| r.random()).collect();
    let auc = roc_auc(&scores, &labels).unwrap().auc;
    let n1 = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n0 = n as f64 - n1;
    let se = ((n0 + n1 + 1.0) / (12.0 * n0 * n1)).sqrt();
    assert!((auc - 0.5).abs() < 3.0 * se, "{auc}");
    let reversed: Vec<f64> = scores.iter().map(|s| -s).collect();
    assert!((roc_auc(&reversed, &labels).unwrap().auc - (1.0 - auc)).abs() < 1e-12);
}
