//! Two-class plug-in Bayes classifier built from one density estimate per
//! class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid_param, NndmError, Result};
use crate::estimator::{fit, FitOptions, FittedModel};
use crate::rng::derive_seed;
use crate::sampling::sample_draw;

/// Per-feature centering and scaling applied before density estimation.
/// Both class densities pick up the same Jacobian, which cancels in the
/// class probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    /// Column means and unbiased standard deviations of `data`.
    pub fn fit(data: &Dataset) -> Result<Self> {
        let cov = data.sample_covariance()?;
        let p = data.p();
        let scale: Vec<f64> = (0..p).map(|d| cov[d * p + d].sqrt()).collect();
        if let Some(d) = scale.iter().position(|s| !(*s > 0.0)) {
            return Err(NndmError::DegenerateData(format!("feature {d} is constant")));
        }
        Ok(Standardization {
            mean: data.column_means(),
            scale,
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Result<Dataset> {
        let values: Vec<f64> = data.rows().flat_map(|r| self.apply(r)).collect();
        Dataset::new(values, data.n(), data.p())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorSource {
    TrainPrevalence,
    User,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassifierOptions {
    /// Options shared by both class fits.
    pub fit: FitOptions,
    /// `(π̂₀, π̂₁)`; `None` uses the training prevalence.
    pub priors: Option<(f64, f64)>,
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    class_models: [FittedModel; 2],
    priors: (f64, f64),
    prior_source: PriorSource,
    standardization: Option<Standardization>,
}

/// Class-1 probability at one point. `extrapolated` is set when both class
/// densities underflow, in which case `prob` is the prior `π̂₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub prob: f64,
    pub extrapolated: bool,
}

impl Prediction {
    /// Class-0 probability, `1 − prob`.
    pub fn class0(&self) -> f64 {
        1.0 - self.prob
    }
}

fn check_labels(labels: &[u8]) -> Result<(usize, usize)> {
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(NndmError::InvalidData(format!("labels must be 0 or 1, found {bad}")));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    Ok((labels.len() - ones, ones))
}

/// Fits one density per class on that class's rows of `x`.
pub fn fit_classifier(x: &Dataset, y: &[u8], options: &ClassifierOptions) -> Result<ClassifierModel> {
    if y.len() != x.n() {
        return Err(NndmError::InvalidData(format!("{} labels for {} rows", y.len(), x.n())));
    }
    let (n0, n1) = check_labels(y)?;
    if n0 == 0 || n1 == 0 {
        return Err(NndmError::InvalidData("training labels contain a single class".into()));
    }
    let (priors, prior_source) = match options.priors {
        Some((a, b)) => {
            if !(a >= 0.0 && b >= 0.0) || ((a + b) - 1.0).abs() > 1e-12 {
                return Err(invalid_param(format!("priors ({a}, {b}) are not on the simplex")));
            }
            ((a, b), PriorSource::User)
        }
        None => {
            let n = y.len() as f64;
            let p1 = n1 as f64 / n;
            ((1.0 - p1, p1), PriorSource::TrainPrevalence)
        }
    };
    let standardization = if options.standardize {
        Some(Standardization::fit(x)?)
    } else {
        None
    };
    let x = match &standardization {
        Some(s) => s.apply_dataset(x)?,
        None => x.clone(),
    };
    let fit_class = |c: u8| -> Result<FittedModel> {
        let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        fit(&x.select(&rows)?, &options.fit)
    };
    Ok(ClassifierModel {
        class_models: [fit_class(0)?, fit_class(1)?],
        priors,
        prior_source,
        standardization,
    })
}

/// Bayes' rule in log space:
/// `pr(y = 1 | x) = exp(ln f̃₁ + ln π̂₁ − LSE(ln f̃₀ + ln π̂₀, ln f̃₁ + ln π̂₁))`.
pub fn bayes_probability(ln_f0: f64, ln_f1: f64, priors: (f64, f64)) -> Prediction {
    let floor = f64::MIN_POSITIVE.ln();
    if !(ln_f0 >= floor) && !(ln_f1 >= floor) {
        return Prediction {
            prob: priors.1,
            extrapolated: true,
        };
    }
    let a = ln_f0 + priors.0.ln();
    let b = ln_f1 + priors.1.ln();
    // logistic form: equal terms give exactly 1/2
    let prob = if b == f64::NEG_INFINITY {
        0.0
    } else if a == f64::NEG_INFINITY {
        1.0
    } else {
        let d = a - b;
        if d > 0.0 {
            let e = (-d).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + d.exp())
        }
    };
    Prediction {
        prob,
        extrapolated: false,
    }
}

impl ClassifierModel {
    pub fn class_model(&self, class: usize) -> &FittedModel {
        &self.class_models[class]
    }

    pub fn priors(&self) -> (f64, f64) {
        self.priors
    }

    pub fn prior_source(&self) -> PriorSource {
        self.prior_source
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    fn prepare(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.class_models[0].p() {
            return Err(invalid_param(format!(
                "point has dimension {}, classifier has dimension {}",
                x.len(),
                self.class_models[0].p()
            )));
        }
        Ok(match &self.standardization {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        })
    }

    /// Class-1 probability from the two posterior-mean densities.
    pub fn predict_mean(&self, x: &[f64]) -> Result<Prediction> {
        let z = self.prepare(x)?;
        let ln0 = self.class_models[0].log_posterior_mean(&z)?;
        let ln1 = self.class_models[1].log_posterior_mean(&z)?;
        Ok(bayes_probability(ln0, ln1, self.priors))
    }

    /// [`predict_mean`](Self::predict_mean) over many points.
    pub fn predict_mean_batch(&self, points: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        points.par_iter().map(|x| self.predict_mean(x)).collect()
    }

    /// `m` class-1 probability samples per point (`result[t][j]`). Draw `t`
    /// of the class-0 density is paired with draw `t` of the class-1 density;
    /// class `c` draws use the root seed `derive_seed(seed, [c])`.
    pub fn predict_draws(&self, points: &[Vec<f64>], m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if m == 0 {
            return Err(invalid_param("number of draws must be positive"));
        }
        let prepared: Vec<Vec<f64>> = points.iter().map(|x| self.prepare(x)).collect::<Result<_>>()?;
        let seeds = [derive_seed(seed, &[0]), derive_seed(seed, &[1])];
        let p = self.class_models[0].p();
        (0..m as u64)
            .into_par_iter()
            .map(|t| {
                let d0 = sample_draw(&self.class_models[0], seeds[0], t)?;
                let d1 = sample_draw(&self.class_models[1], seeds[1], t)?;
                let mut scratch = vec![0.0; p];
                let mut terms = Vec::new();
                Ok(prepared
                    .iter()
                    .map(|z| {
                        let ln0 = d0.ln_density_with(z, &mut scratch, &mut terms);
                        let ln1 = d1.ln_density_with(z, &mut scratch, &mut terms);
                        bayes_probability(ln0, ln1, self.priors).prob
                    })
                    .collect())
            })
            .collect()
    }
}

/// Per-draw normalized Brier scores `(1/n_t) ‖p_t − y‖²` and their mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrierReport {
    pub per_draw: Vec<f64>,
    pub mean: f64,
}

pub fn brier_score(prob_draws: &[Vec<f64>], labels: &[u8]) -> Result<BrierReport> {
    check_labels(labels)?;
    if prob_draws.is_empty() || labels.is_empty() {
        return Err(invalid_param("Brier score needs at least one draw and one label"));
    }
    let per_draw = prob_draws
        .iter()
        .map(|probs| {
            if probs.len() != labels.len() {
                return Err(invalid_param(format!("{} probabilities for {} labels", probs.len(), labels.len())));
            }
            Ok(probs
                .iter()
                .zip(labels)
                .map(|(p, &y)| (p - y as f64).powi(2))
                .sum::<f64>()
                / labels.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_draw.iter().sum::<f64>() / per_draw.len() as f64;
    Ok(BrierReport { per_draw, mean })
}

/// ROC curve as `(FPR, TPR)` pairs, from `(0, 0)` to `(1, 1)`, one step per
/// distinct score, and the rank-based AUC.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Mann–Whitney AUC with tied scores given their average rank, and the ROC
/// curve over all score thresholds.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(invalid_param(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(invalid_param("scores contain NaN"));
    }
    let (n0, n1) = check_labels(labels)?;
    if n0 == 0 || n1 == 0 {
        return Err(NndmError::InvalidData("ROC analysis needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..=end (1-based start+1..end+1) share their average
        let avg = 0.5 * ((start + 1) + (end + 1)) as f64;
        rank_sum_pos += avg * order[start..=end].iter().filter(|&&i| labels[i] == 1).count() as f64;
        start = end + 1;
    }
    let (f0, f1) = (n0 as f64, n1 as f64);
    let auc = (rank_sum_pos - f1 * (f1 + 1.0) / 2.0) / (f0 * f1);

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut idx = order.len();
    while idx > 0 {
        let s = scores[order[idx - 1]];
        while idx > 0 && scores[order[idx - 1]] == s {
            if labels[order[idx - 1]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            idx -= 1;
        }
        points.push((fp as f64 / f0, tp as f64 / f1));
    }
    Ok(RocCurve { points, auc })
}

/// Threshold metrics of class-1 probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
}

/// Predicts class 1 when `prob ≥ threshold`.
pub fn threshold_metrics(probs: &[f64], labels: &[u8], threshold: f64) -> Result<ThresholdMetrics> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(invalid_param("threshold metrics need one probability per label"));
    }
    let (n0, n1) = check_labels(labels)?;
    let mut tp = 0usize;
    let mut tn = 0usize;
    for (p, &y) in probs.iter().zip(labels) {
        let pred = u8::from(*p >= threshold);
        if pred == y {
            if y == 1 {
                tp += 1;
            } else {
                tn += 1;
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
    Ok(ThresholdMetrics {
        sensitivity: ratio(tp, n1),
        specificity: ratio(tn, n0),
        accuracy: ratio(tp + tn, n0 + n1),
    })
}
