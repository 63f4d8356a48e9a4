//! Synthetic test densities and the evaluation protocols: L1 error,
//! out-of-sample log-likelihood, frequentist coverage of credible intervals
//! and sensitivity to `k`.
//!
//! Randomness layout for a root seed `s`: test points come from
//! `derive_seed(s, [0])`; replicate `r` draws training data from
//! `derive_seed(s, [1, r])` and, where needed, density draws from
//! `derive_seed(s, [2, r])`.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{invalid_param, Result};
use crate::estimator::{fit, FitOptions, FittedModel};
use crate::kernel::{Gaussian, StudentT};
use crate::rng::derive_seed;
use crate::sampling::{band_from_values, draw_values_on_grid};

/// A density with an exact log-density and a sampler.
pub trait TargetDensity: Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn ln_pdf(&self, x: &[f64]) -> f64;
    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        let values: Vec<f64> = (0..n).flat_map(|_| self.sample_point(&mut *rng)).collect();
        Dataset::new(values, n, self.dim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKind {
    /// Standard Gaussian `N(0, I_p)`.
    Gs,
    /// `0.4 N(−2·1_p, S₀) + 0.6 N(2·1_p, S₀)`.
    Mg,
    /// Student-t with 10 degrees of freedom, location `1_p`, scale `S₀`.
    T,
    /// Claw: `½ N(0, 1) + Σ_{j=0}^{4} (1/10) N(j/2 − 1, 0.1²)`.
    Cw,
}

/// Built-in test densities. `S₀ = ρ 1_p 1_pᵀ + (1 − ρ) I_p` with `ρ = 0.8`.
#[derive(Debug, Clone)]
pub struct TestDensity {
    kind: DensityKind,
    p: usize,
    components: Vec<(f64, Gaussian)>,
    t: Option<StudentT>,
}

pub const AVAILABLE_DENSITIES: [&str; 4] = ["gs", "mg", "t", "cw"];

const T_DF: f64 = 10.0;

fn equicorrelation(p: usize, rho: f64) -> Vec<f64> {
    (0..p * p).map(|e| if e / p == e % p { 1.0 } else { rho }).collect()
}

impl TestDensity {
    pub fn new(kind: DensityKind, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(invalid_param("dimension must be positive"));
        }
        let s0 = equicorrelation(p, 0.8);
        let mut t = None;
        let components = match kind {
            DensityKind::Gs => vec![(1.0, Gaussian::new(vec![0.0; p], &equicorrelation(p, 0.0))?)],
            DensityKind::Mg => vec![
                (0.4, Gaussian::new(vec![-2.0; p], &s0)?),
                (0.6, Gaussian::new(vec![2.0; p], &s0)?),
            ],
            DensityKind::T => {
                t = Some(StudentT::new(T_DF, vec![1.0; p], &s0)?);
                Vec::new()
            }
            DensityKind::Cw => {
                if p != 1 {
                    return Err(invalid_param("the claw density is univariate"));
                }
                let mut c = vec![(0.5, Gaussian::new(vec![0.0], &[1.0])?)];
                for j in 0..5 {
                    c.push((0.1, Gaussian::new(vec![j as f64 / 2.0 - 1.0], &[0.01])?));
                }
                c
            }
        };
        Ok(TestDensity { kind, p, components, t })
    }

    /// Looks a density up by its short name (`gs`, `mg`, `t`, `cw`).
    pub fn by_name(name: &str, p: usize) -> Result<Self> {
        let kind = match name.to_ascii_lowercase().as_str() {
            "gs" => DensityKind::Gs,
            "mg" => DensityKind::Mg,
            "t" => DensityKind::T,
            "cw" => DensityKind::Cw,
            other => {
                return Err(invalid_param(format!(
                    "unknown density {other:?}; available: {}",
                    AVAILABLE_DENSITIES.join(", ")
                )))
            }
        };
        TestDensity::new(kind, p)
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    /// Mean vector.
    pub fn mean(&self) -> Vec<f64> {
        match self.kind {
            DensityKind::T => vec![1.0; self.p],
            _ => (0..self.p)
                .map(|d| self.components.iter().map(|(w, g)| w * g.mean()[d]).sum())
                .collect(),
        }
    }
}

fn gaussian_sample(g: &Gaussian, rng: &mut dyn RngCore) -> Vec<f64> {
    let p = g.dim();
    let l = g.covariance_factor();
    let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut *rng)).collect();
    (0..p)
        .map(|r| g.mean()[r] + (0..=r).map(|c| l[r * p + c] * z[c]).sum::<f64>())
        .collect()
}

impl TargetDensity for TestDensity {
    fn name(&self) -> String {
        format!("{:?}", self.kind).to_ascii_lowercase()
    }

    fn dim(&self) -> usize {
        self.p
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        if let Some(t) = &self.t {
            return t.ln_pdf(x);
        }
        let terms: Vec<f64> = self.components.iter().map(|(w, g)| w.ln() + g.ln_pdf(x)).collect();
        crate::linalg::log_sum_exp(&terms)
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        if let Some(t) = &self.t {
            let g = Gaussian::new(vec![0.0; self.p], &equicorrelation(self.p, 0.8)).expect("S0 is positive definite");
            let z = gaussian_sample(&g, rng);
            let chi: f64 = ChiSquared::new(T_DF).expect("valid df").sample(&mut *rng);
            let s = (chi / T_DF).sqrt();
            return z.iter().zip(t.loc()).map(|(v, m)| m + v / s).collect();
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, g) in &self.components {
            acc += w;
            if u < acc {
                return gaussian_sample(g, rng);
            }
        }
        gaussian_sample(&self.components.last().expect("at least one component").1, rng)
    }
}

fn training_rng(seed: u64, r: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1, r as u64]))
}

fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]))
}

/// `L̂ = (1/n_t) Σ_j |f̂(x_j)/f₀(x_j) − 1|` from log-densities.
pub fn l1_statistic(ln_estimate: &[f64], ln_truth: &[f64]) -> Result<f64> {
    if ln_estimate.len() != ln_truth.len() || ln_estimate.is_empty() {
        return Err(invalid_param("L1 statistic needs matching, non-empty inputs"));
    }
    Ok(ln_estimate
        .iter()
        .zip(ln_truth)
        .map(|(a, b)| ((a - b).exp() - 1.0).abs())
        .sum::<f64>()
        / ln_estimate.len() as f64)
}

/// Outcome of one replicate: its statistic or the error that stopped it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Report {
    pub density: String,
    pub p: usize,
    pub n: usize,
    pub n_t: usize,
    pub reps: usize,
    pub seed: u64,
    pub replicates: Vec<ReplicateOutcome>,
    /// Mean over successful replicates.
    pub mean: f64,
    /// Standard error of `mean`.
    pub std_error: f64,
    pub failures: usize,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn outcome(replicate: usize, result: Result<f64>) -> ReplicateOutcome {
    match result {
        Ok(v) => ReplicateOutcome {
            replicate,
            value: Some(v),
            error: None,
        },
        Err(e) => ReplicateOutcome {
            replicate,
            value: None,
            error: Some(e.to_string()),
        },
    }
}

fn successes(outcomes: &[ReplicateOutcome]) -> Vec<f64> {
    outcomes.iter().filter_map(|o| o.value).collect()
}

/// Monte Carlo L1 error over `reps` replicates: fit on `n` fresh points,
/// score on `n_t` fresh points from the same replicate stream.
pub fn l1_error(
    density: &dyn TargetDensity,
    options: &FitOptions,
    n: usize,
    n_t: usize,
    reps: usize,
    seed: u64,
) -> Result<L1Report> {
    l1_error_with(density, n, n_t, reps, seed, |train| {
        let model = fit(train, options)?;
        Ok(move |test: &Dataset| model.log_posterior_mean_on_grid(&rows(test)))
    })
}

fn rows(data: &Dataset) -> Vec<Vec<f64>> {
    data.rows().map(<[f64]>::to_vec).collect()
}

/// [`l1_error`] with an arbitrary estimator: `build` maps training data to a
/// function returning log-density estimates at the rows of a test set.
pub fn l1_error_with<B, E>(
    density: &dyn TargetDensity,
    n: usize,
    n_t: usize,
    reps: usize,
    seed: u64,
    build: B,
) -> Result<L1Report>
where
    B: Fn(&Dataset) -> Result<E> + Sync,
    E: Fn(&Dataset) -> Result<Vec<f64>>,
{
    if reps == 0 || n_t == 0 {
        return Err(invalid_param("L1 error needs reps >= 1 and n_t >= 1"));
    }
    let replicates: Vec<ReplicateOutcome> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let result = (|| {
                let mut rng = training_rng(seed, r);
                let train = density.sample(n, &mut rng)?;
                let test = density.sample(n_t, &mut rng)?;
                let estimate = build(&train)?(&test)?;
                let truth: Vec<f64> = test.rows().map(|x| density.ln_pdf(x)).collect();
                l1_statistic(&estimate, &truth)
            })();
            outcome(r, result)
        })
        .collect();
    let ok = successes(&replicates);
    let (mean, std_error) = mean_and_se(&ok);
    Ok(L1Report {
        density: density.name(),
        p: density.dim(),
        n,
        n_t,
        reps,
        seed,
        failures: reps - ok.len(),
        replicates,
        mean,
        std_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Oosll {
    /// `(1/n_t) Σ_j ln f̂(x_j)`, with floored terms.
    pub mean: f64,
    /// Test points whose log-density fell below `ln(f64::MIN_POSITIVE)` and
    /// was replaced by that floor.
    pub floored: usize,
}

/// Mean out-of-sample log-likelihood of `model` on `test`.
pub fn oosll(model: &FittedModel, test: &Dataset) -> Result<Oosll> {
    if test.p() != model.p() {
        return Err(invalid_param("test data and model dimensions differ"));
    }
    let floor = f64::MIN_POSITIVE.ln();
    let ln = model.log_posterior_mean_on_grid(&rows(test))?;
    let floored = ln.iter().filter(|v| !(**v >= floor)).count();
    let total: f64 = ln.iter().map(|v| if *v >= floor { *v } else { floor }).sum();
    Ok(Oosll {
        mean: total / ln.len() as f64,
        floored,
    })
}

/// Fraction of `truth` values inside their `(lo, hi)` interval and the mean
/// interval length.
pub fn coverage_from_intervals(intervals: &[(f64, f64)], truth: &[f64]) -> Result<(f64, f64)> {
    if intervals.len() != truth.len() || truth.is_empty() {
        return Err(invalid_param("coverage needs one interval per true value"));
    }
    let inside = intervals
        .iter()
        .zip(truth)
        .filter(|((lo, hi), t)| lo <= *t && *t <= hi)
        .count();
    let length = intervals
        .iter()
        .map(|(lo, hi)| if lo.is_infinite() || hi.is_infinite() { f64::INFINITY } else { hi - lo })
        .sum::<f64>();
    let m = truth.len() as f64;
    Ok((inside as f64 / m, length / m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub density: String,
    pub p: usize,
    pub n: usize,
    pub n_t: usize,
    pub reps: usize,
    pub draws: usize,
    pub level: f64,
    pub seed: u64,
    /// Per-replicate coverage.
    pub coverage_by_replicate: Vec<ReplicateOutcome>,
    /// Per-replicate mean interval length.
    pub length_by_replicate: Vec<Option<f64>>,
    pub coverage: f64,
    pub coverage_std_error: f64,
    pub mean_length: f64,
    pub failures: usize,
}

/// Frequentist coverage of pointwise credible intervals at `n_t` fixed
/// test points, over `reps` training sets of size `n`, each with `draws`
/// pseudo-posterior draws.
#[allow(clippy::too_many_arguments)]
pub fn coverage_experiment(
    density: &dyn TargetDensity,
    options: &FitOptions,
    n: usize,
    n_t: usize,
    reps: usize,
    draws: usize,
    level: f64,
    seed: u64,
) -> Result<CoverageReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid_param(format!("credible level must lie in (0, 1), got {level}")));
    }
    if reps == 0 || n_t == 0 || draws == 0 {
        return Err(invalid_param("coverage needs reps, n_t and draws to be positive"));
    }
    let test = density.sample(n_t, &mut test_rng(seed))?;
    let grid = rows(&test);
    let truth: Vec<f64> = grid.iter().map(|x| density.ln_pdf(x).exp()).collect();
    let per_rep: Vec<(ReplicateOutcome, Option<f64>)> = (0..reps)
        .map(|r| {
            let result = (|| {
                let train = density.sample(n, &mut training_rng(seed, r))?;
                let model = fit(&train, options)?;
                let values = draw_values_on_grid(&model, &grid, draws, derive_seed(seed, &[2, r as u64]))?;
                let band = band_from_values(&values, level)?;
                let intervals: Vec<(f64, f64)> = band.iter().map(|b| (b.lo, b.hi)).collect();
                coverage_from_intervals(&intervals, &truth)
            })();
            match result {
                Ok((c, len)) => (outcome(r, Ok(c)), Some(len)),
                Err(e) => (outcome(r, Err(e)), None),
            }
        })
        .collect();
    let (coverage_by_replicate, length_by_replicate): (Vec<_>, Vec<_>) = per_rep.into_iter().unzip();
    let ok = successes(&coverage_by_replicate);
    let (coverage, coverage_std_error) = mean_and_se(&ok);
    let lengths: Vec<f64> = length_by_replicate.iter().flatten().copied().collect();
    Ok(CoverageReport {
        density: density.name(),
        p: density.dim(),
        n,
        n_t,
        reps,
        draws,
        level,
        seed,
        failures: reps - ok.len(),
        coverage_by_replicate,
        length_by_replicate,
        coverage,
        coverage_std_error,
        mean_length: mean_and_se(&lengths).0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSweepRow {
    pub k: usize,
    pub mean_oosll: f64,
    pub std_error: f64,
    pub replicates: Vec<ReplicateOutcome>,
}

/// Mean out-of-sample log-likelihood on a fixed test set for each `k`,
/// averaged over `reps` training sets shared by all `k`.
pub fn k_sweep(
    density: &dyn TargetDensity,
    options: &FitOptions,
    n: usize,
    n_t: usize,
    k_values: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<KSweepRow>> {
    if k_values.is_empty() || k_values.iter().any(|&k| k < 2) {
        return Err(invalid_param("k values must be non-empty and at least 2"));
    }
    if reps == 0 || n_t == 0 {
        return Err(invalid_param("k sweep needs reps >= 1 and n_t >= 1"));
    }
    let test = density.sample(n_t, &mut test_rng(seed))?;
    let trains: Vec<Dataset> = (0..reps)
        .map(|r| density.sample(n, &mut training_rng(seed, r)))
        .collect::<Result<_>>()?;
    Ok(k_values
        .iter()
        .map(|&k| {
            let opts = FitOptions {
                k: Some(k),
                ..options.clone()
            };
            let replicates: Vec<ReplicateOutcome> = trains
                .par_iter()
                .enumerate()
                .map(|(r, train)| outcome(r, fit(train, &opts).and_then(|m| oosll(&m, &test)).map(|o| o.mean)))
                .collect();
            let (mean_oosll, std_error) = mean_and_se(&successes(&replicates));
            KSweepRow {
                k,
                mean_oosll,
                std_error,
                replicates,
            }
        })
        .collect())
}

/// `ln φ(x)` for the standard normal, used by oracle comparisons.
pub fn ln_std_normal(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * PI).ln()
}
