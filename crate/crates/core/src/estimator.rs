//! End-to-end fitting and evaluation of the NN-DM estimator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid_param, FitStage, NndmError, Result};
use crate::hyper::{choose_alpha, cv_delta0, default_cv_grid, default_k, CvResult, Hyperparameters};
use crate::linalg::log_sum_exp;
use crate::neighbors::build_neighborhoods;
use crate::posterior::{update_neighborhood, NeighborhoodPosterior};
use crate::sampling::{band_from_values, draw_values_on_grid};

/// How `δ₀²` is set.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Delta0Choice {
    /// `δ₀² = 1`.
    #[default]
    Default,
    Value(f64),
    /// Leave-one-out cross-validation over a grid; `None` uses
    /// [`default_cv_grid`].
    Cv(Option<Vec<f64>>),
}

/// How the Dirichlet concentration `α` is set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AlphaChoice {
    /// `α = 0`.
    #[default]
    Default,
    Value(f64),
    /// The data-driven rule of [`choose_alpha`].
    Rule,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitOptions {
    /// Neighborhood size; `None` uses [`default_k`].
    pub k: Option<usize>,
    pub delta0: Delta0Choice,
    pub alpha: AlphaChoice,
    pub mu0: Option<Vec<f64>>,
    pub nu0: Option<f64>,
    pub gamma0: Option<f64>,
    /// Root seed recorded with the model and used by default for draws.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delta0Source {
    Default,
    Cv,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaSource {
    Default,
    Rule,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub delta0: Delta0Source,
    pub alpha: AlphaSource,
}

/// A fitted model: the shared prior and one pseudo-posterior per
/// observation. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    hyper: Hyperparameters,
    posteriors: Vec<NeighborhoodPosterior>,
    provenance: Provenance,
    cv: Option<CvResult>,
}

/// One row of [`FittedModel::density_on_grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub x: Vec<f64>,
    pub mean: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

fn resolve_hyperparameters(data: &Dataset, options: &FitOptions) -> Result<Hyperparameters> {
    let (n, p) = (data.n(), data.p());
    let k = options.k.unwrap_or_else(|| default_k(n, p));
    if n < 3 || n < k {
        return Err(NndmError::InvalidData(format!("fitting needs n >= max(3, k), got n = {n}, k = {k}")));
    }
    if k < 2 {
        return Err(invalid_param(format!("k must be at least 2, got {k}")));
    }
    let mu0 = options.mu0.clone().unwrap_or_else(|| vec![0.0; p]);
    if mu0.len() != p {
        return Err(invalid_param(format!("mu0 has {} entries, data has {p} columns", mu0.len())));
    }
    let delta0sq = match options.delta0 {
        Delta0Choice::Value(d) => d,
        _ => 1.0,
    };
    let alpha = match options.alpha {
        AlphaChoice::Value(a) => a,
        _ => 0.0,
    };
    Hyperparameters::new(
        mu0,
        options.nu0.unwrap_or(0.001),
        options.gamma0.unwrap_or(p as f64),
        delta0sq,
        alpha,
        k,
    )
}

/// Fits the estimator: `k`-nearest neighborhoods, optional cross-validation
/// of `δ₀²`, one conjugate update per neighborhood and the choice of `α`.
/// Deterministic given `data` and `options`. Errors raised by a stage are
/// wrapped in [`NndmError::Fit`] naming that stage.
pub fn fit(data: &Dataset, options: &FitOptions) -> Result<FittedModel> {
    let mut hyper = resolve_hyperparameters(data, options)?;
    let neighborhoods = build_neighborhoods(data, hyper.k()).map_err(|e| e.at(FitStage::Neighborhoods))?;
    let mut cv = None;
    let delta0 = match &options.delta0 {
        Delta0Choice::Default => Delta0Source::Default,
        Delta0Choice::Value(_) => Delta0Source::User,
        Delta0Choice::Cv(grid) => {
            let grid = grid.clone().unwrap_or_else(default_cv_grid);
            let result = cv_delta0(data, &hyper, &grid).map_err(|e| e.at(FitStage::CrossValidation))?;
            hyper = hyper.with_delta0sq(result.best)?;
            cv = Some(result);
            Delta0Source::Cv
        }
    };
    let alpha = match options.alpha {
        AlphaChoice::Default => AlphaSource::Default,
        AlphaChoice::Value(_) => AlphaSource::User,
        AlphaChoice::Rule => {
            let a = choose_alpha(data, &hyper).map_err(|e| e.at(FitStage::Alpha))?;
            hyper = hyper.with_alpha(a)?;
            AlphaSource::Rule
        }
    };
    let posteriors = neighborhoods
        .par_iter()
        .map(|nb| update_neighborhood(nb, &hyper))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at(FitStage::ConjugateUpdate))?;
    Ok(FittedModel {
        hyper,
        posteriors,
        provenance: Provenance {
            seed: options.seed,
            delta0,
            alpha,
        },
        cv,
    })
}

impl FittedModel {
    /// Reassembles a model from stored parts. Every posterior must use the
    /// prior's `ν_n`, `γ_n` and dimension.
    pub fn from_parts(
        hyper: Hyperparameters,
        posteriors: Vec<NeighborhoodPosterior>,
        provenance: Provenance,
        cv: Option<CvResult>,
    ) -> Result<Self> {
        hyper.validate()?;
        if posteriors.is_empty() {
            return Err(invalid_param("a model needs at least one posterior"));
        }
        let (nu_n, gamma_n, p) = (hyper.nu_n(), hyper.gamma_n(), hyper.p());
        if posteriors
            .iter()
            .any(|q| q.nu_n() != nu_n || q.gamma_n() != gamma_n || q.dim() != p)
        {
            return Err(invalid_param("posteriors disagree with the prior's nu_n, gamma_n or dimension"));
        }
        Ok(FittedModel {
            hyper,
            posteriors,
            provenance,
            cv,
        })
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn posteriors(&self) -> &[NeighborhoodPosterior] {
        &self.posteriors
    }

    pub fn n(&self) -> usize {
        self.posteriors.len()
    }

    pub fn p(&self) -> usize {
        self.hyper.p()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn cv(&self) -> Option<&CvResult> {
        self.cv.as_ref()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p() {
            return Err(invalid_param(format!(
                "point has dimension {}, model has dimension {}",
                x.len(),
                self.p()
            )));
        }
        Ok(())
    }

    fn ln_mean_with(&self, x: &[f64], scratch: &mut [f64], terms: &mut Vec<f64>) -> f64 {
        terms.clear();
        terms.extend(self.posteriors.iter().map(|q| q.kernel().ln_pdf_with(x, scratch)));
        log_sum_exp(terms) - (self.n() as f64).ln()
    }

    /// `ln f̂(x)` with `f̂(x) = (1/n) Σ_i t_{γ_n−p+1}(x; μ_i, Λ_i)`.
    pub fn log_posterior_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let mut scratch = vec![0.0; self.p()];
        Ok(self.ln_mean_with(x, &mut scratch, &mut Vec::with_capacity(self.n())))
    }

    /// Pseudo-posterior mean density `f̂(x)`.
    pub fn posterior_mean_density(&self, x: &[f64]) -> Result<f64> {
        self.log_posterior_mean(x).map(f64::exp)
    }

    /// `ln f̂` at every point of `grid`.
    pub fn log_posterior_mean_on_grid(&self, grid: &[Vec<f64>]) -> Result<Vec<f64>> {
        grid.iter().try_for_each(|x| self.check_point(x))?;
        Ok(grid
            .par_iter()
            .map_init(
                || (vec![0.0; self.p()], Vec::with_capacity(self.n())),
                |(scratch, terms), x| self.ln_mean_with(x, scratch, terms),
            )
            .collect())
    }

    /// `f̂` at every point of `grid`.
    pub fn posterior_mean_on_grid(&self, grid: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.log_posterior_mean_on_grid(grid)?.into_iter().map(f64::exp).collect())
    }

    /// Monte Carlo average of `m` pseudo-posterior draws at every grid point.
    pub fn mc_mean_on_grid(&self, grid: &[Vec<f64>], m: usize, seed: u64) -> Result<Vec<f64>> {
        if m == 0 {
            return Err(invalid_param("number of draws must be positive"));
        }
        let values = draw_values_on_grid(self, grid, m, seed)?;
        Ok((0..grid.len())
            .map(|g| values.iter().map(|v| v[g]).sum::<f64>() / m as f64)
            .collect())
    }

    /// Closed-form mean density over `grid` with, when `m > 0`, a
    /// pointwise equal-tailed credible band from `m` draws.
    pub fn density_on_grid(&self, grid: &[Vec<f64>], m: usize, level: f64, seed: u64) -> Result<Vec<DensityRow>> {
        let mean = self.posterior_mean_on_grid(grid)?;
        let band = if m > 0 {
            let values = draw_values_on_grid(self, grid, m, seed)?;
            Some(band_from_values(&values, level)?)
        } else {
            None
        };
        Ok(grid
            .iter()
            .enumerate()
            .map(|(g, x)| DensityRow {
                x: x.clone(),
                mean: mean[g],
                lo: band.as_ref().map(|b| b[g].lo),
                hi: band.as_ref().map(|b| b[g].hi),
            })
            .collect())
    }
}
