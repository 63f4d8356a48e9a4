//! Prior hyperparameters, their defaults, the implied bandwidth, leave-one-out
//! cross-validation of `δ₀²` and the data-driven Dirichlet concentration `α`.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid_param, NndmError, Result};
use crate::kernel::StudentT;
use crate::linalg::{determinant, eigen_range, identity_scaled, log_sum_exp, symmetrize};
use crate::neighbors::build_loo_stats;
use crate::posterior::posterior_from_stats;

/// Normal-inverse-Wishart prior `NIW_p(μ₀, ν₀, γ₀, Ψ₀)` shared by every
/// neighborhood, together with the Dirichlet concentration `α` and the
/// neighborhood size `k`.
///
/// When built from `δ₀²`, `Ψ₀ = (γ₀ − p + 1) δ₀² I_p`, which makes each
/// diagonal entry of the prior covariance inverse-gamma with scale `δ₀²`
/// per degree of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    mu0: Vec<f64>,
    nu0: f64,
    gamma0: f64,
    delta0sq: f64,
    psi0: Vec<f64>,
    alpha: f64,
    k: usize,
}

impl Hyperparameters {
    pub fn new(mu0: Vec<f64>, nu0: f64, gamma0: f64, delta0sq: f64, alpha: f64, k: usize) -> Result<Self> {
        let p = mu0.len();
        if p == 0 {
            return Err(invalid_param("prior mean must have at least one entry"));
        }
        let psi0 = identity_scaled(p, (gamma0 - p as f64 + 1.0) * delta0sq);
        let h = Hyperparameters {
            mu0,
            nu0,
            gamma0,
            delta0sq,
            psi0,
            alpha,
            k,
        };
        h.validate()?;
        Ok(h)
    }

    /// Rebuilds stored hyperparameters without recomputing `Ψ₀`.
    pub(crate) fn from_stored(
        mu0: Vec<f64>,
        nu0: f64,
        gamma0: f64,
        delta0sq: f64,
        psi0: Vec<f64>,
        alpha: f64,
        k: usize,
    ) -> Result<Self> {
        let h = Hyperparameters {
            mu0,
            nu0,
            gamma0,
            delta0sq,
            psi0,
            alpha,
            k,
        };
        h.validate()?;
        Ok(h)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let p = self.p();
        if self.mu0.iter().any(|v| !v.is_finite()) {
            return Err(invalid_param("prior mean must be finite"));
        }
        if !(self.nu0 > 0.0) || !self.nu0.is_finite() {
            return Err(invalid_param(format!("nu0 must be positive, got {}", self.nu0)));
        }
        if !(self.gamma0 > p as f64 - 1.0) || !self.gamma0.is_finite() {
            return Err(invalid_param(format!(
                "gamma0 must exceed p - 1 = {}, got {}",
                p - 1,
                self.gamma0
            )));
        }
        if !(self.delta0sq > 0.0) || !self.delta0sq.is_finite() {
            return Err(invalid_param(format!("delta0^2 must be positive, got {}", self.delta0sq)));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(invalid_param(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if self.k < 1 {
            return Err(invalid_param("k must be positive"));
        }
        if self.psi0.len() != p * p {
            return Err(invalid_param("psi0 must be p x p"));
        }
        let (min, _) = eigen_range(&self.psi0, p);
        if !(min > 0.0) {
            return Err(invalid_param("psi0 must be positive definite"));
        }
        Ok(())
    }

    /// Same prior with `δ₀²` replaced and `Ψ₀` rebuilt from it.
    pub fn with_delta0sq(&self, delta0sq: f64) -> Result<Self> {
        Hyperparameters::new(self.mu0.clone(), self.nu0, self.gamma0, delta0sq, self.alpha, self.k)
    }

    /// Same prior with an arbitrary positive-definite `Ψ₀`. `δ₀²` becomes the
    /// average diagonal entry divided by `γ₀ − p + 1`, the value used by the
    /// bandwidth and the `α` rule.
    pub fn with_psi0(&self, psi0: Vec<f64>) -> Result<Self> {
        let p = self.p();
        let mut h = self.clone();
        if psi0.len() != p * p {
            return Err(invalid_param("psi0 must be p x p"));
        }
        let mut psi0 = psi0;
        symmetrize(&mut psi0, p);
        let trace: f64 = (0..p).map(|d| psi0[d * p + d]).sum();
        h.delta0sq = trace / (p as f64 * self.gamma_star());
        h.psi0 = psi0;
        h.validate()?;
        Ok(h)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut h = self.clone();
        h.alpha = alpha;
        h.validate()?;
        Ok(h)
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        let mut h = self.clone();
        h.k = k;
        h.validate()?;
        Ok(h)
    }

    pub fn with_prior(&self, mu0: Vec<f64>, nu0: f64, gamma0: f64) -> Result<Self> {
        Hyperparameters::new(mu0, nu0, gamma0, self.delta0sq, self.alpha, self.k)
    }

    pub fn p(&self) -> usize {
        self.mu0.len()
    }
    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }
    pub fn nu0(&self) -> f64 {
        self.nu0
    }
    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }
    pub fn delta0sq(&self) -> f64 {
        self.delta0sq
    }
    pub fn psi0(&self) -> &[f64] {
        &self.psi0
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn k(&self) -> usize {
        self.k
    }
    /// `ν_n = ν₀ + k`.
    pub fn nu_n(&self) -> f64 {
        self.nu0 + self.k as f64
    }
    /// `γ_n = γ₀ + k`.
    pub fn gamma_n(&self) -> f64 {
        self.gamma0 + self.k as f64
    }
    /// `γ₀ − p + 1`.
    pub fn gamma_star(&self) -> f64 {
        self.gamma0 - self.p() as f64 + 1.0
    }
    /// Degrees of freedom `γ_n − p + 1` of the predictive t kernels.
    pub fn predictive_df(&self) -> f64 {
        self.gamma_n() - self.p() as f64 + 1.0
    }
}

/// `k = ⌊n^{1/3}⌋ + 1` for univariate data, 10 otherwise, capped at `n − 1`.
pub fn default_k(n: usize, p: usize) -> usize {
    let k = if p == 1 { icbrt(n) + 1 } else { 10 };
    k.min(n.saturating_sub(1)).max(2)
}

fn icbrt(n: usize) -> usize {
    let mut r = (n as f64).cbrt().round() as usize;
    while r * r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// `μ₀ = 0`, `ν₀ = 0.001`, `γ₀ = p`, `Ψ₀ = I_p` (`δ₀² = 1`), `α = 0` and the
/// default `k`.
pub fn default_hyperparameters(n: usize, p: usize) -> Result<Hyperparameters> {
    if n < 3 || p < 1 {
        return Err(invalid_param(format!("defaults need n >= 3 and p >= 1, got n = {n}, p = {p}")));
    }
    Hyperparameters::new(vec![0.0; p], 0.001, p as f64, 1.0, 0.0, default_k(n, p))
}

/// Squared bandwidth `h_n² = (ν_n + 1)(γ₀ − p + 1) δ₀² / (ν_n (γ_n − p + 1))`.
pub fn bandwidth_h2(hyper: &Hyperparameters) -> Result<f64> {
    let df = hyper.predictive_df();
    if !(df > 0.0) {
        return Err(invalid_param(format!("gamma_n - p + 1 must be positive, got {df}")));
    }
    let nu_n = hyper.nu_n();
    Ok((nu_n + 1.0) * hyper.gamma_star() * hyper.delta0sq() / (nu_n * df))
}

/// Univariate `α = γ₀ δ₀² / (σ² γ_n ν_n)`.
pub fn alpha_univariate_rule(hyper: &Hyperparameters, variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(NndmError::DegenerateData(format!("sample variance is {variance}")));
    }
    Ok(hyper.gamma0() * hyper.delta0sq() / (variance * hyper.gamma_n() * hyper.nu_n()))
}

/// Multivariate `α = |H_n| / (ν_n |Σ|)` with `H_n = h_n² I_p`. This is a
/// heuristic extension of the univariate rule; for `p = 1` it equals the
/// univariate value times `(ν_n + 1) / ν_n`.
pub fn alpha_multivariate_rule(hyper: &Hyperparameters, covariance: &[f64]) -> Result<f64> {
    let p = hyper.p();
    if covariance.len() != p * p {
        return Err(invalid_param("covariance dimension mismatch"));
    }
    let det = determinant(covariance, p);
    if !(det > 0.0) || !det.is_finite() {
        return Err(NndmError::DegenerateData(format!(
            "sample covariance is singular (determinant {det})"
        )));
    }
    let h2 = bandwidth_h2(hyper)?;
    Ok(h2.powi(p as i32) / (hyper.nu_n() * det))
}

/// Data-driven Dirichlet concentration, using the unbiased sample
/// variance (`p = 1`) or covariance (`p ≥ 2`) of `data`.
pub fn choose_alpha(data: &Dataset, hyper: &Hyperparameters) -> Result<f64> {
    if data.p() != hyper.p() {
        return Err(invalid_param("data and prior dimensions differ"));
    }
    if data.n() < 2 {
        return Err(invalid_param("alpha selection needs n >= 2"));
    }
    let cov = data.sample_covariance()?;
    if data.p() == 1 {
        alpha_univariate_rule(hyper, cov[0])
    } else {
        alpha_multivariate_rule(hyper, &cov)
    }
}

/// `n_points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced_grid(lo: f64, hi: f64, n_points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) || !(hi >= lo) || n_points == 0 {
        return Err(invalid_param(format!("invalid grid {lo}..{hi} with {n_points} points")));
    }
    if n_points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n_points)
        .map(|t| (a + (b - a) * t as f64 / (n_points - 1) as f64).exp())
        .collect())
}

/// The default cross-validation grid: 25 log-spaced points over `[1e-3, 1e2]`.
pub fn default_cv_grid() -> Vec<f64> {
    log_spaced_grid(1e-3, 1e2, 25).expect("static grid is valid")
}

/// Leave-one-out cross-validation scores over a `δ₀²` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub grid: Vec<f64>,
    /// Mean leave-one-out log-likelihood per grid value; non-finite entries
    /// were excluded from the argmax.
    pub scores: Vec<f64>,
    pub best: f64,
    pub best_score: f64,
}

/// Leave-one-out log-likelihood `(1/n) Σ_i log f̂_{-i}(X_i)` for one `δ₀²`.
///
/// `f̂_{-i}` is the posterior-mean density built from the data without row
/// `i`; its neighborhoods come from [`LooStats`](crate::LooStats) so the
/// neighbor search runs only once for the whole grid.
fn loo_score(
    data: &Dataset,
    loo: &crate::neighbors::LooStats,
    memberships: &[Vec<(usize, usize)>],
    hyper: &Hyperparameters,
) -> Result<f64> {
    let n = data.n();
    let k = loo.k();
    // kernels[j * k + r - 1]: predictive t kernel of row j with member r dropped
    let kernels: Vec<StudentT> = (0..n * k)
        .into_par_iter()
        .map(|slot| {
            let (j, r) = (slot / k, slot % k + 1);
            let (mean, scatter) = loo.variant(j, r);
            posterior_from_stats(mean, scatter, k, hyper).map(|post| post.kernel().clone())
        })
        .collect::<Result<_>>()?;
    let log_n1 = ((n - 1) as f64).ln();
    let per_point: Vec<f64> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![k; n], vec![0.0; data.p()], Vec::with_capacity(n)),
            |(variant, scratch, terms), i| {
                for &(j, pos) in &memberships[i] {
                    variant[j] = pos;
                }
                let x = data.row(i);
                terms.clear();
                for j in (0..n).filter(|&j| j != i) {
                    terms.push(kernels[j * k + variant[j] - 1].ln_pdf_with(x, scratch));
                }
                for &(j, _) in &memberships[i] {
                    variant[j] = k;
                }
                log_sum_exp(terms) - log_n1
            },
        )
        .collect();
    Ok(per_point.iter().sum::<f64>() / n as f64)
}

/// Selects `δ₀²` from `grid` by maximizing the leave-one-out log-likelihood.
/// The other prior parameters and `k` come from `base`.
pub fn cv_delta0(data: &Dataset, base: &Hyperparameters, grid: &[f64]) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(invalid_param("cross-validation grid is empty"));
    }
    if data.p() != base.p() {
        return Err(invalid_param("data and prior dimensions differ"));
    }
    let loo = build_loo_stats(data, base.k())?;
    let memberships = loo.memberships();
    let mut scores = Vec::with_capacity(grid.len());
    for &d in grid {
        let hyper = base.with_delta0sq(d)?;
        let score = match loo_score(data, &loo, &memberships, &hyper) {
            Ok(s) => s,
            Err(e) => {
                warn!("cross-validation candidate delta0^2 = {d} failed: {e}");
                f64::NAN
            }
        };
        if !score.is_finite() {
            warn!("cross-validation candidate delta0^2 = {d} has non-finite score; excluded");
        }
        scores.push(score);
    }
    let best_idx = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_finite())
        .fold(None::<(usize, f64)>, |acc, (i, &s)| match acc {
            Some((_, b)) if b >= s => acc,
            _ => Some((i, s)),
        })
        .ok_or_else(|| NndmError::CvFailure("no grid value produced a finite score".into()))?;
    Ok(CvResult {
        grid: grid.to_vec(),
        scores,
        best: grid[best_idx.0],
        best_score: best_idx.1,
    })
}
