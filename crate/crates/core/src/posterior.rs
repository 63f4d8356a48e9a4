//! Conjugate normal-inverse-Wishart update of one neighborhood and its
//! Student-t posterior predictive kernel.

use crate::error::{invalid_param, Result};
use crate::hyper::Hyperparameters;
use crate::kernel::StudentT;
use crate::linalg::{add_outer, symmetrize, LowerFactor};
use crate::neighbors::Neighborhood;

/// Pseudo-posterior `NIW_p(μ_i, ν_n, γ_n, Ψ_i)` of one neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodPosterior {
    mu: Vec<f64>,
    nu_n: f64,
    gamma_n: f64,
    psi: Vec<f64>,
    psi_factor: LowerFactor,
    lambda: Vec<f64>,
    kernel: StudentT,
}

impl NeighborhoodPosterior {
    /// Assembles a posterior from its parameters, validating `Ψ_i ≻ 0`.
    pub fn from_parameters(mu: Vec<f64>, nu_n: f64, gamma_n: f64, psi: Vec<f64>) -> Result<Self> {
        let p = mu.len();
        if psi.len() != p * p {
            return Err(invalid_param("psi must be p x p"));
        }
        let df = gamma_n - p as f64 + 1.0;
        if !(df > 0.0) || !(nu_n > 0.0) {
            return Err(invalid_param(format!(
                "posterior needs nu_n > 0 and gamma_n - p + 1 > 0, got nu_n = {nu_n}, gamma_n = {gamma_n}"
            )));
        }
        let psi_factor = LowerFactor::new(&psi, p)?;
        let c = (nu_n + 1.0) / (nu_n * df);
        let lambda: Vec<f64> = psi.iter().map(|v| c * v).collect();
        let kernel = StudentT::new(df, mu.clone(), &lambda)?;
        Ok(NeighborhoodPosterior {
            mu,
            nu_n,
            gamma_n,
            psi,
            psi_factor,
            lambda,
            kernel,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
    /// `μ_i`.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    pub fn nu_n(&self) -> f64 {
        self.nu_n
    }
    pub fn gamma_n(&self) -> f64 {
        self.gamma_n
    }
    /// `Ψ_i`, row-major.
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }
    /// `Λ_i = (ν_n + 1) / (ν_n (γ_n − p + 1)) Ψ_i`, row-major.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
    /// Posterior predictive kernel `t_{γ_n − p + 1}(·; μ_i, Λ_i)`.
    pub fn kernel(&self) -> &StudentT {
        &self.kernel
    }
    pub(crate) fn psi_factor(&self) -> &LowerFactor {
        &self.psi_factor
    }

    /// Univariate scale `δ_i² = Ψ_i / γ_n`.
    pub fn delta_sq(&self) -> Option<f64> {
        (self.dim() == 1).then(|| self.psi[0] / self.gamma_n)
    }
}

/// Conjugate update from a neighborhood's mean, scatter and size.
pub(crate) fn posterior_from_stats(
    mean: &[f64],
    scatter: &[f64],
    k: usize,
    hyper: &Hyperparameters,
) -> Result<NeighborhoodPosterior> {
    let p = hyper.p();
    if mean.len() != p || scatter.len() != p * p {
        return Err(invalid_param(format!(
            "neighborhood dimension {} does not match prior dimension {p}",
            mean.len()
        )));
    }
    let kf = k as f64;
    let nu0 = hyper.nu0();
    let nu_n = nu0 + kf;
    let gamma_n = hyper.gamma0() + kf;
    let mu0 = hyper.mu0();
    let mu: Vec<f64> = mean
        .iter()
        .zip(mu0)
        .map(|(xb, m0)| (nu0 * m0 + kf * xb) / nu_n)
        .collect();
    let mut psi: Vec<f64> = hyper.psi0().iter().zip(scatter).map(|(a, b)| a + b).collect();
    let dev: Vec<f64> = mean.iter().zip(mu0).map(|(xb, m0)| xb - m0).collect();
    add_outer(&mut psi, &dev, kf * nu0 / nu_n);
    symmetrize(&mut psi, p);
    NeighborhoodPosterior::from_parameters(mu, nu_n, gamma_n, psi)
}

/// Conjugate update of one neighborhood:
/// `μ_i = (ν₀μ₀ + k X̄_i)/ν_n`,
/// `Ψ_i = Ψ₀ + S_i + (kν₀/ν_n)(X̄_i − μ₀)(X̄_i − μ₀)ᵀ`.
pub fn update_neighborhood(nbhd: &Neighborhood, hyper: &Hyperparameters) -> Result<NeighborhoodPosterior> {
    if nbhd.members.len() != hyper.k() {
        return Err(invalid_param(format!(
            "neighborhood has {} members but k = {}",
            nbhd.members.len(),
            hyper.k()
        )));
    }
    posterior_from_stats(&nbhd.mean, &nbhd.scatter, hyper.k(), hyper)
}

/// Univariate normal-inverse-gamma update written with `δ_i²` and
/// `λ_i = δ_i √((ν_n + 1)/ν_n)`. Returns `(μ_i, δ_i², λ_i)`.
pub fn nig_update(values: &[f64], hyper: &Hyperparameters) -> Result<(f64, f64, f64)> {
    if hyper.p() != 1 {
        return Err(invalid_param("normal-inverse-gamma update is univariate"));
    }
    let k = values.len() as f64;
    let (nu0, gamma0, mu0) = (hyper.nu0(), hyper.gamma0(), hyper.mu0()[0]);
    let nu_n = nu0 + k;
    let gamma_n = gamma0 + k;
    let xbar = values.iter().sum::<f64>() / k;
    let ss: f64 = values.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let mu = (nu0 * mu0 + k * xbar) / nu_n;
    let delta_sq = (gamma0 * hyper.delta0sq() + ss + k * nu0 / nu_n * (mu0 - xbar).powi(2)) / gamma_n;
    let lambda = (delta_sq * (nu_n + 1.0) / nu_n).sqrt();
    Ok((mu, delta_sq, lambda))
}

/// `(1/λ) t_γ((x − μ)/λ)` for the standard univariate t density.
pub fn scaled_t_pdf(x: f64, df: f64, mu: f64, lambda: f64) -> f64 {
    let z = (x - mu) / lambda;
    let ln = crate::kernel::ln_gamma_ratio(0.5 * (df + 1.0), 0.5 * df)
        - 0.5 * (df * std::f64::consts::PI).ln()
        - 0.5 * (df + 1.0) * (z * z / df).ln_1p();
    ln.exp() / lambda
}
