//! Closed-form pseudo-posterior moments: the variance bound for `f(x)`, the
//! variance of the weighted kernel-mean functional and the Dirichlet weight
//! covariance.

use std::f64::consts::PI;

use crate::error::{invalid_param, NndmError, Result};
use crate::estimator::FittedModel;
use crate::hyper::bandwidth_h2;
use crate::kernel::{ln_gamma_ratio, StudentT};
use crate::linalg::log_sum_exp;

/// Ingredients and value of the upper bound on `var{f(x) | data}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceDiagnostics {
    pub r_n: f64,
    pub d_n: f64,
    /// `h_n²`, so that `H_n = h_n² I_p`.
    pub h2: f64,
    /// `(1/n) Σ_i t_{γ_n−p+2}(x; μ_i, D_n Λ_i)`.
    pub fhat_var: f64,
    pub bound: f64,
}

/// `R_n = Γ((γ_n−p+2)/2)/Γ((γ_n−p+1)/2) · [(ν_n+2)/(4πν_n(γ_n−p+2))]^{p/2}`.
pub fn r_n(nu_n: f64, gamma_n: f64, p: usize) -> Result<f64> {
    let pf = p as f64;
    let a = gamma_n - pf + 2.0;
    if !(a - 1.0 > 0.0) {
        return Err(invalid_param(format!("gamma_n - p + 1 must be positive, got {}", a - 1.0)));
    }
    let ln = ln_gamma_ratio(0.5 * a, 0.5 * (a - 1.0)) + 0.5 * pf * ((nu_n + 2.0) / (4.0 * PI * nu_n * a)).ln();
    Ok(ln.exp())
}

/// `D_n = (γ_n−p+1)(ν_n+2) / (2(γ_n−p+2)(ν_n+1))`.
pub fn d_n(nu_n: f64, gamma_n: f64, p: usize) -> f64 {
    let df = gamma_n - p as f64 + 1.0;
    df * (nu_n + 2.0) / (2.0 * (df + 1.0) * (nu_n + 1.0))
}

/// Evaluates the variance bound at many points, building the widened
/// `t_{γ_n−p+2}(μ_i, D_n Λ_i)` kernels once.
pub fn variance_bound_on_grid(model: &FittedModel, grid: &[Vec<f64>]) -> Result<Vec<VarianceDiagnostics>> {
    let hyper = model.hyper();
    let p = model.p();
    let (nu_n, gamma_n) = (hyper.nu_n(), hyper.gamma_n());
    let rn = r_n(nu_n, gamma_n, p)?;
    let dn = d_n(nu_n, gamma_n, p);
    let h2 = bandwidth_h2(hyper)?;
    let n = model.n() as f64;
    let weight_term = 1.0 / (n * (hyper.alpha() + 1.0) + 1.0) + 1.0 / n;
    let prefactor = rn * dn.powf(-0.5 * p as f64) * h2.powf(-0.5 * p as f64) * weight_term;
    let df = gamma_n - p as f64 + 2.0;
    let kernels: Vec<StudentT> = model
        .posteriors()
        .iter()
        .map(|post| {
            let b: Vec<f64> = post.lambda().iter().map(|v| dn * v).collect();
            StudentT::new(df, post.mu().to_vec(), &b)
        })
        .collect::<Result<_>>()?;
    let mut scratch = vec![0.0; p];
    let mut terms = Vec::with_capacity(kernels.len());
    grid.iter()
        .map(|x| {
            if x.len() != p {
                return Err(invalid_param("grid point dimension does not match the model"));
            }
            terms.clear();
            terms.extend(kernels.iter().map(|k| k.ln_pdf_with(x, &mut scratch)));
            let fhat_var = (log_sum_exp(&terms) - n.ln()).exp();
            Ok(VarianceDiagnostics {
                r_n: rn,
                d_n: dn,
                h2,
                fhat_var,
                bound: prefactor * fhat_var,
            })
        })
        .collect()
}

/// Upper bound on `var{f(x) | data}`:
/// `R_n D_n^{−p/2} f̂_var(x) |H_n|^{−1/2} [1/(n(α+1)+1) + 1/n]`.
pub fn variance_bound(model: &FittedModel, x: &[f64]) -> Result<VarianceDiagnostics> {
    Ok(variance_bound_on_grid(model, &[x.to_vec()])?[0])
}

/// `var(√n Θ | data)` for `Θ = Σ_i π_i η_i` with univariate kernels:
/// `v̄ + (n S_μ² + (n−1) v̄) / (n(α+1) + 1)`, where
/// `v_i = γ_n λ_i² / ((ν_n+1)(γ_n−2))` with `λ_i² = (ν_n+1) δ_i² / ν_n`,
/// and `S_μ²` is the (divisor `n`) spread of the `μ_i`.
pub fn functional_variance(model: &FittedModel) -> Result<f64> {
    if model.p() != 1 {
        return Err(NndmError::Unsupported(
            "the functional variance is available for univariate models only".into(),
        ));
    }
    let hyper = model.hyper();
    let (nu_n, gamma_n) = (hyper.nu_n(), hyper.gamma_n());
    if !(gamma_n > 2.0) {
        return Err(invalid_param(format!("functional variance needs gamma_n > 2, got {gamma_n}")));
    }
    let n = model.n() as f64;
    let posts = model.posteriors();
    let v_bar = posts
        .iter()
        .map(|post| {
            let lambda_sq = (nu_n + 1.0) * post.psi()[0] / gamma_n / nu_n;
            gamma_n * lambda_sq / ((nu_n + 1.0) * (gamma_n - 2.0))
        })
        .sum::<f64>()
        / n;
    let mu_bar = posts.iter().map(|p| p.mu()[0]).sum::<f64>() / n;
    let s_mu_sq = posts.iter().map(|p| (p.mu()[0] - mu_bar).powi(2)).sum::<f64>() / n;
    Ok(v_bar + (n * s_mu_sq + (n - 1.0) * v_bar) / (n * (hyper.alpha() + 1.0) + 1.0))
}

/// `(V_n, C_n)` with `cov(π) = V_n {(1 − C_n) I + C_n J}` for
/// `π ~ Dirichlet(α + 1, …, α + 1)`:
/// `V_n = (n − 1) / (n² (n(α+1) + 1))`, `C_n = −1/(n − 1)`.
pub fn dirichlet_covariance(n: usize, alpha: f64) -> Result<(f64, f64)> {
    if n < 2 || !(alpha >= 0.0) {
        return Err(invalid_param(format!("need n >= 2 and alpha >= 0, got n = {n}, alpha = {alpha}")));
    }
    let nf = n as f64;
    Ok(((nf - 1.0) / (nf * nf * (nf * (alpha + 1.0) + 1.0)), -1.0 / (nf - 1.0)))
}
