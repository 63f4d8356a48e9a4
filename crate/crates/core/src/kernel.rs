//! Student-t and Gaussian kernels with cached Cholesky factors.

use std::f64::consts::PI;

use crate::error::{invalid_param, Result};
use crate::linalg::LowerFactor;

#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln Γ(a) − ln Γ(b)`.
#[inline]
pub(crate) fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    ln_gamma(a) - ln_gamma(b)
}

/// Multivariate Student-t density `t_γ(x; μ, Λ)` with `γ` degrees of freedom,
/// location `μ` and scale matrix `Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentT {
    df: f64,
    loc: Vec<f64>,
    scale: LowerFactor,
    log_norm: f64,
}

impl StudentT {
    /// `scale` is a row-major `p × p` positive-definite matrix.
    pub fn new(df: f64, loc: Vec<f64>, scale: &[f64]) -> Result<Self> {
        if !(df > 0.0) {
            return Err(invalid_param(format!("degrees of freedom must be positive, got {df}")));
        }
        let p = loc.len();
        if scale.len() != p * p {
            return Err(invalid_param("scale matrix does not match location dimension"));
        }
        let factor = LowerFactor::new(scale, p)?;
        let pf = p as f64;
        let log_norm = ln_gamma_ratio(0.5 * (df + pf), 0.5 * df)
            - 0.5 * pf * (df * PI).ln()
            - 0.5 * factor.log_det();
        Ok(StudentT {
            df,
            loc,
            scale: factor,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.loc.len()
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn loc(&self) -> &[f64] {
        &self.loc
    }

    /// `log |Λ|`.
    pub fn log_det_scale(&self) -> f64 {
        self.scale.log_det()
    }

    /// Log-density at `x`; `scratch` must hold at least `p` values.
    #[inline]
    pub fn ln_pdf_with(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let q = self.scale.mahalanobis_sq(x, &self.loc, scratch);
        self.log_norm - 0.5 * (self.df + self.dim() as f64) * (q / self.df).ln_1p()
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.dim()];
        self.ln_pdf_with(x, &mut scratch)
    }
}

/// Log of the `p`-dimensional Student-t density `t_df(x; loc, scale)`.
pub fn mvt_logpdf(x: &[f64], df: f64, loc: &[f64], scale: &[f64]) -> Result<f64> {
    if x.len() != loc.len() {
        return Err(invalid_param("point and location dimensions differ"));
    }
    Ok(StudentT::new(df, loc.to_vec(), scale)?.ln_pdf(x))
}

/// Multivariate Gaussian density `φ_p(x; mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Vec<f64>,
    cov: LowerFactor,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: &[f64]) -> Result<Self> {
        let p = mean.len();
        if cov.len() != p * p {
            return Err(invalid_param("covariance does not match mean dimension"));
        }
        let factor = LowerFactor::new(cov, p)?;
        Ok(Self::from_factor(mean, factor))
    }

    pub(crate) fn from_factor(mean: Vec<f64>, cov: LowerFactor) -> Self {
        let p = mean.len() as f64;
        let log_norm = -0.5 * p * (2.0 * PI).ln() - 0.5 * cov.log_det();
        Gaussian { mean, cov, log_norm }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major covariance matrix.
    pub fn covariance(&self) -> Vec<f64> {
        self.cov.reconstruct()
    }

    /// Row-major lower Cholesky factor of the covariance.
    pub fn covariance_factor(&self) -> &[f64] {
        self.cov.factor()
    }

    #[inline]
    pub fn ln_pdf_with(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        self.log_norm - 0.5 * self.cov.mahalanobis_sq(x, &self.mean, scratch)
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.dim()];
        self.ln_pdf_with(x, &mut scratch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_cauchy_at_mode() {
        let v = mvt_logpdf(&[0.0], 1.0, &[0.0], &[1.0]).unwrap();
        assert!((v - (1.0 / PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn large_df_approaches_gaussian() {
        let v = mvt_logpdf(&[1.0, 1.0], 1e6, &[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let gauss = -(2.0 * PI).ln() - 1.0;
        assert!((v - gauss).abs() < 1e-3);
    }

    #[test]
    fn high_precision_reference_p3() {
        // Reference from a 50-digit evaluation of the closed form (mpmath).
        let scale = [
            2.0, 0.3, -0.4, //
            0.3, 1.5, 0.2, //
            -0.4, 0.2, 0.9,
        ];
        let v = mvt_logpdf(&[0.7, -1.1, 0.4], 7.5, &[0.1, 0.2, -0.3], &scale).unwrap();
        assert!((v - MPMATH_REF_P3).abs() < 1e-12, "{v}");
    }

    const MPMATH_REF_P3: f64 = -4.828_808_294_701_78;

    #[test]
    fn non_pd_scale_is_numerical_error() {
        let err = mvt_logpdf(&[0.0, 0.0], 3.0, &[0.0, 0.0], &[1.0, 2.0, 2.0, 1.0]).unwrap_err();
        assert!(matches!(err, crate::NndmError::Numerical(_)));
    }

    #[test]
    fn gaussian_matches_closed_form() {
        let g = Gaussian::new(vec![1.0], &[4.0]).unwrap();
        let expected = -0.5 * (2.0 * PI * 4.0).ln() - 0.5 * 0.25;
        assert!((g.ln_pdf(&[2.0]) - expected).abs() < 1e-14);
    }
}
