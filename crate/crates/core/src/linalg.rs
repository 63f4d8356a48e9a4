//! Dense helpers for the small `p × p` matrices attached to every
//! neighborhood. Matrices are flat row-major slices; factorizations go
//! through nalgebra, the per-point hot loops stay allocation free.

use nalgebra::DMatrix;

use crate::error::{NndmError, Result};

/// Lower Cholesky factor `L` of a symmetric positive-definite `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LowerFactor {
    p: usize,
    l: Vec<f64>,
    log_det: f64,
}

impl LowerFactor {
    pub(crate) fn new(a: &[f64], p: usize) -> Result<Self> {
        debug_assert_eq!(a.len(), p * p);
        if p == 1 {
            if !(a[0] > 0.0) || !a[0].is_finite() {
                return Err(NndmError::Numerical(format!(
                    "matrix [{}] is not positive definite",
                    a[0]
                )));
            }
            let l = a[0].sqrt();
            return Ok(LowerFactor {
                p,
                l: vec![l],
                log_det: a[0].ln(),
            });
        }
        let m = DMatrix::from_row_slice(p, p, a);
        let chol = m.cholesky().ok_or_else(|| {
            NndmError::Numerical("Cholesky factorization failed: matrix is not positive definite".into())
        })?;
        let lm = chol.l();
        let mut l = vec![0.0; p * p];
        let mut log_det = 0.0;
        for r in 0..p {
            for c in 0..=r {
                l[r * p + c] = lm[(r, c)];
            }
            log_det += 2.0 * lm[(r, r)].ln();
        }
        if !log_det.is_finite() {
            return Err(NndmError::Numerical("degenerate Cholesky factor".into()));
        }
        Ok(LowerFactor { p, l, log_det })
    }

    /// `log |A|`.
    #[inline]
    pub(crate) fn log_det(&self) -> f64 {
        self.log_det
    }

    pub(crate) fn factor(&self) -> &[f64] {
        &self.l
    }

    /// `(x - mu)ᵀ A⁻¹ (x - mu)` by forward substitution; `scratch.len() >= p`.
    #[inline]
    pub(crate) fn mahalanobis_sq(&self, x: &[f64], mu: &[f64], scratch: &mut [f64]) -> f64 {
        let p = self.p;
        if p == 1 {
            let z = (x[0] - mu[0]) / self.l[0];
            return z * z;
        }
        let mut acc = 0.0;
        for r in 0..p {
            let row = &self.l[r * p..r * p + r + 1];
            let mut s = x[r] - mu[r];
            for c in 0..r {
                s -= row[c] * scratch[c];
            }
            let z = s / row[r];
            scratch[r] = z;
            acc += z * z;
        }
        acc
    }

    /// `out = L z`.
    pub(crate) fn mul(&self, z: &[f64], out: &mut [f64]) {
        let p = self.p;
        for (r, o) in out.iter_mut().enumerate().take(p) {
            *o = (0..=r).map(|c| self.l[r * p + c] * z[c]).sum();
        }
    }

    /// Reconstructs `A = L Lᵀ`.
    pub(crate) fn reconstruct(&self) -> Vec<f64> {
        let p = self.p;
        let mut a = vec![0.0; p * p];
        for r in 0..p {
            for c in 0..=r {
                let v: f64 = (0..=c).map(|t| self.l[r * p + t] * self.l[c * p + t]).sum();
                a[r * p + c] = v;
                a[c * p + r] = v;
            }
        }
        a
    }
}

/// `a += scale * v vᵀ`.
#[inline]
pub(crate) fn add_outer(a: &mut [f64], v: &[f64], scale: f64) {
    let p = v.len();
    for r in 0..p {
        let vr = scale * v[r];
        for c in 0..p {
            a[r * p + c] += vr * v[c];
        }
    }
}

/// Replaces `a` by `(a + aᵀ) / 2`.
pub(crate) fn symmetrize(a: &mut [f64], p: usize) {
    for r in 0..p {
        for c in 0..r {
            let v = 0.5 * (a[r * p + c] + a[c * p + r]);
            a[r * p + c] = v;
            a[c * p + r] = v;
        }
    }
}

pub(crate) fn identity_scaled(p: usize, s: f64) -> Vec<f64> {
    let mut a = vec![0.0; p * p];
    for d in 0..p {
        a[d * p + d] = s;
    }
    a
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub(crate) fn eigen_range(a: &[f64], p: usize) -> (f64, f64) {
    let m = DMatrix::from_row_slice(p, p, a);
    let eig = m.symmetric_eigen().eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

pub(crate) fn determinant(a: &[f64], p: usize) -> f64 {
    DMatrix::from_row_slice(p, p, a).determinant()
}

/// `ln Σ exp(v)` over the finite-or-−∞ entries of `v`.
pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}
