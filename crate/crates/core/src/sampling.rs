//! Monte Carlo draws from the pseudo-posterior of the density and
//! equal-tailed credible bands built from them.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid_param, NndmError, Result};
use crate::estimator::FittedModel;
use crate::kernel::Gaussian;
use crate::linalg::{log_sum_exp, LowerFactor};
use crate::posterior::NeighborhoodPosterior;
use crate::rng::substream;

/// One pseudo-posterior draw `f⁽ᵗ⁾ = Σ_i π_i φ_p(·; η_i, Σ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityDraw {
    weights: Vec<f64>,
    kernels: Vec<Gaussian>,
}

impl DensityDraw {
    pub fn new(weights: Vec<f64>, kernels: Vec<Gaussian>) -> Result<Self> {
        if weights.len() != kernels.len() || weights.is_empty() {
            return Err(invalid_param("draw needs one weight per kernel"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid_param("draw weights must be non-negative"));
        }
        let p = kernels[0].dim();
        if kernels.iter().any(|k| k.dim() != p) {
            return Err(invalid_param("draw kernels have mixed dimensions"));
        }
        Ok(DensityDraw { weights, kernels })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kernels(&self) -> &[Gaussian] {
        &self.kernels
    }

    pub fn dim(&self) -> usize {
        self.kernels[0].dim()
    }

    /// `ln f⁽ᵗ⁾(x)`, reduced with log-sum-exp. `terms` is scratch space.
    pub fn ln_density_with(&self, x: &[f64], scratch: &mut [f64], terms: &mut Vec<f64>) -> f64 {
        terms.clear();
        for (w, k) in self.weights.iter().zip(&self.kernels) {
            if *w > 0.0 {
                terms.push(w.ln() + k.ln_pdf_with(x, scratch));
            }
        }
        log_sum_exp(terms)
    }

    pub fn ln_density(&self, x: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.dim()];
        self.ln_density_with(x, &mut scratch, &mut Vec::with_capacity(self.weights.len()))
    }
}

/// `f⁽ᵗ⁾(x)` for one draw.
pub fn evaluate_draw(draw: &DensityDraw, x: &[f64]) -> Result<f64> {
    if x.len() != draw.dim() {
        return Err(invalid_param(format!(
            "point has dimension {}, draw has dimension {}",
            x.len(),
            draw.dim()
        )));
    }
    Ok(draw.ln_density(x).exp())
}

/// Samples `(η, Σ) ~ NIW_p(μ_i, ν_n, γ_n, Ψ_i)`.
///
/// With `Ψ_i = C Cᵀ` and the Bartlett factor `A` (lower triangular,
/// `A_jj² ~ χ²(γ_n − j)`, `A_jl ~ N(0, 1)` below the diagonal),
/// `W = C⁻ᵀ A Aᵀ C⁻¹ ~ Wishart(γ_n, Ψ_i⁻¹)` and
/// `Σ = W⁻¹ = G Gᵀ` with `G = C A⁻ᵀ`. `G` comes from triangular solves.
/// Then `η = μ_i + G z / √ν_n`.
pub fn sample_niw<R: Rng + ?Sized>(post: &NeighborhoodPosterior, rng: &mut R) -> Result<Gaussian> {
    let p = post.dim();
    let gamma_n = post.gamma_n();
    let c = post.psi_factor().factor();
    if p == 1 {
        let chi = sample_chi2(gamma_n, rng)?;
        let var = post.psi()[0] / chi;
        let z: f64 = StandardNormal.sample(rng);
        let eta = post.mu()[0] + (var / post.nu_n()).sqrt() * z;
        return Gaussian::new(vec![eta], &[var]);
    }
    let mut a = vec![0.0; p * p];
    for j in 0..p {
        a[j * p + j] = sample_chi2(gamma_n - j as f64, rng)?.sqrt();
        for l in 0..j {
            a[j * p + l] = StandardNormal.sample(rng);
        }
    }
    // Rows of G solve A g_rᵀ = c_rᵀ.
    let mut g = vec![0.0; p * p];
    for r in 0..p {
        for j in 0..p {
            let mut s = c[r * p + j];
            for l in 0..j {
                s -= a[j * p + l] * g[r * p + l];
            }
            g[r * p + j] = s / a[j * p + j];
        }
    }
    let mut sigma = vec![0.0; p * p];
    for r in 0..p {
        for col in 0..=r {
            let v: f64 = (0..p).map(|t| g[r * p + t] * g[col * p + t]).sum();
            sigma[r * p + col] = v;
            sigma[col * p + r] = v;
        }
    }
    let factor = LowerFactor::new(&sigma, p)?;
    let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
    let mut shift = vec![0.0; p];
    factor.mul(&z, &mut shift);
    let scale = post.nu_n().sqrt().recip();
    let eta: Vec<f64> = post.mu().iter().zip(&shift).map(|(m, s)| m + scale * s).collect();
    Ok(Gaussian::from_factor(eta, factor))
}

fn sample_chi2<R: Rng + ?Sized>(df: f64, rng: &mut R) -> Result<f64> {
    let dist = ChiSquared::new(df).map_err(|e| NndmError::InvalidParameter(format!("chi-squared({df}): {e}")))?;
    Ok(dist.sample(rng))
}

/// Draw `t` of the model under root seed `seed`. Neighborhood `i` uses the
/// substream `(seed, t, i)` for its Dirichlet gamma variate and its kernel
/// parameters, in that order.
pub fn sample_draw(model: &FittedModel, seed: u64, t: u64) -> Result<DensityDraw> {
    let shape = model.hyper().alpha() + 1.0;
    let gamma = Gamma::new(shape, 1.0).map_err(|e| invalid_param(format!("gamma({shape}, 1): {e}")))?;
    let mut weights = Vec::with_capacity(model.n());
    let mut kernels = Vec::with_capacity(model.n());
    for (i, post) in model.posteriors().iter().enumerate() {
        let mut rng = substream(seed, t, i as u64);
        weights.push(gamma.sample(&mut rng));
        kernels.push(sample_niw(post, &mut rng)?);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    DensityDraw::new(weights, kernels)
}

/// `m` independent draws `t = 0..m`, deterministic given `seed`.
pub fn sample_draws(model: &FittedModel, m: usize, seed: u64) -> Result<Vec<DensityDraw>> {
    if m == 0 {
        return Err(invalid_param("number of draws must be positive"));
    }
    (0..m as u64)
        .into_par_iter()
        .map(|t| sample_draw(model, seed, t))
        .collect()
}

/// Values `f⁽ᵗ⁾(x)` for `t = 0..m` at every grid point, as `m` rows of
/// `grid.len()` values. Draws are discarded after evaluation.
pub fn draw_values_on_grid(model: &FittedModel, grid: &[Vec<f64>], m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if let Some(bad) = grid.iter().find(|x| x.len() != model.p()) {
        return Err(invalid_param(format!(
            "grid point has dimension {}, model has dimension {}",
            bad.len(),
            model.p()
        )));
    }
    (0..m as u64)
        .into_par_iter()
        .map(|t| {
            let draw = sample_draw(model, seed, t)?;
            Ok(values_on_grid(&draw, grid))
        })
        .collect()
}

pub(crate) fn values_on_grid(draw: &DensityDraw, grid: &[Vec<f64>]) -> Vec<f64> {
    let mut scratch = vec![0.0; draw.dim()];
    let mut terms = Vec::with_capacity(draw.weights.len());
    grid.iter()
        .map(|x| draw.ln_density_with(x, &mut scratch, &mut terms).exp())
        .collect()
}

/// Credible band at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub lo: f64,
    pub mean: f64,
    pub hi: f64,
}

/// Sample quantile with linear interpolation between order statistics:
/// position `h = (N − 1) q` of the sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid_param(format!("credible level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

/// Equal-tailed band from per-draw values (`values[t][g]`): quantiles at
/// `(1 − level)/2` and `1 − (1 − level)/2` plus the Monte Carlo mean.
pub fn band_from_values(values: &[Vec<f64>], level: f64) -> Result<Vec<BandPoint>> {
    check_level(level)?;
    let m = values.len();
    if m == 0 {
        return Err(invalid_param("credible band needs at least one draw"));
    }
    let g = values[0].len();
    if values.iter().any(|v| v.len() != g) {
        return Err(invalid_param("draws evaluated on grids of different sizes"));
    }
    let tail = 0.5 * (1.0 - level);
    Ok((0..g)
        .map(|j| {
            let mut col: Vec<f64> = values.iter().map(|v| v[j]).collect();
            col.sort_by(f64::total_cmp);
            BandPoint {
                lo: quantile_sorted(&col, tail),
                mean: col.iter().sum::<f64>() / m as f64,
                hi: quantile_sorted(&col, 1.0 - tail),
            }
        })
        .collect())
}

/// Pointwise equal-tailed credible band of a set of draws over `grid`.
pub fn credible_band(draws: &[DensityDraw], grid: &[Vec<f64>], level: f64) -> Result<Vec<BandPoint>> {
    check_level(level)?;
    if draws.is_empty() {
        return Err(invalid_param("credible band needs at least one draw"));
    }
    let values: Vec<Vec<f64>> = draws.par_iter().map(|d| values_on_grid(d, grid)).collect();
    band_from_values(&values, level)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(mean: f64) -> Gaussian {
        Gaussian::new(vec![mean], &[1.0]).unwrap()
    }

    #[test]
    fn single_component_draw_is_its_gaussian() {
        let g = unit(0.3);
        let draw = DensityDraw::new(vec![1.0], vec![g.clone()]).unwrap();
        let v = evaluate_draw(&draw, &[1.1]).unwrap();
        assert!((v - g.ln_pdf(&[1.1]).exp()).abs() < 1e-16);
    }

    #[test]
    fn symmetric_two_component_draw() {
        let draw = DensityDraw::new(vec![0.5, 0.5], vec![unit(1.0), unit(-1.0)]).unwrap();
        let phi1 = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((evaluate_draw(&draw, &[0.0]).unwrap() - phi1).abs() < 1e-15);
        assert!(evaluate_draw(&draw, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn band_level_must_be_open_interval() {
        let values = vec![vec![1.0], vec![2.0]];
        assert!(band_from_values(&values, 0.0).is_err());
        assert!(band_from_values(&values, 1.0).is_err());
        assert!(band_from_values(&[], 0.5).is_err());
        assert!(credible_band(&[], &[vec![0.0]], 0.5).is_err());
    }

    #[test]
    fn constant_draws_give_degenerate_band() {
        let values = vec![vec![0.25, 3.0]; 40];
        for b in band_from_values(&values, 0.95).unwrap() {
            assert_eq!(b.lo, b.hi);
            assert_eq!(b.lo, b.mean);
        }
    }

    #[test]
    fn order_statistics_under_linear_interpolation() {
        // sorted {0.01, …, 1.00}: q = 0.05 sits at h = 4.95 → 0.0595,
        // q = 0.95 sits at h = 94.05 → 0.9505
        let values: Vec<Vec<f64>> = (1..=100).rev().map(|i| vec![i as f64 / 100.0]).collect();
        let b = band_from_values(&values, 0.9).unwrap()[0];
        assert!((b.lo - 0.0595).abs() < 1e-12, "{}", b.lo);
        assert!((b.hi - 0.9505).abs() < 1e-12, "{}", b.hi);
        assert!((b.mean - 0.505).abs() < 1e-12);
    }
}
