//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nndm::kernel::mvt_logpdf;
use nndm::{Dataset, FittedModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_data(n: usize, p: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let values: Vec<f64> = (0..n * p)
        .map(|_| {
            // Box–Muller, independent of rand_distr
            let u1: f64 = 1.0 - r.random::<f64>();
            let u2: f64 = r.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    Dataset::new(values, n, p).unwrap()
}

pub fn rows(data: &Dataset) -> Vec<Vec<f64>> {
    data.rows().map(<[f64]>::to_vec).collect()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest rows to `target` among `candidates` by full
/// sort on (distance, index).
pub fn naive_knn(points: &[Vec<f64>], target: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let mut c: Vec<usize> = candidates.to_vec();
    c.sort_by(|&a, &b| {
        sq(&points[a], &points[target])
            .partial_cmp(&sq(&points[b], &points[target]))
            .unwrap()
            .then(a.cmp(&b))
    });
    c.truncate(k);
    c
}

/// Mean and (unnormalized) scatter of the listed points.
pub fn naive_mean_scatter(points: &[Vec<f64>], members: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let p = points[0].len();
    let m = members.len() as f64;
    let mean: Vec<f64> = (0..p).map(|d| members.iter().map(|&j| points[j][d]).sum::<f64>() / m).collect();
    let mut s = vec![0.0; p * p];
    for &j in members {
        for a in 0..p {
            for b in 0..p {
                s[a * p + b] += (points[j][a] - mean[a]) * (points[j][b] - mean[b]);
            }
        }
    }
    (mean, s)
}

/// Prior used by the oracles: `μ₀`, `ν₀`, `γ₀`, `Ψ₀ = (γ₀ − p + 1) δ₀² I`.
#[derive(Clone, Debug)]
pub struct Prior {
    pub mu0: Vec<f64>,
    pub nu0: f64,
    pub gamma0: f64,
    pub delta0sq: f64,
}

/// Predictive t parameters `(df, μ, Λ)` of a neighborhood with the given
/// mean, scatter and size.
pub fn naive_predictive(mean: &[f64], scatter: &[f64], k: usize, prior: &Prior) -> (f64, Vec<f64>, Vec<f64>) {
    let p = mean.len();
    let kf = k as f64;
    let nu_n = prior.nu0 + kf;
    let gamma_n = prior.gamma0 + kf;
    let mu: Vec<f64> = (0..p).map(|d| (prior.nu0 * prior.mu0[d] + kf * mean[d]) / nu_n).collect();
    let psi0 = (prior.gamma0 - p as f64 + 1.0) * prior.delta0sq;
    let mut psi = vec![0.0; p * p];
    for a in 0..p {
        for b in 0..p {
            let prior_part = if a == b { psi0 } else { 0.0 };
            psi[a * p + b] = prior_part
                + scatter[a * p + b]
                + kf * prior.nu0 / nu_n * (mean[a] - prior.mu0[a]) * (mean[b] - prior.mu0[b]);
        }
    }
    let df = gamma_n - p as f64 + 1.0;
    let c = (nu_n + 1.0) / (nu_n * df);
    (df, mu, psi.iter().map(|v| c * v).collect())
}

/// `ln f̂(x)` of the estimator built on `points[subset]` from scratch.
pub fn naive_log_mean(points: &[Vec<f64>], subset: &[usize], k: usize, prior: &Prior, x: &[f64]) -> f64 {
    let terms: Vec<f64> = subset
        .iter()
        .map(|&j| {
            let nb = naive_knn(points, j, subset, k);
            let (m, s) = naive_mean_scatter(points, &nb);
            let (df, mu, lambda) = naive_predictive(&m, &s, k, prior);
            mvt_logpdf(x, df, &mu, &lambda).unwrap()
        })
        .collect();
    let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln() - (subset.len() as f64).ln()
}

/// Leave-one-out score recomputed from scratch for every left-out row.
pub fn naive_cv_score(points: &[Vec<f64>], k: usize, prior: &Prior) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let subset: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            naive_log_mean(points, &subset, k, prior, &points[i])
        })
        .sum::<f64>()
        / n as f64
}

/// Composite trapezoid rule of `f` sampled at equally spaced nodes.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Equally spaced nodes from `lo` to `hi`.
pub fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m).map(|t| lo + (hi - lo) * t as f64 / (m - 1) as f64).collect()
}

/// Midpoints of an `m × m` grid over `[lo, hi]²` and the cell area.
pub fn box_midpoints(lo: [f64; 2], hi: [f64; 2], m: usize) -> (Vec<Vec<f64>>, f64) {
    let hx = (hi[0] - lo[0]) / m as f64;
    let hy = (hi[1] - lo[1]) / m as f64;
    let mut pts = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            pts.push(vec![lo[0] + (a as f64 + 0.5) * hx, lo[1] + (b as f64 + 0.5) * hy]);
        }
    }
    (pts, hx * hy)
}

/// Data range padded by `pad` in every coordinate.
pub fn padded_box(data: &Dataset, pad: f64) -> (Vec<f64>, Vec<f64>) {
    let p = data.p();
    let lo = (0..p).map(|d| data.rows().map(|r| r[d]).fold(f64::INFINITY, f64::min) - pad).collect();
    let hi = (0..p).map(|d| data.rows().map(|r| r[d]).fold(f64::NEG_INFINITY, f64::max) + pad).collect();
    (lo, hi)
}

pub fn prior_of(model: &FittedModel) -> Prior {
    let h = model.hyper();
    Prior {
        mu0: h.mu0().to_vec(),
        nu0: h.nu0(),
        gamma0: h.gamma0(),
        delta0sq: h.delta0sq(),
    }
}

/// Sample mean, unbiased variance and the standard error of the variance
/// estimate `sqrt((m₄ − s⁴)/N)`.
pub fn variance_with_se(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    (mean, var, ((m4 - var * var) / n).sqrt())
}
