//! Exact k-nearest-neighbor neighborhoods and their sufficient statistics.
//!
//! Neighbors are ranked by squared Euclidean distance, ties broken by
//! increasing row index. The owner of a neighborhood is always its first
//! member, even when other rows coincide with it.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{invalid_param, Result};
use crate::linalg::{add_outer, symmetrize};

/// The `k` members of one neighborhood plus their mean and scatter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub owner: usize,
    /// Member indices ordered by distance to the owner; `members[0] == owner`.
    pub members: Vec<usize>,
    pub mean: Vec<f64>,
    /// `Σ (x_j - mean)(x_j - mean)ᵀ`, row-major `p × p`.
    pub scatter: Vec<f64>,
    /// Euclidean distance from the owner to its last member.
    pub radius: f64,
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Owner plus the `k - 1` nearest other rows, ordered, with squared distances.
fn nearest(data: &Dataset, i: usize, k: usize) -> (Vec<usize>, f64) {
    let xi = data.row(i);
    let mut cand: Vec<(f64, usize)> = (0..data.n())
        .filter(|&j| j != i)
        .map(|j| (sq_dist(xi, data.row(j)), j))
        .collect();
    let keep = k - 1;
    if keep > 0 && keep < cand.len() {
        cand.select_nth_unstable_by(keep - 1, by_distance_then_index);
    }
    cand.truncate(keep);
    cand.sort_unstable_by(by_distance_then_index);
    let last_sq = cand.last().map_or(0.0, |c| c.0);
    let mut members = Vec::with_capacity(k);
    members.push(i);
    members.extend(cand.iter().map(|c| c.1));
    (members, last_sq)
}

/// Accumulates in ascending index order, so equal member sets give
/// bit-identical statistics.
pub(crate) fn mean_and_scatter(data: &Dataset, members: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let members = &sorted[..];
    let p = data.p();
    let m = members.len() as f64;
    let mut mean = vec![0.0; p];
    for &j in members {
        for (acc, v) in mean.iter_mut().zip(data.row(j)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut scatter = vec![0.0; p * p];
    let mut dev = vec![0.0; p];
    for &j in members {
        for ((d, x), mu) in dev.iter_mut().zip(data.row(j)).zip(&mean) {
            *d = x - mu;
        }
        add_outer(&mut scatter, &dev, 1.0);
    }
    symmetrize(&mut scatter, p);
    (mean, scatter)
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(invalid_param(format!(
            "neighborhood size k = {k} must satisfy 2 <= k <= n = {n}"
        )));
    }
    Ok(())
}

/// Builds the `k`-nearest neighborhood of every row.
pub fn build_neighborhoods(data: &Dataset, k: usize) -> Result<Vec<Neighborhood>> {
    check_k(k, data.n())?;
    Ok((0..data.n())
        .into_par_iter()
        .map(|i| {
            let (members, last_sq) = nearest(data, i, k);
            let (mean, scatter) = mean_and_scatter(data, &members);
            Neighborhood {
                owner: i,
                members,
                mean,
                scatter,
                radius: last_sq.sqrt(),
            }
        })
        .collect())
}

/// Leave-one-out neighborhood statistics.
///
/// For each row `j` the `(k + 1)`-neighborhood on the full data is built
/// once. Removing another row `i` from the data turns it into the
/// `k`-neighborhood of `j` on the reduced data by dropping exactly one
/// member: `i` itself when it belongs to the neighborhood, the last member
/// otherwise. Only `k` distinct reduced neighborhoods exist per row (drop
/// position `1..=k`), so their means and scatters are precomputed.
#[derive(Debug, Clone)]
pub struct LooStats {
    n: usize,
    p: usize,
    k: usize,
    /// `(k + 1)`-neighborhoods on the full data.
    base: Vec<Neighborhood>,
    /// `n * k` reduced means, variant `r` of row `j` at `j * k + (r - 1)`.
    means: Vec<f64>,
    scatters: Vec<f64>,
}

impl LooStats {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// The `(k + 1)`-neighborhood of `j` on the full data.
    pub fn base(&self, j: usize) -> &Neighborhood {
        &self.base[j]
    }

    /// Position in `base(j).members` that is dropped when row `i` is left out.
    pub fn dropped_position(&self, j: usize, i: usize) -> usize {
        debug_assert_ne!(i, j);
        self.base[j].members[1..]
            .iter()
            .position(|&m| m == i)
            .map_or(self.k, |pos| pos + 1)
    }

    /// Mean and scatter of the reduced neighborhood obtained by dropping
    /// member position `r` (`1 <= r <= k`) from `base(j)`.
    #[inline]
    pub fn variant(&self, j: usize, r: usize) -> (&[f64], &[f64]) {
        debug_assert!(r >= 1 && r <= self.k);
        let slot = j * self.k + (r - 1);
        let p = self.p;
        (
            &self.means[slot * p..(slot + 1) * p],
            &self.scatters[slot * p * p..(slot + 1) * p * p],
        )
    }

    /// `(m_j^{(-i)}, S_j^{(-i)})`: mean and scatter of the `k`-neighborhood of
    /// `j` in the data with row `i` removed.
    pub fn stats(&self, j: usize, i: usize) -> (&[f64], &[f64]) {
        self.variant(j, self.dropped_position(j, i))
    }

    /// For each row `i`, the `(j, position)` pairs with `i` at `position >= 1`
    /// of `base(j)`.
    pub fn memberships(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.n];
        for (j, nb) in self.base.iter().enumerate() {
            for (pos, &m) in nb.members.iter().enumerate().skip(1) {
                out[m].push((j, pos));
            }
        }
        out
    }
}

/// Precomputes leave-one-out statistics for neighborhoods of size `k`.
pub fn build_loo_stats(data: &Dataset, k: usize) -> Result<LooStats> {
    let n = data.n();
    let p = data.p();
    if k < 2 || k + 1 > n {
        return Err(invalid_param(format!(
            "leave-one-out neighborhoods need 2 <= k <= n - 1, got k = {k}, n = {n}"
        )));
    }
    let base = build_neighborhoods(data, k + 1)?;
    let kf = k as f64;
    let ratio = (kf + 1.0) / kf;
    let per_row: Vec<(Vec<f64>, Vec<f64>)> = base
        .par_iter()
        .map(|nb| {
            let mut means = Vec::with_capacity(k * p);
            let mut scatters = Vec::with_capacity(k * p * p);
            let mut dev = vec![0.0; p];
            for &dropped in &nb.members[1..] {
                let x = data.row(dropped);
                for d in 0..p {
                    means.push(((kf + 1.0) * nb.mean[d] - x[d]) / kf);
                    dev[d] = nb.mean[d] - x[d];
                }
                let mut s = nb.scatter.clone();
                add_outer(&mut s, &dev, -ratio);
                symmetrize(&mut s, p);
                scatters.extend_from_slice(&s);
            }
            (means, scatters)
        })
        .collect();
    let mut means = Vec::with_capacity(n * k * p);
    let mut scatters = Vec::with_capacity(n * k * p * p);
    for (m, s) in per_row {
        means.extend(m);
        scatters.extend(s);
    }
    Ok(LooStats {
        n,
        p,
        k,
        base,
        means,
        scatters,
    })
}

/// Number of unique members `N_i` of every neighborhood: the owner plus each
/// other member that lies in no neighborhood besides this one and its own.
pub fn count_unique_members(neighborhoods: &[Neighborhood]) -> Vec<usize> {
    let n = neighborhoods.len();
    // containing[j] = number of neighborhoods that contain row j
    let mut containing = vec![0usize; n];
    for nb in neighborhoods {
        for &m in &nb.members {
            containing[m] += 1;
        }
    }
    neighborhoods
        .iter()
        .map(|nb| {
            1 + nb.members[1..]
                .iter()
                .filter(|&&j| {
                    let own = usize::from(neighborhoods[j].members.contains(&j));
                    containing[j] == 1 + own
                })
                .count()
        })
        .collect()
}
