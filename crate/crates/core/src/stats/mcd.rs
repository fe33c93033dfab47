//! Minimum Covariance Determinant by concentration steps (FAST-MCD).

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::linalg::{mean_cov, Cholesky};
use crate::error::StatsError;
use crate::real::Real;

/// Above this many points the search runs on nested random subsets first.
const SMALL_N: usize = 600;
const SUBSET_SIZE: usize = 300;
const MAX_SUBSETS: usize = 5;
const KEEP_BEST: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustConfig {
    /// Fraction of points in the covariance-determining subset, in [0.5, 1].
    pub support_fraction: f64,
    /// Cap on concentration steps per candidate.
    pub max_iterations: usize,
    /// Random elemental starts.
    pub num_starts: usize,
    /// Squared-distance quantile of the chi-square law used as inlier cutoff.
    pub inlier_quantile: f64,
    pub seed: u64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            support_fraction: 0.5,
            max_iterations: 100,
            num_starts: 500,
            inlier_quantile: 0.975,
            seed: 0,
        }
    }
}

/// `n` points of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> PointSet<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self, StatsError> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(StatsError::RaggedPoints);
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, StatsError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(StatsError::RaggedPoints);
        }
        Self::new(dim, rows.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone)]
pub struct McdResult<T> {
    /// Squared Mahalanobis distance within the chi-square cutoff.
    pub inliers: Vec<bool>,
    /// Location of the best h-subset.
    pub center: Vec<T>,
    /// Consistency-corrected scatter, row-major `dim x dim`.
    pub covariance: Vec<T>,
    /// Maximum-likelihood covariance of the best h-subset.
    pub raw_covariance: Vec<T>,
    pub raw_determinant: T,
    /// Sorted indices of the best h-subset.
    pub support: Vec<usize>,
    pub squared_distances: Vec<T>,
}

impl<T> McdResult<T> {
    pub fn inlier_fraction(&self) -> f64 {
        let n = self.inliers.len().max(1);
        self.inliers.iter().filter(|&&b| b).count() as f64 / n as f64
    }
}

#[derive(Debug, Clone)]
struct Candidate<T> {
    det: T,
    subset: Vec<usize>,
}

fn by_det<T: Real>(a: &Candidate<T>, b: &Candidate<T>) -> Ordering {
    a.det
        .partial_cmp(&b.det)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.subset.cmp(&b.subset))
}

struct Search<'a, T> {
    data: &'a [T],
    dim: usize,
}

impl<T: Real> Search<'_, T> {
    /// The `h` rows of `rows` closest to the fit of `basis`, sorted.
    fn closest(&self, rows: &[usize], basis: &[usize], h: usize) -> Option<Vec<usize>> {
        let (mean, cov) = mean_cov(self.data, self.dim, basis);
        let chol = Cholesky::new(&cov, self.dim)?;
        let mut scored: Vec<(T, usize)> = rows
            .iter()
            .map(|&r| (self.distance(&chol, &mean, r), r))
            .collect();
        let cmp = |a: &(T, usize), b: &(T, usize)| {
            a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
        };
        if h < scored.len() {
            scored.select_nth_unstable_by(h - 1, cmp);
            scored.truncate(h);
        }
        let mut subset: Vec<usize> = scored.into_iter().map(|(_, r)| r).collect();
        subset.sort_unstable();
        Some(subset)
    }

    fn distance(&self, chol: &Cholesky<T>, mean: &[T], r: usize) -> T {
        let row = &self.data[r * self.dim..(r + 1) * self.dim];
        let mut diff = [T::zero(); 16];
        let mut heap;
        let diff: &mut [T] = if self.dim <= 16 {
            &mut diff[..self.dim]
        } else {
            heap = vec![T::zero(); self.dim];
            &mut heap
        };
        for c in 0..self.dim {
            diff[c] = row[c] - mean[c];
        }
        chol.mahalanobis_sq(diff)
    }

    fn determinant(&self, subset: &[usize]) -> Option<T> {
        let (_, cov) = mean_cov(self.data, self.dim, subset);
        Cholesky::new(&cov, self.dim).map(|c| c.determinant())
    }

    /// Concentration steps over `rows` starting from the fit of `basis`.
    /// Stops when the subset repeats, the determinant stops decreasing, or
    /// after `steps` iterations.
    fn concentrate(
        &self,
        rows: &[usize],
        basis: &[usize],
        h: usize,
        steps: usize,
    ) -> Option<Candidate<T>> {
        let mut subset = self.closest(rows, basis, h)?;
        let mut det = self.determinant(&subset)?;
        for _ in 0..steps {
            let Some(next) = self.closest(rows, &subset, h) else {
                break;
            };
            if next == subset {
                break;
            }
            let Some(next_det) = self.determinant(&next) else {
                break;
            };
            if !(next_det < det) {
                break;
            }
            subset = next;
            det = next_det;
        }
        Some(Candidate { det, subset })
    }

    /// Random elemental subset of `rows`, grown until its covariance is
    /// non-singular.
    fn elemental<R: Rng>(&self, rows: &[usize], rng: &mut R) -> Option<Vec<usize>> {
        let n = rows.len();
        let start = (self.dim + 1).min(n);
        let picked: Vec<usize> = sample(rng, n, n).into_iter().collect();
        let mut size = start;
        loop {
            let basis: Vec<usize> = picked[..size].iter().map(|&p| rows[p]).collect();
            let (_, cov) = mean_cov(self.data, self.dim, &basis);
            if Cholesky::new(&cov, self.dim).is_some() {
                return Some(basis);
            }
            if size == n {
                return None;
            }
            size += 1;
        }
    }

    /// Runs `starts` elemental starts over `rows`, each refined by
    /// `steps` concentration steps; returns candidates sorted by determinant.
    fn starts(
        &self,
        rows: &[usize],
        h: usize,
        starts: usize,
        steps: usize,
        seed: u64,
        stream_base: u64,
    ) -> Vec<Candidate<T>> {
        let mut out: Vec<Candidate<T>> = (0..starts)
            .into_par_iter()
            .filter_map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream_base + s as u64);
                let basis = self.elemental(rows, &mut rng)?;
                self.concentrate(rows, &basis, h, steps)
            })
            .collect();
        out.sort_by(by_det);
        out.dedup_by(|a, b| a.subset == b.subset);
        out
    }
}

/// Robust location/scatter with outlier flags.
///
/// Finds the h-subset (`h = ceil(support_fraction * n)`) whose covariance has
/// the smallest determinant, rescales that covariance for consistency at the
/// normal model, and flags points whose squared Mahalanobis distance exceeds
/// the chi-square `inlier_quantile`.
pub fn mcd_filter<T: Real>(points: &PointSet<T>, cfg: &RobustConfig) -> Result<McdResult<T>, StatsError> {
    let n = points.len();
    let dim = points.dim();
    if !(0.5..=1.0).contains(&cfg.support_fraction) {
        return Err(StatsError::InvalidSupportFraction(cfg.support_fraction));
    }
    if n < dim + 1 {
        return Err(StatsError::TooFewPoints {
            needed: dim + 1,
            got: n,
            dim,
        });
    }
    let h = ((cfg.support_fraction * n as f64).ceil() as usize).min(n);
    if h < dim + 1 {
        return Err(StatsError::TooFewPoints {
            needed: dim + 1,
            got: h,
            dim,
        });
    }
    let search = Search {
        data: &points.data,
        dim,
    };
    let all: Vec<usize> = (0..n).collect();
    if search.determinant(&all).is_none() {
        return Err(StatsError::SingularCovariance);
    }
    let steps = cfg.max_iterations.max(1);
    let best = if h == n {
        search.concentrate(&all, &all, h, 0)
    } else if n <= SMALL_N {
        search
            .starts(&all, h, cfg.num_starts.max(1), steps, cfg.seed, 0)
            .into_iter()
            .next()
    } else {
        nested_search(&search, n, h, cfg, steps)
    }
    .ok_or(StatsError::SingularCovariance)?;

    let (raw_center, raw_covariance) = mean_cov(&points.data, dim, &best.subset);
    let chol = Cholesky::new(&raw_covariance, dim).ok_or(StatsError::SingularCovariance)?;
    let raw_d2: Vec<T> = (0..n).map(|r| search.distance(&chol, &raw_center, r)).collect();

    let chi = ChiSquared::new(dim as f64).expect("positive degrees of freedom");
    let mut sorted = raw_d2.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let median = super::kde::quantile_sorted(&sorted, 0.5);
    let factor = median / T::lit(chi.inverse_cdf(0.5));
    let factor = if factor > T::zero() { factor } else { T::one() };
    let cutoff = T::lit(chi.inverse_cdf(cfg.inlier_quantile));
    let squared_distances: Vec<T> = raw_d2.iter().map(|&d| d / factor).collect();
    let inliers = squared_distances.iter().map(|&d| d <= cutoff).collect();
    let covariance = raw_covariance.iter().map(|&c| c * factor).collect();

    Ok(McdResult {
        inliers,
        center: raw_center,
        covariance,
        raw_covariance,
        raw_determinant: best.det,
        support: best.subset,
        squared_distances,
    })
}

/// Large-n search: candidates from disjoint random subsets, refined on
/// their union, then on the full sample.
fn nested_search<T: Real>(
    search: &Search<'_, T>,
    n: usize,
    h: usize,
    cfg: &RobustConfig,
    steps: usize,
) -> Option<Candidate<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let groups = (n / SUBSET_SIZE).clamp(1, MAX_SUBSETS);
    let merged_len = (groups * SUBSET_SIZE).min(n);
    let mut merged: Vec<usize> = sample(&mut rng, n, merged_len).into_iter().collect();
    merged.sort_unstable();
    let group_len = merged_len / groups;
    let frac = h as f64 / n as f64;
    let starts_per_group = (cfg.num_starts / groups).max(1);

    let mut pool: Vec<Candidate<T>> = Vec::new();
    for g in 0..groups {
        let rows: Vec<usize> = merged
            .iter()
            .skip(g)
            .step_by(groups)
            .take(group_len)
            .copied()
            .collect();
        let hg = ((frac * rows.len() as f64).ceil() as usize).max(search.dim + 1);
        let found = search.starts(
            &rows,
            hg,
            starts_per_group,
            2,
            cfg.seed,
            (g * starts_per_group) as u64,
        );
        pool.extend(found.into_iter().take(KEEP_BEST));
    }

    let hm = ((frac * merged.len() as f64).ceil() as usize).max(search.dim + 1);
    let mut refined: Vec<Candidate<T>> = pool
        .par_iter()
        .filter_map(|c| search.concentrate(&merged, &c.subset, hm, 2))
        .collect();
    refined.sort_by(by_det);
    refined.dedup_by(|a, b| a.subset == b.subset);

    let all: Vec<usize> = (0..n).collect();
    let mut finals: Vec<Candidate<T>> = refined
        .par_iter()
        .take(KEEP_BEST)
        .filter_map(|c| search.concentrate(&all, &c.subset, h, steps))
        .collect();
    finals.sort_by(by_det);
    finals.into_iter().next()
}
