use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::StatsError;
use crate::real::Real;

/// Kernel contributions beyond this many bandwidths are dropped
/// (relative weight below 1e-13).
const CUTOFF_BANDWIDTHS: f64 = 8.0;

/// Anything that evaluates a 1-D probability density.
pub trait Likelihood<T> {
    fn density(&self, x: T) -> T;
}

impl<T, F> Likelihood<T> for F
where
    F: Fn(T) -> T,
{
    fn density(&self, x: T) -> T {
        self(x)
    }
}

/// Gaussian kernel density estimate over a fixed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityModel<T> {
    samples: Vec<T>,
    bandwidth: T,
    norm: T,
}

impl<T: Real> DensityModel<T> {
    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn evaluate(&self, x: T) -> T {
        let reach = self.bandwidth * T::lit(CUTOFF_BANDWIDTHS);
        let lo = self.samples.partition_point(|&s| s < x - reach);
        let hi = self.samples.partition_point(|&s| s <= x + reach);
        let half = T::lit(-0.5);
        let mut acc = T::zero();
        for &s in &self.samples[lo..hi] {
            let u = (x - s) / self.bandwidth;
            acc = acc + (half * u * u).exp();
        }
        acc * self.norm
    }

    /// Evaluates on `n` evenly spaced points over `[lo, hi]`.
    pub fn evaluate_grid(&self, lo: T, hi: T, n: usize) -> (Vec<T>, Vec<T>) {
        let xs = linspace(lo, hi, n);
        let ys = xs.par_iter().map(|&x| self.evaluate(x)).collect();
        (xs, ys)
    }

    /// Piecewise-linear lookup table over `[lo, hi]`; queries outside the
    /// table fall back to exact evaluation.
    pub fn tabulate(&self, lo: T, hi: T, n: usize) -> DensityTable<T> {
        let n = n.max(2);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo, lo + T::one()) };
        let (_, values) = self.evaluate_grid(lo, hi, n);
        DensityTable {
            lo,
            step: (hi - lo) / T::lit((n - 1) as f64),
            values,
            model: self.clone(),
        }
    }
}

impl<T: Real> Likelihood<T> for DensityModel<T> {
    fn density(&self, x: T) -> T {
        self.evaluate(x)
    }
}

/// Tabulated density with exact fallback outside its range.
#[derive(Debug, Clone)]
pub struct DensityTable<T> {
    lo: T,
    step: T,
    values: Vec<T>,
    model: DensityModel<T>,
}

impl<T: Real> DensityTable<T> {
    pub fn model(&self) -> &DensityModel<T> {
        &self.model
    }
}

impl<T: Real> Likelihood<T> for DensityTable<T> {
    fn density(&self, x: T) -> T {
        let pos = (x - self.lo) / self.step;
        let last = self.values.len() - 1;
        if !(pos >= T::zero()) || pos > T::lit(last as f64) {
            return self.model.evaluate(x);
        }
        let i = pos.floor().to_usize().unwrap_or(0).min(last - 1);
        let frac = pos - T::lit(i as f64);
        self.values[i] + (self.values[i + 1] - self.values[i]) * frac
    }
}

pub(crate) fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / T::lit((n - 1) as f64);
    (0..n).map(|i| lo + step * T::lit(i as f64)).collect()
}

/// Linear-interpolation quantile (sorted input).
pub(crate) fn quantile_sorted<T: Real>(sorted: &[T], p: f64) -> T {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::lit(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Silverman's rule of thumb, `0.9 * min(std, IQR / 1.34) * n^(-1/5)`,
/// floored at `1e-6 * (max - min)`. Falls back to whichever spread
/// measure is positive when the other vanishes.
pub fn silverman_bandwidth<T: Real>(sorted: &[T]) -> T {
    let n = sorted.len();
    let nf = T::lit(n as f64);
    let mean = sorted.iter().copied().sum::<T>() / nf;
    let var = sorted
        .iter()
        .map(|&s| (s - mean) * (s - mean))
        .sum::<T>()
        / T::lit((n - 1).max(1) as f64);
    let std = var.sqrt();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let robust = iqr / T::lit(1.34);
    let spread = if robust > T::zero() { std.min(robust) } else { std };
    let bw = T::lit(0.9) * spread * nf.powf(T::lit(-0.2));
    let floor = T::lit(1e-6) * (sorted[n - 1] - sorted[0]);
    bw.max(floor)
}

/// Fits a Gaussian KDE. Without an explicit bandwidth, Silverman's rule is
/// used.
pub fn kde_fit<T: Real>(samples: &[T], bandwidth: Option<T>) -> Result<DensityModel<T>, StatsError> {
    let mut sorted: Vec<T> = samples.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let distinct = if sorted.is_empty() {
        0
    } else {
        1 + sorted.windows(2).filter(|w| w[1] > w[0]).count()
    };
    if distinct < 2 {
        return Err(StatsError::TooFewDistinct(distinct));
    }
    let bandwidth = match bandwidth {
        Some(b) if b.is_finite() && b > T::zero() => b,
        Some(b) => return Err(StatsError::InvalidBandwidth(b.as_f64())),
        None => silverman_bandwidth(&sorted),
    };
    let norm = T::one() / (T::lit(sorted.len() as f64) * bandwidth * T::lit((2.0 * PI).sqrt()));
    Ok(DensityModel {
        samples: sorted,
        bandwidth,
        norm,
    })
}
