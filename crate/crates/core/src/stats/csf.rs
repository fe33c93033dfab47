use serde::{Deserialize, Serialize};

use super::kde::kde_fit;
use crate::error::StatsError;
use crate::real::Real;
use crate::volume::ScalarVolume;

/// FLAIR intensity below which voxels are treated as CSF-like.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsfThreshold<T> {
    pub th: T,
    pub peak_location: T,
    pub valley_location: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsfThresholdParams {
    /// Number of evaluation points spanning `[min, max]` of the brain.
    pub grid_points: usize,
    /// Peaks lower than this fraction of the global maximum are ignored.
    pub peak_height_fraction: f64,
    /// Fixed KDE bandwidth; Silverman's rule when absent.
    pub bandwidth: Option<f64>,
}

impl Default for CsfThresholdParams {
    fn default() -> Self {
        Self {
            grid_points: 512,
            peak_height_fraction: 0.05,
            bandwidth: None,
        }
    }
}

/// Locates the CSF peak (darkest significant mode) and the first valley to
/// its right on a KDE of brain intensities.
pub fn detect_csf_threshold<T: Real>(
    flair: &ScalarVolume<T>,
    params: &CsfThresholdParams,
) -> Result<CsfThreshold<T>, StatsError> {
    let values = flair.brain_values();
    if values.is_empty() {
        return Err(StatsError::EmptyBrain);
    }
    csf_threshold_from_samples(&values, params)
}

pub fn csf_threshold_from_samples<T: Real>(
    values: &[T],
    params: &CsfThresholdParams,
) -> Result<CsfThreshold<T>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyBrain);
    }
    let model = kde_fit(values, params.bandwidth.map(T::lit))?;
    let samples = model.samples();
    let (lo, hi) = (samples[0], samples[samples.len() - 1]);
    let (xs, ys) = model.evaluate_grid(lo, hi, params.grid_points.max(3));
    let (peak, valley) =
        find_peak_and_valley(&ys, params.peak_height_fraction).ok_or(StatsError::NoCsfValley)?;
    Ok(CsfThreshold {
        th: xs[valley],
        peak_location: xs[peak],
        valley_location: xs[valley],
    })
}

/// Returns (peak index, valley index) on a sampled curve.
///
/// The peak is the leftmost local maximum at least `fraction` of the global
/// maximum. The valley is the first local minimum to its right; a flat
/// minimum resolves to its middle sample.
pub(crate) fn find_peak_and_valley<T: Real>(ys: &[T], fraction: f64) -> Option<(usize, usize)> {
    let n = ys.len();
    if n < 3 {
        return None;
    }
    let global = ys.iter().copied().fold(T::zero(), T::max);
    if global <= T::zero() {
        return None;
    }
    let floor = global * T::lit(fraction);
    let is_peak = |i: usize| {
        let left_ok = i == 0 || ys[i] > ys[i - 1];
        let right_ok = i + 1 == n || ys[i] >= ys[i + 1];
        left_ok && right_ok && ys[i] >= floor
    };
    let peak = (0..n).find(|&i| is_peak(i))?;
    // walk down from the peak (including plateaus at the peak height)
    let mut i = peak;
    while i + 1 < n && ys[i + 1] <= ys[i] {
        i += 1;
    }
    if i + 1 == n {
        return None;
    }
    // ys[i + 1] > ys[i]: i ends a descending run; back up over a flat bottom
    let mut start = i;
    while start > peak && ys[start - 1] == ys[i] {
        start -= 1;
    }
    if start == peak {
        return None;
    }
    Some((peak, (start + i) / 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn mixture(parts: &[(f64, f64, usize)], seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for &(mu, sd, n) in parts {
            let d = Normal::new(mu, sd).unwrap();
            out.extend((0..n).map(|_| d.sample(&mut rng)));
        }
        out
    }

    /// Dense-grid minimum of the analytic mixture density between two modes.
    fn analytic_valley(parts: &[(f64, f64, f64)], a: f64, b: f64) -> f64 {
        let pdf = |x: f64| -> f64 {
            parts
                .iter()
                .map(|&(mu, sd, w)| {
                    w * (-0.5 * ((x - mu) / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
                })
                .sum()
        };
        let mut best = (a, f64::INFINITY);
        let steps = 200_000;
        for s in 0..=steps {
            let x = a + (b - a) * s as f64 / steps as f64;
            let y = pdf(x);
            if y < best.1 {
                best = (x, y);
            }
        }
        best.0
    }

    #[test]
    fn bimodal_valley_located() {
        let xs = mixture(&[(100.0, 10.0, 15_000), (300.0, 30.0, 35_000)], 5);
        let t = csf_threshold_from_samples(&xs, &CsfThresholdParams::default()).unwrap();
        let v = analytic_valley(&[(100.0, 10.0, 0.3), (300.0, 30.0, 0.7)], 100.0, 300.0);
        assert!((140.0..=220.0).contains(&t.th), "th = {}", t.th);
        assert!((t.th - v).abs() <= 20.0, "th = {} valley = {v}", t.th);
        assert!(t.peak_location < t.th);
        assert_eq!(t.th, t.valley_location);
    }

    #[test]
    fn unimodal_has_no_valley() {
        let xs = mixture(&[(200.0, 20.0, 20_000)], 9);
        assert!(matches!(
            csf_threshold_from_samples(&xs, &CsfThresholdParams::default()),
            Err(StatsError::NoCsfValley)
        ));
    }

    #[test]
    fn tiny_left_bump_ignored() {
        // 0.5% bump at 20 sits far below 5% of the global peak height
        let parts = [(20.0, 3.0, 100), (100.0, 10.0, 6_000), (300.0, 30.0, 14_000)];
        let xs = mixture(&parts, 21);
        let t = csf_threshold_from_samples(&xs, &CsfThresholdParams::default()).unwrap();
        let v = analytic_valley(&[(100.0, 10.0, 0.3), (300.0, 30.0, 0.7)], 100.0, 300.0);
        assert!(t.peak_location > 60.0, "peak = {}", t.peak_location);
        assert!((t.th - v).abs() <= 20.0, "th = {} valley = {v}", t.th);
    }

    #[test]
    fn valley_is_local_minimum_of_curve() {
        let xs = mixture(&[(50.0, 5.0, 3_000), (120.0, 15.0, 9_000)], 3);
        let p = CsfThresholdParams::default();
        let t = csf_threshold_from_samples(&xs, &p).unwrap();
        let model = kde_fit(&xs, None).unwrap();
        let s = model.samples();
        let (gx, gy) = model.evaluate_grid(s[0], s[s.len() - 1], p.grid_points);
        let i = gx.iter().position(|&x| x == t.th).unwrap();
        assert!(gy[i] <= gy[i - 1] && gy[i] <= gy[i + 1]);
    }

    #[test]
    fn flat_bottom_resolves_to_middle() {
        let ys = [1.0, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 4.0];
        assert_eq!(find_peak_and_valley(&ys, 0.05), Some((1, 5)));
    }

    #[test]
    fn empty_brain() {
        let g = crate::volume::Grid::new([2, 1, 1], [1.0; 3]).unwrap();
        let v = ScalarVolume::new(g, vec![1.0, 2.0], crate::volume::BrainMask::new(vec![false, false])).unwrap();
        assert!(matches!(
            detect_csf_threshold(&v, &CsfThresholdParams::default()),
            Err(StatsError::EmptyBrain)
        ));
    }
}
