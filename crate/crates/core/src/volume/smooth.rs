use rayon::prelude::*;

use super::ScalarVolume;
use crate::error::VolumeError;
use crate::real::Real;

/// Normalised 1-D Gaussian truncated at 4 sigma (at least one tap each side).
fn kernel<T: Real>(sigma_vox: f64) -> Vec<T> {
    let radius = ((4.0 * sigma_vox).ceil() as usize).max(1);
    let w: Vec<f64> = (0..=2 * radius)
        .map(|t| {
            let x = t as f64 - radius as f64;
            (-0.5 * x * x / (sigma_vox * sigma_vox)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| T::lit(v / total)).collect()
}

fn convolve_axis<T: Real>(input: &[T], dims: [usize; 3], axis: usize, kernel: &[T]) -> Vec<T> {
    let radius = (kernel.len() / 2) as isize;
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let n = dims[axis] as isize;
    let mut out = vec![T::zero(); input.len()];
    out.par_iter_mut().enumerate().for_each(|(idx, o)| {
        let pos = match axis {
            0 => idx % dims[0],
            1 => (idx / dims[0]) % dims[1],
            _ => idx / (dims[0] * dims[1]),
        } as isize;
        let lo = (-radius).max(-pos);
        let hi = radius.min(n - 1 - pos);
        let mut acc = T::zero();
        for t in lo..=hi {
            let src = (idx as isize + t * stride as isize) as usize;
            acc = acc + kernel[(t + radius) as usize] * input[src];
        }
        *o = acc;
    });
    out
}

/// Separable Gaussian filter with `sigma_mm` in physical units.
///
/// Mask-normalised: only brain voxels contribute, and each output is divided
/// by the kernel mass that fell inside the brain. Voxels outside the brain
/// keep their input value.
pub fn gaussian_smooth<T: Real>(
    vol: &ScalarVolume<T>,
    sigma_mm: f64,
) -> Result<ScalarVolume<T>, VolumeError> {
    if !(sigma_mm.is_finite() && sigma_mm > 0.0) {
        return Err(VolumeError::InvalidSigma(sigma_mm));
    }
    let grid = vol.grid();
    let dims = grid.dims;
    let brain = vol.brain().as_slice();
    let mut num: Vec<T> = vol
        .data()
        .iter()
        .zip(brain)
        .map(|(&v, &b)| if b { v } else { T::zero() })
        .collect();
    let mut den: Vec<T> = brain
        .iter()
        .map(|&b| if b { T::one() } else { T::zero() })
        .collect();
    for axis in 0..3 {
        if dims[axis] == 1 {
            continue;
        }
        let k = kernel::<T>(sigma_mm / grid.spacing[axis]);
        num = convolve_axis(&num, dims, axis, &k);
        den = convolve_axis(&den, dims, axis, &k);
    }
    let data = vol
        .data()
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            if brain[idx] && den[idx] > T::zero() {
                num[idx] / den[idx]
            } else {
                v
            }
        })
        .collect();
    vol.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{BrainMask, Grid};

    #[test]
    fn constant_preserved() {
        let g = Grid::new([9, 7, 5], [1.0, 0.8, 2.5]).unwrap();
        let mut mask = vec![true; g.len()];
        for m in mask.iter_mut().step_by(3) {
            *m = false;
        }
        let v = ScalarVolume::new(g.clone(), vec![3.25f64; g.len()], BrainMask::new(mask)).unwrap();
        let s = gaussian_smooth(&v, 2.0).unwrap();
        for &x in s.data() {
            assert!((x - 3.25).abs() < 1e-12);
        }
    }

    /// Dense 3-D convolution oracle: sampled Gaussian on the truncated box,
    /// normalised by its own total.
    #[test]
    fn impulse_matches_dense_kernel() {
        let n = 41;
        let spacing = [1.0, 1.5, 2.0];
        let sigma = 2.0;
        let g = Grid::new([n, n, n], spacing).unwrap();
        let c = n / 2;
        let mut data = vec![0.0f64; g.len()];
        data[g.index(c, c, c)] = 1.0;
        let v = ScalarVolume::unmasked(g.clone(), data).unwrap();
        let s = gaussian_smooth(&v, sigma).unwrap();

        let radii: Vec<isize> = spacing
            .iter()
            .map(|sp| ((4.0 * sigma / sp).ceil() as isize).max(1))
            .collect();
        let mut dense = vec![0.0f64; g.len()];
        let mut total = 0.0;
        for dk in -radii[2]..=radii[2] {
            for dj in -radii[1]..=radii[1] {
                for di in -radii[0]..=radii[0] {
                    let x = di as f64 * spacing[0];
                    let y = dj as f64 * spacing[1];
                    let z = dk as f64 * spacing[2];
                    let w = (-(x * x + y * y + z * z) / (2.0 * sigma * sigma)).exp();
                    let idx = g.index(
                        (c as isize + di) as usize,
                        (c as isize + dj) as usize,
                        (c as isize + dk) as usize,
                    );
                    dense[idx] = w;
                    total += w;
                }
            }
        }
        for (a, b) in s.data().iter().zip(&dense) {
            assert!((a - b / total).abs() < 1e-12, "{a} vs {}", b / total);
        }
        let sum: f64 = s.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tiny_sigma_is_identity() {
        let g = Grid::new([6, 6, 6], [1.0; 3]).unwrap();
        let data: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin() * 100.0).collect();
        let v = ScalarVolume::unmasked(g, data.clone()).unwrap();
        let s = gaussian_smooth(&v, 0.01).unwrap();
        for (a, b) in s.data().iter().zip(&data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn interior_mass_preserved() {
        let n = 24;
        let g = Grid::new([n, n, n], [1.0; 3]).unwrap();
        let mut data = vec![0.0f64; g.len()];
        for k in 9..15 {
            for j in 9..15 {
                for i in 9..15 {
                    data[g.index(i, j, k)] = ((i * 7 + j * 3 + k) % 11) as f64;
                }
            }
        }
        let v = ScalarVolume::unmasked(g, data.clone()).unwrap();
        let s = gaussian_smooth(&v, 1.0).unwrap();
        let before: f64 = data.iter().sum();
        let after: f64 = s.data().iter().sum();
        assert!(((after - before) / before).abs() < 1e-6);
    }

    #[test]
    fn masked_voxels_do_not_bleed() {
        let g = Grid::new([10, 1, 1], [1.0; 3]).unwrap();
        let mask: Vec<bool> = (0..10).map(|i| i < 5).collect();
        let data: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { 1000.0 }).collect();
        let v = ScalarVolume::new(g, data, BrainMask::new(mask)).unwrap();
        let s = gaussian_smooth(&v, 1.5).unwrap();
        for i in 0..5 {
            assert!((s.get(i) - 1.0).abs() < 1e-12);
        }
        for i in 5..10 {
            assert_eq!(s.get(i), 1000.0);
        }
    }

    #[test]
    fn rejects_bad_sigma() {
        let g = Grid::new([2, 2, 2], [1.0; 3]).unwrap();
        let v = ScalarVolume::unmasked(g, vec![0.0f64; 8]).unwrap();
        assert!(gaussian_smooth(&v, 0.0).is_err());
        assert!(gaussian_smooth(&v, -1.0).is_err());
    }
}
