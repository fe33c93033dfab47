//! Small dense symmetric-matrix helpers for the robust covariance search.

use crate::real::Real;

/// Row-major `d x d` lower Cholesky factor.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky<T> {
    dim: usize,
    lower: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factorises a symmetric matrix; `None` when it is not positive
    /// definite relative to its own scale.
    pub fn new(a: &[T], dim: usize) -> Option<Self> {
        let scale = (0..dim).map(|i| a[i * dim + i].abs()).fold(T::zero(), T::max);
        if !(scale > T::zero()) {
            return None;
        }
        let tol = scale * T::lit(1e-12);
        let mut l = vec![T::zero(); dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s = s - l[i * dim + k] * l[j * dim + k];
                }
                if i == j {
                    if !(s > tol) {
                        return None;
                    }
                    l[i * dim + i] = s.sqrt();
                } else {
                    l[i * dim + j] = s / l[j * dim + j];
                }
            }
        }
        Some(Self { dim, lower: l })
    }

    pub fn determinant(&self) -> T {
        (0..self.dim)
            .map(|i| self.lower[i * self.dim + i])
            .fold(T::one(), |acc, d| acc * d * d)
    }

    /// `v^T A^-1 v` by forward substitution.
    pub fn mahalanobis_sq(&self, v: &[T]) -> T {
        let d = self.dim;
        let mut y = [T::zero(); 16];
        let mut heap;
        let y: &mut [T] = if d <= 16 {
            &mut y[..d]
        } else {
            heap = vec![T::zero(); d];
            &mut heap
        };
        let mut acc = T::zero();
        for i in 0..d {
            let mut s = v[i];
            for k in 0..i {
                s = s - self.lower[i * d + k] * y[k];
            }
            y[i] = s / self.lower[i * d + i];
            acc = acc + y[i] * y[i];
        }
        acc
    }
}

/// Mean and maximum-likelihood covariance (divide by count) of the rows
/// selected by `idx`.
pub(crate) fn mean_cov<T: Real>(data: &[T], dim: usize, idx: &[usize]) -> (Vec<T>, Vec<T>) {
    let n = T::lit(idx.len() as f64);
    let mut mean = vec![T::zero(); dim];
    for &r in idx {
        for c in 0..dim {
            mean[c] = mean[c] + data[r * dim + c];
        }
    }
    for m in mean.iter_mut() {
        *m = *m / n;
    }
    let mut cov = vec![T::zero(); dim * dim];
    for &r in idx {
        let row = &data[r * dim..(r + 1) * dim];
        for i in 0..dim {
            let di = row[i] - mean[i];
            for j in 0..=i {
                cov[i * dim + j] = cov[i * dim + j] + di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..=i {
            let v = cov[i * dim + j] / n;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_and_distance_2x2() {
        let a = [4.0f64, 2.0, 2.0, 3.0];
        let c = Cholesky::new(&a, 2).unwrap();
        assert!((c.determinant() - 8.0).abs() < 1e-12);
        // inverse = [3 -2; -2 4] / 8
        let v = [1.0, 2.0];
        let expected = (3.0 * 1.0 - 2.0 * 2.0 * 1.0 * 2.0 + 4.0 * 4.0) / 8.0;
        assert!((c.mahalanobis_sq(&v) - expected).abs() < 1e-12);
    }

    #[test]
    fn singular_rejected() {
        assert!(Cholesky::new(&[1.0, 1.0, 1.0, 1.0], 2).is_none());
        assert!(Cholesky::new(&[0.0, 0.0, 0.0, 0.0], 2).is_none());
    }

    #[test]
    fn mle_covariance() {
        let data = [0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0, 2.0];
        let (m, c) = mean_cov(&data, 2, &[0, 1, 2, 3]);
        assert_eq!(m, vec![1.0, 1.0]);
        assert_eq!(c, vec![1.0, 0.0, 0.0, 1.0]);
    }
}
