//! Volumetric data types and grid-level primitives.
//!
//! Voxels are stored in NIfTI (Fortran) order: the linear index of voxel
//! `(i, j, k)` is `i + nx * (j + ny * k)`.

mod components;
pub(crate) mod morphology;
mod smooth;
mod stats;
mod threshold;

use std::sync::Arc;

use crate::error::VolumeError;
use crate::real::Real;

pub use components::{connected_components, label_components, Components, Connectivity};
pub use morphology::{morphology, MorphOp};
pub use smooth::gaussian_smooth;
pub use stats::{masked_stats, MaskedStats};
pub use threshold::threshold_mask;

/// Voxel grid geometry shared by every volume of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    /// Millimetres per voxel along each axis.
    pub spacing: [f64; 3],
    /// Voxel-to-world transform rows (NIfTI sform).
    pub affine: [[f64; 4]; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self, VolumeError> {
        let affine = [
            [spacing[0], 0.0, 0.0, 0.0],
            [0.0, spacing[1], 0.0, 0.0],
            [0.0, 0.0, spacing[2], 0.0],
        ];
        Self::with_affine(dims, spacing, affine)
    }

    pub fn with_affine(
        dims: [usize; 3],
        spacing: [f64; 3],
        affine: [[f64; 4]; 3],
    ) -> Result<Self, VolumeError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidDims(dims));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(VolumeError::InvalidSpacing(spacing));
        }
        Ok(Self {
            dims,
            spacing,
            affine,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> VoxelIndex {
        let nx = self.dims[0];
        let ny = self.dims[1];
        VoxelIndex {
            i: idx % nx,
            j: (idx / nx) % ny,
            k: idx / (nx * ny),
        }
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Checks that `other` describes the same grid: identical dims, spacing
    /// within 1e-6 mm and affine entries within `affine_tol`.
    pub fn check_same(&self, other: &Grid, affine_tol: f64) -> Result<(), VolumeError> {
        if self.dims != other.dims {
            return Err(VolumeError::GridMismatch(format!(
                "dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        for a in 0..3 {
            if (self.spacing[a] - other.spacing[a]).abs() > 1e-6 {
                return Err(VolumeError::GridMismatch(format!(
                    "spacing {:?} vs {:?}",
                    self.spacing, other.spacing
                )));
            }
            for c in 0..4 {
                if (self.affine[a][c] - other.affine[a][c]).abs() > affine_tol {
                    return Err(VolumeError::GridMismatch(format!(
                        "affine row {a} {:?} vs {:?}",
                        self.affine[a], other.affine[a]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A voxel position within a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl VoxelIndex {
    pub fn new(grid: &Grid, i: usize, j: usize, k: usize) -> Option<Self> {
        (i < grid.dims[0] && j < grid.dims[1] && k < grid.dims[2]).then_some(Self { i, j, k })
    }

    pub fn linear(&self, grid: &Grid) -> usize {
        grid.index(self.i, self.j, self.k)
    }
}

/// Shared boolean brain mask (`true` = inside brain).
#[derive(Debug, Clone, PartialEq)]
pub struct BrainMask(Arc<[bool]>);

impl BrainMask {
    pub fn new(mask: Vec<bool>) -> Self {
        Self(mask.into())
    }

    pub fn full(len: usize) -> Self {
        Self(vec![true; len].into())
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.0[idx]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn ptr_eq(&self, other: &BrainMask) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn to_labels(&self, grid: &Grid) -> LabelVolume {
        LabelVolume::from_bools(grid.clone(), &self.0)
    }
}

/// One 3-D intensity grid for a single contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume<T> {
    grid: Grid,
    data: Vec<T>,
    brain: BrainMask,
}

impl<T: Real> ScalarVolume<T> {
    pub fn new(grid: Grid, data: Vec<T>, brain: BrainMask) -> Result<Self, VolumeError> {
        let expected = grid.len();
        if data.len() != expected {
            return Err(VolumeError::LengthMismatch {
                len: data.len(),
                expected,
            });
        }
        if brain.len() != expected {
            return Err(VolumeError::LengthMismatch {
                len: brain.len(),
                expected,
            });
        }
        if let Some(idx) = data
            .iter()
            .zip(brain.as_slice())
            .position(|(v, &b)| b && !v.is_finite())
        {
            return Err(VolumeError::NonFinite(idx));
        }
        Ok(Self { grid, data, brain })
    }

    /// Volume with every voxel inside the brain.
    pub fn unmasked(grid: Grid, data: Vec<T>) -> Result<Self, VolumeError> {
        let brain = BrainMask::full(grid.len());
        Self::new(grid, data, brain)
    }

    pub fn filled(grid: Grid, value: T, brain: BrainMask) -> Result<Self, VolumeError> {
        let data = vec![value; grid.len()];
        Self::new(grid, data, brain)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn brain(&self) -> &BrainMask {
        &self.brain
    }

    #[inline]
    pub fn get(&self, idx: usize) -> T {
        self.data[idx]
    }

    /// Same grid and mask, new values. Values outside the brain may be
    /// anything; values inside must be finite.
    pub fn with_data(&self, data: Vec<T>) -> Result<Self, VolumeError> {
        Self::new(self.grid.clone(), data, self.brain.clone())
    }

    pub fn with_brain(self, brain: BrainMask) -> Result<Self, VolumeError> {
        Self::new(self.grid, self.data, brain)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            brain: self.brain.clone(),
        }
    }

    /// Values at brain voxels, in linear order.
    pub fn brain_values(&self) -> Vec<T> {
        self.data
            .iter()
            .zip(self.brain.as_slice())
            .filter_map(|(&v, &b)| b.then_some(v))
            .collect()
    }

    /// (min, max) over brain voxels.
    pub fn brain_range(&self) -> Option<(T, T)> {
        let mut it = self
            .data
            .iter()
            .zip(self.brain.as_slice())
            .filter_map(|(&v, &b)| b.then_some(v));
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn cast<U: Real>(&self) -> ScalarVolume<U> {
        ScalarVolume {
            grid: self.grid.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from(*v).unwrap_or_else(U::nan))
                .collect(),
            brain: self.brain.clone(),
        }
    }
}

/// Integer-coded label grid; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    grid: Grid,
    labels: Vec<u32>,
}

impl LabelVolume {
    pub fn new(grid: Grid, labels: Vec<u32>) -> Result<Self, VolumeError> {
        if labels.len() != grid.len() {
            return Err(VolumeError::LengthMismatch {
                len: labels.len(),
                expected: grid.len(),
            });
        }
        Ok(Self { grid, labels })
    }

    pub fn empty(grid: Grid) -> Self {
        let labels = vec![0; grid.len()];
        Self { grid, labels }
    }

    pub fn from_bools(grid: Grid, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), grid.len(), "mask length must match grid");
        let labels = mask.iter().map(|&b| u32::from(b)).collect();
        Self { grid, labels }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    #[inline]
    pub fn get(&self, idx: usize) -> u32 {
        self.labels[idx]
    }

    #[inline]
    pub fn is_set(&self, idx: usize) -> bool {
        self.labels[idx] != 0
    }

    pub fn count_nonzero(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn count_label(&self, code: u32) -> usize {
        self.labels.iter().filter(|&&l| l == code).count()
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    pub fn is_empty_mask(&self) -> bool {
        self.labels.iter().all(|&l| l == 0)
    }

    /// Nonzero voxels as booleans.
    pub fn to_bools(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l != 0).collect()
    }

    /// Binary mask of voxels carrying `code`.
    pub fn select(&self, code: u32) -> LabelVolume {
        LabelVolume {
            grid: self.grid.clone(),
            labels: self.labels.iter().map(|&l| u32::from(l == code)).collect(),
        }
    }

    pub fn ensure_binary(&self) -> Result<(), VolumeError> {
        match self.labels.iter().find(|&&l| l > 1) {
            Some(&l) => Err(VolumeError::NotBinary(l)),
            None => Ok(()),
        }
    }

    pub fn and(&self, other: &LabelVolume) -> LabelVolume {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &LabelVolume) -> LabelVolume {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &LabelVolume) -> LabelVolume {
        self.zip_with(other, |a, b| a && !b)
    }

    /// True when every nonzero voxel of `self` is nonzero in `other`.
    pub fn is_subset_of(&self, other: &LabelVolume) -> bool {
        self.labels
            .iter()
            .zip(&other.labels)
            .all(|(&a, &b)| a == 0 || b != 0)
    }

    fn zip_with(&self, other: &LabelVolume, f: impl Fn(bool, bool) -> bool) -> LabelVolume {
        assert_eq!(self.grid.dims, other.grid.dims, "label grids must match");
        LabelVolume {
            grid: self.grid.clone(),
            labels: self
                .labels
                .iter()
                .zip(&other.labels)
                .map(|(&a, &b)| u32::from(f(a != 0, b != 0)))
                .collect(),
        }
    }
}

/// Axis-aligned neighbour offsets for 6- or 26-connectivity.
pub(crate) fn neighbour_offsets(full: bool) -> Vec<[isize; 3]> {
    let mut out = Vec::new();
    for dk in -1isize..=1 {
        for dj in -1isize..=1 {
            for di in -1isize..=1 {
                let nz = (di != 0) as u8 + (dj != 0) as u8 + (dk != 0) as u8;
                if nz == 0 || (!full && nz != 1) {
                    continue;
                }
                out.push([di, dj, dk]);
            }
        }
    }
    out
}

#[inline]
pub(crate) fn offset_index(grid: &Grid, v: VoxelIndex, o: [isize; 3]) -> Option<usize> {
    let i = v.i as isize + o[0];
    let j = v.j as isize + o[1];
    let k = v.k as isize + o[2];
    let [nx, ny, nz] = grid.dims;
    if i < 0 || j < 0 || k < 0 || i >= nx as isize || j >= ny as isize || k >= nz as isize {
        return None;
    }
    Some(grid.index(i as usize, j as usize, k as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = Grid::new([3, 4, 5], [1.0, 1.0, 2.0]).unwrap();
        for idx in 0..g.len() {
            let v = g.coords(idx);
            assert_eq!(v.linear(&g), idx);
        }
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 3);
        assert_eq!(g.index(0, 0, 1), 12);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Grid::new([0, 1, 1], [1.0; 3]).is_err());
        assert!(Grid::new([1, 1, 1], [1.0, 0.0, 1.0]).is_err());
        assert!(Grid::new([1, 1, 1], [1.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn rejects_non_finite_inside_brain_only() {
        let g = Grid::new([2, 1, 1], [1.0; 3]).unwrap();
        let inside = BrainMask::new(vec![true, false]);
        assert!(ScalarVolume::new(g.clone(), vec![1.0, f64::NAN], inside.clone()).is_ok());
        assert!(matches!(
            ScalarVolume::new(g, vec![f64::INFINITY, 0.0], inside),
            Err(VolumeError::NonFinite(0))
        ));
    }

    #[test]
    fn length_checked() {
        let g = Grid::new([2, 2, 2], [1.0; 3]).unwrap();
        assert!(ScalarVolume::<f64>::unmasked(g.clone(), vec![0.0; 7]).is_err());
        assert!(LabelVolume::new(g, vec![0; 9]).is_err());
    }

    #[test]
    fn affine_tolerance() {
        let a = Grid::new([2, 2, 2], [1.0; 3]).unwrap();
        let mut b = a.clone();
        b.affine[0][3] = 5e-4;
        assert!(a.check_same(&b, 1e-3).is_ok());
        b.affine[0][3] = 5e-3;
        assert!(a.check_same(&b, 1e-3).is_err());
    }
}
