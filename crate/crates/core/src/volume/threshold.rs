use super::{LabelVolume, ScalarVolume};
use crate::error::VolumeError;
use crate::real::Real;

/// Labels brain voxels with `low <= value <= high` as 1. A missing bound is
/// unbounded on that side.
pub fn threshold_mask<T: Real>(
    vol: &ScalarVolume<T>,
    low: Option<T>,
    high: Option<T>,
) -> Result<LabelVolume, VolumeError> {
    if low.is_none() && high.is_none() {
        return Err(VolumeError::NoBounds);
    }
    if let (Some(l), Some(h)) = (low, high) {
        if l > h {
            return Err(VolumeError::InvertedBounds {
                low: l.as_f64(),
                high: h.as_f64(),
            });
        }
    }
    let labels = vol
        .data()
        .iter()
        .zip(vol.brain().as_slice())
        .map(|(&v, &inside)| {
            let ok = inside && low.map_or(true, |l| v >= l) && high.map_or(true, |h| v <= h);
            u32::from(ok)
        })
        .collect();
    LabelVolume::new(vol.grid().clone(), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{BrainMask, Grid};
    use proptest::prelude::*;

    fn line(values: Vec<f64>) -> ScalarVolume<f64> {
        let g = Grid::new([values.len(), 1, 1], [1.0; 3]).unwrap();
        ScalarVolume::unmasked(g, values).unwrap()
    }

    #[test]
    fn constant_above_and_below() {
        let v = line(vec![0.6; 8]);
        assert_eq!(threshold_mask(&v, Some(0.5), None).unwrap().count_nonzero(), 8);
        let v = line(vec![0.4; 8]);
        assert!(threshold_mask(&v, Some(0.5), None).unwrap().is_empty_mask());
    }

    #[test]
    fn ramp_matches_enumeration() {
        let values: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let v = line(values.clone());
        let m = threshold_mask(&v, Some(0.5), None).unwrap();
        for (idx, &x) in values.iter().enumerate() {
            assert_eq!(m.get(idx) == 1, x >= 0.5, "voxel {idx} value {x}");
        }
        assert_eq!(m.count_nonzero(), 6);
    }

    #[test]
    fn outside_brain_never_labeled() {
        let g = Grid::new([4, 1, 1], [1.0; 3]).unwrap();
        let brain = BrainMask::new(vec![true, false, true, false]);
        let v = ScalarVolume::new(g, vec![1.0; 4], brain).unwrap();
        let m = threshold_mask(&v, None, Some(2.0)).unwrap();
        assert_eq!(m.labels(), &[1, 0, 1, 0]);
    }

    #[test]
    fn bound_errors() {
        let v = line(vec![0.0; 3]);
        assert!(matches!(threshold_mask(&v, None, None), Err(VolumeError::NoBounds)));
        assert!(matches!(
            threshold_mask(&v, Some(1.0), Some(0.0)),
            Err(VolumeError::InvertedBounds { .. })
        ));
    }

    proptest! {
        #[test]
        fn cut_partitions_brain(values in prop::collection::vec(-10.0f64..10.0, 1..64), a in -10.0f64..10.0) {
            let v = line(values);
            let above = threshold_mask(&v, Some(a), None).unwrap();
            // largest representable value strictly below a
            let below_bound = if a > 0.0 { f64::from_bits(a.to_bits() - 1) } else if a < 0.0 { f64::from_bits(a.to_bits() + 1) } else { -f64::from_bits(1) };
            let below = threshold_mask(&v, None, Some(below_bound)).unwrap();
            for idx in 0..v.data().len() {
                prop_assert_eq!(above.get(idx) + below.get(idx), 1);
            }
        }
    }
}
