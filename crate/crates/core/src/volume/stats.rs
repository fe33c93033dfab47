use serde::Serialize;

use super::{LabelVolume, ScalarVolume};
use crate::error::VolumeError;
use crate::real::Real;

/// Sample mean and standard deviation (n - 1 denominator) over a mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaskedStats<T> {
    pub mean: T,
    pub std: T,
    pub count: usize,
    /// Set when `count == 1`; `std` is then 0 by convention.
    pub single_sample: bool,
}

pub fn masked_stats<T: Real>(
    vol: &ScalarVolume<T>,
    mask: &LabelVolume,
) -> Result<MaskedStats<T>, VolumeError> {
    if mask.labels().len() != vol.data().len() {
        return Err(VolumeError::LengthMismatch {
            len: mask.labels().len(),
            expected: vol.data().len(),
        });
    }
    let brain = vol.brain().as_slice();
    let selected = || {
        vol.data()
            .iter()
            .zip(mask.labels())
            .zip(brain)
            .filter_map(|((&v, &m), &b)| (m != 0 && b).then_some(v))
    };
    let mut count = 0usize;
    let mut sum = T::zero();
    for v in selected() {
        sum = sum + v;
        count += 1;
    }
    if count == 0 {
        return Err(VolumeError::EmptyMask);
    }
    let mean = sum / T::lit(count as f64);
    if count == 1 {
        return Ok(MaskedStats {
            mean,
            std: T::zero(),
            count,
            single_sample: true,
        });
    }
    let mut ss = T::zero();
    for v in selected() {
        let d = v - mean;
        ss = ss + d * d;
    }
    Ok(MaskedStats {
        mean,
        std: (ss / T::lit((count - 1) as f64)).sqrt(),
        count,
        single_sample: false,
    })
}
