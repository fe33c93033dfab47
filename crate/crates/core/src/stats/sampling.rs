use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::StatsError;
use crate::real::Real;
use crate::volume::ScalarVolume;

/// Draws `n` brain voxel indices with replacement, each with probability
/// proportional to its weight. Deterministic for a given RNG state.
pub fn sample_voxels<T: Real, R: Rng>(
    weights: &[T],
    brain: &[bool],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>, StatsError> {
    if weights.len() != brain.len() {
        return Err(StatsError::ProbabilityLength {
            len: weights.len(),
            expected: brain.len(),
        });
    }
    let mut support = Vec::new();
    let mut cumulative = Vec::new();
    let mut total = 0.0f64;
    for (idx, (&w, &b)) in weights.iter().zip(brain).enumerate() {
        let w = w.as_f64();
        if b && w > 0.0 && w.is_finite() {
            total += w;
            support.push(idx);
            cumulative.push(total);
        }
    }
    if support.is_empty() || total <= 0.0 {
        return Err(StatsError::ZeroProbability);
    }
    Ok((0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let pos = cumulative.partition_point(|&c| c <= u).min(support.len() - 1);
            support[pos]
        })
        .collect())
}

/// Draws `n` intensities from `vol`, selecting voxels with probability
/// proportional to `prob`.
pub fn sample_by_probability<T: Real>(
    vol: &ScalarVolume<T>,
    prob: &[T],
    n: usize,
    seed: u64,
) -> Result<Vec<T>, StatsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = sample_voxels(prob, vol.brain().as_slice(), n, &mut rng)?;
    Ok(idx.into_iter().map(|i| vol.get(i)).collect())
}
