use serde::{Deserialize, Serialize};

use super::{BrainMask, Grid, LabelVolume};
use crate::error::VolumeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    Dilate,
    Erode,
    Open,
    Close,
}

/// Slack on the squared radius so that e.g. radius == spacing includes the
/// face neighbours despite rounding.
const RADIUS_SLACK: f64 = 1e-9;

/// Binary morphology with a ball of `radius_mm` rasterised on the voxel grid,
/// output clipped to `brain`. Voxels outside the grid count as background.
pub fn morphology(
    mask: &LabelVolume,
    op: MorphOp,
    radius_mm: f64,
    brain: &BrainMask,
) -> Result<LabelVolume, VolumeError> {
    if !(radius_mm.is_finite() && radius_mm > 0.0) {
        return Err(VolumeError::InvalidRadius(radius_mm));
    }
    mask.ensure_binary()?;
    if brain.len() != mask.labels().len() {
        return Err(VolumeError::LengthMismatch {
            len: brain.len(),
            expected: mask.labels().len(),
        });
    }
    let grid = mask.grid();
    let bits = mask.to_bools();
    let out = match op {
        MorphOp::Dilate => dilate(grid, &bits, radius_mm),
        MorphOp::Erode => erode(grid, &bits, radius_mm),
        MorphOp::Open => dilate(grid, &erode(grid, &bits, radius_mm), radius_mm),
        MorphOp::Close => erode(grid, &dilate(grid, &bits, radius_mm), radius_mm),
    };
    let clipped: Vec<bool> = out
        .iter()
        .zip(brain.as_slice())
        .map(|(&o, &b)| o && b)
        .collect();
    Ok(LabelVolume::from_bools(grid.clone(), &clipped))
}

pub(crate) fn dilate(grid: &Grid, bits: &[bool], radius_mm: f64) -> Vec<bool> {
    let limit = radius_mm * radius_mm + RADIUS_SLACK;
    squared_distance_to(grid, bits)
        .into_iter()
        .map(|d| d <= limit)
        .collect()
}

pub(crate) fn erode(grid: &Grid, bits: &[bool], radius_mm: f64) -> Vec<bool> {
    let limit = radius_mm * radius_mm + RADIUS_SLACK;
    let background: Vec<bool> = bits.iter().map(|&b| !b).collect();
    let dist = squared_distance_to(grid, &background);
    (0..bits.len())
        .map(|idx| {
            if !bits[idx] || dist[idx] <= limit {
                return false;
            }
            // nearest out-of-grid background voxel along each axis
            let v = grid.coords(idx);
            let pos = [v.i, v.j, v.k];
            (0..3).all(|a| {
                let s = grid.spacing[a];
                let before = (pos[a] + 1) as f64 * s;
                let after = (grid.dims[a] - pos[a]) as f64 * s;
                before * before > limit && after * after > limit
            })
        })
        .collect()
}

/// Exact squared Euclidean distance (mm²) from every voxel to the nearest
/// `true` voxel; infinite when there is none. Separable lower-envelope
/// transform, one axis at a time.
pub(crate) fn squared_distance_to(grid: &Grid, bits: &[bool]) -> Vec<f64> {
    let mut d: Vec<f64> = bits
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    let [nx, ny, nz] = grid.dims;
    let strides = [1, nx, nx * ny];
    for axis in 0..3 {
        let n = grid.dims[axis];
        if n == 1 {
            continue;
        }
        let s2 = grid.spacing[axis] * grid.spacing[axis];
        let stride = strides[axis];
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        let starts: Vec<usize> = (0..nx * ny * nz)
            .filter(|&idx| {
                let v = grid.coords(idx);
                [v.i, v.j, v.k][axis] == 0
            })
            .collect();
        for start in starts {
            for (t, slot) in line.iter_mut().enumerate() {
                *slot = d[start + t * stride];
            }
            envelope_1d(&line, s2, &mut out);
            for (t, &val) in out.iter().enumerate() {
                d[start + t * stride] = val;
            }
        }
    }
    d
}

/// Lower envelope of parabolas `s2 * (p - q)^2 + f[q]` over finite `f[q]`.
fn envelope_1d(f: &[f64], s2: f64, out: &mut [f64]) {
    let sites: Vec<usize> = (0..f.len()).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let intersect = |a: usize, b: usize| -> f64 {
        let (qa, qb) = (a as f64, b as f64);
        ((f[b] + s2 * qb * qb) - (f[a] + s2 * qa * qa)) / (2.0 * s2 * (qb - qa))
    };
    let mut hull: Vec<usize> = Vec::with_capacity(sites.len());
    let mut bounds: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    for &q in &sites {
        while let Some(&top) = hull.last() {
            let x = intersect(top, q);
            if hull.len() > 1 && x <= bounds[hull.len() - 1] {
                hull.pop();
                bounds.pop();
            } else {
                break;
            }
        }
        if hull.is_empty() {
            hull.push(q);
            bounds.clear();
            bounds.push(f64::NEG_INFINITY);
        } else {
            let x = intersect(*hull.last().unwrap(), q);
            hull.push(q);
            bounds.push(x);
        }
    }
    let mut h = 0;
    for (p, o) in out.iter_mut().enumerate() {
        let pf = p as f64;
        while h + 1 < hull.len() && bounds[h + 1] < pf {
            h += 1;
        }
        let q = hull[h];
        let dq = pf - q as f64;
        *o = s2 * dq * dq + f[q];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(grid: &Grid, bits: &[bool], op: MorphOp, r: f64) -> Vec<bool> {
        let lim = r * r + RADIUS_SLACK;
        let reach = |a: usize, b: usize| {
            let va = grid.coords(a);
            let vb = grid.coords(b);
            let dx = (va.i as f64 - vb.i as f64) * grid.spacing[0];
            let dy = (va.j as f64 - vb.j as f64) * grid.spacing[1];
            let dz = (va.k as f64 - vb.k as f64) * grid.spacing[2];
            dx * dx + dy * dy + dz * dz <= lim
        };
        // ball offsets that leave the grid count as background for erosion
        let rad: Vec<isize> = grid.spacing.iter().map(|s| (r / s).floor() as isize).collect();
        let fits = |a: usize| {
            let v = grid.coords(a);
            let p = [v.i as isize, v.j as isize, v.k as isize];
            for dk in -rad[2]..=rad[2] {
                for dj in -rad[1]..=rad[1] {
                    for di in -rad[0]..=rad[0] {
                        let o = [di, dj, dk];
                        let d2: f64 = (0..3).map(|x| (o[x] as f64 * grid.spacing[x]).powi(2)).sum();
                        if d2 > lim {
                            continue;
                        }
                        for x in 0..3 {
                            let c = p[x] + o[x];
                            if c < 0 || c >= grid.dims[x] as isize {
                                return false;
                            }
                        }
                    }
                }
            }
            true
        };
        let n = bits.len();
        match op {
            MorphOp::Dilate => (0..n).map(|a| (0..n).any(|b| bits[b] && reach(a, b))).collect(),
            MorphOp::Erode => (0..n)
                .map(|a| bits[a] && fits(a) && (0..n).all(|b| bits[b] || !reach(a, b)))
                .collect(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_voxel_dilates_to_six_neighbourhood() {
        let g = Grid::new([5, 5, 5], [1.0; 3]).unwrap();
        let mut m = LabelVolume::empty(g.clone());
        m.labels_mut()[g.index(2, 2, 2)] = 1;
        let out = morphology(&m, MorphOp::Dilate, 1.0, &BrainMask::full(g.len())).unwrap();
        assert_eq!(out.count_nonzero(), 7);
        for (i, j, k) in [(1, 2, 2), (3, 2, 2), (2, 1, 2), (2, 3, 2), (2, 2, 1), (2, 2, 3)] {
            assert_eq!(out.get(g.index(i, j, k)), 1);
        }
    }

    #[test]
    fn close_of_cube_is_cube() {
        let g = Grid::new([12, 12, 12], [1.0; 3]).unwrap();
        let mut m = LabelVolume::empty(g.clone());
        for k in 3..9 {
            for j in 3..9 {
                for i in 3..9 {
                    m.labels_mut()[g.index(i, j, k)] = 1;
                }
            }
        }
        let out = morphology(&m, MorphOp::Close, 1.5, &BrainMask::full(g.len())).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn erode_single_voxel_empties() {
        let g = Grid::new([5, 5, 5], [1.0; 3]).unwrap();
        let mut m = LabelVolume::empty(g.clone());
        m.labels_mut()[g.index(2, 2, 2)] = 1;
        let out = morphology(&m, MorphOp::Erode, 1.0, &BrainMask::full(g.len())).unwrap();
        assert!(out.is_empty_mask());
    }

    #[test]
    fn dilation_clipped_to_brain() {
        let g = Grid::new([5, 1, 1], [1.0; 3]).unwrap();
        let m = LabelVolume::new(g.clone(), vec![0, 0, 1, 0, 0]).unwrap();
        let brain = BrainMask::new(vec![true, true, true, false, true]);
        let out = morphology(&m, MorphOp::Dilate, 2.0, &brain).unwrap();
        assert_eq!(out.labels(), &[1, 1, 1, 0, 1]);
    }

    #[test]
    fn argument_errors() {
        let g = Grid::new([2, 2, 2], [1.0; 3]).unwrap();
        let m = LabelVolume::empty(g.clone());
        let b = BrainMask::full(8);
        assert!(morphology(&m, MorphOp::Dilate, 0.0, &b).is_err());
        let mut nb = m.clone();
        nb.labels_mut()[0] = 3;
        assert!(morphology(&nb, MorphOp::Dilate, 1.0, &b).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn edt_matches_ball_enumeration(
            bits in prop::collection::vec(prop::bool::weighted(0.3), 5 * 4 * 3),
            r in 0.5f64..3.0,
            sx in 0.5f64..2.0,
        ) {
            let g = Grid::new([5, 4, 3], [sx, 1.0, 1.7]).unwrap();
            prop_assert_eq!(dilate(&g, &bits, r), brute(&g, &bits, MorphOp::Dilate, r));
            prop_assert_eq!(erode(&g, &bits, r), brute(&g, &bits, MorphOp::Erode, r));
        }

        #[test]
        fn extensive_and_monotone(
            a in prop::collection::vec(prop::bool::weighted(0.3), 64),
            extra in prop::collection::vec(prop::bool::weighted(0.2), 64),
            r in 0.5f64..2.5,
        ) {
            let g = Grid::new([4, 4, 4], [1.0; 3]).unwrap();
            let b: Vec<bool> = a.iter().zip(&extra).map(|(&x, &y)| x || y).collect();
            let full = BrainMask::full(64);
            let ma = LabelVolume::from_bools(g.clone(), &a);
            let mb = LabelVolume::from_bools(g.clone(), &b);
            let da = morphology(&ma, MorphOp::Dilate, r, &full).unwrap();
            let db = morphology(&mb, MorphOp::Dilate, r, &full).unwrap();
            let ea = morphology(&ma, MorphOp::Erode, r, &full).unwrap();
            let eb = morphology(&mb, MorphOp::Erode, r, &full).unwrap();
            prop_assert!(ma.is_subset_of(&da));
            prop_assert!(ea.is_subset_of(&ma));
            prop_assert!(da.is_subset_of(&db));
            prop_assert!(ea.is_subset_of(&eb));
        }
    }
}
