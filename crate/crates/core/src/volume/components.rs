use serde::{Deserialize, Serialize};

use super::{neighbour_offsets, offset_index, LabelVolume};
use crate::error::VolumeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// Face neighbours only.
    Six,
    /// Face, edge and corner neighbours.
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            6 => Some(Self::Six),
            26 => Some(Self::TwentySix),
            _ => None,
        }
    }
}

/// Labelled components with their voxel counts; `sizes[l - 1]` is the size
/// of label `l`.
#[derive(Debug, Clone)]
pub struct Components {
    pub labels: LabelVolume,
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Linear indices of the voxels of each component, in label order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (idx, &l) in self.labels.labels().iter().enumerate() {
            if l != 0 {
                out[l as usize - 1].push(idx);
            }
        }
        out
    }
}

/// Labels connected foreground components. Label 1 is the largest; equal
/// sizes are ordered by the smallest linear index of their voxels.
pub fn label_components(
    mask: &LabelVolume,
    connectivity: Connectivity,
) -> Result<Components, VolumeError> {
    mask.ensure_binary()?;
    let grid = mask.grid();
    let offsets = neighbour_offsets(connectivity == Connectivity::TwentySix);
    let src = mask.labels();
    let mut provisional = vec![0u32; src.len()];
    // (size, discovery order); discovery order follows the smallest linear index
    let mut found: Vec<usize> = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..src.len() {
        if src[seed] == 0 || provisional[seed] != 0 {
            continue;
        }
        let id = found.len() as u32 + 1;
        provisional[seed] = id;
        stack.push(seed);
        let mut size = 0usize;
        while let Some(idx) = stack.pop() {
            size += 1;
            let v = grid.coords(idx);
            for &o in &offsets {
                if let Some(n) = offset_index(grid, v, o) {
                    if src[n] != 0 && provisional[n] == 0 {
                        provisional[n] = id;
                        stack.push(n);
                    }
                }
            }
        }
        found.push(size);
    }
    let mut order: Vec<usize> = (0..found.len()).collect();
    order.sort_by(|&a, &b| found[b].cmp(&found[a]).then(a.cmp(&b)));
    let mut remap = vec![0u32; found.len() + 1];
    for (rank, &old) in order.iter().enumerate() {
        remap[old + 1] = rank as u32 + 1;
    }
    let labels = provisional.into_iter().map(|l| remap[l as usize]).collect();
    let sizes = order.iter().map(|&o| found[o]).collect();
    Ok(Components {
        labels: LabelVolume::new(grid.clone(), labels)?,
        sizes,
    })
}

pub fn connected_components(
    mask: &LabelVolume,
    connectivity: Connectivity,
) -> Result<LabelVolume, VolumeError> {
    label_components(mask, connectivity).map(|c| c.labels)
}
