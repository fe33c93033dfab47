//! Per-case bundle of coregistered scans.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{StudyError, VolumeError};
use crate::real::Real;
use crate::volume::{BrainMask, Grid, ScalarVolume};

/// Affine agreement required between volumes of one study (mm).
pub const AFFINE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Modality {
    T1,
    T1Post,
    T2,
    Flair,
    Adc,
    T1Sub,
}

impl Modality {
    pub const ALL: [Modality; 6] = [
        Modality::T1,
        Modality::T1Post,
        Modality::T2,
        Modality::Flair,
        Modality::Adc,
        Modality::T1Sub,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::T1 => "T1",
            Modality::T1Post => "T1POST",
            Modality::T2 => "T2",
            Modality::Flair => "FLAIR",
            Modality::Adc => "ADC",
            Modality::T1Sub => "T1SUB",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown modality '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TumorType {
    Atrt,
    Dipg,
    Lgg,
}

impl TumorType {
    pub fn name(self) -> &'static str {
        match self {
            TumorType::Atrt => "ATRT",
            TumorType::Dipg => "DIPG",
            TumorType::Lgg => "LGG",
        }
    }

    /// Scans a study of this type must provide.
    pub fn required_modalities(self) -> &'static [Modality] {
        match self {
            TumorType::Atrt => &[
                Modality::T1,
                Modality::T1Post,
                Modality::T2,
                Modality::Flair,
                Modality::Adc,
            ],
            TumorType::Dipg | TumorType::Lgg => {
                &[Modality::T1, Modality::T1Post, Modality::T2, Modality::Flair]
            }
        }
    }

    /// Whether whole-tumor detection grows the core into surrounding
    /// abnormal tissue, and subregions are labeled.
    pub fn is_heterogeneous(self) -> bool {
        !matches!(self, TumorType::Lgg)
    }
}

impl fmt::Display for TumorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TumorType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "atrt" => Ok(TumorType::Atrt),
            "dipg" => Ok(TumorType::Dipg),
            "lgg" => Ok(TumorType::Lgg),
            _ => Err(format!("unknown tumor type '{s}' (expected atrt, dipg or lgg)")),
        }
    }
}

/// Voxelwise `t1_post - t1`.
pub fn compute_t1_sub<T: Real>(
    t1_post: &ScalarVolume<T>,
    t1: &ScalarVolume<T>,
) -> Result<ScalarVolume<T>, VolumeError> {
    t1_post.grid().check_same(t1.grid(), AFFINE_TOLERANCE)?;
    let data = t1_post
        .data()
        .iter()
        .zip(t1.data())
        .map(|(&p, &t)| p - t)
        .collect();
    t1_post.with_data(data)
}

/// Coregistered scans of one case. All volumes share one grid and one
/// brain mask; T1-sub is always derived from T1 and T1-post.
#[derive(Debug, Clone)]
pub struct Study<T> {
    case_id: String,
    tumor_type: TumorType,
    grid: Grid,
    brain: BrainMask,
    scans: BTreeMap<Modality, ScalarVolume<T>>,
}

impl<T: Real> Study<T> {
    /// Validates modality presence, grids and masks, then derives T1-sub.
    /// A supplied T1-sub is replaced by the derived one.
    pub fn new(
        case_id: impl Into<String>,
        tumor_type: TumorType,
        mut scans: BTreeMap<Modality, ScalarVolume<T>>,
    ) -> Result<Self, StudyError> {
        for &m in tumor_type.required_modalities() {
            if !scans.contains_key(&m) {
                return Err(StudyError::MissingModality(m));
            }
        }
        if tumor_type != TumorType::Atrt && scans.contains_key(&Modality::Adc) {
            return Err(StudyError::UnexpectedModality(Modality::Adc));
        }
        scans.remove(&Modality::T1Sub);
        let reference = &scans[&Modality::T1];
        let grid = reference.grid().clone();
        let brain = reference.brain().clone();
        for (&m, vol) in &scans {
            vol.grid()
                .check_same(&grid, AFFINE_TOLERANCE)
                .map_err(|source| StudyError::Grid { modality: m, source })?;
            if !vol.brain().ptr_eq(&brain) && vol.brain().as_slice() != brain.as_slice() {
                return Err(StudyError::Grid {
                    modality: m,
                    source: VolumeError::GridMismatch("brain mask differs from T1".into()),
                });
            }
        }
        let mut shared = BTreeMap::new();
        for (m, vol) in scans {
            let vol = vol
                .with_brain(brain.clone())
                .map_err(|source| StudyError::Grid { modality: m, source })?;
            shared.insert(m, vol);
        }
        let sub = compute_t1_sub(&shared[&Modality::T1Post], &shared[&Modality::T1])
            .map_err(|source| StudyError::Grid {
                modality: Modality::T1Sub,
                source,
            })?;
        shared.insert(Modality::T1Sub, sub);
        Ok(Self {
            case_id: case_id.into(),
            tumor_type,
            grid,
            brain,
            scans: shared,
        })
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn tumor_type(&self) -> TumorType {
        self.tumor_type
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn brain(&self) -> &BrainMask {
        &self.brain
    }

    pub fn get(&self, m: Modality) -> Option<&ScalarVolume<T>> {
        self.scans.get(&m)
    }

    pub fn require(&self, m: Modality) -> Result<&ScalarVolume<T>, StudyError> {
        self.get(m).ok_or(StudyError::MissingModality(m))
    }

    /// Acquired scans (everything except the derived T1-sub), in modality
    /// order.
    pub fn acquired(&self) -> Vec<(Modality, &ScalarVolume<T>)> {
        self.scans
            .iter()
            .filter(|(&m, _)| m != Modality::T1Sub)
            .map(|(&m, v)| (m, v))
            .collect()
    }

    /// Every volume including T1-sub.
    pub fn all(&self) -> impl Iterator<Item = (Modality, &ScalarVolume<T>)> {
        self.scans.iter().map(|(&m, v)| (m, v))
    }

    /// Checks that an atlas prior lies on the study grid with values in
    /// [0, 1] inside the brain.
    pub fn check_atlas(&self, name: &'static str, atlas: &ScalarVolume<T>) -> Result<(), StudyError> {
        atlas
            .grid()
            .check_same(&self.grid, AFFINE_TOLERANCE)
            .map_err(|e| StudyError::Atlas {
                name,
                reason: e.to_string(),
            })?;
        let bad = atlas
            .data()
            .iter()
            .zip(self.brain.as_slice())
            .position(|(&v, &b)| b && !(v >= T::zero() && v <= T::one()));
        if let Some(idx) = bad {
            return Err(StudyError::Atlas {
                name,
                reason: format!("value {} at voxel {idx} outside [0, 1]", atlas.get(idx)),
            });
        }
        Ok(())
    }

    /// Same study with every acquired scan passed through `f`.
    pub fn map_scans(
        &self,
        mut f: impl FnMut(Modality, &ScalarVolume<T>) -> ScalarVolume<T>,
    ) -> Result<Self, StudyError> {
        let scans = self.acquired().into_iter().map(|(m, v)| (m, f(m, v))).collect();
        Self::new(self.case_id.clone(), self.tumor_type, scans)
    }
}
