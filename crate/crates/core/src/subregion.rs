//! Decision-rule labeling of whole-tumor voxels into subregions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SubregionError;
use crate::real::Real;
use crate::study::{Modality, Study};
use crate::tissue::TissueResult;
use crate::tumor::WholeTumorResult;
use crate::volume::{morphology, LabelVolume, MaskedStats, MorphOp};

pub use crate::study::compute_t1_sub;

/// Code of the merged necrosis class in evaluation label volumes.
pub const NECROSIS_CODE: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SubregionLabel {
    Enhancing = 1,
    NonEnhancing = 2,
    Edema = 3,
    EarlyNecrosis = 4,
    LateNecrosis = 5,
    Hemorrhage = 6,
    Cyst = 7,
    TrappedCsf = 8,
}

impl SubregionLabel {
    pub const ALL: [SubregionLabel; 8] = [
        SubregionLabel::Enhancing,
        SubregionLabel::NonEnhancing,
        SubregionLabel::Edema,
        SubregionLabel::EarlyNecrosis,
        SubregionLabel::LateNecrosis,
        SubregionLabel::Hemorrhage,
        SubregionLabel::Cyst,
        SubregionLabel::TrappedCsf,
    ];

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            SubregionLabel::Enhancing => "ENHANCING",
            SubregionLabel::NonEnhancing => "NON_ENHANCING",
            SubregionLabel::Edema => "EDEMA",
            SubregionLabel::EarlyNecrosis => "EARLY_NECROSIS",
            SubregionLabel::LateNecrosis => "LATE_NECROSIS",
            SubregionLabel::Hemorrhage => "HEMORRHAGE",
            SubregionLabel::Cyst => "CYST",
            SubregionLabel::TrappedCsf => "TRAPPED_CSF",
        }
    }
}

impl fmt::Display for SubregionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SubregionLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown subregion '{s}'"))
    }
}

/// Code -> name table written next to subregion label volumes.
pub fn code_table() -> BTreeMap<u32, &'static str> {
    SubregionLabel::ALL.into_iter().map(|l| (l.code(), l.name())).collect()
}

/// Code table after [`merge_necrosis`].
pub fn merged_code_table() -> BTreeMap<u32, &'static str> {
    let mut t = code_table();
    t.remove(&SubregionLabel::LateNecrosis.code());
    t.insert(NECROSIS_CODE, "NECROSIS");
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubregionConfig {
    pub enhance_k_sigma: f64,
    pub t2_dark_k_sigma: f64,
    pub t1_bright_k_sigma: f64,
    pub t2_bright_k_sigma: f64,
    /// FLAIR cut for trapped CSF; the tissue stage's CSF threshold when
    /// absent.
    pub flair_csf_threshold: Option<f64>,
    pub flair_cyst_k_sigma: f64,
    pub peritumoral_band_mm: f64,
}

impl Default for SubregionConfig {
    fn default() -> Self {
        Self {
            enhance_k_sigma: 3.0,
            t2_dark_k_sigma: 2.0,
            t1_bright_k_sigma: 2.0,
            t2_bright_k_sigma: 2.0,
            flair_csf_threshold: None,
            flair_cyst_k_sigma: 2.0,
            peritumoral_band_mm: 10.0,
        }
    }
}

impl SubregionConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("enhance_k_sigma", self.enhance_k_sigma),
            ("t2_dark_k_sigma", self.t2_dark_k_sigma),
            ("t1_bright_k_sigma", self.t1_bright_k_sigma),
            ("t2_bright_k_sigma", self.t2_bright_k_sigma),
            ("flair_cyst_k_sigma", self.flair_cyst_k_sigma),
            ("peritumoral_band_mm", self.peritumoral_band_mm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Numeric cutoffs used for one case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubregionThresholds {
    pub t1_sub_enhancing: f64,
    pub t2_dark: f64,
    pub flair_trapped_csf: f64,
    pub flair_cyst: f64,
    pub t1_bright: f64,
    pub t2_bright: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubregionReport {
    pub thresholds: SubregionThresholds,
    pub counts: BTreeMap<String, usize>,
    /// Voxels per decision rule (1..=8).
    pub rule_counts: BTreeMap<u8, usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SubregionResult {
    pub labels: LabelVolume,
    /// Number of the rule that labeled each voxel; 0 outside the WT.
    pub rule_trace: Vec<u8>,
    pub report: SubregionReport,
}

impl SubregionResult {
    pub fn rule_trace_volume(&self) -> LabelVolume {
        let labels = self.rule_trace.iter().map(|&r| r as u32).collect();
        LabelVolume::new(self.labels.grid().clone(), labels).expect("trace matches grid")
    }
}

struct Ref {
    mean: f64,
    std: f64,
}

fn wm_ref<T: Real>(tissue: &TissueResult<T>, m: Modality) -> Result<Ref, SubregionError> {
    let s: &MaskedStats<T> = tissue
        .reference(m)
        .and_then(|r| r.wm.as_ref())
        .ok_or(SubregionError::MissingReference(m))?;
    Ok(Ref {
        mean: s.mean.as_f64(),
        std: s.std.as_f64(),
    })
}

/// Labels every WT voxel with exactly one subregion using ordered rules;
/// the first rule that matches wins.
///
/// 1. enhancing: core and T1-sub above the WM reference
/// 2. hemorrhage: T2 dark
/// 3. trapped CSF: FLAIR below the CSF threshold
/// 4. cyst: FLAIR darker than WM
/// 5. early necrosis: T1 bright, outside the core
/// 6. T2 bright outside the core: edema within the peritumoral band,
///    late necrosis beyond it
/// 7. remaining core: non-enhancing
/// 8. remaining non-core: the rule among 2-6 missed by the smallest margin
pub fn classify_subregions<T: Real>(
    study: &Study<T>,
    wt: &WholeTumorResult,
    tissue: &TissueResult<T>,
    cfg: &SubregionConfig,
) -> Result<SubregionResult, SubregionError> {
    cfg.validate().map_err(SubregionError::Config)?;
    if wt.wt_mask.is_empty_mask() {
        return Err(SubregionError::EmptyWholeTumor);
    }
    let t1 = study.require(Modality::T1)?;
    let t2 = study.require(Modality::T2)?;
    let flair = study.require(Modality::Flair)?;
    let sub = study.require(Modality::T1Sub)?;
    let r_sub = wm_ref(tissue, Modality::T1Sub)?;
    let r_t1 = wm_ref(tissue, Modality::T1)?;
    let r_t2 = wm_ref(tissue, Modality::T2)?;
    let r_fl = wm_ref(tissue, Modality::Flair)?;

    let mut warnings = Vec::new();
    let th = cfg
        .flair_csf_threshold
        .unwrap_or_else(|| tissue.csf_threshold.th.as_f64());
    let cyst_bound = r_fl.mean - cfg.flair_cyst_k_sigma * r_fl.std;
    let (trapped, cyst) = if th < cyst_bound {
        (th, cyst_bound)
    } else {
        warnings.push(format!(
            "CSF threshold {th:.3} is not below the cyst bound {cyst_bound:.3}; thresholds swapped"
        ));
        (cyst_bound, th)
    };
    let thr = SubregionThresholds {
        t1_sub_enhancing: r_sub.mean + cfg.enhance_k_sigma * r_sub.std,
        t2_dark: r_t2.mean - cfg.t2_dark_k_sigma * r_t2.std,
        flair_trapped_csf: trapped,
        flair_cyst: cyst,
        t1_bright: r_t1.mean + cfg.t1_bright_k_sigma * r_t1.std,
        t2_bright: r_t2.mean + cfg.t2_bright_k_sigma * r_t2.std,
    };

    let core = &wt.core_mask;
    let band = morphology(core, MorphOp::Dilate, cfg.peritumoral_band_mm, study.brain())?.and_not(core);
    let scale = |s: f64| if s > 0.0 { s } else { 1.0 };
    let (s_t1, s_t2, s_fl) = (scale(r_t1.std), scale(r_t2.std), scale(r_fl.std));
    let wt_mask = &wt.wt_mask;

    let decided: Vec<(u32, u8)> = (0..wt_mask.labels().len())
        .into_par_iter()
        .map(|i| {
            if !wt_mask.is_set(i) {
                return (0, 0);
            }
            let in_core = core.is_set(i);
            let (v_t1, v_t2, v_fl) = (t1.get(i).as_f64(), t2.get(i).as_f64(), flair.get(i).as_f64());
            let bright = if band.is_set(i) {
                SubregionLabel::Edema
            } else {
                SubregionLabel::LateNecrosis
            };
            let label = if in_core && sub.get(i).as_f64() > thr.t1_sub_enhancing {
                (SubregionLabel::Enhancing, 1)
            } else if v_t2 < thr.t2_dark {
                (SubregionLabel::Hemorrhage, 2)
            } else if v_fl < thr.flair_trapped_csf {
                (SubregionLabel::TrappedCsf, 3)
            } else if v_fl < thr.flair_cyst {
                (SubregionLabel::Cyst, 4)
            } else if !in_core && v_t1 > thr.t1_bright {
                (SubregionLabel::EarlyNecrosis, 5)
            } else if !in_core && v_t2 > thr.t2_bright {
                (bright, 6)
            } else if in_core {
                (SubregionLabel::NonEnhancing, 7)
            } else {
                // every margin is non-negative here: how far the voxel is
                // from satisfying each rule, in WM standard deviations
                let margins = [
                    ((v_t2 - thr.t2_dark) / s_t2, SubregionLabel::Hemorrhage),
                    ((v_fl - thr.flair_trapped_csf) / s_fl, SubregionLabel::TrappedCsf),
                    ((v_fl - thr.flair_cyst) / s_fl, SubregionLabel::Cyst),
                    ((thr.t1_bright - v_t1) / s_t1, SubregionLabel::EarlyNecrosis),
                    ((thr.t2_bright - v_t2) / s_t2, bright),
                ];
                let best = margins
                    .iter()
                    .fold(margins[0], |b, &m| if m.0 < b.0 { m } else { b });
                (best.1, 8)
            };
            (label.0.code(), label.1)
        })
        .collect();

    let labels: Vec<u32> = decided.iter().map(|d| d.0).collect();
    let rule_trace: Vec<u8> = decided.iter().map(|d| d.1).collect();
    let labels = LabelVolume::new(wt_mask.grid().clone(), labels)?;
    let counts = SubregionLabel::ALL
        .into_iter()
        .map(|l| (l.name().to_string(), labels.count_label(l.code())))
        .collect();
    let mut rule_counts = BTreeMap::new();
    for &r in rule_trace.iter().filter(|&&r| r != 0) {
        *rule_counts.entry(r).or_insert(0) += 1;
    }
    Ok(SubregionResult {
        labels,
        rule_trace,
        report: SubregionReport {
            thresholds: thr,
            counts,
            rule_counts,
            warnings,
        },
    })
}

/// Maps early and late necrosis to one necrosis code.
pub fn merge_necrosis(result: &SubregionResult) -> LabelVolume {
    merge_necrosis_labels(&result.labels)
}

pub fn merge_necrosis_labels(labels: &LabelVolume) -> LabelVolume {
    let late = SubregionLabel::LateNecrosis.code();
    let early = SubregionLabel::EarlyNecrosis.code();
    let merged = labels
        .labels()
        .iter()
        .map(|&l| if l == late || l == early { NECROSIS_CODE } else { l })
        .collect();
    LabelVolume::new(labels.grid().clone(), merged).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    #[test]
    fn codes_fixed() {
        let codes: Vec<u32> = SubregionLabel::ALL.iter().map(|l| l.code()).collect();
        assert_eq!(codes, (1..=8).collect::<Vec<_>>());
        assert_eq!(code_table()[&7], "CYST");
        assert_eq!(merged_code_table()[&4], "NECROSIS");
        assert!(!merged_code_table().contains_key(&5));
        assert_eq!("trapped_csf".parse::<SubregionLabel>().unwrap(), SubregionLabel::TrappedCsf);
    }

    #[test]
    fn merge_counts() {
        let g = Grid::new([6, 1, 1], [1.0; 3]).unwrap();
        let l = LabelVolume::new(g.clone(), vec![4, 5, 5, 1, 0, 7]).unwrap();
        let m = merge_necrosis_labels(&l);
        assert_eq!(m.count_label(NECROSIS_CODE), 3);
        assert_eq!(m.labels(), &[4, 4, 4, 1, 0, 7]);
        let only_early = LabelVolume::new(g.clone(), vec![4; 6]).unwrap();
        assert_eq!(merge_necrosis_labels(&only_early).count_label(NECROSIS_CODE), 6);
        let empty = LabelVolume::empty(g);
        assert!(merge_necrosis_labels(&empty).is_empty_mask());
    }
}
