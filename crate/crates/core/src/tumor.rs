//! Whole-tumor detection: type-specific core rule, false-positive
//! suppression and expansion into surrounding abnormal tissue.

use serde::{Deserialize, Serialize};

use crate::error::TumorError;
use crate::real::Real;
use crate::study::{Modality, Study, TumorType};
use crate::tissue::TissueResult;
use crate::volume::morphology::{dilate, erode};
use crate::volume::{label_components, BrainMask, Connectivity, Grid, LabelVolume};

/// Provenance code of voxels found by the core rule.
pub const PROVENANCE_CORE: u32 = 1;
/// Provenance code of voxels added by expansion.
pub const PROVENANCE_EXPANSION: u32 = 2;

/// Tissue statistics the core threshold is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreReference {
    Wm,
    Gm,
    /// Whichever of WM and GM gives the stricter threshold.
    Conservative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TumorRuleConfig {
    pub core_k_sigma: f64,
    pub expansion_k_sigma: f64,
    pub min_component_mm3: f64,
    pub expansion_max_gap_mm: f64,
    pub core_reference: CoreReference,
    /// Thickness of the brain-boundary shell, in voxels.
    pub boundary_shell_voxels: f64,
    /// Components with more than this fraction in the shell are dropped.
    pub boundary_fraction: f64,
    /// Dilation of the main CSF component defining the periventricular band.
    pub periventricular_band_mm: f64,
    /// Morphological opening of the abnormality field before expansion.
    pub abnormality_opening: bool,
}

impl Default for TumorRuleConfig {
    fn default() -> Self {
        Self {
            core_k_sigma: 2.0,
            expansion_k_sigma: 2.0,
            min_component_mm3: 200.0,
            expansion_max_gap_mm: 2.0,
            core_reference: CoreReference::Conservative,
            boundary_shell_voxels: 2.0,
            boundary_fraction: 0.5,
            periventricular_band_mm: 2.0,
            abnormality_opening: true,
        }
    }
}

impl TumorRuleConfig {
    pub fn validate(&self) -> Result<(), TumorError> {
        for (name, v) in [
            ("core_k_sigma", self.core_k_sigma),
            ("expansion_k_sigma", self.expansion_k_sigma),
            ("min_component_mm3", self.min_component_mm3),
            ("expansion_max_gap_mm", self.expansion_max_gap_mm),
            ("boundary_shell_voxels", self.boundary_shell_voxels),
            ("periventricular_band_mm", self.periventricular_band_mm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TumorError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction <= 1.0) {
            return Err(TumorError::Config("boundary_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentOutcome {
    Kept,
    TooSmall,
    Vessel,
    BoundaryShell,
    Periventricular,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentRecord {
    pub voxels: usize,
    pub volume_mm3: f64,
    pub outcome: ComponentOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreRule {
    pub modality: Modality,
    /// `below` for a hypointense rule, `above` for a hyperintense one.
    pub direction: &'static str,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TumorReport {
    pub core_rule: Option<CoreRule>,
    /// Candidate components other than the too-small ones.
    pub components: Vec<ComponentRecord>,
    pub too_small_components: usize,
    pub core_voxels: usize,
    pub expansion_voxels: usize,
    pub wt_volume_mm3: f64,
}

#[derive(Debug, Clone)]
pub struct WholeTumorResult {
    pub core_mask: LabelVolume,
    pub wt_mask: LabelVolume,
    /// [`PROVENANCE_CORE`] or [`PROVENANCE_EXPANSION`] on WT voxels.
    pub provenance: LabelVolume,
    pub report: TumorReport,
}

fn min_spacing(grid: &Grid) -> f64 {
    grid.spacing.iter().copied().fold(f64::INFINITY, f64::min)
}

fn reference<T: Real>(tissue: &TissueResult<T>, m: Modality) -> Result<[(f64, f64); 2], TumorError> {
    let r = tissue.reference(m).ok_or(TumorError::MissingReference(m))?;
    let wm = r.wm.as_ref().ok_or(TumorError::MissingReference(m))?;
    let gm = r.gm.as_ref().ok_or(TumorError::MissingReference(m))?;
    Ok([
        (wm.mean.as_f64(), wm.std.as_f64()),
        (gm.mean.as_f64(), gm.std.as_f64()),
    ])
}

/// Threshold and voxel test of the type-specific core rule: hypointense ADC
/// for ATRT, hyperintense FLAIR otherwise.
pub fn core_rule<T: Real>(
    tissue: &TissueResult<T>,
    ttype: TumorType,
    cfg: &TumorRuleConfig,
) -> Result<CoreRule, TumorError> {
    let (modality, below) = match ttype {
        TumorType::Atrt => (Modality::Adc, true),
        TumorType::Dipg | TumorType::Lgg => (Modality::Flair, false),
    };
    let [wm, gm] = reference(tissue, modality)?;
    let k = cfg.core_k_sigma;
    let bound = |(mean, std): (f64, f64)| if below { mean - k * std } else { mean + k * std };
    let threshold = match cfg.core_reference {
        CoreReference::Wm => bound(wm),
        CoreReference::Gm => bound(gm),
        CoreReference::Conservative if below => bound(wm).min(bound(gm)),
        CoreReference::Conservative => bound(wm).max(bound(gm)),
    };
    Ok(CoreRule {
        modality,
        direction: if below { "below" } else { "above" },
        threshold,
    })
}

/// Voxels passing the core rule, before false-positive suppression.
pub fn core_candidates<T: Real>(
    study: &Study<T>,
    tissue: &TissueResult<T>,
    ttype: TumorType,
    cfg: &TumorRuleConfig,
) -> Result<(LabelVolume, CoreRule), TumorError> {
    let rule = core_rule(tissue, ttype, cfg)?;
    let scan = study.require(rule.modality)?;
    let below = rule.direction == "below";
    let bits: Vec<bool> = scan
        .data()
        .iter()
        .zip(study.brain().as_slice())
        .map(|(&v, &b)| {
            let v = v.as_f64();
            b && if below { v < rule.threshold } else { v > rule.threshold }
        })
        .collect();
    Ok((LabelVolume::from_bools(study.grid().clone(), &bits), rule))
}

/// Core mask: candidates that survive [`suppress_false_positives`].
pub fn detect_tumor_core<T: Real>(
    study: &Study<T>,
    tissue: &TissueResult<T>,
    ttype: TumorType,
    cfg: &TumorRuleConfig,
) -> Result<LabelVolume, TumorError> {
    detect_core_with_report(study, tissue, ttype, cfg, None).map(|(core, _, _)| core)
}

fn detect_core_with_report<T: Real>(
    study: &Study<T>,
    tissue: &TissueResult<T>,
    ttype: TumorType,
    cfg: &TumorRuleConfig,
    within: Option<&LabelVolume>,
) -> Result<(LabelVolume, CoreRule, Vec<ComponentRecord>), TumorError> {
    cfg.validate()?;
    let (mut candidates, rule) = core_candidates(study, tissue, ttype, cfg)?;
    if let Some(w) = within {
        candidates = candidates.and(w);
    }
    let (core, records) = suppress_false_positives(&candidates, study, tissue, cfg)?;
    if core.is_empty_mask() {
        return Err(if within.is_some() {
            TumorError::NoCoreWithinWt
        } else {
            TumorError::NoCore
        });
    }
    Ok((core, rule, records))
}

/// Drops candidate components matching the known false-positive patterns:
/// too small; thin structures that vanish under one erosion step (vessels);
/// more than `boundary_fraction` within the brain-boundary shell (imperfect
/// extraction); eroded interior entirely within the periventricular band.
pub fn suppress_false_positives<T: Real>(
    candidates: &LabelVolume,
    study: &Study<T>,
    tissue: &TissueResult<T>,
    cfg: &TumorRuleConfig,
) -> Result<(LabelVolume, Vec<ComponentRecord>), TumorError> {
    candidates.ensure_binary()?;
    let grid = candidates.grid();
    let voxel_mm3 = grid.voxel_volume_mm3();
    let step = min_spacing(grid);
    let comps = label_components(candidates, Connectivity::TwentySix)?;
    let eroded = erode(grid, &candidates.to_bools(), step);
    let brain = study.brain().as_slice();
    let interior = erode(grid, brain, cfg.boundary_shell_voxels * step);
    let band = periventricular_band(tissue, cfg)?;

    let mut keep = vec![false; comps.count() + 1];
    let mut records = Vec::with_capacity(comps.count());
    for (c, members) in comps.members().into_iter().enumerate() {
        let volume = members.len() as f64 * voxel_mm3;
        let core_voxels: Vec<usize> = members.iter().copied().filter(|&i| eroded[i]).collect();
        let shell = members.iter().filter(|&&i| !interior[i]).count();
        let outcome = if volume < cfg.min_component_mm3 {
            ComponentOutcome::TooSmall
        } else if (core_voxels.len() as f64 * voxel_mm3) < cfg.min_component_mm3 {
            ComponentOutcome::Vessel
        } else if shell as f64 > cfg.boundary_fraction * members.len() as f64 {
            ComponentOutcome::BoundaryShell
        } else if band.as_ref().is_some_and(|b| core_voxels.iter().all(|&i| b[i])) {
            ComponentOutcome::Periventricular
        } else {
            ComponentOutcome::Kept
        };
        keep[c + 1] = outcome == ComponentOutcome::Kept;
        records.push(ComponentRecord {
            voxels: members.len(),
            volume_mm3: volume,
            outcome,
        });
    }
    let labels = comps
        .labels
        .labels()
        .iter()
        .map(|&l| u32::from(keep[l as usize]))
        .collect();
    Ok((LabelVolume::new(grid.clone(), labels)?, records))
}

/// Largest CSF component dilated by the configured band, or `None` when the
/// CSF mask is empty.
fn periventricular_band<T: Real>(
    tissue: &TissueResult<T>,
    cfg: &TumorRuleConfig,
) -> Result<Option<Vec<bool>>, TumorError> {
    let main = largest_component(&tissue.csf_mask)?;
    Ok(main.map(|m| dilate(tissue.csf_mask.grid(), &m, cfg.periventricular_band_mm)))
}

fn largest_component(mask: &LabelVolume) -> Result<Option<Vec<bool>>, TumorError> {
    if mask.is_empty_mask() {
        return Ok(None);
    }
    let comps = label_components(mask, Connectivity::TwentySix)?;
    Ok(Some(comps.labels.labels().iter().map(|&l| l == 1).collect()))
}

/// Brain voxels that are outliers against both the WM and the GM reference
/// in at least one acquired scan, excluding the main CSF compartment.
pub fn abnormality_field<T: Real>(
    study: &Study<T>,
    tissue: &TissueResult<T>,
    cfg: &TumorRuleConfig,
) -> Result<LabelVolume, TumorError> {
    abnormality_outside(study, tissue, cfg, None)
}

/// Abnormality field with `exclude` removed before the opening, so that
/// speckle touching the excluded region is not anchored to it.
fn abnormality_outside<T: Real>(
    study: &Study<T>,
    tissue: &TissueResult<T>,
    cfg: &TumorRuleConfig,
    exclude: Option<&[bool]>,
) -> Result<LabelVolume, TumorError> {
    let grid = study.grid();
    let brain = study.brain();
    let k = cfg.expansion_k_sigma;
    let mut bits = vec![false; grid.len()];
    for (m, scan) in study.acquired() {
        let [wm, gm] = reference(tissue, m)?;
        let outside = |v: f64, (mean, std): (f64, f64)| (v - mean).abs() > k * std;
        for (i, bit) in bits.iter_mut().enumerate() {
            if brain.contains(i) && !*bit {
                let v = scan.get(i).as_f64();
                *bit = outside(v, wm) && outside(v, gm);
            }
        }
    }
    if let Some(csf) = largest_component(&tissue.csf_mask)? {
        for (b, c) in bits.iter_mut().zip(csf) {
            *b &= !c;
        }
    }
    if let Some(ex) = exclude {
        for (b, &e) in bits.iter_mut().zip(ex) {
            *b &= !e;
        }
    }
    if cfg.abnormality_opening {
        let r = std::f64::consts::SQRT_2 * min_spacing(grid);
        let opened = dilate(grid, &erode(grid, &bits, r), r);
        for (b, o) in bits.iter_mut().zip(opened) {
            *b &= o;
        }
    }
    Ok(LabelVolume::from_bools(grid.clone(), &bits))
}

/// Whole tumor from a detected core. LGG: the core itself. ATRT/DIPG: the
/// core plus abnormality components within `expansion_max_gap_mm` of the
/// growing tumor, repeated until nothing more is reachable.
pub fn expand_whole_tumor<T: Real>(
    core: &LabelVolume,
    study: &Study<T>,
    tissue: &TissueResult<T>,
    ttype: TumorType,
    cfg: &TumorRuleConfig,
) -> Result<WholeTumorResult, TumorError> {
    cfg.validate()?;
    core.ensure_binary()?;
    if core.is_empty_mask() {
        return Err(TumorError::EmptyCore);
    }
    let grid = core.grid().clone();
    let core_bits = core.to_bools();
    let mut wt = core_bits.clone();
    if ttype.is_heterogeneous() {
        let abnormal = abnormality_outside(study, tissue, cfg, Some(&core_bits))?;
        let comps = label_components(&abnormal, Connectivity::TwentySix)?;
        let members = comps.members();
        let mut added = vec![false; members.len()];
        let reach_mm = cfg.expansion_max_gap_mm + min_spacing(&grid);
        loop {
            let reach = dilate(&grid, &wt, reach_mm);
            let mut grew = false;
            for (c, vox) in members.iter().enumerate() {
                if !added[c] && vox.iter().any(|&i| reach[i]) {
                    added[c] = true;
                    grew = true;
                    for &i in vox {
                        wt[i] = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
    }
    let provenance: Vec<u32> = wt
        .iter()
        .zip(&core_bits)
        .map(|(&w, &c)| match (w, c) {
            (_, true) => PROVENANCE_CORE,
            (true, false) => PROVENANCE_EXPANSION,
            _ => 0,
        })
        .collect();
    let core_voxels = core_bits.iter().filter(|&&b| b).count();
    let wt_voxels = wt.iter().filter(|&&b| b).count();
    let wt_mask = LabelVolume::from_bools(grid.clone(), &wt);
    Ok(WholeTumorResult {
        core_mask: core.clone(),
        wt_mask,
        provenance: LabelVolume::new(grid.clone(), provenance)?,
        report: TumorReport {
            core_rule: None,
            components: Vec::new(),
            too_small_components: 0,
            core_voxels,
            expansion_voxels: wt_voxels - core_voxels,
            wt_volume_mm3: wt_voxels as f64 * grid.voxel_volume_mm3(),
        },
    })
}

fn split_records(records: Vec<ComponentRecord>) -> (Vec<ComponentRecord>, usize) {
    let (small, rest): (Vec<_>, Vec<_>) = records
        .into_iter()
        .partition(|r| r.outcome == ComponentOutcome::TooSmall);
    (rest, small.len())
}

/// Core detection followed by expansion, with the full report.
pub fn segment_whole_tumor<T: Real>(
    study: &Study<T>,
    tissue: &TissueResult<T>,
    cfg: &TumorRuleConfig,
) -> Result<WholeTumorResult, TumorError> {
    let ttype = study.tumor_type();
    let (core, rule, records) = detect_core_with_report(study, tissue, ttype, cfg, None)?;
    let mut wt = expand_whole_tumor(&core, study, tissue, ttype, cfg)?;
    wt.report.core_rule = Some(rule);
    (wt.report.components, wt.report.too_small_components) = split_records(records);
    Ok(wt)
}

/// Core recomputed inside a supplied whole-tumor mask, paired with that
/// mask unchanged.
pub fn whole_tumor_from_mask<T: Real>(
    study: &Study<T>,
    tissue: &TissueResult<T>,
    wt_mask: &LabelVolume,
    cfg: &TumorRuleConfig,
) -> Result<WholeTumorResult, TumorError> {
    wt_mask.ensure_binary()?;
    wt_mask
        .grid()
        .check_same(study.grid(), crate::study::AFFINE_TOLERANCE)?;
    let brain: &BrainMask = study.brain();
    let within = LabelVolume::from_bools(
        wt_mask.grid().clone(),
        &wt_mask
            .labels()
            .iter()
            .zip(brain.as_slice())
            .map(|(&l, &b)| l != 0 && b)
            .collect::<Vec<_>>(),
    );
    let (core, rule, records) =
        detect_core_with_report(study, tissue, study.tumor_type(), cfg, Some(&within))?;
    let provenance = within
        .labels()
        .iter()
        .zip(core.labels())
        .map(|(&w, &c)| {
            if c != 0 {
                PROVENANCE_CORE
            } else if w != 0 {
                PROVENANCE_EXPANSION
            } else {
                0
            }
        })
        .collect();
    let core_voxels = core.count_nonzero();
    let wt_voxels = within.count_nonzero();
    let (components, too_small_components) = split_records(records);
    Ok(WholeTumorResult {
        provenance: LabelVolume::new(within.grid().clone(), provenance)?,
        report: TumorReport {
            core_rule: Some(rule),
            components,
            too_small_components,
            core_voxels,
            expansion_voxels: wt_voxels - core_voxels,
            wt_volume_mm3: wt_voxels as f64 * within.grid().voxel_volume_mm3(),
        },
        core_mask: core,
        wt_mask: within,
    })
}
