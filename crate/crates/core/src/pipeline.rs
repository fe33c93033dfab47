//! Stage orchestration and on-disk output layout.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::eval::{evaluate_case, DiceReport, EvalMode};
use crate::io::{write_codes_json, write_json, write_labels, write_scalar};
use crate::real::Real;
use crate::study::{Study, TumorType};
use crate::subregion::{classify_subregions, code_table, SubregionConfig, SubregionResult};
use crate::tissue::{
    run_tissue_segmentation_observed, ProbabilityMap, TissueClass, TissuePipelineConfig,
    TissueResult,
};
use crate::tumor::{segment_whole_tumor, whole_tumor_from_mask, TumorRuleConfig, WholeTumorResult};
use crate::volume::{LabelVolume, ScalarVolume};

pub const REPORT_FILE: &str = "report.json";
pub const CODES_FILE: &str = "codes.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub tissue: TissuePipelineConfig,
    pub tumor: TumorRuleConfig,
    pub subregion: SubregionConfig,
    /// Also write per-iteration probability maps, the rule trace and the
    /// provenance volume.
    pub debug: bool,
    /// Seeds tissue sampling and robust estimation; overrides the seeds in
    /// `tissue`.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tissue: TissuePipelineConfig::default(),
            tumor: TumorRuleConfig::default(),
            subregion: SubregionConfig::default(),
            debug: false,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Validation(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let v = |e: String| PipelineError::Validation(format!("config: {e}"));
        self.tissue.validate().map_err(|e| v(e.to_string()))?;
        self.tumor.validate().map_err(|e| v(e.to_string()))?;
        self.subregion.validate().map_err(v)
    }

    /// Tissue configuration with the run seed applied.
    pub fn tissue_config(&self) -> TissuePipelineConfig {
        let mut t = self.tissue.clone();
        t.seed = self.seed;
        t.robust.seed = self.seed;
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Validation,
    Tissue,
    Tumor,
    Subregion,
    Evaluation,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Validation => "validation",
            Stage::Tissue => "tissue",
            Stage::Tumor => "tumor",
            Stage::Subregion => "subregion",
            Stage::Evaluation => "evaluation",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("input validation failed: {0}")]
    Validation(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Validation(_) => Stage::Validation,
            PipelineError::Stage { stage, .. } => *stage,
        }
    }

    /// 2 for input validation, 3 for a failed stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Stage { .. } => 3,
        }
    }

    fn at(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: e.to_string(),
        }
    }
}

impl From<IoError> for PipelineError {
    fn from(e: IoError) -> Self {
        PipelineError::at(Stage::Output, e)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub case_id: String,
    pub tumor_type: TumorType,
    pub tissue: TissueResult<T>,
    pub wt: WholeTumorResult,
    /// `None` for LGG.
    pub subregions: Option<SubregionResult>,
    pub dice: Option<DiceReport>,
    /// Prior and per-iteration posteriors, kept in debug mode only.
    pub iterations: Vec<ProbabilityMap<T>>,
}

fn check_atlases<T: Real>(
    study: &Study<T>,
    atlas_wm: &ScalarVolume<T>,
    atlas_gm: &ScalarVolume<T>,
) -> Result<(), PipelineError> {
    study
        .check_atlas("WM", atlas_wm)
        .and_then(|_| study.check_atlas("GM", atlas_gm))
        .map_err(|e| PipelineError::Validation(e.to_string()))
}

fn tissue_stage<T: Real>(
    study: &Study<T>,
    atlas_wm: &ScalarVolume<T>,
    atlas_gm: &ScalarVolume<T>,
    cfg: &RunConfig,
) -> Result<(TissueResult<T>, Vec<ProbabilityMap<T>>), PipelineError> {
    let mut maps = Vec::new();
    let tissue = run_tissue_segmentation_observed(study, atlas_wm, atlas_gm, &cfg.tissue_config(), |_, m| {
        if cfg.debug {
            maps.push(m.clone());
        }
    })
    .map_err(|e| PipelineError::at(Stage::Tissue, e))?;
    Ok((tissue, maps))
}

/// Tissue, whole-tumor and (for ATRT and DIPG) subregion stages in order.
/// When `truth` is given the final labels are scored against it: subregion
/// labels for heterogeneous tumors, the WT mask for LGG.
pub fn run_full<T: Real>(
    study: &Study<T>,
    atlas_wm: &ScalarVolume<T>,
    atlas_gm: &ScalarVolume<T>,
    cfg: &RunConfig,
    truth: Option<&LabelVolume>,
) -> Result<RunResult<T>, PipelineError> {
    cfg.validate()?;
    check_atlases(study, atlas_wm, atlas_gm)?;
    let (tissue, iterations) = tissue_stage(study, atlas_wm, atlas_gm, cfg)?;
    let wt = segment_whole_tumor(study, &tissue, &cfg.tumor).map_err(|e| PipelineError::at(Stage::Tumor, e))?;
    let subregions = if study.tumor_type().is_heterogeneous() {
        Some(
            classify_subregions(study, &wt, &tissue, &cfg.subregion)
                .map_err(|e| PipelineError::at(Stage::Subregion, e))?,
        )
    } else {
        None
    };
    let dice = truth
        .map(|t| {
            let (pred, mode) = match &subregions {
                Some(s) => (&s.labels, EvalMode::Subregion),
                None => (&wt.wt_mask, EvalMode::Wt),
            };
            evaluate_case(study.case_id(), pred, t, mode)
        })
        .transpose()
        .map_err(|e| PipelineError::at(Stage::Evaluation, e))?;
    Ok(RunResult {
        case_id: study.case_id().to_string(),
        tumor_type: study.tumor_type(),
        tissue,
        wt,
        subregions,
        dice,
        iterations,
    })
}

/// Subregions over a supplied WT mask (clipped to the brain). The tumor
/// core is recomputed inside it.
pub fn run_subregions_given_wt<T: Real>(
    study: &Study<T>,
    wt_mask: &LabelVolume,
    atlas_wm: &ScalarVolume<T>,
    atlas_gm: &ScalarVolume<T>,
    cfg: &RunConfig,
) -> Result<RunResult<T>, PipelineError> {
    cfg.validate()?;
    check_atlases(study, atlas_wm, atlas_gm)?;
    if !study.tumor_type().is_heterogeneous() {
        return Err(PipelineError::Validation(format!(
            "subregion segmentation is defined for ATRT and DIPG, not {}",
            study.tumor_type()
        )));
    }
    wt_mask
        .grid()
        .check_same(study.grid(), crate::study::AFFINE_TOLERANCE)
        .map_err(|e| PipelineError::Validation(format!("WT mask: {e}")))?;
    if wt_mask.ensure_binary().is_err() {
        return Err(PipelineError::Validation("WT mask must be binary".into()));
    }
    let inside = wt_mask.labels().iter().zip(study.brain().as_slice()).any(|(&l, &b)| l != 0 && b);
    if !inside {
        return Err(PipelineError::Validation("WT mask is empty inside the brain".into()));
    }
    let (tissue, iterations) = tissue_stage(study, atlas_wm, atlas_gm, cfg)?;
    let wt = whole_tumor_from_mask(study, &tissue, wt_mask, &cfg.tumor)
        .map_err(|e| PipelineError::at(Stage::Tumor, e))?;
    let sub = classify_subregions(study, &wt, &tissue, &cfg.subregion)
        .map_err(|e| PipelineError::at(Stage::Subregion, e))?;
    Ok(RunResult {
        case_id: study.case_id().to_string(),
        tumor_type: study.tumor_type(),
        tissue,
        wt,
        subregions: Some(sub),
        dice: None,
        iterations,
    })
}

#[derive(Serialize)]
struct Report<'a> {
    case_id: &'a str,
    tumor_type: TumorType,
    status: &'static str,
    config: &'a RunConfig,
    tissue: &'a crate::tissue::TissueReport,
    tumor: &'a crate::tumor::TumorReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    subregion: Option<&'a crate::subregion::SubregionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dice: Option<&'a DiceReport>,
    files: Vec<String>,
}

#[derive(Serialize)]
struct FailureReport<'a> {
    case_id: &'a str,
    status: &'static str,
    stage: Stage,
    error: String,
}

fn staging_dir(out: &Path) -> Result<tempfile::TempDir, PipelineError> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(|e| PipelineError::at(Stage::Output, e))?;
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    tempfile::Builder::new()
        .prefix(&format!(".{name}.partial-"))
        .tempdir_in(parent)
        .map_err(|e| PipelineError::at(Stage::Output, e))
}

/// Moves a finished staging directory into place. An existing `out` is
/// replaced only when it holds `marker` from a previous run.
fn commit(staged: tempfile::TempDir, out: &Path, marker: &str) -> Result<(), PipelineError> {
    if out.exists() {
        refuse_foreign(out, marker)?;
        std::fs::remove_dir_all(out).map_err(|e| PipelineError::at(Stage::Output, e))?;
    }
    let path = staged.keep();
    std::fs::rename(&path, out).map_err(|e| {
        let _ = std::fs::remove_dir_all(&path);
        PipelineError::at(Stage::Output, e)
    })
}

fn refuse_foreign(out: &Path, marker: &str) -> Result<(), PipelineError> {
    if out.exists() && !out.join(marker).is_file() {
        return Err(PipelineError::Validation(format!(
            "refusing to replace {}: not a previous output directory",
            out.display()
        )));
    }
    Ok(())
}

const CLASS_FILES: [(TissueClass, &str); 3] = [
    (TissueClass::Wm, "tissue_wm.nii.gz"),
    (TissueClass::Gm, "tissue_gm.nii.gz"),
    (TissueClass::Csf, "tissue_csf.nii.gz"),
];

/// Writes the output layout into `out` atomically: everything is staged in
/// a sibling directory that is renamed into place at the end.
pub fn write_outputs<T: Real>(result: &RunResult<T>, cfg: &RunConfig, out: &Path) -> Result<(), PipelineError> {
    refuse_foreign(out, REPORT_FILE)?;
    let staged = staging_dir(out)?;
    let dir = staged.path();
    let mut files = Vec::new();
    let mut label = |name: &str, v: &LabelVolume| -> Result<(), PipelineError> {
        write_labels(dir.join(name), v)?;
        files.push(name.to_string());
        Ok(())
    };
    for (class, name) in CLASS_FILES {
        label(name, result.tissue.mask(class).expect("WM, GM and CSF have masks"))?;
    }
    label("wt.nii.gz", &result.wt.wt_mask)?;
    label("core.nii.gz", &result.wt.core_mask)?;
    if let Some(sub) = &result.subregions {
        label("subregions.nii.gz", &sub.labels)?;
    }
    if cfg.debug {
        label("provenance.nii.gz", &result.wt.provenance)?;
        if let Some(sub) = &result.subregions {
            label("rule_trace.nii.gz", &sub.rule_trace_volume())?;
        }
        std::fs::create_dir(dir.join("debug")).map_err(|e| PipelineError::at(Stage::Output, e))?;
        let maps = result
            .iterations
            .iter()
            .enumerate()
            .map(|(i, m)| (format!("iter{i}"), m))
            .chain([("smoothed".to_string(), &result.tissue.smoothed)]);
        for (tag, map) in maps {
            for class in TissueClass::ALL {
                let name = format!("debug/{tag}_{}.nii.gz", class.name().to_ascii_lowercase());
                write_scalar(dir.join(&name), &map.volume(class))?;
                files.push(name);
            }
        }
    }
    let codes: Vec<(u32, &str)> = code_table().into_iter().collect();
    write_codes_json(dir.join(CODES_FILE), &codes)?;
    files.push(CODES_FILE.to_string());
    let report = Report {
        case_id: &result.case_id,
        tumor_type: result.tumor_type,
        status: "ok",
        config: cfg,
        tissue: &result.tissue.report,
        tumor: &result.wt.report,
        subregion: result.subregions.as_ref().map(|s| &s.report),
        dice: result.dice.as_ref(),
        files,
    };
    write_json(dir.join(REPORT_FILE), &report)?;
    commit(staged, out, REPORT_FILE)
}

/// Records a failed run as `out/report.json` naming the stage.
pub fn write_failure(case_id: &str, err: &PipelineError, out: &Path) -> Result<(), PipelineError> {
    refuse_foreign(out, REPORT_FILE)?;
    let staged = staging_dir(out)?;
    let report = FailureReport {
        case_id,
        status: "failed",
        stage: err.stage(),
        error: err.to_string(),
    };
    write_json(staged.path().join(REPORT_FILE), &report)?;
    commit(staged, out, REPORT_FILE)
}

/// Input image paths for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseInputs {
    pub scans: std::collections::BTreeMap<crate::study::Modality, PathBuf>,
    pub atlas_wm: PathBuf,
    pub atlas_gm: PathBuf,
    /// Brain mask; derived from the scans when absent.
    #[serde(default)]
    pub mask: Option<PathBuf>,
}

/// Voxels that are nonzero in at least one scan.
pub fn derive_brain_mask<T: Real>(scans: &[&ScalarVolume<T>]) -> crate::volume::BrainMask {
    let n = scans.first().map_or(0, |s| s.data().len());
    crate::volume::BrainMask::new(
        (0..n).map(|i| scans.iter().any(|s| s.data()[i] != T::zero())).collect(),
    )
}

/// Reads the scans, applies the brain mask and validates the study.
/// Every failure here is an input-validation error.
pub fn load_case<T: Real>(
    case_id: &str,
    tumor_type: TumorType,
    inputs: &CaseInputs,
) -> Result<(Study<T>, ScalarVolume<T>, ScalarVolume<T>), PipelineError> {
    let v = |e: String| PipelineError::Validation(e);
    for &m in tumor_type.required_modalities() {
        if !inputs.scans.contains_key(&m) {
            return Err(v(format!("required modality {m} missing")));
        }
    }
    let mut raw = std::collections::BTreeMap::new();
    for (&m, path) in &inputs.scans {
        raw.insert(m, crate::io::read_scalar::<T>(path).map_err(|e| v(e.to_string()))?);
    }
    let brain = match &inputs.mask {
        Some(p) => {
            let (grid, mask) = crate::io::read_mask(p).map_err(|e| v(e.to_string()))?;
            if let Some(t1) = raw.values().next() {
                grid.check_same(t1.grid(), crate::study::AFFINE_TOLERANCE)
                    .map_err(|e| v(format!("brain mask: {e}")))?;
            }
            mask
        }
        None => derive_brain_mask(&raw.values().collect::<Vec<_>>()),
    };
    if brain.count() == 0 {
        return Err(v("brain mask is empty".into()));
    }
    let masked = |name: &str, vol: ScalarVolume<T>| {
        vol.with_brain(brain.clone()).map_err(|e| v(format!("{name}: {e}")))
    };
    let mut scans = std::collections::BTreeMap::new();
    for (m, vol) in raw {
        scans.insert(m, masked(m.name(), vol)?);
    }
    let study = Study::new(case_id, tumor_type, scans).map_err(|e| v(e.to_string()))?;
    let atlas = |name: &str, p: &Path| {
        let a = crate::io::read_scalar::<T>(p).map_err(|e| v(e.to_string()))?;
        masked(name, a)
    };
    let atlas_wm = atlas("atlas WM", &inputs.atlas_wm)?;
    let atlas_gm = atlas("atlas GM", &inputs.atlas_gm)?;
    check_atlases(&study, &atlas_wm, &atlas_gm)?;
    Ok((study, atlas_wm, atlas_gm))
}

pub const PHANTOM_SPEC_FILE: &str = "spec.json";

/// Input file name of each modality in a phantom directory.
pub fn modality_file(m: crate::study::Modality) -> String {
    format!("{}.nii.gz", m.name().to_ascii_lowercase())
}

/// Writes a phantom case: one image per acquired modality, atlas priors,
/// the brain mask, truth labels, the code table and the spec itself.
pub fn write_phantom<T: Real>(
    case: &crate::phantom::PhantomCase<T>,
    spec: &crate::phantom::PhantomSpec,
    out: &Path,
) -> Result<(), PipelineError> {
    refuse_foreign(out, PHANTOM_SPEC_FILE)?;
    let staged = staging_dir(out)?;
    let dir = staged.path();
    for (m, scan) in case.study.acquired() {
        write_scalar(dir.join(modality_file(m)), scan)?;
    }
    write_scalar(dir.join("atlas_wm.nii.gz"), &case.atlas_wm)?;
    write_scalar(dir.join("atlas_gm.nii.gz"), &case.atlas_gm)?;
    write_labels(dir.join("brain_mask.nii.gz"), &case.study.brain().to_labels(case.study.grid()))?;
    write_labels(dir.join("truth_tissue.nii.gz"), &case.truth_tissue)?;
    write_labels(dir.join("truth_wt.nii.gz"), &case.truth_wt)?;
    write_labels(dir.join("truth_subregions.nii.gz"), &case.truth_subregions)?;
    let codes: Vec<(u32, &str)> = code_table().into_iter().collect();
    write_codes_json(dir.join(CODES_FILE), &codes)?;
    write_json(dir.join(PHANTOM_SPEC_FILE), spec)?;
    commit(staged, out, PHANTOM_SPEC_FILE)
}

/// Inputs of a phantom directory written by [`write_phantom`].
pub fn phantom_inputs(dir: &Path, tumor_type: TumorType) -> CaseInputs {
    CaseInputs {
        scans: tumor_type
            .required_modalities()
            .iter()
            .map(|&m| (m, dir.join(modality_file(m))))
            .collect(),
        atlas_wm: dir.join("atlas_wm.nii.gz"),
        atlas_gm: dir.join("atlas_gm.nii.gz"),
        mask: Some(dir.join("brain_mask.nii.gz")),
    }
}
