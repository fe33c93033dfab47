use thiserror::Error;

use crate::study::Modality;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("data length {len} does not match grid size {expected}")]
    LengthMismatch { len: usize, expected: usize },
    #[error("grid dimensions must be positive, got {0:?}")]
    InvalidDims([usize; 3]),
    #[error("voxel spacing must be strictly positive and finite, got {0:?}")]
    InvalidSpacing([f64; 3]),
    #[error("non-finite intensity at voxel {0} inside the brain mask")]
    NonFinite(usize),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("threshold needs at least one bound")]
    NoBounds,
    #[error("lower bound {low} exceeds upper bound {high}")]
    InvertedBounds { low: f64, high: f64 },
    #[error("smoothing sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("structuring radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("mask is not binary (found label {0})")]
    NotBinary(u32),
    #[error("mask selects no voxels inside the brain")]
    EmptyMask,
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 2 distinct samples, got {0}")]
    TooFewDistinct(usize),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("brain mask is empty")]
    EmptyBrain,
    #[error("no CSF valley found: intensity density is unimodal; supply a manual threshold")]
    NoCsfValley,
    #[error("probability field has no positive mass")]
    ZeroProbability,
    #[error("probability field length {len} does not match volume size {expected}")]
    ProbabilityLength { len: usize, expected: usize },
    #[error("need at least {needed} points for dimension {dim}, got {got}")]
    TooFewPoints { needed: usize, got: usize, dim: usize },
    #[error("support fraction {0} outside [0.5, 1]")]
    InvalidSupportFraction(f64),
    #[error("points have inconsistent dimension")]
    RaggedPoints,
    #[error("covariance is singular on every candidate subset")]
    SingularCovariance,
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("required modality {0} missing")]
    MissingModality(Modality),
    #[error("modality {0} is only accepted for ATRT studies")]
    UnexpectedModality(Modality),
    #[error("modality {modality}: {source}")]
    Grid {
        modality: Modality,
        #[source]
        source: VolumeError,
    },
    #[error("atlas prior {name}: {reason}")]
    Atlas { name: &'static str, reason: String },
}

#[derive(Debug, Error)]
pub enum TissueError {
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("missing likelihood for class {0}")]
    MissingDensity(&'static str),
    #[error("class {0} has no prior mass to sample from")]
    EmptyClass(&'static str),
    #[error("invalid tissue configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum TumorError {
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error("no tumor core found")]
    NoCore,
    #[error("no tumor core within supplied WT")]
    NoCoreWithinWt,
    #[error("tumor core is empty")]
    EmptyCore,
    #[error("reference statistics for {0} are unavailable (empty tissue mask)")]
    MissingReference(Modality),
    #[error("invalid tumor configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum SubregionError {
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error("whole tumor mask is empty")]
    EmptyWholeTumor,
    #[error("WM reference statistics for {0} are unavailable")]
    MissingReference(Modality),
    #[error("unknown subregion code {0}")]
    UnknownCode(u32),
    #[error("invalid subregion configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("inconsistent phantom spec: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Study(#[from] StudyError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error("unknown label code {0} for {1} evaluation")]
    UnknownCode(u32, &'static str),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Nifti {
        path: String,
        #[source]
        source: nifti::NiftiError,
    },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}
