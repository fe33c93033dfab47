//! Knowledge-based brain tumor segmentation for multi-modal MRI.
//!
//! The pipeline runs three stages on a [`study::Study`]: atlas-initialized
//! Bayesian tissue segmentation, whole-tumor detection from tumor-type
//! specific intensity rules, and rule-based subregion labeling. Everything
//! numeric is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar to `f64`.

pub mod error;
pub mod eval;
pub mod io;
pub mod phantom;
pub mod pipeline;
pub mod real;
pub mod stats;
pub mod study;
pub mod subregion;
pub mod tissue;
pub mod tumor;
pub mod volume;

pub use real::Real;

pub type Volume = volume::ScalarVolume<f64>;
pub type Study = study::Study<f64>;
pub type TissueResult = tissue::TissueResult<f64>;
pub type ProbabilityMap = tissue::ProbabilityMap<f64>;
pub type PhantomCase = phantom::PhantomCase<f64>;
pub type RunResult = pipeline::RunResult<f64>;

pub type VolumeF32 = volume::ScalarVolume<f32>;
pub type StudyF32 = study::Study<f32>;
pub type TissueResultF32 = tissue::TissueResult<f32>;
