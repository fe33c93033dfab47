//! Density estimation, CSF threshold detection, sampling and robust covariance.

mod csf;
mod kde;
mod linalg;
mod mcd;
mod sampling;

pub use csf::{csf_threshold_from_samples, detect_csf_threshold, CsfThreshold, CsfThresholdParams};
pub use kde::{kde_fit, silverman_bandwidth, DensityModel, DensityTable, Likelihood};
pub use mcd::{mcd_filter, McdResult, PointSet, RobustConfig};
pub use sampling::{sample_by_probability, sample_voxels};

#[allow(unused_imports)]
pub(crate) use kde::{linspace, quantile_sorted};
