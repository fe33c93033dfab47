//! Brain tissue classification: atlas/FLAIR priors, iterated Bayes updates
//! with per-scan KDE likelihoods, and final WM/GM/CSF masks.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{StatsError, TissueError};
use crate::real::Real;
use crate::stats::{
    detect_csf_threshold, kde_fit, mcd_filter, sample_voxels, CsfThreshold, CsfThresholdParams,
    DensityTable, Likelihood, PointSet, RobustConfig,
};
use crate::study::{Modality, Study};
use crate::volume::{gaussian_smooth, masked_stats, BrainMask, Grid, LabelVolume, MaskedStats, ScalarVolume};

/// Evidence times the scan's brain intensity range below this keeps the
/// prior unchanged.
pub const EVIDENCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TissueClass {
    Wm,
    Gm,
    Csf,
    Other,
}

impl TissueClass {
    pub const ALL: [TissueClass; 4] = [TissueClass::Wm, TissueClass::Gm, TissueClass::Csf, TissueClass::Other];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TissueClass::Wm => "WM",
            TissueClass::Gm => "GM",
            TissueClass::Csf => "CSF",
            TissueClass::Other => "OTHER",
        }
    }
}

impl fmt::Display for TissueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-class probability volumes. Voxels outside the brain hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap<T> {
    grid: Grid,
    brain: BrainMask,
    classes: [Vec<T>; 4],
}

impl<T: Real> ProbabilityMap<T> {
    pub fn new(grid: Grid, brain: BrainMask, classes: [Vec<T>; 4]) -> Result<Self, TissueError> {
        let n = grid.len();
        if brain.len() != n || classes.iter().any(|c| c.len() != n) {
            return Err(TissueError::Config("probability map length does not match grid".into()));
        }
        Ok(Self { grid, brain, classes })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn brain(&self) -> &BrainMask {
        &self.brain
    }

    pub fn class(&self, c: TissueClass) -> &[T] {
        &self.classes[c.index()]
    }

    pub fn at(&self, idx: usize) -> [T; 4] {
        [
            self.classes[0][idx],
            self.classes[1][idx],
            self.classes[2][idx],
            self.classes[3][idx],
        ]
    }

    pub fn volume(&self, c: TissueClass) -> ScalarVolume<T> {
        ScalarVolume::new(self.grid.clone(), self.classes[c.index()].clone(), self.brain.clone())
            .expect("probabilities are finite")
    }

    /// Largest deviation of a brain voxel's class sum from 1.
    pub fn max_normalization_error(&self) -> f64 {
        (0..self.grid.len())
            .into_par_iter()
            .filter(|&i| self.brain.contains(i))
            .map(|i| (self.at(i).iter().copied().sum::<T>() - T::one()).abs().as_f64())
            .reduce(|| 0.0, f64::max)
    }

    fn from_voxels(grid: &Grid, brain: &BrainMask, voxels: Vec<[T; 4]>) -> Self {
        let mut classes: [Vec<T>; 4] = Default::default();
        for (c, out) in classes.iter_mut().enumerate() {
            *out = voxels.iter().map(|v| v[c]).collect();
        }
        Self {
            grid: grid.clone(),
            brain: brain.clone(),
            classes,
        }
    }

    fn map_voxels(&self, f: impl Fn(usize, [T; 4]) -> [T; 4] + Sync) -> Self {
        let voxels = (0..self.grid.len())
            .into_par_iter()
            .map(|i| if self.brain.contains(i) { f(i, self.at(i)) } else { [T::zero(); 4] })
            .collect();
        Self::from_voxels(&self.grid, &self.brain, voxels)
    }

    /// Voxelwise mean of several maps on the same grid.
    pub fn average(maps: &[Self]) -> Self {
        let first = &maps[0];
        let k = T::lit(maps.len() as f64);
        first.map_voxels(|i, _| {
            let mut acc = [T::zero(); 4];
            for m in maps {
                for (a, v) in acc.iter_mut().zip(m.at(i)) {
                    *a = *a + v;
                }
            }
            acc.map(|a| a / k)
        })
    }

    /// Mean over brain voxels of the L1 change between two maps.
    fn mean_abs_change(&self, other: &Self) -> f64 {
        let count = self.brain.count().max(1) as f64;
        let total: f64 = (0..self.grid.len())
            .into_par_iter()
            .filter(|&i| self.brain.contains(i))
            .map(|i| {
                self.at(i)
                    .iter()
                    .zip(other.at(i))
                    .map(|(&a, b)| (a - b).abs().as_f64())
                    .sum::<f64>()
            })
            .sum();
        total / count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TissuePipelineConfig {
    pub iterations: usize,
    pub posterior_threshold: f64,
    pub posterior_smoothing_sigma_mm: f64,
    pub csf_prior_value: f64,
    pub other_prior_value: f64,
    /// OTHER prior on CSF-dark voxels.
    pub other_floor: f64,
    pub kde_samples_per_class: usize,
    /// Lookup-table resolution for each fitted likelihood.
    pub density_table_points: usize,
    pub csf: CsfThresholdParams,
    /// Manual CSF threshold; skips detection when set.
    pub csf_threshold: Option<f64>,
    pub robust: RobustConfig,
    pub seed: u64,
}

impl Default for TissuePipelineConfig {
    fn default() -> Self {
        Self {
            iterations: 3,
            posterior_threshold: 0.5,
            posterior_smoothing_sigma_mm: 1.0,
            csf_prior_value: 0.9,
            other_prior_value: 0.5,
            other_floor: 1e-3,
            kde_samples_per_class: 10_000,
            density_table_points: 4096,
            csf: CsfThresholdParams::default(),
            csf_threshold: None,
            robust: RobustConfig::default(),
            seed: 0,
        }
    }
}

impl TissuePipelineConfig {
    pub fn validate(&self) -> Result<(), TissueError> {
        let bad = |what: &str| Err(TissueError::Config(what.to_string()));
        if !(self.posterior_threshold > 0.0 && self.posterior_threshold < 1.0) {
            return bad("posterior_threshold must lie in (0, 1)");
        }
        if !(self.posterior_smoothing_sigma_mm > 0.0) {
            return bad("posterior_smoothing_sigma_mm must be positive");
        }
        for (name, v) in [
            ("csf_prior_value", self.csf_prior_value),
            ("other_prior_value", self.other_prior_value),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.other_floor >= 0.0 && self.other_floor < 1.0) {
            return bad("other_floor must lie in [0, 1)");
        }
        if self.kde_samples_per_class < 2 {
            return bad("kde_samples_per_class must be at least 2");
        }
        Ok(())
    }
}

/// Prior probabilities from atlas WM/GM and the FLAIR CSF threshold.
pub fn initialize_priors<T: Real>(
    study: &Study<T>,
    atlas_wm: &ScalarVolume<T>,
    atlas_gm: &ScalarVolume<T>,
    cfg: &TissuePipelineConfig,
) -> Result<(ProbabilityMap<T>, CsfThreshold<T>), TissueError> {
    study.check_atlas("WM", atlas_wm)?;
    study.check_atlas("GM", atlas_gm)?;
    let flair = study.require(Modality::Flair)?;
    let csf = match cfg.csf_threshold {
        Some(th) => {
            let th = T::lit(th);
            CsfThreshold {
                th,
                peak_location: th,
                valley_location: th,
            }
        }
        None => detect_csf_threshold(flair, &cfg.csf)?,
    };
    let csf_prior = T::lit(cfg.csf_prior_value);
    let other_prior = T::lit(cfg.other_prior_value);
    let floor = T::lit(cfg.other_floor);
    let grid = study.grid().clone();
    let brain = study.brain().clone();
    let voxels: Vec<[T; 4]> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if !brain.contains(i) {
                return [T::zero(); 4];
            }
            let (aw, ag) = (atlas_wm.get(i), atlas_gm.get(i));
            let raw = if flair.get(i) < csf.th {
                let rest = T::one() - csf_prior;
                [rest * aw, rest * ag, csf_prior, floor]
            } else {
                let rest = T::one() - other_prior;
                [rest * aw, rest * ag, T::zero(), other_prior]
            };
            normalize(raw).unwrap_or([T::zero(), T::zero(), T::zero(), T::one()])
        })
        .collect();
    Ok((ProbabilityMap::from_voxels(&grid, &brain, voxels), csf))
}

fn normalize<T: Real>(v: [T; 4]) -> Option<[T; 4]> {
    let s = v.iter().copied().sum::<T>();
    (s > T::zero()).then(|| v.map(|x| x / s))
}

/// Voxelwise posterior `p(x|Y) Pr(Y) / sum_Y p(x|Y) Pr(Y)` for one scan.
///
/// `likelihoods` are indexed in [`TissueClass::ALL`] order. Voxels whose
/// evidence, times the scan's brain intensity range, falls below
/// [`EVIDENCE_FLOOR`] keep their prior.
pub fn bayes_update<T: Real, L: Likelihood<T> + Sync>(
    likelihoods: &[L],
    prior: &ProbabilityMap<T>,
    scan: &ScalarVolume<T>,
) -> Result<ProbabilityMap<T>, TissueError> {
    if likelihoods.len() < 4 {
        return Err(TissueError::MissingDensity(TissueClass::ALL[likelihoods.len()].name()));
    }
    scan.grid().check_same(prior.grid(), crate::study::AFFINE_TOLERANCE)?;
    let range = scan
        .brain_range()
        .map(|(lo, hi)| hi - lo)
        .filter(|r| *r > T::zero())
        .unwrap_or(T::one());
    let floor = T::lit(EVIDENCE_FLOOR) / range;
    Ok(prior.map_voxels(|i, p| {
        let x = scan.get(i);
        let mut joint = [T::zero(); 4];
        for c in 0..4 {
            joint[c] = likelihoods[c].density(x) * p[c];
        }
        let evidence = joint.iter().copied().sum::<T>();
        if !(evidence >= floor) {
            return p;
        }
        joint.map(|j| j / evidence)
    }))
}

/// Fitted likelihood for one (scan, class) pair.
#[derive(Debug, Clone)]
pub enum ClassDensity<T> {
    Table(DensityTable<T>),
    /// Class without prior mass; contributes nothing.
    Zero,
}

impl<T: Real> Likelihood<T> for ClassDensity<T> {
    fn density(&self, x: T) -> T {
        match self {
            ClassDensity::Table(t) => t.density(x),
            ClassDensity::Zero => T::zero(),
        }
    }
}

/// WM/GM reference intensities for one modality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceStats<T> {
    pub wm: Option<MaskedStats<T>>,
    pub gm: Option<MaskedStats<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Samples kept for each class after outlier rejection.
    pub sample_counts: BTreeMap<TissueClass, usize>,
    pub mcd_inlier_fractions: BTreeMap<TissueClass, f64>,
    pub mean_posterior_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TissueReport {
    pub csf_threshold: CsfThreshold<f64>,
    pub iterations: Vec<IterationRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TissueResult<T> {
    pub posterior: ProbabilityMap<T>,
    /// Posterior after Gaussian smoothing; masks threshold this map.
    pub smoothed: ProbabilityMap<T>,
    pub wm_mask: LabelVolume,
    pub gm_mask: LabelVolume,
    pub csf_mask: LabelVolume,
    pub csf_threshold: CsfThreshold<T>,
    pub reference_stats: BTreeMap<Modality, ReferenceStats<T>>,
    pub report: TissueReport,
}

impl<T: Real> TissueResult<T> {
    pub fn reference(&self, m: Modality) -> Option<&ReferenceStats<T>> {
        self.reference_stats.get(&m)
    }

    pub fn mask(&self, c: TissueClass) -> Option<&LabelVolume> {
        match c {
            TissueClass::Wm => Some(&self.wm_mask),
            TissueClass::Gm => Some(&self.gm_mask),
            TissueClass::Csf => Some(&self.csf_mask),
            TissueClass::Other => None,
        }
    }
}

pub fn run_tissue_segmentation<T: Real>(
    study: &Study<T>,
    atlas_wm: &ScalarVolume<T>,
    atlas_gm: &ScalarVolume<T>,
    cfg: &TissuePipelineConfig,
) -> Result<TissueResult<T>, TissueError> {
    run_tissue_segmentation_observed(study, atlas_wm, atlas_gm, cfg, |_, _| {})
}

/// As [`run_tissue_segmentation`], calling `observer` with the prior
/// (iteration 0) and with the averaged posterior after every iteration.
pub fn run_tissue_segmentation_observed<T: Real>(
    study: &Study<T>,
    atlas_wm: &ScalarVolume<T>,
    atlas_gm: &ScalarVolume<T>,
    cfg: &TissuePipelineConfig,
    mut observer: impl FnMut(usize, &ProbabilityMap<T>),
) -> Result<TissueResult<T>, TissueError> {
    cfg.validate()?;
    let (mut prior, csf) = initialize_priors(study, atlas_wm, atlas_gm, cfg)?;
    observer(0, &prior);
    let scans = study.acquired();
    let mut warnings = Vec::new();
    let mut records = Vec::new();
    for it in 0..cfg.iterations {
        let (densities, record) = fit_likelihoods(&scans, &prior, cfg, it, &mut warnings)?;
        let posteriors = scans
            .par_iter()
            .zip(&densities)
            .map(|((_, scan), d)| bayes_update(d, &prior, scan))
            .collect::<Result<Vec<_>, _>>()?;
        let next = ProbabilityMap::average(&posteriors);
        let change = next.mean_abs_change(&prior);
        prior = next;
        records.push(IterationRecord {
            mean_posterior_change: change,
            ..record
        });
        observer(it + 1, &prior);
    }
    finish(study, prior, csf, cfg, records, warnings)
}

type ScanDensities<T> = Vec<Vec<ClassDensity<T>>>;

/// Draws class samples by prior, rejects WM/GM outliers jointly over all
/// scans, and fits one likelihood per (scan, class).
fn fit_likelihoods<T: Real>(
    scans: &[(Modality, &ScalarVolume<T>)],
    prior: &ProbabilityMap<T>,
    cfg: &TissuePipelineConfig,
    iteration: usize,
    warnings: &mut Vec<String>,
) -> Result<(ScanDensities<T>, IterationRecord), TissueError> {
    let mut per_scan: ScanDensities<T> = vec![Vec::with_capacity(4); scans.len()];
    let mut sample_counts = BTreeMap::new();
    let mut inlier_fractions = BTreeMap::new();
    for class in TissueClass::ALL {
        let stream = (iteration * 4 + class.index()) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let mut idx = match sample_voxels(
            prior.class(class),
            prior.brain().as_slice(),
            cfg.kde_samples_per_class,
            &mut rng,
        ) {
            Ok(idx) => idx,
            Err(StatsError::ZeroProbability) => {
                sample_counts.insert(class, 0);
                for d in per_scan.iter_mut() {
                    d.push(ClassDensity::Zero);
                }
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if matches!(class, TissueClass::Wm | TissueClass::Gm) {
            let data: Vec<T> = idx
                .iter()
                .flat_map(|&i| scans.iter().map(move |(_, s)| s.get(i)))
                .collect();
            let points = PointSet::new(scans.len(), data)?;
            let robust = RobustConfig {
                seed: cfg.robust.seed.wrapping_add(stream),
                ..cfg.robust
            };
            match mcd_filter(&points, &robust) {
                Ok(r) => {
                    inlier_fractions.insert(class, r.inlier_fraction());
                    idx = idx
                        .into_iter()
                        .zip(&r.inliers)
                        .filter_map(|(i, &keep)| keep.then_some(i))
                        .collect();
                }
                Err(e) => warnings.push(format!(
                    "iteration {}: outlier rejection for {class} failed ({e}); using unfiltered samples",
                    iteration + 1
                )),
            }
        }
        sample_counts.insert(class, idx.len());
        let fitted = scans
            .par_iter()
            .map(|(_, scan)| {
                let values: Vec<T> = idx.iter().map(|&i| scan.get(i)).collect();
                let model = kde_fit(&values, None)?;
                let (lo, hi) = scan.brain_range().ok_or(StatsError::EmptyBrain)?;
                Ok(ClassDensity::Table(model.tabulate(lo, hi, cfg.density_table_points)))
            })
            .collect::<Result<Vec<_>, StatsError>>()?;
        for (d, f) in per_scan.iter_mut().zip(fitted) {
            d.push(f);
        }
    }
    let record = IterationRecord {
        iteration: iteration + 1,
        sample_counts,
        mcd_inlier_fractions: inlier_fractions,
        mean_posterior_change: 0.0,
    };
    Ok((per_scan, record))
}

fn finish<T: Real>(
    study: &Study<T>,
    posterior: ProbabilityMap<T>,
    csf: CsfThreshold<T>,
    cfg: &TissuePipelineConfig,
    iterations: Vec<IterationRecord>,
    warnings: Vec<String>,
) -> Result<TissueResult<T>, TissueError> {
    let mut smoothed: [Vec<T>; 4] = Default::default();
    for c in TissueClass::ALL {
        let s = gaussian_smooth(&posterior.volume(c), cfg.posterior_smoothing_sigma_mm)?;
        smoothed[c.index()] = s.into_data();
    }
    let smoothed = ProbabilityMap::new(posterior.grid().clone(), posterior.brain().clone(), smoothed)?;
    let threshold = T::lit(cfg.posterior_threshold);
    let grid = study.grid();
    let mut masks = [vec![false; grid.len()], vec![false; grid.len()], vec![false; grid.len()]];
    for i in 0..grid.len() {
        if !study.brain().contains(i) {
            continue;
        }
        let p = smoothed.at(i);
        let mut best = 0;
        for c in 1..4 {
            if p[c] > p[best] {
                best = c;
            }
        }
        if best < 3 && p[best] >= threshold {
            masks[best][i] = true;
        }
    }
    let [wm, gm, csf_bits] = masks;
    let wm_mask = LabelVolume::from_bools(grid.clone(), &wm);
    let gm_mask = LabelVolume::from_bools(grid.clone(), &gm);
    let csf_mask = LabelVolume::from_bools(grid.clone(), &csf_bits);
    let stats = |vol: &ScalarVolume<T>, mask: &LabelVolume| {
        if mask.is_empty_mask() {
            None
        } else {
            masked_stats(vol, mask).ok()
        }
    };
    let reference_stats = study
        .all()
        .map(|(m, vol)| {
            (
                m,
                ReferenceStats {
                    wm: stats(vol, &wm_mask),
                    gm: stats(vol, &gm_mask),
                },
            )
        })
        .collect();
    let report = TissueReport {
        csf_threshold: CsfThreshold {
            th: csf.th.as_f64(),
            peak_location: csf.peak_location.as_f64(),
            valley_location: csf.valley_location.as_f64(),
        },
        iterations,
        warnings,
    };
    Ok(TissueResult {
        posterior,
        smoothed,
        wm_mask,
        gm_mask,
        csf_mask,
        csf_threshold: csf,
        reference_stats,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::TumorType;
    use crate::volume::Grid;

    fn line(values: Vec<f64>) -> ScalarVolume<f64> {
        let g = Grid::new([values.len(), 1, 1], [1.0; 3]).unwrap();
        ScalarVolume::unmasked(g, values).unwrap()
    }

    fn prior_of(voxels: Vec<[f64; 4]>) -> ProbabilityMap<f64> {
        let g = Grid::new([voxels.len(), 1, 1], [1.0; 3]).unwrap();
        let b = BrainMask::full(voxels.len());
        ProbabilityMap::from_voxels(&g, &b, voxels)
    }

    #[test]
    fn equal_likelihoods_keep_prior() {
        let prior = prior_of(vec![[0.1, 0.2, 0.3, 0.4]]);
        let l = |_x: f64| 0.7;
        let post = bayes_update(&[l, l, l, l], &prior, &line(vec![5.0])).unwrap();
        for (a, b) in post.at(0).iter().zip(prior.at(0)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_evaluated_posterior() {
        let prior = prior_of(vec![[0.5, 0.5, 0.0, 0.0]]);
        let ls: [fn(f64) -> f64; 4] = [|_| 0.2, |_| 0.1, |_| 0.5, |_| 0.5];
        let post = bayes_update(&ls, &prior, &line(vec![1.0])).unwrap();
        assert!((post.at(0)[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((post.at(0)[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_prior_fixed() {
        let prior = prior_of(vec![[1.0, 0.0, 0.0, 0.0]]);
        let ls: [fn(f64) -> f64; 4] = [|_| 1e-3, |_| 5.0, |_| 5.0, |_| 5.0];
        let post = bayes_update(&ls, &prior, &line(vec![1.0])).unwrap();
        assert_eq!(post.at(0), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn vanishing_evidence_keeps_prior() {
        let prior = prior_of(vec![[0.25; 4]]);
        let z = |_x: f64| 0.0;
        let post = bayes_update(&[z, z, z, z], &prior, &line(vec![1.0])).unwrap();
        assert_eq!(post.at(0), [0.25; 4]);
    }

    #[test]
    fn missing_density_rejected() {
        let prior = prior_of(vec![[0.25; 4]]);
        let l = |_x: f64| 1.0;
        assert!(matches!(
            bayes_update(&[l, l], &prior, &line(vec![1.0])),
            Err(TissueError::MissingDensity("CSF"))
        ));
    }

    fn prior_study() -> (Study<f64>, ScalarVolume<f64>, ScalarVolume<f64>) {
        // dark voxels then bright voxels; the valley sits between
        let mut flair: Vec<f64> = (0..40).map(|i| 100.0 + (i % 7) as f64).collect();
        flair.extend((0..60).map(|i| 400.0 + (i % 9) as f64));
        let mut scans = BTreeMap::new();
        for m in [Modality::T1, Modality::T1Post, Modality::T2] {
            scans.insert(m, line(vec![1.0; 100]));
        }
        scans.insert(Modality::Flair, line(flair));
        let study = Study::new("p", TumorType::Dipg, scans).unwrap();
        let mut aw = vec![0.5; 100];
        let mut ag = vec![0.5; 100];
        aw[50] = 0.8;
        ag[50] = 0.2;
        aw[51] = 0.0;
        ag[51] = 0.0;
        (study, line(aw), line(ag))
    }

    #[test]
    fn prior_values() {
        let (study, aw, ag) = prior_study();
        let cfg = TissuePipelineConfig {
            csf: CsfThresholdParams {
                bandwidth: Some(5.0),
                ..CsfThresholdParams::default()
            },
            ..TissuePipelineConfig::default()
        };
        let (p, th) = initialize_priors(&study, &aw, &ag, &cfg).unwrap();
        assert!(th.th > 110.0 && th.th < 400.0);
        let dark = p.at(0);
        let s = 1.001;
        for (got, want) in dark.iter().zip([0.05 / s, 0.05 / s, 0.9 / s, 0.001 / s]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in p.at(50).iter().zip([0.4, 0.1, 0.0, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(p.at(51), [0.0, 0.0, 0.0, 1.0]);
        assert!(p.max_normalization_error() < 1e-12);
    }

    #[test]
    fn atlas_out_of_range_rejected() {
        let (study, aw, ag) = prior_study();
        let bad = aw.map(|v| v * 3.0);
        let cfg = TissuePipelineConfig::default();
        assert!(matches!(
            initialize_priors(&study, &bad, &ag, &cfg),
            Err(TissueError::Study(_))
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = TissuePipelineConfig {
            posterior_threshold: 1.5,
            ..TissuePipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(TissuePipelineConfig::default().validate().is_ok());
    }
}
