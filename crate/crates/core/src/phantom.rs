//! Synthetic multi-modal phantoms with exact ground truth.
//!
//! The brain is a sphere with a CSF shell, a GM ribbon and a WM interior.
//! Lesions (spheres or ellipsoids) are painted over it; where lesions
//! overlap, the one listed first wins.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::PhantomError;
use crate::real::Real;
use crate::study::{Modality, Study, TumorType};
use crate::subregion::SubregionLabel;
use crate::tissue::TissueClass;
use crate::volume::{gaussian_smooth, BrainMask, Grid, LabelVolume, ScalarVolume};

/// Truth tissue codes.
pub const TRUTH_WM: u32 = 1;
pub const TRUTH_GM: u32 = 2;
pub const TRUTH_CSF: u32 = 3;
/// Lesion voxels (tumor or artifact).
pub const TRUTH_OTHER: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intensity {
    pub mean: f64,
    pub std: f64,
}

impl Intensity {
    pub const fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }
}

pub type ModalityIntensities = BTreeMap<Modality, Intensity>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrainLayout {
    pub center_mm: [f64; 3],
    pub radius_mm: f64,
    pub csf_thickness_mm: f64,
    pub gm_thickness_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Sphere,
    Ellipsoid,
}

/// What a lesion stands for in the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlantedLabel {
    /// Tumor core without a finer label; truth subregion NON_ENHANCING.
    Core,
    Enhancing,
    NonEnhancing,
    Edema,
    EarlyNecrosis,
    LateNecrosis,
    Hemorrhage,
    Cyst,
    TrappedCsf,
    /// Abnormal intensities that are not tumor.
    Artifact,
}

impl PlantedLabel {
    pub fn subregion(self) -> Option<SubregionLabel> {
        Some(match self {
            PlantedLabel::Core | PlantedLabel::NonEnhancing => SubregionLabel::NonEnhancing,
            PlantedLabel::Enhancing => SubregionLabel::Enhancing,
            PlantedLabel::Edema => SubregionLabel::Edema,
            PlantedLabel::EarlyNecrosis => SubregionLabel::EarlyNecrosis,
            PlantedLabel::LateNecrosis => SubregionLabel::LateNecrosis,
            PlantedLabel::Hemorrhage => SubregionLabel::Hemorrhage,
            PlantedLabel::Cyst => SubregionLabel::Cyst,
            PlantedLabel::TrappedCsf => SubregionLabel::TrappedCsf,
            PlantedLabel::Artifact => return None,
        })
    }

    fn in_core(self) -> bool {
        matches!(
            self,
            PlantedLabel::Core | PlantedLabel::Enhancing | PlantedLabel::NonEnhancing
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lesion {
    pub shape: Shape,
    pub center_mm: [f64; 3],
    /// Semi-axes; a sphere uses the first entry.
    pub radii_mm: [f64; 3],
    pub label: PlantedLabel,
    /// Modalities not listed inherit the background tissue's intensities.
    #[serde(default)]
    pub intensities: ModalityIntensities,
}

impl Lesion {
    pub fn sphere(center_mm: [f64; 3], radius_mm: f64, label: PlantedLabel, intensities: ModalityIntensities) -> Self {
        Self {
            shape: Shape::Sphere,
            center_mm,
            radii_mm: [radius_mm; 3],
            label,
            intensities,
        }
    }

    fn contains(&self, p: [f64; 3]) -> bool {
        let r = match self.shape {
            Shape::Sphere => [self.radii_mm[0]; 3],
            Shape::Ellipsoid => self.radii_mm,
        };
        (0..3)
            .map(|a| ((p[a] - self.center_mm[a]) / r[a]).powi(2))
            .sum::<f64>()
            <= 1.0 + 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub case_id: String,
    pub tumor_type: TumorType,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub brain: BrainLayout,
    /// Healthy intensities for WM, GM and CSF.
    pub tissues: BTreeMap<TissueClass, ModalityIntensities>,
    #[serde(default)]
    pub lesions: Vec<Lesion>,
    #[serde(default)]
    pub seed: u64,
    /// Blur of the true WM/GM indicators used as atlas priors; 0 gives
    /// exact indicators.
    #[serde(default = "default_atlas_blur")]
    pub atlas_blur_sigma_mm: f64,
    /// Required separation, in reference standard deviations, between a
    /// lesion's mean and the healthy mean on the rule it claims.
    #[serde(default = "default_margin")]
    pub validation_margin_sigma: f64,
}

fn default_atlas_blur() -> f64 {
    2.0
}

fn default_margin() -> f64 {
    3.0
}

#[derive(Debug, Clone)]
pub struct PhantomCase<T> {
    pub study: Study<T>,
    pub truth_tissue: LabelVolume,
    pub truth_wt: LabelVolume,
    pub truth_subregions: LabelVolume,
    pub atlas_wm: ScalarVolume<T>,
    pub atlas_gm: ScalarVolume<T>,
}

fn intensities(values: [(Modality, f64); 5], std: f64, adc: bool) -> ModalityIntensities {
    values
        .into_iter()
        .filter(|(m, _)| adc || *m != Modality::Adc)
        .map(|(m, v)| (m, Intensity::new(v, std)))
        .collect()
}

fn table(t1: f64, t1post: f64, t2: f64, flair: f64, adc: f64) -> [(Modality, f64); 5] {
    [
        (Modality::T1, t1),
        (Modality::T1Post, t1post),
        (Modality::T2, t2),
        (Modality::Flair, flair),
        (Modality::Adc, adc),
    ]
}

const NOISE: f64 = 10.0;

impl PhantomSpec {
    fn base(case_id: &str, tumor_type: TumorType) -> Self {
        let adc = tumor_type == TumorType::Atrt;
        let mut tissues = BTreeMap::new();
        tissues.insert(TissueClass::Wm, intensities(table(400.0, 400.0, 300.0, 400.0, 700.0), NOISE, adc));
        tissues.insert(TissueClass::Gm, intensities(table(300.0, 300.0, 400.0, 500.0, 800.0), NOISE, adc));
        tissues.insert(TissueClass::Csf, intensities(table(100.0, 100.0, 900.0, 100.0, 2500.0), NOISE, adc));
        Self {
            case_id: case_id.to_string(),
            tumor_type,
            dims: [96, 96, 96],
            spacing: [1.0; 3],
            brain: BrainLayout {
                center_mm: [48.0, 48.0, 48.0],
                radius_mm: 45.0,
                csf_thickness_mm: 4.0,
                gm_thickness_mm: 6.0,
            },
            tissues,
            lesions: Vec::new(),
            seed: 7,
            atlas_blur_sigma_mm: default_atlas_blur(),
            validation_margin_sigma: default_margin(),
        }
    }

    /// Healthy brain of the given tumor type's modality set.
    pub fn healthy(tumor_type: TumorType) -> Self {
        Self::base("healthy", tumor_type)
    }

    /// ATRT phantom with every subregion planted: an enhancing rim around a
    /// non-enhancing centre, hemorrhage, early necrosis and trapped CSF
    /// pockets, a cyst bridging to a distal late-necrosis pocket, and an
    /// edema shell.
    pub fn standard_atrt() -> Self {
        let mut s = Self::base("atrt_phantom", TumorType::Atrt);
        let c = [48.0, 40.0, 48.0];
        let at = |dx: f64, dy: f64, dz: f64| [c[0] + dx, c[1] + dy, c[2] + dz];
        let l = |t: [(Modality, f64); 5]| intensities(t, NOISE, true);
        s.lesions = vec![
            Lesion::sphere(c, 3.5, PlantedLabel::NonEnhancing, l(table(320.0, 320.0, 500.0, 600.0, 450.0))),
            Lesion::sphere(c, 6.0, PlantedLabel::Enhancing, l(table(320.0, 520.0, 500.0, 600.0, 450.0))),
            Lesion::sphere(at(9.0, 0.0, 0.0), 3.0, PlantedLabel::EarlyNecrosis, l(table(560.0, 560.0, 350.0, 520.0, 1000.0))),
            Lesion::sphere(at(-9.0, 0.0, 0.0), 3.0, PlantedLabel::Hemorrhage, l(table(380.0, 380.0, 150.0, 300.0, 900.0))),
            Lesion::sphere(at(0.0, 0.0, 9.0), 3.0, PlantedLabel::TrappedCsf, l(table(100.0, 100.0, 900.0, 100.0, 2500.0))),
            Lesion::sphere(at(0.0, 11.5, 0.0), 5.0, PlantedLabel::Cyst, l(table(150.0, 150.0, 850.0, 280.0, 2300.0))),
            Lesion::sphere(at(0.0, 22.5, 0.0), 5.0, PlantedLabel::LateNecrosis, l(table(250.0, 250.0, 700.0, 560.0, 1200.0))),
            Lesion::sphere(c, 12.5, PlantedLabel::Edema, l(table(340.0, 340.0, 650.0, 650.0, 1100.0))),
        ];
        s
    }

    /// DIPG phantom: FLAIR-bright core with adjacent cyst, hemorrhage and
    /// necrosis pockets.
    pub fn standard_dipg() -> Self {
        let mut s = Self::base("dipg_phantom", TumorType::Dipg);
        let c = [48.0, 44.0, 48.0];
        let at = |dx: f64, dy: f64, dz: f64| [c[0] + dx, c[1] + dy, c[2] + dz];
        let l = |t: [(Modality, f64); 5]| intensities(t, NOISE, false);
        s.lesions = vec![
            Lesion::sphere(c, 9.0, PlantedLabel::Core, l(table(330.0, 330.0, 550.0, 650.0, 0.0))),
            Lesion::sphere(at(0.0, 12.0, 0.0), 4.0, PlantedLabel::Cyst, l(table(150.0, 150.0, 850.0, 280.0, 0.0))),
            Lesion::sphere(at(-12.0, 0.0, 0.0), 3.5, PlantedLabel::Hemorrhage, l(table(380.0, 380.0, 150.0, 300.0, 0.0))),
            Lesion::sphere(at(12.0, 0.0, 0.0), 3.5, PlantedLabel::EarlyNecrosis, l(table(560.0, 560.0, 350.0, 450.0, 0.0))),
        ];
        s
    }

    /// LGG phantom: a single FLAIR-bright sphere.
    pub fn standard_lgg() -> Self {
        let mut s = Self::base("lgg_phantom", TumorType::Lgg);
        let l = intensities(table(350.0, 350.0, 600.0, 650.0, 0.0), NOISE, false);
        s.lesions = vec![Lesion::sphere([48.0, 42.0, 48.0], 10.0, PlantedLabel::Core, l)];
        s
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "atrt" => Some(Self::standard_atrt()),
            "dipg" => Some(Self::standard_dipg()),
            "lgg" => Some(Self::standard_lgg()),
            "healthy" => Some(Self::healthy(TumorType::Atrt)),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 4] = ["atrt", "dipg", "lgg", "healthy"];

    fn tissue(&self, c: TissueClass, m: Modality) -> Result<Intensity, PhantomError> {
        self.tissues
            .get(&c)
            .and_then(|t| t.get(&m))
            .copied()
            .ok_or_else(|| PhantomError::Inconsistent(format!("tissue {c} lacks {m} intensity")))
    }

    /// Checks geometry, modality coverage and that every lesion's
    /// intensities satisfy the rule its label claims by the configured
    /// margin.
    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |msg: String| Err(PhantomError::Inconsistent(msg));
        Grid::new(self.dims, self.spacing)?;
        let b = &self.brain;
        if !(b.radius_mm > 0.0 && b.csf_thickness_mm >= 0.0 && b.gm_thickness_mm >= 0.0) {
            return bad("brain radius must be positive and shell thicknesses non-negative".into());
        }
        if b.csf_thickness_mm + b.gm_thickness_mm >= b.radius_mm {
            return bad("CSF and GM shells leave no WM interior".into());
        }
        if !(self.atlas_blur_sigma_mm >= 0.0) {
            return bad("atlas_blur_sigma_mm must be non-negative".into());
        }
        let modalities = self.tumor_type.required_modalities();
        for c in [TissueClass::Wm, TissueClass::Gm, TissueClass::Csf] {
            for &m in modalities {
                let t = self.tissue(c, m)?;
                if !(t.std >= 0.0 && t.mean.is_finite()) {
                    return bad(format!("tissue {c} {m}: invalid intensity"));
                }
            }
        }
        for (n, lesion) in self.lesions.iter().enumerate() {
            if lesion.radii_mm.iter().any(|&r| !(r > 0.0)) {
                return bad(format!("lesion {n}: radii must be positive"));
            }
            for m in lesion.intensities.keys() {
                if !modalities.contains(m) {
                    return bad(format!("lesion {n}: modality {m} is not acquired for {}", self.tumor_type));
                }
            }
            self.validate_rule(n, lesion)?;
        }
        Ok(())
    }

    fn validate_rule(&self, n: usize, lesion: &Lesion) -> Result<(), PhantomError> {
        let k = self.validation_margin_sigma;
        let need = |m: Modality| {
            lesion.intensities.get(&m).map(|i| i.mean).ok_or_else(|| {
                PhantomError::Inconsistent(format!("lesion {n} ({:?}) must specify {m}", lesion.label))
            })
        };
        let fail = |what: &str| {
            Err(PhantomError::Inconsistent(format!(
                "lesion {n} ({:?}): {what}",
                lesion.label
            )))
        };
        let wm = |m: Modality| self.tissue(TissueClass::Wm, m);
        let gm = |m: Modality| self.tissue(TissueClass::Gm, m);
        if lesion.label.in_core() {
            match self.tumor_type {
                TumorType::Atrt => {
                    let v = need(Modality::Adc)?;
                    let (w, g) = (wm(Modality::Adc)?, gm(Modality::Adc)?);
                    if v > (w.mean - k * w.std).min(g.mean - k * g.std) {
                        return fail("ADC is not dark enough for the core rule");
                    }
                }
                TumorType::Dipg | TumorType::Lgg => {
                    let v = need(Modality::Flair)?;
                    let (w, g) = (wm(Modality::Flair)?, gm(Modality::Flair)?);
                    if v < (w.mean + k * w.std).max(g.mean + k * g.std) {
                        return fail("FLAIR is not bright enough for the core rule");
                    }
                }
            }
        }
        match lesion.label {
            PlantedLabel::Enhancing => {
                let sub = need(Modality::T1Post)? - need(Modality::T1)?;
                let (p, t) = (wm(Modality::T1Post)?, wm(Modality::T1)?);
                let sd = (p.std.powi(2) + t.std.powi(2)).sqrt();
                if sub < (p.mean - t.mean) + (k + 1.0) * sd {
                    return fail("T1-sub enhancement below margin");
                }
            }
            PlantedLabel::Hemorrhage => {
                let w = wm(Modality::T2)?;
                if need(Modality::T2)? > w.mean - k * w.std {
                    return fail("T2 is not dark enough");
                }
            }
            PlantedLabel::TrappedCsf => {
                let c = self.tissue(TissueClass::Csf, Modality::Flair)?;
                if need(Modality::Flair)? > c.mean + k * c.std {
                    return fail("FLAIR is not CSF-dark");
                }
            }
            PlantedLabel::Cyst => {
                let v = need(Modality::Flair)?;
                let (w, c) = (wm(Modality::Flair)?, self.tissue(TissueClass::Csf, Modality::Flair)?);
                if v > w.mean - k * w.std || v < c.mean + k * c.std {
                    return fail("FLAIR must sit between CSF and WM");
                }
            }
            PlantedLabel::EarlyNecrosis => {
                let w = wm(Modality::T1)?;
                if need(Modality::T1)? < w.mean + k * w.std {
                    return fail("T1 is not bright enough");
                }
            }
            PlantedLabel::LateNecrosis | PlantedLabel::Edema => {
                let w = wm(Modality::T2)?;
                if need(Modality::T2)? < w.mean + k * w.std {
                    return fail("T2 is not bright enough");
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Builds the phantom. Deterministic for a fixed spec.
pub fn generate_phantom<T: Real>(spec: &PhantomSpec) -> Result<PhantomCase<T>, PhantomError> {
    spec.validate()?;
    let grid = Grid::new(spec.dims, spec.spacing)?;
    let n = grid.len();
    let b = &spec.brain;
    let csf_inner = b.radius_mm - b.csf_thickness_mm;
    let gm_inner = csf_inner - b.gm_thickness_mm;

    let mut brain = vec![false; n];
    let mut tissue = vec![0u32; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (idx, (br, t)) in brain.iter_mut().zip(tissue.iter_mut()).enumerate() {
        let v = grid.coords(idx);
        let p = [
            v.i as f64 * spec.spacing[0],
            v.j as f64 * spec.spacing[1],
            v.k as f64 * spec.spacing[2],
        ];
        let r = (0..3).map(|a| (p[a] - b.center_mm[a]).powi(2)).sum::<f64>().sqrt();
        if r > b.radius_mm {
            continue;
        }
        *br = true;
        *t = if r > csf_inner {
            TRUTH_CSF
        } else if r > gm_inner {
            TRUTH_GM
        } else {
            TRUTH_WM
        };
        owner[idx] = spec.lesions.iter().position(|l| l.contains(p));
    }
    let healthy = |t: u32| match t {
        TRUTH_WM => TissueClass::Wm,
        TRUTH_GM => TissueClass::Gm,
        _ => TissueClass::Csf,
    };

    let brain_mask = BrainMask::new(brain.clone());
    let mut scans = BTreeMap::new();
    for &m in spec.tumor_type.required_modalities() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(m as u64);
        let mut data = Vec::with_capacity(n);
        for idx in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            if !brain[idx] {
                data.push(T::zero());
                continue;
            }
            let lesion = owner[idx].and_then(|o| spec.lesions[o].intensities.get(&m));
            let dist = match lesion {
                Some(i) => *i,
                None => spec.tissue(healthy(tissue[idx]), m)?,
            };
            data.push(T::lit(dist.mean + dist.std * z));
        }
        scans.insert(m, ScalarVolume::new(grid.clone(), data, brain_mask.clone())?);
    }
    let study = Study::new(spec.case_id.clone(), spec.tumor_type, scans)?;

    let atlas = |code: u32| -> Result<ScalarVolume<T>, PhantomError> {
        let ind: Vec<T> = tissue
            .iter()
            .map(|&t| if t == code { T::one() } else { T::zero() })
            .collect();
        let vol = ScalarVolume::new(grid.clone(), ind, brain_mask.clone())?;
        if spec.atlas_blur_sigma_mm > 0.0 {
            let s = gaussian_smooth(&vol, spec.atlas_blur_sigma_mm)?;
            Ok(s.map(|v| v.max(T::zero()).min(T::one())))
        } else {
            Ok(vol)
        }
    };
    let atlas_wm = atlas(TRUTH_WM)?;
    let atlas_gm = atlas(TRUTH_GM)?;

    let mut sub = vec![0u32; n];
    for idx in 0..n {
        if let Some(o) = owner[idx] {
            tissue[idx] = TRUTH_OTHER;
            sub[idx] = spec.lesions[o].label.subregion().map_or(0, |l| l.code());
        }
    }
    let wt: Vec<bool> = sub.iter().map(|&s| s != 0).collect();
    Ok(PhantomCase {
        study,
        truth_tissue: LabelVolume::new(grid.clone(), tissue)?,
        truth_wt: LabelVolume::from_bools(grid.clone(), &wt),
        truth_subregions: LabelVolume::new(grid, sub)?,
        atlas_wm,
        atlas_gm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mut s: PhantomSpec) -> PhantomSpec {
        s.dims = [40, 40, 40];
        s.brain.center_mm = [20.0, 20.0, 20.0];
        s.brain.radius_mm = 18.0;
        s.lesions.clear();
        s
    }

    #[test]
    fn healthy_has_no_tumor() {
        let case = generate_phantom::<f64>(&small(PhantomSpec::healthy(TumorType::Dipg))).unwrap();
        assert!(case.truth_wt.is_empty_mask());
        let brain = case.study.brain();
        for i in 0..brain.len() {
            assert_eq!(brain.contains(i), case.truth_tissue.get(i) != 0);
        }
    }

    #[test]
    fn core_and_shell() {
        let mut s = small(PhantomSpec::standard_lgg());
        s.tumor_type = TumorType::Dipg;
        let core = intensities(table(350.0, 350.0, 600.0, 650.0, 0.0), NOISE, false);
        let edema = intensities(table(340.0, 340.0, 650.0, 650.0, 0.0), NOISE, false);
        s.lesions = vec![
            Lesion::sphere([20.0; 3], 3.0, PlantedLabel::Core, core),
            Lesion::sphere([20.0; 3], 6.0, PlantedLabel::Edema, edema),
        ];
        let case = generate_phantom::<f64>(&s).unwrap();
        let g = case.study.grid();
        assert_eq!(case.truth_subregions.get(g.index(20, 20, 20)), SubregionLabel::NonEnhancing.code());
        assert_eq!(case.truth_subregions.get(g.index(24, 20, 20)), SubregionLabel::Edema.code());
        assert_eq!(case.truth_subregions.get(g.index(23, 20, 20)), SubregionLabel::NonEnhancing.code());
        assert_eq!(case.truth_subregions.get(g.index(27, 20, 20)), 0);
        assert_eq!(case.truth_wt.to_bools(), case.truth_subregions.to_bools());
    }

    #[test]
    fn deterministic() {
        let s = small(PhantomSpec::healthy(TumorType::Atrt));
        let a = generate_phantom::<f32>(&s).unwrap();
        let b = generate_phantom::<f32>(&s).unwrap();
        for (m, v) in a.study.all() {
            assert_eq!(v.data(), b.study.get(m).unwrap().data());
        }
        assert_eq!(a.atlas_wm.data(), b.atlas_wm.data());
    }

    #[test]
    fn class_means_match_spec() {
        let s = small(PhantomSpec::healthy(TumorType::Dipg));
        let case = generate_phantom::<f64>(&s).unwrap();
        let t2 = case.study.get(Modality::T2).unwrap();
        for (code, class) in [(TRUTH_WM, TissueClass::Wm), (TRUTH_GM, TissueClass::Gm), (TRUTH_CSF, TissueClass::Csf)] {
            let vals: Vec<f64> = (0..t2.data().len())
                .filter(|&i| case.truth_tissue.get(i) == code)
                .map(|i| t2.get(i))
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let want = s.tissues[&class][&Modality::T2];
            assert!((mean - want.mean).abs() <= 3.0 * want.std / (vals.len() as f64).sqrt());
        }
    }

    #[test]
    fn contradicting_lesion_rejected() {
        let mut s = PhantomSpec::standard_atrt();
        let hem = s.lesions.iter_mut().find(|l| l.label == PlantedLabel::Hemorrhage).unwrap();
        hem.intensities.insert(Modality::T2, Intensity::new(600.0, 10.0));
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("T2 is not dark enough"), "{err}");
    }

    #[test]
    fn presets_validate() {
        for name in PhantomSpec::PRESETS {
            PhantomSpec::preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let s = PhantomSpec::standard_atrt();
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back: PhantomSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
