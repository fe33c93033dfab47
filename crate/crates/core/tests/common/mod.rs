#![allow(dead_code)]

use tumorseg::phantom::{BrainLayout, Intensity, Lesion, ModalityIntensities, PhantomCase, PhantomSpec, PlantedLabel};
use tumorseg::phantom::generate_phantom;
use tumorseg::study::{Modality, TumorType};
use tumorseg::tissue::{run_tissue_segmentation, TissuePipelineConfig, TissueResult};

pub const CENTER: f64 = 32.0;
pub const RADIUS: f64 = 29.0;

/// 64^3 brain with the default tissue intensities and no lesions.
pub fn small_spec(tumor_type: TumorType) -> PhantomSpec {
    let mut s = PhantomSpec::healthy(tumor_type);
    s.case_id = "small".into();
    s.dims = [64; 3];
    s.brain = BrainLayout {
        center_mm: [CENTER; 3],
        radius_mm: RADIUS,
        csf_thickness_mm: 3.0,
        gm_thickness_mm: 5.0,
    };
    s
}

pub fn intens(values: &[(Modality, f64)]) -> ModalityIntensities {
    values.iter().map(|&(m, v)| (m, Intensity::new(v, 10.0))).collect()
}

pub fn at(dx: f64, dy: f64, dz: f64) -> [f64; 3] {
    [CENTER + dx, CENTER + dy, CENTER + dz]
}

/// ATRT core with an edema ring and a detached T2-bright artifact.
pub fn atrt_with_artifact() -> PhantomSpec {
    use Modality::*;
    let mut s = small_spec(TumorType::Atrt);
    s.case_id = "small_atrt".into();
    s.lesions = vec![
        Lesion::sphere(
            at(0.0, -4.0, 0.0),
            6.0,
            PlantedLabel::Core,
            intens(&[(T1, 320.0), (T1Post, 320.0), (T2, 500.0), (Flair, 600.0), (Adc, 450.0)]),
        ),
        Lesion::sphere(
            at(0.0, -4.0, 0.0),
            10.0,
            PlantedLabel::Edema,
            intens(&[(T1, 340.0), (T1Post, 340.0), (T2, 650.0), (Flair, 650.0), (Adc, 1100.0)]),
        ),
        Lesion::sphere(
            at(0.0, 12.0, 0.0),
            3.5,
            PlantedLabel::Artifact,
            intens(&[(T2, 700.0), (Flair, 650.0)]),
        ),
    ];
    s
}

pub fn small_lgg() -> PhantomSpec {
    use Modality::*;
    let mut s = small_spec(TumorType::Lgg);
    s.case_id = "small_lgg".into();
    s.lesions = vec![Lesion::sphere(
        at(0.0, -3.0, 0.0),
        7.0,
        PlantedLabel::Core,
        intens(&[(T1, 350.0), (T1Post, 350.0), (T2, 600.0), (Flair, 650.0)]),
    )];
    s
}

pub fn build(spec: &PhantomSpec) -> (PhantomCase<f64>, TissueResult<f64>) {
    let case = generate_phantom::<f64>(spec).expect("phantom");
    let tissue = run_tissue_segmentation(&case.study, &case.atlas_wm, &case.atlas_gm, &TissuePipelineConfig::default())
        .expect("tissue segmentation");
    (case, tissue)
}
