mod common;

use std::sync::OnceLock;

use tumorseg::phantom::{PhantomCase, PhantomSpec};
use tumorseg::study::Modality;
use tumorseg::subregion::{classify_subregions, merge_necrosis, SubregionConfig, SubregionLabel, SubregionResult};
use tumorseg::tissue::TissueResult;
use tumorseg::tumor::{segment_whole_tumor, whole_tumor_from_mask, TumorRuleConfig, WholeTumorResult};
use tumorseg::volume::{morphology, MorphOp};

struct Fixture {
    case: PhantomCase<f64>,
    tissue: TissueResult<f64>,
    wt: WholeTumorResult,
    sub: SubregionResult,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let (case, tissue) = common::build(&PhantomSpec::standard_atrt());
        let wt = segment_whole_tumor(&case.study, &tissue, &TumorRuleConfig::default()).unwrap();
        let sub = classify_subregions(&case.study, &wt, &tissue, &SubregionConfig::default()).unwrap();
        Fixture { case, tissue, wt, sub }
    })
}

fn assert_partition(wt: &WholeTumorResult, sub: &SubregionResult) {
    let labels = sub.labels.labels();
    for i in 0..labels.len() {
        let inside = wt.wt_mask.is_set(i);
        assert_eq!(labels[i] != 0, inside, "voxel {i}");
        assert_eq!(sub.rule_trace[i] != 0, inside, "voxel {i}");
        if inside {
            assert!(SubregionLabel::from_code(labels[i]).is_some());
            assert!((1..=8).contains(&sub.rule_trace[i]));
        }
    }
    let total: usize = sub.report.counts.values().sum();
    assert_eq!(total, wt.wt_mask.count_nonzero());
    let traced: usize = sub.report.rule_counts.values().sum();
    assert_eq!(traced, total);
}

#[test]
fn labels_partition_wt() {
    let f = fixture();
    assert_partition(&f.wt, &f.sub);
    assert!(f.sub.report.warnings.is_empty(), "{:?}", f.sub.report.warnings);
}

#[test]
fn core_labels_stay_in_core() {
    let f = fixture();
    let labels = &f.sub.labels;
    for l in [SubregionLabel::Enhancing, SubregionLabel::NonEnhancing] {
        assert!(labels.select(l.code()).is_subset_of(&f.wt.core_mask), "{}", l.name());
    }
    let early = labels.select(SubregionLabel::EarlyNecrosis.code());
    assert_eq!(early.and(&f.wt.core_mask).count_nonzero(), 0);
}

#[test]
fn edema_within_peritumoral_band() {
    let f = fixture();
    let cfg = SubregionConfig::default();
    let band = morphology(&f.wt.core_mask, MorphOp::Dilate, cfg.peritumoral_band_mm, f.case.study.brain())
        .unwrap()
        .and_not(&f.wt.core_mask);
    let edema = f.sub.labels.select(SubregionLabel::Edema.code());
    assert!(edema.count_nonzero() > 0);
    assert!(edema.is_subset_of(&band));
    let late = f.sub.labels.select(SubregionLabel::LateNecrosis.code());
    assert!(late.count_nonzero() > 0);
    let late_direct = (0..late.labels().len()).filter(|&i| late.is_set(i) && f.sub.rule_trace[i] == 6);
    assert!(late_direct.clone().all(|i| !band.is_set(i)));
}

#[test]
fn dark_flair_rules_respect_threshold_order() {
    let f = fixture();
    let thr = f.sub.report.thresholds;
    assert!(thr.flair_trapped_csf < thr.flair_cyst);
    assert_eq!(thr.flair_trapped_csf, f.tissue.csf_threshold.th);
    let flair = f.case.study.get(Modality::Flair).unwrap();
    let trapped = SubregionLabel::TrappedCsf.code();
    let cyst = SubregionLabel::Cyst.code();
    let mut seen = (0, 0);
    for i in 0..flair.data().len() {
        let v = flair.get(i);
        match (f.sub.labels.get(i), f.sub.rule_trace[i]) {
            (l, 3) if l == trapped => {
                assert!(v < thr.flair_trapped_csf);
                seen.0 += 1;
            }
            (l, 4) if l == cyst => {
                assert!(v >= thr.flair_trapped_csf && v < thr.flair_cyst);
                seen.1 += 1;
            }
            _ => {}
        }
    }
    assert!(seen.0 > 0 && seen.1 > 0, "{seen:?}");
}

#[test]
fn threshold_above_cyst_bound_is_swapped_with_warning() {
    let f = fixture();
    let cfg = SubregionConfig {
        flair_csf_threshold: Some(450.0),
        ..Default::default()
    };
    let sub = classify_subregions(&f.case.study, &f.wt, &f.tissue, &cfg).unwrap();
    assert_eq!(sub.report.warnings.len(), 1);
    let thr = sub.report.thresholds;
    assert!(thr.flair_trapped_csf < thr.flair_cyst);
    assert_eq!(thr.flair_cyst, 450.0);
    assert_partition(&f.wt, &sub);
}

#[test]
fn enlarged_wt_uses_fallback_and_stays_a_partition() {
    let f = fixture();
    let grown = morphology(&f.wt.wt_mask, MorphOp::Dilate, 3.0, f.case.study.brain()).unwrap();
    let wt = whole_tumor_from_mask(&f.case.study, &f.tissue, &grown, &TumorRuleConfig::default()).unwrap();
    let sub = classify_subregions(&f.case.study, &wt, &f.tissue, &SubregionConfig::default()).unwrap();
    assert_partition(&wt, &sub);
    assert!(sub.report.rule_counts.get(&8).copied().unwrap_or(0) > 0);
    let fallback_labels: Vec<u32> = (0..sub.rule_trace.len())
        .filter(|&i| sub.rule_trace[i] == 8)
        .map(|i| sub.labels.get(i))
        .collect();
    for code in [SubregionLabel::Enhancing.code(), SubregionLabel::NonEnhancing.code()] {
        assert!(!fallback_labels.contains(&code));
    }
}

#[test]
fn merged_necrosis_counts_add_up() {
    let f = fixture();
    let merged = merge_necrosis(&f.sub);
    let early = f.sub.labels.count_label(SubregionLabel::EarlyNecrosis.code());
    let late = f.sub.labels.count_label(SubregionLabel::LateNecrosis.code());
    assert_eq!(merged.count_label(tumorseg::subregion::NECROSIS_CODE), early + late);
    assert_eq!(merged.count_nonzero(), f.sub.labels.count_nonzero());
}

#[test]
fn deterministic() {
    let f = fixture();
    let again = classify_subregions(&f.case.study, &f.wt, &f.tissue, &SubregionConfig::default()).unwrap();
    assert_eq!(again.labels, f.sub.labels);
    assert_eq!(again.rule_trace, f.sub.rule_trace);
}
