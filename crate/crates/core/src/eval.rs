//! Dice scoring of predictions against truth label volumes.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::study::AFFINE_TOLERANCE;
use crate::subregion::{merge_necrosis_labels, merged_code_table, SubregionLabel};
use crate::volume::LabelVolume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Wt,
    Subregion,
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wt" => Ok(EvalMode::Wt),
            "subregion" => Ok(EvalMode::Subregion),
            _ => Err(format!("unknown evaluation mode '{s}' (expected wt or subregion)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverlapCounts {
    /// |A|, predicted voxels.
    pub pred: usize,
    /// |B|, truth voxels.
    pub truth: usize,
    pub intersection: usize,
}

impl OverlapCounts {
    /// `2|A∩B| / (|A|+|B|)`; `None` when both are empty.
    pub fn dice(&self) -> Option<f64> {
        let total = self.pred + self.truth;
        (total > 0).then(|| 2.0 * self.intersection as f64 / total as f64)
    }
}

fn overlap(a: &LabelVolume, b: &LabelVolume, pa: impl Fn(u32) -> bool, pb: impl Fn(u32) -> bool) -> OverlapCounts {
    let mut c = OverlapCounts {
        pred: 0,
        truth: 0,
        intersection: 0,
    };
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        let (ia, ib) = (pa(x), pb(y));
        c.pred += ia as usize;
        c.truth += ib as usize;
        c.intersection += (ia && ib) as usize;
    }
    c
}

/// Dice of two binary masks; `None` when both are empty.
pub fn dice(a: &LabelVolume, b: &LabelVolume) -> Result<Option<f64>, EvalError> {
    a.grid().check_same(b.grid(), AFFINE_TOLERANCE)?;
    a.ensure_binary()?;
    b.ensure_binary()?;
    Ok(overlap(a, b, |x| x != 0, |y| y != 0).dice())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureScore {
    pub structure: String,
    pub dice: Option<f64>,
    #[serde(flatten)]
    pub counts: OverlapCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiceReport {
    pub case_id: String,
    pub mode: EvalMode,
    pub scores: Vec<StructureScore>,
}

impl DiceReport {
    pub fn get(&self, structure: &str) -> Option<&StructureScore> {
        self.scores.iter().find(|s| s.structure == structure)
    }

    /// Mean over structures with a defined score.
    pub fn mean_dice(&self) -> Option<f64> {
        let vals: Vec<f64> = self.scores.iter().filter_map(|s| s.dice).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn check_codes(v: &LabelVolume, mode: &'static str) -> Result<(), EvalError> {
    match v.labels().iter().find(|&&l| l != 0 && SubregionLabel::from_code(l).is_none()) {
        Some(&l) => Err(EvalError::UnknownCode(l, mode)),
        None => Ok(()),
    }
}

/// Scores a prediction. `Wt` compares the nonzero extents; `Subregion`
/// merges early and late necrosis in both volumes, then scores every
/// structure of the merged code table.
pub fn evaluate_case(
    case_id: &str,
    pred: &LabelVolume,
    truth: &LabelVolume,
    mode: EvalMode,
) -> Result<DiceReport, EvalError> {
    pred.grid().check_same(truth.grid(), AFFINE_TOLERANCE)?;
    let scores = match mode {
        EvalMode::Wt => {
            check_codes(pred, "wt")?;
            check_codes(truth, "wt")?;
            let c = overlap(pred, truth, |x| x != 0, |y| y != 0);
            vec![StructureScore {
                structure: "WT".into(),
                dice: c.dice(),
                counts: c,
            }]
        }
        EvalMode::Subregion => {
            check_codes(pred, "subregion")?;
            check_codes(truth, "subregion")?;
            let (p, t) = (merge_necrosis_labels(pred), merge_necrosis_labels(truth));
            merged_code_table()
                .into_iter()
                .map(|(code, name)| {
                    let c = overlap(&p, &t, |x| x == code, |y| y == code);
                    StructureScore {
                        structure: name.to_string(),
                        dice: c.dice(),
                        counts: c,
                    }
                })
                .collect()
        }
    };
    Ok(DiceReport {
        case_id: case_id.to_string(),
        mode,
        scores,
    })
}

pub const CSV_HEADER: &str = "case_id,structure,dice,pred_voxels,truth_voxels,intersection_voxels";

/// One row per case and structure; undefined scores are written as
/// `undefined`.
pub fn write_csv<W: Write>(reports: &[DiceReport], mut w: W) -> Result<(), EvalError> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        for s in &r.scores {
            let d = s.dice.map_or_else(|| "undefined".to_string(), |d| format!("{d:.6}"));
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.case_id, s.structure, d, s.counts.pred, s.counts.truth, s.counts.intersection
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureSummary {
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub defined: usize,
    pub undefined: usize,
}

/// Per-structure mean, median and minimum over defined scores.
pub fn aggregate(reports: &[DiceReport]) -> BTreeMap<String, StructureSummary> {
    let mut by: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for r in reports {
        for s in &r.scores {
            let e = by.entry(s.structure.clone()).or_default();
            match s.dice {
                Some(d) => e.0.push(d),
                None => e.1 += 1,
            }
        }
    }
    by.into_iter()
        .map(|(k, (mut v, undefined))| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let median = (n > 0).then(|| {
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    0.5 * (v[n / 2 - 1] + v[n / 2])
                }
            });
            let summary = StructureSummary {
                mean: (n > 0).then(|| v.iter().sum::<f64>() / n as f64),
                median,
                min: v.first().copied(),
                defined: n,
                undefined,
            };
            (k, summary)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;
    use proptest::prelude::*;

    fn mask(bits: &[bool]) -> LabelVolume {
        LabelVolume::from_bools(Grid::new([bits.len(), 1, 1], [1.0; 3]).unwrap(), bits)
    }

    #[test]
    fn basic_cases() {
        let a = mask(&[true, true, false, false]);
        assert_eq!(dice(&a, &a).unwrap(), Some(1.0));
        let b = mask(&[false, false, true, true]);
        assert_eq!(dice(&a, &b).unwrap(), Some(0.0));
        let e = mask(&[false; 4]);
        assert_eq!(dice(&e, &e).unwrap(), None);
        assert_eq!(dice(&a, &e).unwrap(), Some(0.0));
    }

    #[test]
    fn half_overlap() {
        let a: Vec<bool> = (0..150).map(|i| i < 100).collect();
        let b: Vec<bool> = (0..150).map(|i| i >= 50).collect();
        assert_eq!(dice(&mask(&a), &mask(&b)).unwrap(), Some(0.5));
    }

    #[test]
    fn grid_mismatch_and_non_binary() {
        assert!(dice(&mask(&[true]), &mask(&[true, false])).is_err());
        let g = Grid::new([2, 1, 1], [1.0; 3]).unwrap();
        let l = LabelVolume::new(g, vec![2, 0]).unwrap();
        assert!(dice(&l, &l).is_err());
    }

    fn labels(v: Vec<u32>) -> LabelVolume {
        LabelVolume::new(Grid::new([v.len(), 1, 1], [1.0; 3]).unwrap(), v).unwrap()
    }

    #[test]
    fn subregion_mode() {
        let truth = labels(vec![1, 7, 5, 5, 0, 3]);
        let perfect = evaluate_case("c", &truth, &truth, EvalMode::Subregion).unwrap();
        assert!(perfect.scores.iter().all(|s| s.dice.is_none() || s.dice == Some(1.0)));
        assert_eq!(perfect.get("HEMORRHAGE").unwrap().dice, None);

        let early = labels(vec![1, 0, 4, 4, 0, 3]);
        let r = evaluate_case("c", &early, &truth, EvalMode::Subregion).unwrap();
        assert_eq!(r.get("NECROSIS").unwrap().dice, Some(1.0));
        assert_eq!(r.get("CYST").unwrap().dice, Some(0.0));
        assert!(evaluate_case("c", &labels(vec![9, 0, 0, 0, 0, 0]), &truth, EvalMode::Subregion).is_err());
    }

    #[test]
    fn csv_and_aggregate() {
        let t = labels(vec![1, 1, 0]);
        let p = labels(vec![1, 0, 0]);
        let reports = vec![
            evaluate_case("a", &p, &t, EvalMode::Wt).unwrap(),
            evaluate_case("b", &t, &t, EvalMode::Wt).unwrap(),
        ];
        let mut out = Vec::new();
        write_csv(&reports, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            format!("{CSV_HEADER}\na,WT,0.666667,1,2,1\nb,WT,1.000000,2,2,2\n")
        );
        let agg = aggregate(&reports);
        let wt = &agg["WT"];
        assert!((wt.mean.unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(wt.min, Some(2.0 / 3.0));
        assert_eq!(wt.defined, 2);
    }

    proptest! {
        #[test]
        fn symmetric_and_self_one(a in prop::collection::vec(any::<bool>(), 1..64), b_seed in any::<u64>()) {
            let b: Vec<bool> = a.iter().enumerate().map(|(i, _)| (b_seed >> (i % 64)) & 1 == 1).collect();
            let (ma, mb) = (mask(&a), mask(&b));
            prop_assert_eq!(dice(&ma, &mb).unwrap(), dice(&mb, &ma).unwrap());
            if a.iter().any(|&x| x) {
                prop_assert_eq!(dice(&ma, &ma).unwrap(), Some(1.0));
            }
        }

        #[test]
        fn shared_voxel_never_hurts(a in prop::collection::vec(any::<bool>(), 2..64), b in prop::collection::vec(any::<bool>(), 2..64), pick in any::<prop::sample::Index>()) {
            let n = a.len().min(b.len());
            let (mut a, mut b) = (a[..n].to_vec(), b[..n].to_vec());
            let i = pick.index(n);
            prop_assume!(!a[i] && !b[i]);
            let before = dice(&mask(&a), &mask(&b)).unwrap().unwrap_or(0.0);
            a[i] = true;
            b[i] = true;
            let after = dice(&mask(&a), &mask(&b)).unwrap().unwrap();
            prop_assert!(after >= before);
        }
    }
}
