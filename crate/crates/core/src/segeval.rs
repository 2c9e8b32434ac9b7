//! Overlap metrics, the review filter that emulates a clinician choosing
//! among candidate components, and cohort summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volgrid::LabelMask;

pub const DEFAULT_MIN_DICE: f64 = 0.3;

/// `2|A∩B| / (|A|+|B|)`; two empty masks score 1.
pub fn dice(pred: &LabelMask, reference: &LabelMask) -> Result<f64> {
    pred.same_space(reference.grid())?;
    let (mut a, mut b, mut both) = (0usize, 0usize, 0usize);
    for (&p, &r) in pred.labels().iter().zip(reference.labels()) {
        a += p as usize;
        b += r as usize;
        both += (p & r) as usize;
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (a + b) as f64)
}

/// Predicted physical volume over reference physical volume.
pub fn volume_ratio(pred: &LabelMask, reference: &LabelMask) -> Result<f64> {
    pred.same_space(reference.grid())?;
    let r = reference.physical_volume();
    if r == 0.0 {
        return Err(Error::EmptyRoi);
    }
    Ok(pred.physical_volume() / r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseEvaluation {
    pub case_id: String,
    pub dice: f64,
    pub volume_ratio: f64,
    pub pred_volume: f64,
    pub ref_volume: f64,
}

impl CaseEvaluation {
    pub fn compute(case_id: impl Into<String>, pred: &LabelMask, reference: &LabelMask) -> Result<Self> {
        Ok(Self {
            case_id: case_id.into(),
            dice: dice(pred, reference)?,
            volume_ratio: volume_ratio(pred, reference)?,
            pred_volume: pred.physical_volume(),
            ref_volume: reference.physical_volume(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Accepted,
    Rejected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    AllBelowThreshold,
    NoComponents,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedComponent {
    pub rank: usize,
    pub dice: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewOutcome {
    pub status: ReviewStatus,
    /// Best candidate, also reported for rejected cases when one exists.
    pub selected_component: Option<SelectedComponent>,
    pub reason: Option<RejectReason>,
}

impl ReviewOutcome {
    pub fn accepted(&self) -> bool {
        self.status == ReviewStatus::Accepted
    }
}

/// Picks the candidate with the highest DICE against the reference (lowest
/// rank on ties) and accepts it when its DICE is at least `min_dice`.
pub fn simulate_review(candidates: &[LabelMask], reference: &LabelMask, min_dice: f64) -> Result<ReviewOutcome> {
    if !(0.0..=1.0).contains(&min_dice) {
        return Err(Error::invalid(format!("min_dice {min_dice} outside [0, 1]")));
    }
    if reference.is_blank() {
        return Err(Error::EmptyRoi);
    }
    let mut best: Option<SelectedComponent> = None;
    for (rank, c) in candidates.iter().enumerate() {
        let d = dice(c, reference)?;
        if best.as_ref().is_none_or(|b| d > b.dice) {
            best = Some(SelectedComponent { rank, dice: d });
        }
    }
    Ok(match best {
        None => ReviewOutcome {
            status: ReviewStatus::Rejected,
            selected_component: None,
            reason: Some(RejectReason::NoComponents),
        },
        Some(b) if b.dice >= min_dice => ReviewOutcome {
            status: ReviewStatus::Accepted,
            selected_component: Some(b),
            reason: None,
        },
        Some(b) => ReviewOutcome {
            status: ReviewStatus::Rejected,
            selected_component: Some(b),
            reason: Some(RejectReason::AllBelowThreshold),
        },
    })
}

/// Cohort summary laid out like a segmentation results table: mean ± std
/// over detected cases and detection rates over all cases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub n_total: usize,
    pub n_detected: usize,
    pub mean_dice: f64,
    pub std_dice: f64,
    pub frac_dice_gt0: f64,
    pub frac_gt_05: f64,
    pub frac_gt_08: f64,
    pub mean_volume_ratio: f64,
}

impl CohortReport {
    /// One text row, e.g. `0.72 ± 0.29 | 91 % | 78 % | 45 %`.
    pub fn table_row(&self) -> String {
        format!(
            "{:.2} ± {:.2} | {:.0} % | {:.0} % | {:.0} %",
            self.mean_dice,
            self.std_dice,
            self.frac_dice_gt0 * 100.0,
            self.frac_gt_05 * 100.0,
            self.frac_gt_08 * 100.0
        )
    }

    pub const TABLE_HEADER: &'static str = "DICE (mean ± std) | DICE > 0 | DICE > 0.50 | DICE > 0.80";
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Summary statistics; mean and sample std use only cases with DICE > 0.
pub fn cohort_stats(evals: &[CaseEvaluation]) -> Result<CohortReport> {
    if evals.is_empty() {
        return Err(Error::invalid("cohort_stats needs at least one case"));
    }
    let detected: Vec<f64> = evals.iter().map(|e| e.dice).filter(|&d| d > 0.0).collect();
    let (mean_dice, std_dice) = mean_std(&detected);
    let n = evals.len() as f64;
    let frac = |t: f64| evals.iter().filter(|e| e.dice > t).count() as f64 / n;
    let ratios: Vec<f64> = evals.iter().map(|e| e.volume_ratio).filter(|r| r.is_finite()).collect();
    Ok(CohortReport {
        n_total: evals.len(),
        n_detected: detected.len(),
        mean_dice,
        std_dice,
        frac_dice_gt0: frac(0.0),
        frac_gt_05: frac(0.5),
        frac_gt_08: frac(0.8),
        mean_volume_ratio: mean_std(&ratios).0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volgrid::VoxelGeometry;

    fn mask(labels: &[u8]) -> LabelMask {
        LabelMask::new([labels.len(), 1, 1], VoxelGeometry::default(), labels.to_vec()).unwrap()
    }

    fn eval(d: f64) -> CaseEvaluation {
        CaseEvaluation {
            case_id: format!("{d}"),
            dice: d,
            volume_ratio: 1.0,
            pred_volume: 1.0,
            ref_volume: 1.0,
        }
    }

    #[test]
    fn dice_examples() {
        let a = mask(&[1, 1, 0, 0]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &mask(&[0, 0, 1, 1])).unwrap(), 0.0);
        // |A| = 4, |B| = 6, |A∩B| = 3.
        let a = mask(&[1, 1, 1, 1, 0, 0, 0]);
        let b = mask(&[0, 1, 1, 1, 1, 1, 1]);
        assert!((dice(&a, &b).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(dice(&mask(&[0, 0]), &mask(&[0, 0])).unwrap(), 1.0);
        assert!(dice(&mask(&[0]), &mask(&[0, 0])).is_err());
    }

    #[test]
    fn volume_ratio_examples() {
        let r = mask(&[1; 50].iter().chain(&[0; 2]).copied().collect::<Vec<_>>());
        let p = mask(&[1; 52]);
        assert_eq!(volume_ratio(&r, &r).unwrap(), 1.0);
        assert!((volume_ratio(&p, &r).unwrap() - 1.04).abs() < 1e-15);
        assert_eq!(volume_ratio(&mask(&[0; 52]), &r).unwrap(), 0.0);
        assert!(matches!(volume_ratio(&r, &mask(&[0; 52])), Err(Error::EmptyRoi)));
    }

    #[test]
    fn review_examples() {
        let pick = |idx: &[usize]| mask(&(0..25).map(|i| u8::from(idx.contains(&i))).collect::<Vec<_>>());
        let reference = pick(&[0, 1, 2, 3, 4]);
        let c0 = pick(&[2, 3, 4, 5, 6]); // 2*3/10 = 0.6
        let c1 = pick(&[4, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23]); // 2*1/20 = 0.1
        assert!((dice(&c1, &reference).unwrap() - 0.1).abs() < 1e-15);
        let out = simulate_review(&[c0.clone(), c1.clone()], &reference, 0.3).unwrap();
        assert!(out.accepted());
        let sel = out.selected_component.unwrap();
        assert_eq!(sel.rank, 0);
        assert!((sel.dice - 0.6).abs() < 1e-15);

        let low0 = pick(&[4, 10, 11]); // 2*1/8 = 0.25
        let out = simulate_review(&[low0, c1], &reference, 0.3).unwrap();
        assert_eq!(out.status, ReviewStatus::Rejected);
        assert_eq!(out.reason, Some(RejectReason::AllBelowThreshold));

        let out = simulate_review(&[], &reference, 0.3).unwrap();
        assert_eq!(out.reason, Some(RejectReason::NoComponents));
    }

    #[test]
    fn review_keeps_exact_threshold_and_breaks_ties_by_rank() {
        // dice = 2*3/(10+10) = 0.3 exactly.
        let r: Vec<u8> = (0..20).map(|i| u8::from(i < 10)).collect();
        let c: Vec<u8> = (0..20).map(|i| u8::from((7..17).contains(&i))).collect();
        let reference = mask(&r);
        let cand = mask(&c);
        assert_eq!(dice(&cand, &reference).unwrap(), 0.3);
        let out = simulate_review(&[cand.clone(), cand], &reference, 0.3).unwrap();
        assert!(out.accepted());
        assert_eq!(out.selected_component.unwrap().rank, 0);
    }

    #[test]
    fn cohort_stats_hand_example() {
        let evals: Vec<_> = [0.0, 0.42, 0.55, 0.86].into_iter().map(eval).collect();
        let r = cohort_stats(&evals).unwrap();
        assert_eq!(r.n_detected, 3);
        assert_eq!(r.frac_dice_gt0, 0.75);
        assert_eq!(r.frac_gt_05, 0.5);
        assert_eq!(r.frac_gt_08, 0.25);
        assert!((r.mean_dice - 0.61).abs() < 1e-12);
        // sqrt(((−0.19)² + (−0.06)² + 0.25²) / 2)
        assert!((r.std_dice - (0.1022f64 / 2.0).sqrt()).abs() < 1e-12);
        assert_eq!(r.table_row(), "0.61 ± 0.23 | 75 % | 50 % | 25 %");
    }

    #[test]
    fn cohort_stats_degenerate() {
        let r = cohort_stats(&[eval(1.0), eval(1.0)]).unwrap();
        assert_eq!((r.mean_dice, r.std_dice), (1.0, 0.0));
        assert_eq!((r.frac_dice_gt0, r.frac_gt_05, r.frac_gt_08), (1.0, 1.0, 1.0));
        assert_eq!(cohort_stats(&[eval(0.7)]).unwrap().std_dice, 0.0);
        assert!(cohort_stats(&[]).is_err());
    }
}
