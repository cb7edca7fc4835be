//! Confusion-matrix statistics, PC/OP aggregation, ROC/AUC and the
//! speed-performance index.
//!
//! Undefined ratios (zero denominators) are reported as 0, and MCC is 0 when
//! any marginal of the confusion matrix is empty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(&self, o: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Counts outcomes; `true` means positive (lesion).
pub fn from_predictions(preds: &[bool], gt: &[bool]) -> Result<Confusion> {
    if preds.len() != gt.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: gt.len(),
        });
    }
    let mut c = Confusion::default();
    for (&p, &g) in preds.iter().zip(gt) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    /// Per-class macro mean.
    PC,
    /// Pooled confusion ("overall pixel").
    OP,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f_measure: f64,
    pub mcc: f64,
    pub dice: f64,
    pub jaccard: f64,
    pub iou: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub auc: Option<f64>,
    pub aggregation: Aggregation,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn report(c: &Confusion) -> Result<MetricReport> {
    if c.total() == 0 {
        return Err(Error::EmptyConfusion);
    }
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let accuracy = (tp + tn) / (tp + fp + tn + fn_);
    let sensitivity = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    let precision = ratio(tp, tp + fp);
    let f_measure = ratio(2.0 * tp, 2.0 * tp + fp + fn_);
    let marg = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let mcc = if marg > 0.0 {
        (tp * tn - fp * fn_) / marg.sqrt()
    } else {
        0.0
    };
    let dice = f_measure;
    let jaccard = dice / (2.0 - dice);
    Ok(MetricReport {
        accuracy,
        sensitivity,
        specificity,
        precision,
        f_measure,
        mcc,
        dice,
        jaccard,
        iou: jaccard,
        fnr: 1.0 - sensitivity,
        fpr: 1.0 - specificity,
        auc: None,
        aggregation: Aggregation::OP,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve over the sorted unique score thresholds plus the trapezoidal AUC.
/// Tied scores move the curve diagonally, which equals the rank-averaged
/// Mann–Whitney statistic.
pub fn roc_auc(scores: &[f64], gt: &[bool]) -> Result<(Vec<RocPoint>, f64)> {
    if scores.len() != gt.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: gt.len(),
        });
    }
    let pos = gt.iter().filter(|&&g| g).count();
    let neg = gt.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if gt[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        auc += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok((points, auc / (pos as f64 * neg as f64)))
}

/// PC: unweighted mean of per-class values. OP: metrics of summed counts.
pub fn pc_op_aggregate(per_class: &[Confusion]) -> Result<(MetricReport, MetricReport)> {
    if per_class.is_empty() {
        return Err(Error::Parameter("at least one class is required".into()));
    }
    let reports = per_class.iter().map(report).collect::<Result<Vec<_>>>()?;
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let pc = MetricReport {
        accuracy: mean(|r| r.accuracy),
        sensitivity: mean(|r| r.sensitivity),
        specificity: mean(|r| r.specificity),
        precision: mean(|r| r.precision),
        f_measure: mean(|r| r.f_measure),
        mcc: mean(|r| r.mcc),
        dice: mean(|r| r.dice),
        jaccard: mean(|r| r.jaccard),
        iou: mean(|r| r.iou),
        fnr: mean(|r| r.fnr),
        fpr: mean(|r| r.fpr),
        auc: None,
        aggregation: Aggregation::PC,
    };
    let pooled = per_class
        .iter()
        .fold(Confusion::default(), |acc, c| acc.merge(c));
    let op = report(&pooled)?;
    Ok((pc, op))
}

/// `accuracy · min(1, fps / reference_fps)`.
pub fn speed_performance_index(accuracy: f64, fps: f64, reference_fps: f64) -> Result<f64> {
    if !(fps > 0.0) || !(reference_fps > 0.0) {
        return Err(Error::Parameter(format!(
            "frame rates must be positive, got fps {fps}, reference {reference_fps}"
        )));
    }
    Ok(accuracy * (fps / reference_fps).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(tp: u64, fp: u64, tn: u64, fn_: u64) -> Confusion {
        Confusion { tp, fp, tn, fn_ }
    }

    #[test]
    fn counting() {
        let conf = from_predictions(&[true, false, true, false], &[true, false, false, false]).unwrap();
        assert_eq!(conf, c(1, 1, 2, 0));
        let all = from_predictions(&[true, false], &[true, false]).unwrap();
        assert_eq!((all.fp, all.fn_), (0, 0));
        let inv = from_predictions(&[false, true], &[true, false]).unwrap();
        assert_eq!((inv.tp, inv.tn), (0, 0));
        assert!(from_predictions(&[true], &[]).is_err());
    }

    #[test]
    fn standard_report() {
        let r = report(&c(9, 1, 89, 1)).unwrap();
        assert!((r.accuracy - 0.98).abs() < 1e-12);
        assert!((r.precision - 0.9).abs() < 1e-12);
        assert!((r.sensitivity - 0.9).abs() < 1e-12);
        assert!((r.f_measure - 0.9).abs() < 1e-12);
        assert!((r.dice - 0.9).abs() < 1e-12);
    }

    #[test]
    fn conventions() {
        let r = report(&c(0, 0, 10, 0)).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.precision, 0.0);
        assert_eq!(r.mcc, 0.0);
        assert!(matches!(report(&c(0, 0, 0, 0)), Err(Error::EmptyConfusion)));
    }

    #[test]
    fn auc_cases() {
        let (_, a) = roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap();
        assert_eq!(a, 1.0);
        let (_, a) = roc_auc(&[0.5, 0.5], &[true, false]).unwrap();
        assert_eq!(a, 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedAuc)));
    }

    #[test]
    fn roc_curve_ends_at_one() {
        let (pts, _) = roc_auc(&[0.3, 0.1, 0.7, 0.7, 0.2], &[true, false, true, false, false]).unwrap();
        let last = pts.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert!(pts.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));
    }

    #[test]
    fn aggregation() {
        let a = c(5, 2, 20, 1);
        let (pc, op) = pc_op_aggregate(&[a]).unwrap();
        assert_eq!(pc.f_measure, op.f_measure);
        let (pc, op) = pc_op_aggregate(&[a, a]).unwrap();
        assert!((pc.accuracy - op.accuracy).abs() < 1e-15);
        assert!((pc.f_measure - op.f_measure).abs() < 1e-15);
        // a tiny, badly handled class next to a large, well handled one
        let big = c(900, 10, 80, 10);
        let small = c(1, 5, 3, 4);
        let (pc, op) = pc_op_aggregate(&[big, small]).unwrap();
        let rb = report(&big).unwrap();
        let rs = report(&small).unwrap();
        assert!((pc.sensitivity - (rb.sensitivity + rs.sensitivity) / 2.0).abs() < 1e-15);
        assert!((op.sensitivity - 901.0 / 915.0).abs() < 1e-15);
        assert!((op.sensitivity - rb.sensitivity).abs() < (pc.sensitivity - rb.sensitivity).abs());
    }

    #[test]
    fn speed_index() {
        assert_eq!(speed_performance_index(1.0, 30.0, 30.0).unwrap(), 1.0);
        assert_eq!(speed_performance_index(0.8, 60.0, 30.0).unwrap(), 0.8);
        assert!((speed_performance_index(0.9, 15.0, 30.0).unwrap() - 0.45).abs() < 1e-15);
        assert!(speed_performance_index(0.9, 0.0, 30.0).is_err());
    }
}
