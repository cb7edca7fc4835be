use octx::metrics::*;
use proptest::prelude::*;

fn confusion() -> impl Strategy<Value = Confusion> {
    (0u64..500, 0u64..500, 0u64..500, 0u64..500)
        .prop_filter("non-empty", |(a, b, c, d)| a + b + c + d > 0)
        .prop_map(|(tp, fp, tn, fn_)| Confusion { tp, fp, tn, fn_ })
}

fn labelled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((0u8..20, any::<bool>()), 2..80)
        .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
        .prop_map(|v| v.into_iter().map(|(s, g)| (s as f64 / 19.0, g)).unzip())
}

proptest! {
    #[test]
    fn ranges_and_identities(c in confusion()) {
        let r = report(&c).unwrap();
        for v in [r.accuracy, r.sensitivity, r.specificity, r.precision, r.f_measure, r.dice, r.jaccard] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((-1.0..=1.0).contains(&r.mcc));
        prop_assert_eq!(r.dice, r.f_measure);
        prop_assert_eq!(r.iou, r.jaccard);
        // Jaccard from raw counts when defined
        let den = (c.tp + c.fp + c.fn_) as f64;
        if den > 0.0 {
            prop_assert!((r.jaccard - c.tp as f64 / den).abs() < 1e-12);
        }
        if c.tp + c.fn_ > 0 {
            prop_assert!((r.sensitivity + r.fnr - 1.0).abs() < 1e-12);
        }
        if c.tn + c.fp > 0 {
            prop_assert!((r.specificity + r.fpr - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn swapping_classes_mirrors_report(c in confusion()) {
        let r = report(&c).unwrap();
        let s = report(&Confusion { tp: c.tn, fp: c.fn_, tn: c.tp, fn_: c.fp }).unwrap();
        prop_assert_eq!(r.accuracy, s.accuracy);
        prop_assert_eq!(r.sensitivity, s.specificity);
        prop_assert!((r.mcc - s.mcc).abs() < 1e-12);
    }

    #[test]
    fn op_pools_and_pc_averages(cs in prop::collection::vec(confusion(), 1..5)) {
        let (pc, op) = pc_op_aggregate(&cs).unwrap();
        let pooled = cs.iter().fold(Confusion::default(), |a, c| a.merge(c));
        prop_assert_eq!(op, report(&pooled).unwrap());
        let mean = cs.iter().map(|c| report(c).unwrap().accuracy).sum::<f64>() / cs.len() as f64;
        prop_assert!((pc.accuracy - mean).abs() < 1e-12);
        prop_assert_eq!(pc.aggregation, Aggregation::PC);
    }

    #[test]
    fn auc_flips_with_scores((scores, gt) in labelled_scores()) {
        let (curve, auc) = roc_auc(&scores, &gt).unwrap();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let (_, flipped) = roc_auc(&neg, &gt).unwrap();
        prop_assert!((auc + flipped - 1.0).abs() < 1e-12);
        prop_assert!(curve.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr));
        let last = curve.last().unwrap();
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn auc_ignores_monotone_rescaling((scores, gt) in labelled_scores()) {
        let (_, a) = roc_auc(&scores, &gt).unwrap();
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        let (_, b) = roc_auc(&warped, &gt).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn index_caps_at_accuracy(acc in 0.0f64..=1.0, fps in 0.1f64..200.0, reference in 0.1f64..200.0) {
        let i = speed_performance_index(acc, fps, reference).unwrap();
        prop_assert!(i <= acc + 1e-15);
        if fps >= reference {
            prop_assert_eq!(i, acc);
        }
    }
}

#[test]
fn degenerate_inputs() {
    assert!(report(&Confusion::default()).is_err());
    assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    assert!(from_predictions(&[true], &[true, false]).is_err());
    assert!(speed_performance_index(1.0, 0.0, 10.0).is_err());
    let r = report(&Confusion { tp: 0, fp: 0, tn: 5, fn_: 0 }).unwrap();
    assert_eq!((r.precision, r.f_measure, r.mcc), (0.0, 0.0, 0.0));
}
