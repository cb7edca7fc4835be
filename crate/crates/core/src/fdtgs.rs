//! Fast double-threshold grid search (FDT-GS).
//!
//! Patch scores are split by a `(low, high)` pair into reliable negatives
//! (`score <= low`), reliable positives (`score >= high`) and an uncertain
//! band in between. `score <= low` is tested first, so when `low == high`
//! the tie goes to the negatives.
//!
//! The search maximizes `F1 - λ·|noise|/|all|` where F1 scores the labeling
//! rp → lesion, ns → background against ground truth (noise excluded). Each
//! iteration evaluates a `grid × grid` lattice over the current brackets,
//! keeps the best pair seen so far, recentres both brackets on it and
//! multiplies their widths by `shrink`.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_LAMBDA: f64 = 0.05;
/// Objective shift above which a single patch counts as significant.
pub const SIGNIFICANCE_SHIFT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub low: f64,
    pub high: f64,
}

impl Thresholds {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) {
            return Err(Error::Parameter(format!(
                "thresholds must lie in [0, 1], got ({low}, {high})"
            )));
        }
        if low > high {
            return Err(Error::Ordering { low, high });
        }
        Ok(Self { low, high })
    }
}

/// The four adaptive parameters: `(d1, d2)` act on the positive-oriented
/// score for the PL stream, `(d3, d4)` on `1 - score` for the NL stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

impl ThresholdSet {
    pub fn pl(&self) -> Thresholds {
        Thresholds {
            low: self.d1,
            high: self.d2,
        }
    }

    pub fn nl(&self) -> Thresholds {
        Thresholds {
            low: self.d3,
            high: self.d4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Partition {
    pub rp: Vec<u64>,
    pub ns: Vec<u64>,
    pub noise: Vec<u64>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.rp.len() + self.ns.len() + self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Applies `(low, high)` to `(id, score)` pairs.
pub fn partition(items: &[(u64, f64)], low: f64, high: f64) -> Result<Partition> {
    if low > high {
        return Err(Error::Ordering { low, high });
    }
    let mut out = Partition::default();
    for &(id, s) in items {
        if s <= low {
            out.ns.push(id);
        } else if s >= high {
            out.rp.push(id);
        } else {
            out.noise.push(id);
        }
    }
    Ok(out)
}

/// F1 with zero as the value when `2TP + FP + FN = 0`.
fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let den = 2 * tp + fp + fn_;
    if den == 0 {
        0.0
    } else {
        2.0 * tp as f64 / den as f64
    }
}

/// `F1 - λ·|noise|/|all|` for a partition. `is_lesion` maps a patch id to its
/// ground truth.
pub fn objective(part: &Partition, is_lesion: impl Fn(u64) -> bool, lambda: f64) -> Result<f64> {
    if part.rp.is_empty() && part.ns.is_empty() {
        return Err(Error::UndefinedObjective);
    }
    let tp = part.rp.iter().filter(|&&id| is_lesion(id)).count();
    let fp = part.rp.len() - tp;
    let fn_ = part.ns.iter().filter(|&&id| is_lesion(id)).count();
    let penalty = lambda * part.noise.len() as f64 / part.len() as f64;
    Ok(f1(tp, fp, fn_) - penalty)
}

/// Sorted scores with cumulative lesion counts, for O(log n) objective
/// evaluation at arbitrary thresholds.
#[derive(Debug, Clone)]
pub struct ScoreIndex {
    sorted: Vec<f64>,
    /// `lesions_before[k]` = lesion count among `sorted[..k]`.
    lesions_before: Vec<usize>,
    lambda: f64,
}

impl ScoreIndex {
    pub fn new(scores: &[f64], gt: &[bool], lambda: f64) -> Result<Self> {
        if scores.len() != gt.len() {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: gt.len(),
            });
        }
        if scores.is_empty() {
            return Err(Error::Parameter("empty patch set".into()));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Parameter(format!("non-finite score {s}")));
        }
        let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(gt.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut lesions_before = Vec::with_capacity(pairs.len() + 1);
        lesions_before.push(0);
        for &(_, l) in &pairs {
            lesions_before.push(lesions_before.last().unwrap() + l as usize);
        }
        Ok(Self {
            sorted: pairs.into_iter().map(|(s, _)| s).collect(),
            lesions_before,
            lambda,
        })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn distinct_scores(&self) -> usize {
        let mut n = 0;
        let mut prev = None;
        for &s in &self.sorted {
            if prev != Some(s) {
                n += 1;
                prev = Some(s);
            }
        }
        n
    }

    /// Counts `(rp, rp_lesions, ns, ns_lesions)`.
    fn counts(&self, low: f64, high: f64) -> (usize, usize, usize, usize) {
        let n = self.sorted.len();
        let ns_end = self.sorted.partition_point(|&s| s <= low);
        let rp_start = self.sorted.partition_point(|&s| s < high).max(ns_end);
        let total_lesions = self.lesions_before[n];
        let ns_l = self.lesions_before[ns_end];
        let rp_l = total_lesions - self.lesions_before[rp_start];
        (n - rp_start, rp_l, ns_end, ns_l)
    }

    pub fn objective(&self, low: f64, high: f64) -> Result<f64> {
        if low > high {
            return Err(Error::Ordering { low, high });
        }
        let (rp, rp_l, ns, ns_l) = self.counts(low, high);
        if rp + ns == 0 {
            return Err(Error::UndefinedObjective);
        }
        let noise = self.sorted.len() - rp - ns;
        let value = f1(rp_l, rp - rp_l, ns_l);
        Ok(value - self.lambda * noise as f64 / self.sorted.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub max_iter: usize,
    pub grid: usize,
    pub shrink: f64,
    /// Search stops once both brackets are narrower than this.
    pub tol: f64,
    pub lambda: f64,
    pub low_range: (f64, f64),
    pub high_range: (f64, f64),
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            grid: 11,
            shrink: 0.5,
            tol: 1e-4,
            lambda: DEFAULT_LAMBDA,
            low_range: (0.0, 1.0),
            high_range: (0.0, 1.0),
        }
    }
}

impl SearchConfig {
    /// Initial brackets `low < 0.5`, `high > 0.8`.
    pub fn tight_high() -> Self {
        Self {
            low_range: (0.0, 0.5),
            high_range: (0.8, 1.0),
            ..Self::default()
        }
    }

    /// Initial brackets `low < 0.5`, `high > 0.5`.
    pub fn split_half() -> Self {
        Self {
            low_range: (0.0, 0.5),
            high_range: (0.5, 1.0),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok_range = |r: (f64, f64)| (0.0..=1.0).contains(&r.0) && (0.0..=1.0).contains(&r.1) && r.0 <= r.1;
        if self.grid < 2 {
            return Err(Error::Parameter("grid must be at least 2".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Parameter(format!(
                "shrink must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if !(self.tol >= 0.0) || !ok_range(self.low_range) || !ok_range(self.high_range) {
            return Err(Error::Parameter("invalid tolerance or search range".into()));
        }
        if self.low_range.0 > self.high_range.1 {
            return Err(Error::Parameter("no pair with low <= high exists in the ranges".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub iteration: usize,
    pub low_bracket: (f64, f64),
    pub high_bracket: (f64, f64),
    pub incumbent: Thresholds,
    pub incumbent_objective: f64,
    pub tolerance: f64,
}

/// One row of the search trace: incumbent objective and thresholds after an
/// iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub peak_value: f64,
    pub low_retrieval: f64,
    pub high_retrieval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub thresholds: Thresholds,
    pub objective: f64,
    pub state: SearchState,
    pub trace: Vec<TraceRow>,
}

fn lattice(range: (f64, f64), n: usize) -> Vec<f64> {
    let (a, b) = range;
    (0..n)
        .map(|k| {
            if k + 1 == n {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Re-centres a bracket of width `width` on `centre`, shifted to stay within
/// `bounds`.
fn recentre(centre: f64, width: f64, bounds: (f64, f64)) -> (f64, f64) {
    let width = width.min(bounds.1 - bounds.0);
    let mut lo = centre - width / 2.0;
    let mut hi = centre + width / 2.0;
    if lo < bounds.0 {
        hi += bounds.0 - lo;
        lo = bounds.0;
    }
    if hi > bounds.1 {
        lo -= hi - bounds.1;
        hi = bounds.1;
    }
    (lo.max(bounds.0), hi.min(bounds.1))
}

/// Coarse-to-fine search over `(low, high)`.
pub fn search(index: &ScoreIndex, cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.validate()?;
    if index.distinct_scores() < 2 {
        return Err(Error::Parameter(
            "search needs at least two distinct scores".into(),
        ));
    }
    let mut low_b = cfg.low_range;
    let mut high_b = cfg.high_range;
    let mut best: Option<(f64, Thresholds)> = None;
    let mut trace = Vec::new();
    let mut iteration = 0;

    while iteration < cfg.max_iter {
        iteration += 1;
        let lows = lattice(low_b, cfg.grid);
        let highs = lattice(high_b, cfg.grid);
        let pairs: Vec<(f64, f64)> = lows
            .iter()
            .flat_map(|&l| highs.iter().filter(move |&&h| l <= h).map(move |&h| (l, h)))
            .collect();
        let values: Vec<Option<f64>> = pairs
            .par_iter()
            .map(|&(l, h)| index.objective(l, h).ok())
            .collect();
        for (&(l, h), v) in pairs.iter().zip(values) {
            let Some(v) = v else { continue };
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, Thresholds { low: l, high: h }));
            }
        }
        let (value, inc) = best.ok_or(Error::UndefinedObjective)?;
        trace.push(TraceRow {
            iteration,
            peak_value: value,
            low_retrieval: inc.low,
            high_retrieval: inc.high,
        });
        let lw = (low_b.1 - low_b.0) * cfg.shrink;
        let hw = (high_b.1 - high_b.0) * cfg.shrink;
        low_b = recentre(inc.low, lw, cfg.low_range);
        high_b = recentre(inc.high, hw, cfg.high_range);
        if lw.max(hw) <= cfg.tol {
            break;
        }
    }

    let (objective, thresholds) = best.ok_or(Error::UndefinedObjective)?;
    Ok(SearchResult {
        thresholds,
        objective,
        state: SearchState {
            iteration,
            low_bracket: low_b,
            high_bracket: high_b,
            incumbent: thresholds,
            incumbent_objective: objective,
            tolerance: cfg.tol,
        },
        trace,
    })
}

/// Searches both streams: PL on `score`, NL on `1 - score` with the labels
/// inverted.
pub fn search_twin(
    scores: &[f64],
    gt: &[bool],
    cfg: &SearchConfig,
) -> Result<(ThresholdSet, SearchResult, SearchResult)> {
    let pl = search(&ScoreIndex::new(scores, gt, cfg.lambda)?, cfg)?;
    let inv_scores: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
    let inv_gt: Vec<bool> = gt.iter().map(|g| !g).collect();
    let nl = search(&ScoreIndex::new(&inv_scores, &inv_gt, cfg.lambda)?, cfg)?;
    let set = ThresholdSet {
        d1: pl.thresholds.low,
        d2: pl.thresholds.high,
        d3: nl.thresholds.low,
        d4: nl.thresholds.high,
    };
    Ok((set, pl, nl))
}

/// Batches for fine-tuning: `(rp, ns)`. The noise band stays in the partition
/// for the agent.
pub fn select_rp_ns(part: &Partition) -> (Vec<u64>, Vec<u64>) {
    (part.rp.clone(), part.ns.clone())
}

/// Patches in rp or ns whose removal would move the objective by more than
/// [`SIGNIFICANCE_SHIFT`].
pub fn significant_patches(
    part: &Partition,
    is_lesion: impl Fn(u64) -> bool + Copy,
    lambda: f64,
) -> Result<Vec<u64>> {
    let base = objective(part, is_lesion, lambda)?;
    let tp = part.rp.iter().filter(|&&id| is_lesion(id)).count();
    let fp = part.rp.len() - tp;
    let fn_ = part.ns.iter().filter(|&&id| is_lesion(id)).count();
    let n = part.len() as f64;
    let noise = part.noise.len() as f64;
    let mut out = Vec::new();
    let mut check = |id: u64, tp: usize, fp: usize, fn_: usize| {
        let rest = n - 1.0;
        if tp + fp + fn_ == 0 && part.rp.len() + part.ns.len() == 1 {
            return;
        }
        let v = f1(tp, fp, fn_) - lambda * noise / rest.max(1.0);
        if (v - base).abs() > SIGNIFICANCE_SHIFT {
            out.push(id);
        }
    };
    for &id in &part.rp {
        if is_lesion(id) {
            check(id, tp - 1, fp, fn_);
        } else {
            check(id, tp, fp - 1, fn_);
        }
    }
    for &id in &part.ns {
        if is_lesion(id) {
            check(id, tp, fp, fn_ - 1);
        } else {
            check(id, tp, fp, fn_);
        }
    }
    Ok(out)
}

/// Scores plus ground truth for a synthetic search fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFixture {
    pub scores: Vec<f64>,
    pub gt: Vec<bool>,
}

/// Background `N(0.2, 0.02)` and lesions `N(0.9, 0.02)`, clamped to `[0, 1]`.
pub fn two_clusters(n_background: usize, n_lesion: usize, seed: u64) -> ScoreFixture {
    let mut r = rng::seeded(seed, rng::streams::FIXTURE);
    let mut draw = |mu: f64, n: usize| -> Vec<f64> {
        let d = Normal::new(mu, 0.02).expect("valid normal");
        (0..n).map(|_| d.sample(&mut r).clamp(0.0, 1.0)).collect()
    };
    let mut scores = draw(0.2, n_background);
    scores.extend(draw(0.9, n_lesion));
    let mut gt = vec![false; n_background];
    gt.resize(n_background + n_lesion, true);
    ScoreFixture { scores, gt }
}

/// Two clusters joined by an ambiguous bridge: 600 background scores uniform
/// on `[0.05, low_edge)`, 150 bridge scores uniform on `[low_edge, high_edge)`
/// that are lesions with probability one half, and 250 lesion scores uniform
/// on `[high_edge, 1]`. The objective's optimum sits next to the two edges.
pub fn bridged_clusters(low_edge: f64, high_edge: f64, seed: u64) -> Result<ScoreFixture> {
    if !(0.05 < low_edge && low_edge < high_edge && high_edge < 1.0) {
        return Err(Error::Parameter(format!(
            "bridge edges must satisfy 0.05 < low < high < 1, got ({low_edge}, {high_edge})"
        )));
    }
    let mut r = rng::seeded(seed, rng::streams::FIXTURE);
    let mut scores = Vec::with_capacity(1000);
    let mut gt = Vec::with_capacity(1000);
    for _ in 0..600 {
        scores.push(r.random_range(0.05..low_edge));
        gt.push(false);
    }
    for _ in 0..150 {
        scores.push(r.random_range(low_edge..high_edge));
        gt.push(r.random_bool(0.5));
    }
    for _ in 0..250 {
        scores.push(r.random_range(high_edge..=1.0));
        gt.push(true);
    }
    Ok(ScoreFixture { scores, gt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn items(scores: &[f64]) -> Vec<(u64, f64)> {
        scores.iter().enumerate().map(|(i, &s)| (i as u64, s)).collect()
    }

    #[test]
    fn degenerate_thresholds() {
        let it = items(&[0.0, 0.3, 1.0]);
        let p = partition(&it, 0.0, 0.0).unwrap();
        // score 0 hits ns first, everything else is >= 0
        assert_eq!(p.ns, vec![0]);
        assert_eq!(p.rp, vec![1, 2]);
        let p = partition(&it, 0.0, 1.0).unwrap();
        assert_eq!((p.ns.clone(), p.noise.clone(), p.rp.clone()), (vec![0], vec![1], vec![2]));
    }

    #[test]
    fn direct_application() {
        let p = partition(&items(&[0.1, 0.5, 0.9]), 0.3, 0.8).unwrap();
        assert_eq!((p.ns, p.noise, p.rp), (vec![0], vec![1], vec![2]));
    }

    #[test]
    fn ordering_error() {
        assert!(matches!(
            partition(&items(&[0.5]), 0.6, 0.4),
            Err(Error::Ordering { .. })
        ));
    }

    #[test]
    fn objective_cases() {
        let gt = |id: u64| id >= 2;
        let perfect = Partition {
            rp: vec![2, 3],
            ns: vec![0, 1],
            noise: vec![],
        };
        assert_eq!(objective(&perfect, gt, 0.05).unwrap(), 1.0);
        let inverted = Partition {
            rp: vec![0, 1],
            ns: vec![2, 3],
            noise: vec![],
        };
        // tp = 0, fp = 2, fn = 2 -> F1 0, no noise
        assert_eq!(objective(&inverted, gt, 0.05).unwrap(), 0.0);
        let inverted_noisy = Partition {
            rp: vec![0],
            ns: vec![2],
            noise: vec![1, 3],
        };
        assert!((objective(&inverted_noisy, gt, 0.05).unwrap() + 0.025).abs() < 1e-15);
        let all_noise = Partition {
            rp: vec![],
            ns: vec![],
            noise: vec![0, 1],
        };
        assert!(matches!(
            objective(&all_noise, gt, 0.05),
            Err(Error::UndefinedObjective)
        ));
    }

    #[test]
    fn select_passes_batches_through() {
        let p = Partition {
            rp: vec![1],
            ns: vec![2],
            noise: vec![3],
        };
        assert_eq!(select_rp_ns(&p), (vec![1], vec![2]));
        let empty_rp = Partition {
            rp: vec![],
            ns: vec![2],
            noise: vec![],
        };
        assert!(select_rp_ns(&empty_rp).0.is_empty());
    }

    #[test]
    fn index_matches_partition_objective() {
        let scores = [0.05, 0.2, 0.2, 0.45, 0.5, 0.61, 0.7, 0.95, 1.0];
        let gt = [false, false, true, false, true, false, true, true, true];
        let idx = ScoreIndex::new(&scores, &gt, 0.05).unwrap();
        let it = items(&scores);
        for &(l, h) in &[(0.2, 0.2), (0.0, 1.0), (0.3, 0.6), (0.5, 0.7), (0.2, 0.61), (1.0, 1.0)] {
            let p = partition(&it, l, h).unwrap();
            let naive = objective(&p, |id| gt[id as usize], 0.05).unwrap();
            assert!((idx.objective(l, h).unwrap() - naive).abs() < 1e-15, "({l},{h})");
        }
    }

    #[test]
    fn search_rejects_constant_scores() {
        let idx = ScoreIndex::new(&[0.4, 0.4], &[true, false], 0.05).unwrap();
        assert!(search(&idx, &SearchConfig::default()).is_err());
        assert!(ScoreIndex::new(&[], &[], 0.05).is_err());
    }

    #[test]
    fn brackets_halve_each_iteration() {
        let scores: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let gt: Vec<bool> = scores.iter().map(|&s| s > 0.6).collect();
        let idx = ScoreIndex::new(&scores, &gt, 0.05).unwrap();
        for k in 1..8 {
            let cfg = SearchConfig {
                max_iter: k,
                tol: 0.0,
                ..SearchConfig::default()
            };
            let r = search(&idx, &cfg).unwrap();
            let w = r.state.low_bracket.1 - r.state.low_bracket.0;
            assert!((w - 0.5f64.powi(k as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_is_monotone() {
        let scores: Vec<f64> = (0..500).map(|i| ((i * 37) % 500) as f64 / 500.0).collect();
        let gt: Vec<bool> = (0..500).map(|i| (i * 37) % 500 > 300 || i % 17 == 0).collect();
        let idx = ScoreIndex::new(&scores, &gt, 0.05).unwrap();
        let r = search(&idx, &SearchConfig::default()).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1].peak_value >= w[0].peak_value));
        assert_eq!(r.trace.last().unwrap().peak_value, r.objective);
        assert!(r.state.iteration <= 50);
    }

    #[test]
    fn twin_search_mirrors() {
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let gt: Vec<bool> = scores.iter().map(|&s| s > 0.5).collect();
        let (set, pl, nl) = search_twin(&scores, &gt, &SearchConfig::default()).unwrap();
        assert!(set.d1 <= set.d2 && set.d3 <= set.d4);
        assert_eq!(pl.objective, 1.0);
        assert_eq!(nl.objective, 1.0);
    }

    #[test]
    fn significance_on_tiny_sets() {
        let gt = |id: u64| id == 1;
        let p = Partition {
            rp: vec![1, 2],
            ns: vec![3, 4, 5],
            noise: vec![],
        };
        // dropping the lone false positive lifts F1 from 2/3 to 1
        let sig = significant_patches(&p, gt, 0.05).unwrap();
        assert!(sig.contains(&2));
        assert!(sig.contains(&1));
        assert!(!sig.contains(&3));
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_cover(scores in proptest::collection::vec(0.0f64..=1.0, 1..60),
                                       a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (low, high) = if a <= b { (a, b) } else { (b, a) };
            let it = items(&scores);
            let p = partition(&it, low, high).unwrap();
            prop_assert_eq!(p.len(), scores.len());
            let all: HashSet<u64> = p.rp.iter().chain(&p.ns).chain(&p.noise).copied().collect();
            prop_assert_eq!(all.len(), scores.len());
            for &id in &p.rp { prop_assert!(scores[id as usize] >= high); }
            for &id in &p.ns { prop_assert!(scores[id as usize] <= low); }
        }

        #[test]
        fn index_agrees_with_naive(scores in proptest::collection::vec(0.0f64..=1.0, 1..60),
                                   flips in proptest::collection::vec(any::<bool>(), 60),
                                   a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (low, high) = if a <= b { (a, b) } else { (b, a) };
            let gt: Vec<bool> = flips[..scores.len()].to_vec();
            let idx = ScoreIndex::new(&scores, &gt, 0.05).unwrap();
            let p = partition(&items(&scores), low, high).unwrap();
            let naive = objective(&p, |id| gt[id as usize], 0.05);
            match (idx.objective(low, high), naive) {
                (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }
    }
}
