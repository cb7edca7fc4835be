//! End-to-end wiring: frames → patches → features → FDT-GS → twin classifier
//! → metrics.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdtgs::{self, Partition, ScoreIndex, SearchConfig, SearchResult};
use crate::glcm::{self, FusionWeights, GlcmConfig};
use crate::metrics::{self, Confusion, MetricReport, RocPoint};
use crate::twin::{self, LinearSoftmax, TrainConfig, TwinFeatures, TwinPrediction};
use crate::patching::{self, PatchRecord, Split};
use crate::synth::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub patch_size: usize,
    pub overlap_threshold: f64,
    pub glcm: GlcmConfig,
    pub fusion: FusionWeights,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            patch_size: patching::DEFAULT_PATCH_SIZE,
            overlap_threshold: patching::DEFAULT_OVERLAP_THRESHOLD,
            glcm: GlcmConfig::default(),
            fusion: FusionWeights::default(),
        }
    }
}

/// Decomposes, labels and featurizes every frame. Patch ids are
/// `frame_id * cells_per_frame + row-major index`.
pub fn extract_patches(dataset: &Dataset, cfg: &ExtractConfig) -> Result<Vec<PatchRecord>> {
    let per_frame: Vec<Vec<PatchRecord>> = dataset
        .frames
        .par_iter()
        .map(|frame| {
            let img = &frame.image;
            let cells = (img.width() / cfg.patch_size) * (img.height() / cfg.patch_size);
            let grid = patching::decompose(img, cfg.patch_size, frame.frame_id, frame.frame_id * cells as u64)?;
            let mut labelled = patching::label_patches(&grid, &frame.masks, cfg.overlap_threshold)?;
            for p in labelled.iter_mut() {
                let pixels = patching::patch_pixels(img, p)?;
                let twins = twin::make_twins(&pixels, p.patch_id);
                let plus = glcm::extract(&twins.x_plus, &cfg.glcm)?;
                let minus = glcm::extract(&twins.x_minus, &cfg.glcm)?;
                p.score = Some(glcm::fuse_score(&plus, &cfg.fusion));
                p.features = Some(plus);
                p.twin_features = Some(minus);
            }
            Ok(labelled)
        })
        .collect::<Result<_>>()?;
    Ok(per_frame.into_iter().flatten().collect())
}

pub fn scores_and_labels(patches: &[PatchRecord]) -> Result<(Vec<f64>, Vec<bool>)> {
    let scores = patches
        .iter()
        .map(|p| {
            p.score
                .ok_or_else(|| Error::Parameter(format!("patch {} has no score", p.patch_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((scores, patches.iter().map(|p| p.gt.is_lesion()).collect()))
}

pub fn twin_features(patches: &[PatchRecord]) -> Result<Vec<TwinFeatures>> {
    patches.iter().map(TwinFeatures::of).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub train_ratio: f64,
    pub search: SearchConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train_ratio: patching::DEFAULT_TRAIN_RATIO,
            search: SearchConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub search: SearchResult,
    pub partition: Partition,
    pub model: LinearSoftmax,
    pub predictions: Vec<Prediction>,
    pub confusion: Confusion,
    pub report: MetricReport,
    pub roc: Vec<RocPoint>,
}

/// FDT-GS on the training patches.
pub fn search_train(patches: &[PatchRecord], cfg: &SearchConfig) -> Result<SearchResult> {
    let train: Vec<PatchRecord> = patches.iter().filter(|p| p.split == Split::Train).cloned().collect();
    let (scores, gt) = scores_and_labels(&train)?;
    fdtgs::search(&ScoreIndex::new(&scores, &gt, cfg.lambda)?, cfg)
}

/// Ids with the twin features of the patches they name.
pub type TwinSet = Vec<(u64, TwinFeatures)>;

/// Partition of the training patches at `(low, high)` with the twin features of
/// the reliable positives and negatives.
pub fn reliable_sets(patches: &[PatchRecord], low: f64, high: f64) -> Result<(Partition, TwinSet, TwinSet)> {
    let train: Vec<&PatchRecord> = patches.iter().filter(|p| p.split == Split::Train).collect();
    let items = train
        .iter()
        .map(|p| {
            p.score
                .map(|s| (p.patch_id, s))
                .ok_or_else(|| Error::Parameter(format!("patch {} has no score", p.patch_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let partition = fdtgs::partition(&items, low, high)?;
    let by_id: HashMap<u64, &PatchRecord> = train.iter().map(|p| (p.patch_id, *p)).collect();
    let collect = |ids: &[u64]| -> Result<Vec<(u64, TwinFeatures)>> {
        ids.iter().map(|id| Ok((*id, TwinFeatures::of(by_id[id])?))).collect()
    };
    let (rp_ids, ns_ids) = fdtgs::select_rp_ns(&partition);
    let rp = collect(&rp_ids)?;
    let ns = collect(&ns_ids)?;
    Ok((partition, rp, ns))
}

/// Twin model fitted on the reliable sets.
pub fn fit_model(rp: &[(u64, TwinFeatures)], ns: &[(u64, TwinFeatures)], train: &TrainConfig, seed: u64) -> Result<LinearSoftmax> {
    let rp: Vec<TwinFeatures> = rp.iter().map(|(_, x)| *x).collect();
    let ns: Vec<TwinFeatures> = ns.iter().map(|(_, x)| *x).collect();
    let mut model = LinearSoftmax::init(train.seed ^ seed);
    twin::train_classifier(&mut model, &rp, &ns, train)?;
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub patch_id: u64,
    pub frame_id: u64,
    pub twin: TwinPrediction,
    pub label: bool,
}

/// Predictions on the test split, in patch order.
pub fn predict_test(model: &LinearSoftmax, patches: &[PatchRecord]) -> Result<Vec<Prediction>> {
    patches
        .par_iter()
        .filter(|p| p.split == Split::Test)
        .map(|p| {
            Ok(Prediction {
                patch_id: p.patch_id,
                frame_id: p.frame_id,
                twin: twin::predict_twin(model, &TwinFeatures::of(p)?),
                label: p.gt.is_lesion(),
            })
        })
        .collect()
}

/// Confusion, report (with AUC) and ROC of `(score, predicted, label)` triples.
pub fn evaluate(rows: &[(f64, bool, bool)]) -> Result<(Confusion, MetricReport, Vec<RocPoint>)> {
    let preds: Vec<bool> = rows.iter().map(|r| r.1).collect();
    let truth: Vec<bool> = rows.iter().map(|r| r.2).collect();
    let confusion = metrics::from_predictions(&preds, &truth)?;
    let mut report = metrics::report(&confusion)?;
    let ranking: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (roc, auc) = metrics::roc_auc(&ranking, &truth)?;
    report.auc = Some(auc);
    Ok((confusion, report, roc))
}

/// Splits frames, runs FDT-GS on the training patches, fits the twin model on
/// the reliable batches and evaluates on the held-out frames.
pub fn run(patches: &mut [PatchRecord], cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    patching::split_dataset(patches, cfg.train_ratio, cfg.seed)?;
    let search = search_train(patches, &cfg.search)?;
    let (partition, rp, ns) = reliable_sets(patches, search.thresholds.low, search.thresholds.high)?;
    let model = fit_model(&rp, &ns, &cfg.train, cfg.seed)?;
    let predictions = predict_test(&model, patches)?;
    let rows: Vec<(f64, bool, bool)> = predictions
        .iter()
        .map(|p| (p.twin.positive_score(), p.twin.fused.is_positive(), p.label))
        .collect();
    let (confusion, report, roc) = evaluate(&rows)?;
    Ok(PipelineOutcome {
        search,
        partition,
        model,
        predictions,
        confusion,
        report,
        roc,
    })
}
