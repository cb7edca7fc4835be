//! Twin-cross classification.
//!
//! Every patch `x` is seen twice: as `x+` (unchanged) and as `x-` (intensity
//! complement). A four-class model is trained on the compound labels
//! `{P+, P-, N+, N-}` and its two predictions are fused into one binary
//! decision by [`fuse`]. Four one-vs-rest twin models, one per lesion class,
//! give per-class decisions and posteriors.

mod classifier;
mod fusion;

use serde::{Deserialize, Serialize};

pub use classifier::{softmax, LinearSoftmax, PatchClassifier, Standardizer, TrainConfig, CLASSES};
pub use fusion::{argmax, fuse, Fused};

use crate::error::{Error, Result};
use crate::glcm::FeatureVector;
use crate::image::GrayImage;
use crate::patching::{LesionClass, PatchRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    P,
    N,
}

impl Decision {
    pub fn from_lesion(lesion: bool) -> Self {
        if lesion {
            Decision::P
        } else {
            Decision::N
        }
    }

    pub fn is_positive(self) -> bool {
        self == Decision::P
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TwinSign {
    Plus,
    Minus,
}

/// Index order `P+, P-, N+, N-` is shared by every probability 4-vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompoundClass {
    PPlus,
    PMinus,
    NPlus,
    NMinus,
}

impl CompoundClass {
    pub const ALL: [CompoundClass; 4] = [Self::PPlus, Self::PMinus, Self::NPlus, Self::NMinus];

    pub fn index(self) -> usize {
        match self {
            Self::PPlus => 0,
            Self::PMinus => 1,
            Self::NPlus => 2,
            Self::NMinus => 3,
        }
    }

    pub fn decision(self) -> Decision {
        match self {
            Self::PPlus | Self::PMinus => Decision::P,
            Self::NPlus | Self::NMinus => Decision::N,
        }
    }

    pub fn sign(self) -> TwinSign {
        match self {
            Self::PPlus | Self::NPlus => TwinSign::Plus,
            Self::PMinus | Self::NMinus => TwinSign::Minus,
        }
    }
}

pub fn compound_label(y: Decision, sign: TwinSign) -> CompoundClass {
    match (y, sign) {
        (Decision::P, TwinSign::Plus) => CompoundClass::PPlus,
        (Decision::P, TwinSign::Minus) => CompoundClass::PMinus,
        (Decision::N, TwinSign::Plus) => CompoundClass::NPlus,
        (Decision::N, TwinSign::Minus) => CompoundClass::NMinus,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinPair {
    pub x_plus: GrayImage,
    pub x_minus: GrayImage,
    pub origin_id: u64,
}

pub fn make_twins(img: &GrayImage, origin_id: u64) -> TwinPair {
    TwinPair {
        x_plus: img.clone(),
        x_minus: img.map(|v| 255 - v),
        origin_id,
    }
}

/// Feature vectors of both twins of one patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinFeatures {
    pub plus: FeatureVector,
    pub minus: FeatureVector,
}

impl TwinFeatures {
    pub fn of(p: &PatchRecord) -> Result<Self> {
        match (p.features, p.twin_features) {
            (Some(plus), Some(minus)) => Ok(Self { plus, minus }),
            _ => Err(Error::Parameter(format!(
                "patch {} has no extracted features",
                p.patch_id
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinPrediction {
    pub theta: [f64; 4],
    pub psi: [f64; 4],
    pub fused: Decision,
    pub confidence: f64,
}

impl TwinPrediction {
    /// Average probability mass on the P components of both twins; used as the
    /// ranking score for ROC analysis.
    pub fn positive_score(&self) -> f64 {
        0.5 * (self.theta[0] + self.theta[1] + self.psi[0] + self.psi[1])
    }
}

/// Classifies both twins with one model and fuses them.
pub fn predict_twin<M: PatchClassifier + ?Sized>(model: &M, x: &TwinFeatures) -> TwinPrediction {
    let theta = model.predict(&x.plus);
    let psi = model.predict(&x.minus);
    let f = fuse(&theta, &psi);
    TwinPrediction {
        theta,
        psi,
        fused: f.decision,
        confidence: f.confidence,
    }
}

/// Expands labelled patches into the four-class twin batch.
pub fn twin_batch(positives: &[TwinFeatures], negatives: &[TwinFeatures]) -> Vec<(FeatureVector, CompoundClass)> {
    let mut out = Vec::with_capacity(2 * (positives.len() + negatives.len()));
    for (set, y) in [(positives, Decision::P), (negatives, Decision::N)] {
        for x in set {
            out.push((x.plus, compound_label(y, TwinSign::Plus)));
            out.push((x.minus, compound_label(y, TwinSign::Minus)));
        }
    }
    out
}

/// Fits `model` on reliable positives and negatives, both twins each.
/// Returns the per-epoch loss trace.
pub fn train_classifier<M: PatchClassifier + ?Sized>(
    model: &mut M,
    rp: &[TwinFeatures],
    ns: &[TwinFeatures],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    if rp.is_empty() && ns.is_empty() {
        return Err(Error::Training("no reliable positives or negatives".into()));
    }
    model.fit(&twin_batch(rp, ns), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPosterior {
    /// Posterior over `(GU, GRS, GPs, GB)`.
    pub p: [f64; 4],
    /// Fused decision of each class's sub-network.
    pub d: [Decision; 4],
}

/// Normalizes sub-network outputs: a firing sub-network contributes its
/// confidence, a silent one zero; uniform when none fires.
pub fn class_posterior(outputs: &[Fused; 4]) -> ClassPosterior {
    let d = outputs.map(|o| o.decision);
    let raw = outputs.map(|o| if o.decision.is_positive() { o.confidence } else { 0.0 });
    let s: f64 = raw.iter().sum();
    let p = if s > 0.0 { raw.map(|v| v / s) } else { [0.25; 4] };
    ClassPosterior { p, d }
}

/// Four one-vs-rest twin models, one per lesion class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubnetBank {
    pub nets: [LinearSoftmax; 4],
}

impl SubnetBank {
    /// Trains sub-network `k` with class-`k` lesions as positives and every
    /// other sample (background and other classes) as negatives.
    pub fn train(samples: &[(TwinFeatures, Option<LesionClass>)], cfg: &TrainConfig) -> Result<Self> {
        let mut nets = std::array::from_fn(|k| LinearSoftmax::init(cfg.seed.wrapping_add(k as u64)));
        for (k, net) in nets.iter_mut().enumerate() {
            let class = LesionClass::ALL[k];
            let (pos, neg): (Vec<_>, Vec<_>) = samples.iter().partition(|(_, c)| *c == Some(class));
            let pos: Vec<TwinFeatures> = pos.into_iter().map(|(x, _)| x).collect();
            let neg: Vec<TwinFeatures> = neg.into_iter().map(|(x, _)| x).collect();
            train_classifier(net, &pos, &neg, cfg)?;
        }
        Ok(Self { nets })
    }

    pub fn predict(&self, x: &TwinFeatures) -> ClassPosterior {
        predict_subnets(&self.nets, x)
    }
}

pub fn predict_subnets<M: PatchClassifier>(subnets: &[M; 4], x: &TwinFeatures) -> ClassPosterior {
    let outputs = std::array::from_fn(|k| {
        let t = predict_twin(&subnets[k], x);
        Fused {
            decision: t.fused,
            confidence: t.confidence,
        }
    });
    class_posterior(&outputs)
}

/// Per-class posterior fields aligned to a frame's patch grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub cols: usize,
    pub rows: usize,
    /// `fields[k][row * cols + col]` is `P_k` at that cell.
    pub fields: [Vec<f64>; 4],
}

impl Heatmap {
    pub fn get(&self, class: LesionClass, col: usize, row: usize) -> f64 {
        self.fields[class.index()][row * self.cols + col]
    }

    /// One CSV grid (rows of comma-separated values) per class.
    pub fn to_csv(&self, class: LesionClass) -> String {
        let f = &self.fields[class.index()];
        let mut out = String::new();
        for r in 0..self.rows {
            let line: Vec<String> = (0..self.cols).map(|c| format!("{}", f[r * self.cols + c])).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Lays out posteriors on the grid. `cells` holds `(col, row, posterior)`
/// and must cover every cell exactly once. Cells whose sub-networks all stay
/// silent carry zero heat rather than the uniform fallback, so background
/// renders cold.
pub fn heatmap(cols: usize, rows: usize, cells: &[(usize, usize, ClassPosterior)]) -> Result<Heatmap> {
    let mut fields: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; cols * rows]);
    let mut seen = vec![false; cols * rows];
    for (c, r, post) in cells {
        if *c >= cols || *r >= rows {
            return Err(Error::Parameter(format!("cell ({c}, {r}) outside {cols}x{rows} grid")));
        }
        let i = r * cols + c;
        if seen[i] {
            return Err(Error::Parameter(format!("cell ({c}, {r}) given twice")));
        }
        seen[i] = true;
        let any = post.d.iter().any(|d| d.is_positive());
        for k in 0..4 {
            fields[k][i] = if any { post.p[k] } else { 0.0 };
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Parameter("heatmap grid is incomplete".into()));
    }
    Ok(Heatmap { cols, rows, fields })
}
