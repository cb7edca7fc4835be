//! Non-overlapping patch grids, elliptical ground truth and frame-level splits.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glcm::FeatureVector;
use crate::image::GrayImage;
use crate::rng;

pub const DEFAULT_PATCH_SIZE: usize = 32;
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.5;
pub const DEFAULT_TRAIN_RATIO: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LesionClass {
    /// Gastric ulcer.
    GU,
    /// Gastric red spots.
    GRS,
    /// Gastric polyps.
    GPs,
    /// Gastric bleeding.
    GB,
}

impl LesionClass {
    pub const ALL: [LesionClass; 4] = [Self::GU, Self::GRS, Self::GPs, Self::GB];

    pub fn index(self) -> usize {
        match self {
            Self::GU => 0,
            Self::GRS => 1,
            Self::GPs => 2,
            Self::GB => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::GU => "GU",
            Self::GRS => "GRS",
            Self::GPs => "GPs",
            Self::GB => "GB",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for LesionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    /// Semi-axis along the rotated x direction.
    pub a: f64,
    /// Semi-axis along the rotated y direction.
    pub b: f64,
    /// Rotation in radians.
    pub angle: f64,
}

impl Ellipse {
    pub fn new(cx: f64, cy: f64, a: f64, b: f64, angle: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Parameter(format!(
                "ellipse semi-axes must be positive, got ({a}, {b})"
            )));
        }
        Ok(Self {
            cx,
            cy,
            a,
            b,
            angle,
        })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }

    /// Axis-aligned bounding box `(xmin, ymin, xmax, ymax)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let (s, c) = self.angle.sin_cos();
        let hw = ((self.a * c).powi(2) + (self.b * s).powi(2)).sqrt();
        let hh = ((self.a * s).powi(2) + (self.b * c).powi(2)).sqrt();
        (self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)
    }
}

/// Elliptical approximation of one lesion region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionMask {
    pub ellipses: Vec<Ellipse>,
    pub class_label: LesionClass,
}

impl LesionMask {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.ellipses.iter().any(|e| e.contains(x, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruth {
    Background,
    Lesion,
}

impl GroundTruth {
    pub fn is_lesion(self) -> bool {
        self == GroundTruth::Lesion
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Self::Lesion
        } else {
            Self::Background
        }
    }

    pub fn flipped(self) -> Self {
        Self::from_bit(!self.is_lesion())
    }
}

/// One `P`x`P` patch. Features are filled in by extraction, labels by
/// [`label_patches`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub patch_id: u64,
    pub frame_id: u64,
    pub col: usize,
    pub row: usize,
    pub size: usize,
    pub features: Option<FeatureVector>,
    /// Features of the intensity-complemented twin.
    pub twin_features: Option<FeatureVector>,
    pub score: Option<f64>,
    pub gt: GroundTruth,
    pub lesion_class: Option<LesionClass>,
    pub split: Split,
}

impl PatchRecord {
    pub fn origin(&self) -> (usize, usize) {
        (self.col * self.size, self.row * self.size)
    }
}

/// Cuts `img` into a row-major grid of non-overlapping `patch_size` squares;
/// ids start at `first_id`. Right and bottom remainders are dropped.
pub fn decompose(
    img: &GrayImage,
    patch_size: usize,
    frame_id: u64,
    first_id: u64,
) -> Result<Vec<PatchRecord>> {
    if patch_size < 2 {
        return Err(Error::Parameter(format!(
            "patch size must be at least 2, got {patch_size}"
        )));
    }
    let cols = img.width() / patch_size;
    let rows = img.height() / patch_size;
    if cols == 0 || rows == 0 {
        return Err(Error::NoPatches {
            patch: patch_size,
            width: img.width(),
            height: img.height(),
        });
    }
    let mut out = Vec::with_capacity(cols * rows);
    for row in 0..rows {
        for col in 0..cols {
            out.push(PatchRecord {
                patch_id: first_id + (row * cols + col) as u64,
                frame_id,
                col,
                row,
                size: patch_size,
                features: None,
                twin_features: None,
                score: None,
                gt: GroundTruth::Background,
                lesion_class: None,
                split: Split::Train,
            });
        }
    }
    Ok(out)
}

pub fn patch_pixels(img: &GrayImage, p: &PatchRecord) -> Result<GrayImage> {
    let (x0, y0) = p.origin();
    img.crop(x0, y0, p.size, p.size)
}

/// Fraction of the patch's pixel centres covered by each mask.
fn coverage(p: &PatchRecord, masks: &[LesionMask]) -> (f64, Option<LesionClass>) {
    let (x0, y0) = p.origin();
    let mut inside_any = 0usize;
    let mut per_class = [0usize; 4];
    for y in y0..y0 + p.size {
        for x in x0..x0 + p.size {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut hit = false;
            for m in masks {
                if m.contains(fx, fy) {
                    per_class[m.class_label.index()] += 1;
                    hit = true;
                }
            }
            if hit {
                inside_any += 1;
            }
        }
    }
    let total = (p.size * p.size) as f64;
    let dominant = per_class
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .max_by_key(|(i, &c)| (c, std::cmp::Reverse(*i)))
        .map(|(i, _)| LesionClass::ALL[i]);
    (inside_any as f64 / total, dominant)
}

/// Marks a patch as lesion when at least `overlap_threshold` of its pixels
/// fall inside any ellipse; the lesion class is the one covering most pixels.
pub fn label_patches(
    patches: &[PatchRecord],
    masks: &[LesionMask],
    overlap_threshold: f64,
) -> Result<Vec<PatchRecord>> {
    if !(overlap_threshold > 0.0 && overlap_threshold <= 1.0) {
        return Err(Error::Parameter(format!(
            "overlap threshold must lie in (0, 1], got {overlap_threshold}"
        )));
    }
    Ok(patches
        .iter()
        .map(|p| {
            let (frac, class) = coverage(p, masks);
            let lesion = frac >= overlap_threshold;
            PatchRecord {
                gt: GroundTruth::from_bit(lesion),
                lesion_class: if lesion { class } else { None },
                ..p.clone()
            }
        })
        .collect())
}

/// Assigns whole frames to train/test so that `round(ratio * frames)` frames
/// train. Returns the training frame ids; patches are updated in place.
pub fn split_dataset(patches: &mut [PatchRecord], ratio: f64, seed: u64) -> Result<BTreeSet<u64>> {
    let frames: BTreeSet<u64> = patches.iter().map(|p| p.frame_id).collect();
    if frames.len() < 2 {
        return Err(Error::Split(format!(
            "need at least 2 frames, got {}",
            frames.len()
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Split(format!(
            "train ratio must lie strictly inside (0, 1), got {ratio}"
        )));
    }
    let n = frames.len();
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<u64> = frames.into_iter().collect();
    order.shuffle(&mut rng::seeded(seed, rng::streams::SPLIT));
    let train: BTreeSet<u64> = order[..n_train].iter().copied().collect();
    for p in patches.iter_mut() {
        p.split = if train.contains(&p.frame_id) {
            Split::Train
        } else {
            Split::Test
        };
    }
    Ok(train)
}
