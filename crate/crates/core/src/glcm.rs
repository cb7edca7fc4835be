//! Gray-level co-occurrence matrices and the 22-feature texture catalog.
//!
//! Gray levels are indexed from zero. All logarithms are natural.
//! The catalog order is fixed and is what the `f01..f22` CSV columns refer to:
//!
//! | col | feature | definition |
//! |-----|---------|------------|
//! | f01 | autocorrelation | Σ i·j·p |
//! | f02 | contrast | Σ (i−j)²·p |
//! | f03 | correlation | Σ (i−μx)(j−μy)·p / (σx·σy), 0 when σx·σy = 0 |
//! | f04 | cluster prominence | Σ (i+j−μx−μy)⁴·p |
//! | f05 | cluster shade | Σ (i+j−μx−μy)³·p |
//! | f06 | dissimilarity | Σ \|i−j\|·p |
//! | f07 | energy | Σ p² |
//! | f08 | entropy | −Σ p·ln p |
//! | f09 | homogeneity | Σ p / (1+\|i−j\|) |
//! | f10 | maximum probability | max p |
//! | f11 | sum of squares variance | Σ (i−μx)²·p |
//! | f12 | sum average | Σ k·p₊(k) |
//! | f13 | sum variance | Σ (k−f12)²·p₊(k) |
//! | f14 | sum entropy | −Σ p₊·ln p₊ |
//! | f15 | difference variance | variance of p₋ |
//! | f16 | difference entropy | −Σ p₋·ln p₋ |
//! | f17 | information measure of correlation 1 | (HXY−HXY1)/max(HX,HY), 0 when max = 0 |
//! | f18 | information measure of correlation 2 | √(1−exp(−2(HXY2−HXY))) |
//! | f19 | inverse difference normalized | Σ p / (1+\|i−j\|/L) |
//! | f20 | inverse difference moment normalized | Σ p / (1+(i−j)²/L²) |
//! | f21 | inverse difference moment | Σ p / (1+(i−j)²) |
//! | f22 | cluster tendency | Σ (i+j−μx−μy)²·p |
//!
//! `p₊(k)` sums `p(i,j)` over `i+j = k`, `p₋(k)` over `|i−j| = k`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub const FEATURE_COUNT: usize = 22;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "autocorrelation",
    "contrast",
    "correlation",
    "cluster_prominence",
    "cluster_shade",
    "dissimilarity",
    "energy",
    "entropy",
    "homogeneity",
    "maximum_probability",
    "sum_of_squares_variance",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "difference_variance",
    "difference_entropy",
    "info_measure_correlation_1",
    "info_measure_correlation_2",
    "inverse_difference_normalized",
    "inverse_difference_moment_normalized",
    "inverse_difference_moment",
    "cluster_tendency",
];

/// Positions inside [`FeatureVector`] for features referenced by name in code.
pub mod idx {
    pub const AUTOCORRELATION: usize = 0;
    pub const CONTRAST: usize = 1;
    pub const CORRELATION: usize = 2;
    pub const CLUSTER_SHADE: usize = 4;
    pub const DISSIMILARITY: usize = 5;
    pub const ENERGY: usize = 6;
    pub const ENTROPY: usize = 7;
    pub const HOMOGENEITY: usize = 8;
    pub const MAX_PROBABILITY: usize = 9;
    pub const SUM_AVERAGE: usize = 11;
    pub const DIFFERENCE_ENTROPY: usize = 15;
    pub const IMC2: usize = 17;
}

pub const DEFAULT_LEVELS: usize = 8;
pub const DEFAULT_OFFSETS: [(i32, i32); 2] = [(1, 0), (0, 1)];

/// SHA-256 of the catalog's feature names, recorded in model files so a model
/// is never applied to vectors computed under a different catalog.
pub fn catalog_hash() -> String {
    let mut h = Sha256::new();
    for name in FEATURE_NAMES {
        h.update(name.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Maps intensities to `floor(v * levels / 256)`.
pub fn quantize(img: &GrayImage, levels: usize) -> Result<GrayImage> {
    check_levels(levels)?;
    Ok(img.map(|v| ((v as usize * levels) / 256) as u8))
}

fn check_levels(levels: usize) -> Result<()> {
    if !(2..=256).contains(&levels) {
        return Err(Error::Parameter(format!(
            "levels must lie in [2, 256], got {levels}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoMatrix {
    levels: usize,
    offset: (i32, i32),
    counts: Vec<u64>,
    normalized: Vec<f64>,
}

impl CoMatrix {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn offset(&self) -> (i32, i32) {
        self.offset
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.levels + j]
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.normalized[i * self.levels + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    pub fn is_symmetric(&self) -> bool {
        let l = self.levels;
        (0..l).all(|i| (0..l).all(|j| self.counts[i * l + j] == self.counts[j * l + i]))
    }
}

/// Counts pixel pairs `(p, p + offset)` of an image that is already quantized
/// to `levels` gray levels. With `symmetric`, the transpose is added before
/// normalization.
pub fn cooccurrence(
    img: &GrayImage,
    levels: usize,
    offset: (i32, i32),
    symmetric: bool,
) -> Result<CoMatrix> {
    check_levels(levels)?;
    let (dx, dy) = offset;
    if dx == 0 && dy == 0 {
        return Err(Error::Parameter("offset must not be (0, 0)".into()));
    }
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (dx64, dy64) = (dx as i64, dy as i64);
    let x_range = (0.max(-dx64), w.min(w - dx64));
    let y_range = (0.max(-dy64), h.min(h - dy64));
    if x_range.0 >= x_range.1 || y_range.0 >= y_range.1 {
        return Err(Error::EmptyPairs {
            dx,
            dy,
            width: img.width(),
            height: img.height(),
        });
    }
    let mut counts = vec![0u64; levels * levels];
    for y in y_range.0..y_range.1 {
        for x in x_range.0..x_range.1 {
            let a = img.get(x as usize, y as usize) as usize;
            let b = img.get((x + dx64) as usize, (y + dy64) as usize) as usize;
            if a >= levels || b >= levels {
                return Err(Error::Parameter(format!(
                    "pixel value {} exceeds quantization levels {levels}",
                    a.max(b)
                )));
            }
            counts[a * levels + b] += 1;
        }
    }
    if symmetric {
        let base = counts.clone();
        for i in 0..levels {
            for j in 0..levels {
                counts[i * levels + j] += base[j * levels + i];
            }
        }
    }
    let total: u64 = counts.iter().sum();
    let normalized = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(CoMatrix {
        levels,
        offset,
        counts,
        normalized,
    })
}

/// The 22 texture features in catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn zeros() -> Self {
        Self([0.0; FEATURE_COUNT])
    }

    pub fn values(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.0[i])
    }

    pub fn contrast(&self) -> f64 {
        self.0[idx::CONTRAST]
    }

    pub fn energy(&self) -> f64 {
        self.0[idx::ENERGY]
    }

    pub fn entropy(&self) -> f64 {
        self.0[idx::ENTROPY]
    }

    pub fn homogeneity(&self) -> f64 {
        self.0[idx::HOMOGENEITY]
    }

    /// Element-wise mean of several vectors.
    pub fn mean(vectors: &[FeatureVector]) -> FeatureVector {
        let mut out = [0.0; FEATURE_COUNT];
        for v in vectors {
            for (o, x) in out.iter_mut().zip(v.0.iter()) {
                *o += x;
            }
        }
        let n = vectors.len().max(1) as f64;
        out.iter_mut().for_each(|o| *o /= n);
        FeatureVector(out)
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Evaluates the full catalog on a normalized co-occurrence matrix.
pub fn features(m: &CoMatrix) -> FeatureVector {
    let l = m.levels;
    let lf = l as f64;
    let p = &m.normalized;

    let mut px = vec![0.0; l];
    let mut py = vec![0.0; l];
    let mut p_sum = vec![0.0; 2 * l - 1];
    let mut p_diff = vec![0.0; l];
    for i in 0..l {
        for j in 0..l {
            let v = p[i * l + j];
            px[i] += v;
            py[j] += v;
            p_sum[i + j] += v;
            p_diff[i.abs_diff(j)] += v;
        }
    }
    let mu_x: f64 = px.iter().enumerate().map(|(i, v)| i as f64 * v).sum();
    let mu_y: f64 = py.iter().enumerate().map(|(j, v)| j as f64 * v).sum();
    let var_x: f64 = px
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 - mu_x).powi(2) * v)
        .sum();
    let var_y: f64 = py
        .iter()
        .enumerate()
        .map(|(j, v)| (j as f64 - mu_y).powi(2) * v)
        .sum();

    let mut autocorrelation = 0.0;
    let mut contrast = 0.0;
    let mut covariance = 0.0;
    let mut prominence = 0.0;
    let mut shade = 0.0;
    let mut tendency = 0.0;
    let mut dissimilarity = 0.0;
    let mut energy = 0.0;
    let mut entropy = 0.0;
    let mut homogeneity = 0.0;
    let mut max_probability: f64 = 0.0;
    let mut idn = 0.0;
    let mut idmn = 0.0;
    let mut idm = 0.0;
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in 0..l {
        for j in 0..l {
            let v = p[i * l + j];
            let (fi, fj) = (i as f64, j as f64);
            let d = fi - fj;
            let ad = d.abs();
            let s = fi + fj - mu_x - mu_y;
            autocorrelation += fi * fj * v;
            contrast += d * d * v;
            covariance += (fi - mu_x) * (fj - mu_y) * v;
            prominence += s.powi(4) * v;
            shade += s.powi(3) * v;
            tendency += s * s * v;
            dissimilarity += ad * v;
            energy += v * v;
            entropy -= plogp(v);
            homogeneity += v / (1.0 + ad);
            max_probability = max_probability.max(v);
            idn += v / (1.0 + ad / lf);
            idmn += v / (1.0 + d * d / (lf * lf));
            idm += v / (1.0 + d * d);
            let q = px[i] * py[j];
            if q > 0.0 {
                hxy1 -= v * q.ln();
                hxy2 -= q * q.ln();
            }
        }
    }

    let sigma = (var_x * var_y).sqrt();
    let correlation = if sigma > 0.0 { covariance / sigma } else { 0.0 };

    let sum_average: f64 = p_sum.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let sum_variance: f64 = p_sum
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64 - sum_average).powi(2) * v)
        .sum();
    let sum_entropy: f64 = -p_sum.iter().copied().map(plogp).sum::<f64>();
    let diff_mean: f64 = p_diff.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let difference_variance: f64 = p_diff
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64 - diff_mean).powi(2) * v)
        .sum();
    let difference_entropy: f64 = -p_diff.iter().copied().map(plogp).sum::<f64>();

    let hx: f64 = -px.iter().copied().map(plogp).sum::<f64>();
    let hy: f64 = -py.iter().copied().map(plogp).sum::<f64>();
    let hmax = hx.max(hy);
    let imc1 = if hmax > 0.0 {
        (entropy - hxy1) / hmax
    } else {
        0.0
    };
    let imc2 = (1.0 - (-2.0 * (hxy2 - entropy)).exp()).max(0.0).sqrt();

    FeatureVector([
        autocorrelation,
        contrast,
        correlation,
        prominence,
        shade,
        dissimilarity,
        energy,
        entropy,
        homogeneity,
        max_probability,
        var_x,
        sum_average,
        sum_variance,
        sum_entropy,
        difference_variance,
        difference_entropy,
        imc1,
        imc2,
        idn,
        idmn,
        idm,
        tendency,
    ])
}

/// GLCM extraction settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlcmConfig {
    pub levels: usize,
    pub offsets: Vec<(i32, i32)>,
    pub symmetric: bool,
}

impl Default for GlcmConfig {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS,
            offsets: DEFAULT_OFFSETS.to_vec(),
            symmetric: true,
        }
    }
}

/// Quantizes `img`, computes one co-occurrence matrix per configured offset
/// and averages the resulting feature vectors.
pub fn extract(img: &GrayImage, cfg: &GlcmConfig) -> Result<FeatureVector> {
    if cfg.offsets.is_empty() {
        return Err(Error::Parameter("at least one offset is required".into()));
    }
    let q = quantize(img, cfg.levels)?;
    let per_offset = cfg
        .offsets
        .iter()
        .map(|&off| cooccurrence(&q, cfg.levels, off, cfg.symmetric).map(|m| features(&m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureVector::mean(&per_offset))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Linear attention weights over the catalog, squashed through a sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
}

impl FusionWeights {
    pub fn zeros() -> Self {
        Self {
            weights: [0.0; FEATURE_COUNT],
            bias: 0.0,
        }
    }

    /// Logistic-regression fit on a calibration run of the default generator
    /// (8 levels, `(1,0)/(0,1)` offsets), rounded to four decimals. Rough
    /// textures push the score up, homogeneous ones pull it down.
    pub fn lesion_default() -> Self {
        Self {
            weights: [
                -0.0014,
                0.1274,
                0.0599,
                0.0099,
                0.0305,
                0.8290,
                -1.1186,
                0.4191,
                -3.7688,
                -1.6427,
                0.4624,
                -0.1747,
                0.1839,
                0.6518,
                -0.5096,
                0.3606,
                0.4657,
                -0.4631,
                -9.7700,
                -11.1449,
                -3.0514,
                0.1839
            ],
            bias: 22.3003,
        }
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self::lesion_default()
    }
}

/// `sigmoid(w · f + b)`, always inside `[0, 1]`.
pub fn fuse_score(f: &FeatureVector, w: &FusionWeights) -> f64 {
    let z: f64 = f
        .0
        .iter()
        .zip(w.weights.iter())
        .map(|(x, w)| x * w)
        .sum::<f64>()
        + w.bias;
    sigmoid(z)
}
