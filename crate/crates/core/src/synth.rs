//! Seeded generator of endoscopy-like grayscale frames.
//!
//! Background is a smooth, low-amplitude filtered-noise field. Each lesion is
//! an ellipse filled with its class's own field: short correlation length and
//! large amplitude (rough texture, high GLCM contrast), with a class-specific
//! base intensity so the four classes also separate on mean-sensitive
//! features.

use std::f64::consts::PI;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::patching::{Ellipse, LesionClass, LesionMask, PatchRecord};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureParams {
    pub base: f64,
    /// Box-blur radius in pixels; 0 leaves white noise.
    pub correlation_length: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub frame_width: usize,
    pub frame_height: usize,
    pub frames: usize,
    /// Probability of each class in `(GU, GRS, GPs, GB)` order.
    pub class_mix: [f64; 4],
    pub lesions_per_frame: (usize, usize),
    pub semi_axis_range: (f64, f64),
    pub background: TextureParams,
    pub classes: [TextureParams; 4],
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            frame_width: 256,
            frame_height: 256,
            frames: 100,
            class_mix: [0.25; 4],
            lesions_per_frame: (1, 3),
            semi_axis_range: (20.0, 52.0),
            background: TextureParams {
                base: 120.0,
                correlation_length: 8.0,
                amplitude: 8.0,
            },
            classes: [
                // GU: dark, rough crater
                TextureParams {
                    base: 90.0,
                    correlation_length: 0.0,
                    amplitude: 45.0,
                },
                // GRS: bright speckle
                TextureParams {
                    base: 165.0,
                    correlation_length: 0.0,
                    amplitude: 45.0,
                },
                // GPs: mid-bright, slightly coarser grain
                TextureParams {
                    base: 140.0,
                    correlation_length: 1.0,
                    amplitude: 50.0,
                },
                // GB: dark, fine grain
                TextureParams {
                    base: 70.0,
                    correlation_length: 0.0,
                    amplitude: 45.0,
                },
            ],
            label_noise: 0.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.frame_width < 8 || self.frame_height < 8 {
            return bad("frames must be at least 8x8".into());
        }
        if self.frames == 0 {
            return bad("frame count must be positive".into());
        }
        let mix_sum: f64 = self.class_mix.iter().sum();
        if self.class_mix.iter().any(|&m| m < 0.0) || (mix_sum - 1.0).abs() > 1e-9 {
            return bad(format!("class mix must be non-negative and sum to 1, got {mix_sum}"));
        }
        if self.lesions_per_frame.0 > self.lesions_per_frame.1 {
            return bad("lesions_per_frame must be (min, max) with min <= max".into());
        }
        let (a0, a1) = self.semi_axis_range;
        let half = self.frame_width.min(self.frame_height) as f64 / 2.0;
        if !(a0 > 0.0 && a0 <= a1 && a1 < half) {
            return bad(format!("semi-axis range ({a0}, {a1}) must be positive and fit the frame"));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return bad(format!("label noise must lie in [0, 1), got {}", self.label_noise));
        }
        for t in std::iter::once(&self.background).chain(self.classes.iter()) {
            if !(t.correlation_length >= 0.0 && t.amplitude >= 0.0 && t.base.is_finite()) {
                return bad("texture parameters must be finite and non-negative".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrame {
    pub frame_id: u64,
    pub image: GrayImage,
    pub masks: Vec<LesionMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: GeneratorConfig,
    pub frames: Vec<SynthFrame>,
}

/// Zero-mean, unit-variance noise smoothed by three box-blur passes.
fn noise_field(w: usize, h: usize, radius: f64, rng: &mut Rng) -> Vec<f64> {
    let mut f: Vec<f64> = (0..w * h).map(|_| StandardNormal.sample(rng)).collect();
    let r = radius.round() as usize;
    if r > 0 {
        let mut tmp = vec![0.0; w * h];
        for _ in 0..3 {
            box_blur_rows(&f, &mut tmp, w, h, r);
            box_blur_cols(&tmp, &mut f, w, h, r);
        }
    }
    let n = f.len() as f64;
    let mean = f.iter().sum::<f64>() / n;
    let sd = (f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    f.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    f
}

fn box_blur_rows(src: &[f64], dst: &mut [f64], w: usize, h: usize, r: usize) {
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let a = x.saturating_sub(r);
            let b = (x + r).min(w - 1);
            dst[y * w + x] = row[a..=b].iter().sum::<f64>() / (b - a + 1) as f64;
        }
    }
}

fn box_blur_cols(src: &[f64], dst: &mut [f64], w: usize, h: usize, r: usize) {
    for x in 0..w {
        for y in 0..h {
            let a = y.saturating_sub(r);
            let b = (y + r).min(h - 1);
            let s: f64 = (a..=b).map(|yy| src[yy * w + x]).sum();
            dst[y * w + x] = s / (b - a + 1) as f64;
        }
    }
}

fn pick_class(mix: &[f64; 4], rng: &mut Rng) -> LesionClass {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, m) in mix.iter().enumerate() {
        acc += m;
        if u < acc {
            return LesionClass::ALL[k];
        }
    }
    *LesionClass::ALL
        .iter()
        .rev()
        .zip(mix.iter().rev())
        .find(|(_, &m)| m > 0.0)
        .map(|(c, _)| c)
        .unwrap_or(&LesionClass::GU)
}

fn place_ellipse(cfg: &GeneratorConfig, rng: &mut Rng) -> Ellipse {
    let (w, h) = (cfg.frame_width as f64, cfg.frame_height as f64);
    let (a0, a1) = cfg.semi_axis_range;
    loop {
        let a = rng.random_range(a0..=a1);
        let b = rng.random_range(a0..=a1);
        let angle = rng.random_range(0.0..PI);
        let cx = rng.random_range(0.0..w);
        let cy = rng.random_range(0.0..h);
        let e = Ellipse { cx, cy, a, b, angle };
        let (x0, y0, x1, y1) = e.bounds();
        if x0 >= 0.0 && y0 >= 0.0 && x1 <= w && y1 <= h {
            return e;
        }
    }
}

fn render_frame(cfg: &GeneratorConfig, frame_id: u64) -> SynthFrame {
    let mut rng = rng::seeded(cfg.seed, rng::streams::FRAME_BASE + frame_id);
    let (w, h) = (cfg.frame_width, cfg.frame_height);
    let (lo, hi) = cfg.lesions_per_frame;
    let n_lesions = rng.random_range(lo..=hi);
    let masks: Vec<LesionMask> = (0..n_lesions)
        .map(|_| {
            let class_label = pick_class(&cfg.class_mix, &mut rng);
            LesionMask {
                ellipses: vec![place_ellipse(cfg, &mut rng)],
                class_label,
            }
        })
        .collect();

    let bg = &cfg.background;
    let mut pixels: Vec<f64> = noise_field(w, h, bg.correlation_length, &mut rng)
        .into_iter()
        .map(|v| bg.base + bg.amplitude * v)
        .collect();
    // later lesions paint over earlier ones
    for m in &masks {
        let t = cfg.classes[m.class_label.index()];
        let field = noise_field(w, h, t.correlation_length, &mut rng);
        for y in 0..h {
            for x in 0..w {
                if m.contains(x as f64 + 0.5, y as f64 + 0.5) {
                    pixels[y * w + x] = t.base + t.amplitude * field[y * w + x];
                }
            }
        }
    }
    let data = pixels
        .into_iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    SynthFrame {
        frame_id,
        image: GrayImage::new(w, h, data).expect("dimensions checked by config"),
        masks,
    }
}

/// Renders `config.frames` frames; frame `k` draws only from its own seeded
/// stream, so the result is independent of scheduling.
pub fn generate(config: &GeneratorConfig) -> Result<Dataset> {
    config.validate()?;
    let frames = (0..config.frames as u64)
        .into_par_iter()
        .map(|k| render_frame(config, k))
        .collect();
    Ok(Dataset {
        config: config.clone(),
        frames,
    })
}

/// Ids of patches whose working label was flipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseOracle {
    pub rate: f64,
    pub seed: u64,
    pub flipped: Vec<u64>,
}

/// Flips exactly `round(rate * n)` labels chosen uniformly without
/// replacement.
pub fn plant_noise(patches: &mut [PatchRecord], rate: f64, seed: u64) -> Result<NoiseOracle> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!("noise rate must lie in [0, 1), got {rate}")));
    }
    let n = patches.len();
    let k = (rate * n as f64).round() as usize;
    let mut rng = rng::seeded(seed, rng::streams::NOISE);
    let mut picked: Vec<usize> = index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    let mut flipped = Vec::with_capacity(k);
    for i in picked {
        let p = &mut patches[i];
        p.gt = p.gt.flipped();
        flipped.push(p.patch_id);
    }
    Ok(NoiseOracle { rate, seed, flipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AugmentOp {
    /// Clockwise quarter turns.
    Rotate90(u8),
    FlipHorizontal,
    FlipVertical,
    /// Uniform brightness offset drawn from `[-amount, amount]`.
    IntensityJitter(u8),
    /// Nearest-neighbour rescale; breaks patch grid alignment, so it is not
    /// part of [`AugmentOp::default_set`].
    Scale(f64),
}

impl AugmentOp {
    pub fn default_set() -> Vec<AugmentOp> {
        vec![
            AugmentOp::Rotate90(1),
            AugmentOp::Rotate90(2),
            AugmentOp::Rotate90(3),
            AugmentOp::FlipHorizontal,
            AugmentOp::FlipVertical,
            AugmentOp::IntensityJitter(12),
        ]
    }
}

fn rotate_ellipse(e: &Ellipse, height: f64) -> Ellipse {
    Ellipse {
        cx: height - e.cy,
        cy: e.cx,
        a: e.a,
        b: e.b,
        angle: e.angle + PI / 2.0,
    }
}

fn transform_masks(masks: &[LesionMask], f: impl Fn(&Ellipse) -> Ellipse) -> Vec<LesionMask> {
    masks
        .iter()
        .map(|m| LesionMask {
            ellipses: m.ellipses.iter().map(&f).collect(),
            class_label: m.class_label,
        })
        .collect()
}

/// Applies one op to a frame, moving the masks with the pixels.
pub fn apply_op(frame: &SynthFrame, op: AugmentOp, seed: u64) -> Result<SynthFrame> {
    let (w, h) = (frame.image.width() as f64, frame.image.height() as f64);
    let (image, masks) = match op {
        AugmentOp::Rotate90(k) => {
            let mut img = frame.image.clone();
            let mut masks = frame.masks.clone();
            for _ in 0..k % 4 {
                let hh = img.height() as f64;
                masks = transform_masks(&masks, |e| rotate_ellipse(e, hh));
                img = img.rotate90();
            }
            (img, masks)
        }
        AugmentOp::FlipHorizontal => (
            frame.image.flip_horizontal(),
            transform_masks(&frame.masks, |e| Ellipse {
                cx: w - e.cx,
                angle: -e.angle,
                ..*e
            }),
        ),
        AugmentOp::FlipVertical => (
            frame.image.flip_vertical(),
            transform_masks(&frame.masks, |e| Ellipse {
                cy: h - e.cy,
                angle: -e.angle,
                ..*e
            }),
        ),
        AugmentOp::IntensityJitter(amount) => {
            let mut r = rng::seeded(seed, rng::streams::AUGMENT ^ (frame.frame_id << 8));
            let a = amount as i32;
            let shift: i32 = r.random_range(-a..=a);
            (
                frame.image.map(|v| (v as i32 + shift).clamp(0, 255) as u8),
                frame.masks.clone(),
            )
        }
        AugmentOp::Scale(s) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Parameter(format!("scale must be positive, got {s}")));
            }
            let nw = ((w * s).round() as usize).max(1);
            let nh = ((h * s).round() as usize).max(1);
            let src = &frame.image;
            let img = GrayImage::from_fn(nw, nh, |x, y| {
                let sx = (((x as f64 + 0.5) / s) as usize).min(src.width() - 1);
                let sy = (((y as f64 + 0.5) / s) as usize).min(src.height() - 1);
                src.get(sx, sy)
            })?;
            let masks = transform_masks(&frame.masks, |e| Ellipse {
                cx: e.cx * s,
                cy: e.cy * s,
                a: e.a * s,
                b: e.b * s,
                angle: e.angle,
            });
            (img, masks)
        }
    };
    Ok(SynthFrame {
        frame_id: frame.frame_id,
        image,
        masks,
    })
}

/// One augmented copy per op. Patch labels must be recomputed from the
/// returned masks.
pub fn augment(frame: &SynthFrame, ops: &[AugmentOp], seed: u64) -> Result<Vec<SynthFrame>> {
    ops.iter().map(|&op| apply_op(frame, op, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patching::{decompose, label_patches, GroundTruth};

    fn small_cfg(seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            frame_width: 96,
            frame_height: 96,
            frames: 4,
            semi_axis_range: (10.0, 30.0),
            seed,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&small_cfg(5)).unwrap();
        let b = generate(&small_cfg(5)).unwrap();
        assert_eq!(a, b);
        let c = generate(&small_cfg(6)).unwrap();
        assert_ne!(a.frames[0].image, c.frames[0].image);
    }

    #[test]
    fn masks_inside_frame() {
        let d = generate(&small_cfg(1)).unwrap();
        for f in &d.frames {
            for m in &f.masks {
                for e in &m.ellipses {
                    let (x0, y0, x1, y1) = e.bounds();
                    assert!(x0 >= 0.0 && y0 >= 0.0 && x1 <= 96.0 && y1 <= 96.0);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small_cfg(0);
        c.class_mix = [0.5, 0.5, 0.5, 0.0];
        assert!(generate(&c).is_err());
        let mut c = small_cfg(0);
        c.label_noise = 1.0;
        assert!(generate(&c).is_err());
    }

    fn patches(n: usize) -> Vec<PatchRecord> {
        let img = GrayImage::filled(n * 4, 4, 0).unwrap();
        decompose(&img, 4, 0, 0).unwrap()
    }

    #[test]
    fn noise_counts() {
        let mut ps = patches(100);
        let clean = ps.clone();
        let o = plant_noise(&mut ps, 0.0, 1).unwrap();
        assert!(o.flipped.is_empty());
        assert_eq!(ps, clean);
        let o = plant_noise(&mut ps, 0.2, 1).unwrap();
        assert_eq!(o.flipped.len(), 20);
        assert_eq!(ps.iter().filter(|p| p.gt == GroundTruth::Lesion).count(), 20);
        let mut again = clean.clone();
        assert_eq!(plant_noise(&mut again, 0.2, 1).unwrap(), o);
        assert!(plant_noise(&mut again, 1.0, 1).is_err());
    }

    fn lesion_cells(frame: &SynthFrame) -> Vec<(usize, usize)> {
        let ps = decompose(&frame.image, 16, 0, 0).unwrap();
        label_patches(&ps, &frame.masks, 0.5)
            .unwrap()
            .into_iter()
            .filter(|p| p.gt.is_lesion())
            .map(|p| (p.col, p.row))
            .collect()
    }

    #[test]
    fn identity_compositions() {
        let d = generate(&small_cfg(3)).unwrap();
        let f = &d.frames[0];
        let r4 = apply_op(f, AugmentOp::Rotate90(4), 0).unwrap();
        assert_eq!(r4.image, f.image);
        let hh = apply_op(&apply_op(f, AugmentOp::FlipHorizontal, 0).unwrap(), AugmentOp::FlipHorizontal, 0).unwrap();
        assert_eq!(hh.image, f.image);
        for (a, b) in hh.masks.iter().zip(&f.masks) {
            assert!((a.ellipses[0].cx - b.ellipses[0].cx).abs() < 1e-9);
        }
    }

    #[test]
    fn labels_commute_with_geometry() {
        let d = generate(&small_cfg(11)).unwrap();
        for f in &d.frames {
            let cells = lesion_cells(f);
            let n = 96 / 16;
            let rot = apply_op(f, AugmentOp::Rotate90(1), 0).unwrap();
            let mut expect: Vec<_> = cells.iter().map(|&(c, r)| (n - 1 - r, c)).collect();
            let mut got = lesion_cells(&rot);
            expect.sort();
            got.sort();
            assert_eq!(got, expect);
            let fl = apply_op(f, AugmentOp::FlipHorizontal, 0).unwrap();
            let mut expect: Vec<_> = cells.iter().map(|&(c, r)| (n - 1 - c, r)).collect();
            let mut got = lesion_cells(&fl);
            expect.sort();
            got.sort();
            assert_eq!(got, expect);
            let fv = apply_op(f, AugmentOp::FlipVertical, 0).unwrap();
            let mut expect: Vec<_> = cells.iter().map(|&(c, r)| (c, n - 1 - r)).collect();
            let mut got = lesion_cells(&fv);
            expect.sort();
            got.sort();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn rotated_mask_area_matches() {
        let d = generate(&small_cfg(21)).unwrap();
        for f in &d.frames {
            let area = |fr: &SynthFrame| {
                (0..96)
                    .flat_map(|y| (0..96).map(move |x| (x, y)))
                    .filter(|&(x, y)| fr.masks.iter().any(|m| m.contains(x as f64 + 0.5, y as f64 + 0.5)))
                    .count()
            };
            let rot = apply_op(f, AugmentOp::Rotate90(1), 0).unwrap();
            assert_eq!(area(&rot), area(f));
            assert_eq!(lesion_cells(&rot).len(), lesion_cells(f).len());
        }
    }

    #[test]
    fn jitter_keeps_masks_and_is_seeded() {
        let d = generate(&small_cfg(2)).unwrap();
        let f = &d.frames[1];
        let a = apply_op(f, AugmentOp::IntensityJitter(10), 4).unwrap();
        let b = apply_op(f, AugmentOp::IntensityJitter(10), 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.masks, f.masks);
        assert_eq!(augment(f, &AugmentOp::default_set(), 0).unwrap().len(), 6);
    }
}
