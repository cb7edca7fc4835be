//! On-disk formats shared by the command-line tools.
//!
//! CSV columns:
//!
//! | file | columns |
//! |------|---------|
//! | features | `patch_id,f01..f22,score,label` |
//! | patch index | `patch_id,frame_id,col,row,size,lesion_class,split` |
//! | search trace | `iteration,peak_value,low_retrieval,high_retrieval` |
//! | objective heatmap | `low,high,objective` |
//! | agent trace | `epoch,stream,removed,f1,reward` |
//! | predictions | `patch_id,frame_id,score,pred,label` |
//! | ROC | `threshold,fpr,tpr` |
//! | SNR trace | `t,snr_db` |
//! | link events | `t,event,scheme,frames,delivered` |
//! | sweep | `config,trace,seed,fps,accuracy,index` |
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back gives the exact values and rewriting it gives the same bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glcm::{self, FeatureVector, FEATURE_COUNT};
use crate::patching::{GroundTruth, LesionClass, LesionMask, PatchRecord, Split};
use crate::synth::{Dataset, GeneratorConfig, SynthFrame};
use crate::twin::LinearSoftmax;

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.line(), e.to_string()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_bytes(path, &bytes)
}

/// Writes a header-only file when `rows` is empty.
pub fn write_csv_with_header<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    if rows.is_empty() {
        let mut s = header.join(",");
        s.push('\n');
        return write_bytes(path, s.as_bytes());
    }
    write_csv(path, rows)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Csv(e),
        _ => Error::malformed(path, line, e.to_string()),
    }
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv_reader(path)?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn expect_header(path: &Path, r: &mut csv::Reader<fs::File>, want: &[String]) -> Result<()> {
    let got = r.headers().map_err(|e| csv_error(path, e))?;
    if got.iter().ne(want.iter().map(String::as_str)) {
        return Err(Error::malformed(
            path,
            1,
            format!("expected header {}, found {}", want.join(","), got.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

pub fn feature_header() -> Vec<String> {
    let mut h = vec!["patch_id".to_string()];
    h.extend((1..=FEATURE_COUNT).map(|k| format!("f{k:02}")));
    h.push("score".into());
    h.push("label".into());
    h
}

/// One features-file row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub patch_id: u64,
    pub features: FeatureVector,
    pub score: f64,
    pub label: bool,
}

pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(feature_header())?;
    for r in rows {
        let mut rec = Vec::with_capacity(FEATURE_COUNT + 3);
        rec.push(r.patch_id.to_string());
        rec.extend(r.features.values().iter().map(|v| v.to_string()));
        rec.push(r.score.to_string());
        rec.push(u8::from(r.label).to_string());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_bytes(path, &bytes)
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut r = csv_reader(path)?;
    expect_header(path, &mut r, &feature_header())?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::malformed(path, line, format!("column {} is not a number: {:?}", i + 1, field(i))))
        };
        let patch_id = field(0)
            .parse::<u64>()
            .map_err(|_| Error::malformed(path, line, format!("bad patch id {:?}", field(0))))?;
        let mut f = [0.0; FEATURE_COUNT];
        for (k, v) in f.iter_mut().enumerate() {
            *v = num(k + 1)?;
        }
        let score = num(FEATURE_COUNT + 1)?;
        let label = match field(FEATURE_COUNT + 2) {
            "1" => true,
            "0" => false,
            other => return Err(Error::malformed(path, line, format!("label must be 0 or 1, got {other:?}"))),
        };
        out.push(FeatureRow {
            patch_id,
            features: FeatureVector(f),
            score,
            label,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchIndexRow {
    pub patch_id: u64,
    pub frame_id: u64,
    pub col: usize,
    pub row: usize,
    pub size: usize,
    pub lesion_class: Option<LesionClass>,
    pub split: Split,
}

/// Extraction output: the features of both twins plus patch metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFiles {
    pub features: PathBuf,
    pub twin_features: PathBuf,
    pub index: PathBuf,
}

impl PatchFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            features: dir.join("features.csv"),
            twin_features: dir.join("twin_features.csv"),
            index: dir.join("patches.csv"),
        }
    }
}

/// Writes the three extraction files. The twin file's `score` column holds the
/// fused score of the complemented patch.
pub fn save_patches(files: &PatchFiles, patches: &[PatchRecord], fusion: &glcm::FusionWeights) -> Result<()> {
    let mut plus = Vec::with_capacity(patches.len());
    let mut minus = Vec::with_capacity(patches.len());
    let mut index = Vec::with_capacity(patches.len());
    for p in patches {
        let (Some(f), Some(t), Some(score)) = (p.features, p.twin_features, p.score) else {
            return Err(Error::Parameter(format!("patch {} has no extracted features", p.patch_id)));
        };
        let label = p.gt.is_lesion();
        plus.push(FeatureRow {
            patch_id: p.patch_id,
            features: f,
            score,
            label,
        });
        minus.push(FeatureRow {
            patch_id: p.patch_id,
            features: t,
            score: glcm::fuse_score(&t, fusion),
            label,
        });
        index.push(PatchIndexRow {
            patch_id: p.patch_id,
            frame_id: p.frame_id,
            col: p.col,
            row: p.row,
            size: p.size,
            lesion_class: p.lesion_class,
            split: p.split,
        });
    }
    write_features(&files.features, &plus)?;
    write_features(&files.twin_features, &minus)?;
    write_csv(&files.index, &index)
}

pub fn load_patches(files: &PatchFiles) -> Result<Vec<PatchRecord>> {
    let plus = read_features(&files.features)?;
    let minus = read_features(&files.twin_features)?;
    let index: Vec<PatchIndexRow> = read_csv(&files.index)?;
    if plus.len() != minus.len() || plus.len() != index.len() {
        return Err(Error::malformed(
            &files.features,
            0,
            format!(
                "row counts differ: {} features, {} twin features, {} index rows",
                plus.len(),
                minus.len(),
                index.len()
            ),
        ));
    }
    plus.iter()
        .zip(&minus)
        .zip(&index)
        .enumerate()
        .map(|(k, ((a, b), ix))| {
            if a.patch_id != b.patch_id || a.patch_id != ix.patch_id {
                return Err(Error::malformed(
                    &files.twin_features,
                    k + 2,
                    format!("patch id {} does not line up with {}", b.patch_id, a.patch_id),
                ));
            }
            Ok(PatchRecord {
                patch_id: a.patch_id,
                frame_id: ix.frame_id,
                col: ix.col,
                row: ix.row,
                size: ix.size,
                features: Some(a.features),
                twin_features: Some(b.features),
                score: Some(a.score),
                gt: GroundTruth::from_bit(a.label),
                lesion_class: ix.lesion_class,
                split: ix.split,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame_id: u64,
    pub file: String,
    pub masks: Vec<LesionMask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: GeneratorConfig,
    pub frames: Vec<FrameEntry>,
}

fn frame_file(frame_id: u64) -> String {
    format!("frames/frame_{frame_id:05}.pgm")
}

/// Writes `frames/frame_NNNNN.pgm` and `manifest.json` under `dir`.
pub fn save_dataset(dir: &Path, dataset: &Dataset) -> Result<Manifest> {
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let mut entries = Vec::with_capacity(dataset.frames.len());
    for f in &dataset.frames {
        let file = frame_file(f.frame_id);
        f.image.save_pgm(&dir.join(&file))?;
        entries.push(FrameEntry {
            frame_id: f.frame_id,
            file,
            masks: f.masks.clone(),
        });
    }
    let manifest = Manifest {
        config: dataset.config.clone(),
        frames: entries,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    let frames = manifest
        .frames
        .iter()
        .map(|e| {
            Ok(SynthFrame {
                frame_id: e.frame_id,
                image: crate::image::GrayImage::load_pgm(&dir.join(&e.file))?,
                masks: e.masks.clone(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        config: manifest.config,
        frames,
    })
}

/// Versioned model file. Loading refuses files written under another feature
/// catalog or format version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub catalog_hash: String,
    pub seed: u64,
    pub model: LinearSoftmax,
}

impl ModelFile {
    pub fn new(model: LinearSoftmax, seed: u64) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            catalog_hash: glcm::catalog_hash(),
            seed,
            model,
        }
    }
}

pub fn save_model(path: &Path, m: &ModelFile) -> Result<()> {
    write_json(path, m)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let m: ModelFile = read_json(path)?;
    if m.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::malformed(
            path,
            0,
            format!("model format version {} is not {}", m.format_version, MODEL_FORMAT_VERSION),
        ));
    }
    if m.catalog_hash != glcm::catalog_hash() {
        return Err(Error::malformed(path, 0, "model was trained on a different feature catalog"));
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub patch_id: u64,
    pub frame_id: u64,
    pub score: f64,
    pub pred: u8,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub low: f64,
    pub high: f64,
    pub objective: f64,
}
