use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use octx::agent::{self, AgentConfig, BenchmarkConfig, Instance};
use octx::fdtgs::{ScoreIndex, SearchConfig};
use octx::io::{self, HeatmapCell, ModelFile, PatchFiles, PredictionRow};
use octx::multirate::{self, ChannelTrace, FrameScores, LinkConfig, SchemeTable, TraceSample};
use octx::patching::{self, PatchRecord, Split};
use octx::pipeline::{self, ExtractConfig};
use octx::synth::{self, GeneratorConfig};
use octx::twin::{LinearSoftmax, TrainConfig};
use octx::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{freeze, resolve};
use crate::plot::{self, Series};

/// Flags every subcommand accepts.
#[derive(Debug, Clone)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
}

fn out_dir(c: &Common) -> Result<&Path> {
    std::fs::create_dir_all(&c.out).map_err(|e| Error::Io {
        path: c.out.clone(),
        source: e,
    })?;
    Ok(&c.out)
}

pub fn generate(c: &Common, frames: Option<usize>) -> Result<()> {
    let mut cfg: GeneratorConfig = resolve(&GeneratorConfig::default(), c.config.as_deref())?;
    cfg.seed = c.seed;
    if let Some(n) = frames {
        cfg.frames = n;
    }
    let out = out_dir(c)?;
    freeze(out, "generate", c.seed, &[], &cfg)?;
    let ds = synth::generate(&cfg)?;
    io::save_dataset(out, &ds)?;
    info!("wrote {} frames to {}", ds.frames.len(), out.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractParams {
    pub extract: ExtractConfig,
    pub train_ratio: f64,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            extract: ExtractConfig::default(),
            train_ratio: patching::DEFAULT_TRAIN_RATIO,
        }
    }
}

/// Patches, features and the frame-level train/test split. A dataset generated
/// with label noise gets its noise planted here and the flipped ids logged.
pub fn extract(c: &Common, data: &Path) -> Result<()> {
    let p: ExtractParams = resolve(&ExtractParams::default(), c.config.as_deref())?;
    let out = out_dir(c)?;
    freeze(out, "extract", c.seed, &[("data", data)], &p)?;
    let ds = io::load_dataset(data)?;
    let mut patches = pipeline::extract_patches(&ds, &p.extract)?;
    patching::split_dataset(&mut patches, p.train_ratio, c.seed)?;
    if ds.config.label_noise > 0.0 {
        let oracle = synth::plant_noise(&mut patches, ds.config.label_noise, c.seed)?;
        io::write_json(&out.join("noise_oracle.json"), &oracle)?;
    }
    io::save_patches(&PatchFiles::in_dir(out), &patches, &p.extract.fusion)?;
    info!("extracted {} patches", patches.len());
    Ok(())
}

fn load_patches(dir: &Path) -> Result<Vec<PatchRecord>> {
    io::load_patches(&PatchFiles::in_dir(dir))
}

/// Command-line overrides of the search parameters.
#[derive(Debug, Clone, Default)]
pub struct SearchFlags {
    pub max_iter: Option<usize>,
    pub grid: Option<usize>,
    pub shrink: Option<f64>,
    pub tol: Option<f64>,
}

const HEATMAP_STEPS: usize = 40;

pub fn search(c: &Common, patches_dir: &Path, flags: &SearchFlags) -> Result<()> {
    let mut cfg: SearchConfig = resolve(&SearchConfig::default(), c.config.as_deref())?;
    if let Some(v) = flags.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = flags.grid {
        cfg.grid = v;
    }
    if let Some(v) = flags.shrink {
        cfg.shrink = v;
    }
    if let Some(v) = flags.tol {
        cfg.tol = v;
    }
    let out = out_dir(c)?;
    freeze(out, "search", c.seed, &[("patches", patches_dir)], &cfg)?;
    let patches = load_patches(patches_dir)?;
    let result = pipeline::search_train(&patches, &cfg)?;
    io::write_json(&out.join("search.json"), &result)?;
    io::write_csv(&out.join("search_trace.csv"), &result.trace)?;

    let train: Vec<PatchRecord> = patches.into_iter().filter(|p| p.split == Split::Train).collect();
    let (scores, gt) = pipeline::scores_and_labels(&train)?;
    let index = ScoreIndex::new(&scores, &gt, cfg.lambda)?;
    let mut cells = Vec::new();
    for i in 0..=HEATMAP_STEPS {
        for j in i..=HEATMAP_STEPS {
            let (low, high) = (i as f64 / HEATMAP_STEPS as f64, j as f64 / HEATMAP_STEPS as f64);
            if let Ok(objective) = index.objective(low, high) {
                cells.push(HeatmapCell { low, high, objective });
            }
        }
    }
    io::write_csv_with_header(&out.join("heatmap.csv"), &["low", "high", "objective"], &cells)?;
    info!(
        "thresholds ({:.4}, {:.4}), objective {:.4}",
        result.thresholds.low, result.thresholds.high, result.objective
    );
    Ok(())
}

fn load_search(path: &Path) -> Result<octx::fdtgs::SearchResult> {
    io::read_json(path)
}

pub fn train(c: &Common, patches_dir: &Path, search_file: &Path) -> Result<()> {
    let cfg: TrainConfig = resolve(&TrainConfig::default(), c.config.as_deref())?;
    let out = out_dir(c)?;
    freeze(out, "train", c.seed, &[("patches", patches_dir), ("search", search_file)], &cfg)?;
    let patches = load_patches(patches_dir)?;
    let s = load_search(search_file)?;
    let (_, rp, ns) = pipeline::reliable_sets(&patches, s.thresholds.low, s.thresholds.high)?;
    let model = pipeline::fit_model(&rp, &ns, &cfg, c.seed)?;
    io::save_model(&out.join("model.json"), &ModelFile::new(model, c.seed))?;
    info!("trained on {} reliable positives and {} reliable negatives", rp.len(), ns.len());
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AgentParams {
    pub agent: AgentConfig,
    /// Used with `--noise`: the planted-noise benchmark drawn from the
    /// training patches.
    pub benchmark: BenchmarkConfig,
}

#[derive(Debug, Serialize)]
struct AgentSummary {
    summary: Vec<agent::StreamSummary>,
    train_size: usize,
    moved_by_pl: usize,
    moved_by_nl: usize,
    noisy_moved: Option<usize>,
}

/// Runs the cleaning agent either on the FDT-GS reliable sets (`--search`) or
/// on a planted-noise benchmark (`--noise`).
pub fn agent(c: &Common, patches_dir: &Path, search_file: Option<&Path>, noise: Option<f64>, epochs: Option<usize>) -> Result<()> {
    let mut p: AgentParams = resolve(&AgentParams::default(), c.config.as_deref())?;
    p.agent.seed = c.seed;
    p.benchmark.seed = c.seed;
    if let Some(e) = epochs {
        p.agent.epochs = e;
    }
    if let Some(r) = noise {
        p.benchmark.noise_rate = r;
    }
    let out = out_dir(c)?;
    let mut inputs = vec![("patches", patches_dir)];
    if let Some(s) = search_file {
        inputs.push(("search", s));
    }
    freeze(out, "agent", c.seed, &inputs, &p)?;
    let patches = load_patches(patches_dir)?;
    let train: Vec<PatchRecord> = patches.into_iter().filter(|p| p.split == Split::Train).collect();

    let (rp, ns, oracle) = match (noise, search_file) {
        (Some(_), _) => {
            let b = agent::noisy_benchmark(&train, &p.benchmark)?;
            io::write_json(&out.join("noise_oracle.json"), &b.oracle)?;
            (b.rp, b.ns, Some(b.oracle))
        }
        (None, Some(s)) => {
            let s = load_search(s)?;
            let (_, rp, ns) = pipeline::reliable_sets(&train, s.thresholds.low, s.thresholds.high)?;
            let inst = |v: Vec<(u64, octx::twin::TwinFeatures)>| v.into_iter().map(|(id, twin)| Instance { id, twin }).collect::<Vec<_>>();
            (inst(rp), inst(ns), None)
        }
        (None, None) => return Err(Error::Parameter("agent needs --search or --noise".into())),
    };
    let state = agent::init_sets(&rp, &ns, &p.agent)?;
    let train_size = state.train_len();
    let run = agent::run_agent(state, &LinearSoftmax::init(p.agent.classifier.seed ^ c.seed), &p.agent)?;
    io::write_csv_with_header(&out.join("agent_trace.csv"), &["epoch", "stream", "removed", "f1", "reward"], &run.trace)?;
    io::write_json(&out.join("cleaned_set.json"), &run.cleaned)?;
    io::save_model(&out.join("model.json"), &ModelFile::new(run.model.clone(), c.seed))?;
    let noisy_moved = oracle.map(|o| {
        let flipped: std::collections::BTreeSet<u64> = o.flipped.into_iter().collect();
        run.cleaned
            .moved_by_pl
            .iter()
            .chain(&run.cleaned.moved_by_nl)
            .filter(|id| flipped.contains(id))
            .count()
    });
    let summary = AgentSummary {
        summary: run.summary.to_vec(),
        train_size,
        moved_by_pl: run.cleaned.moved_by_pl.len(),
        moved_by_nl: run.cleaned.moved_by_nl.len(),
        noisy_moved,
    };
    io::write_json(&out.join("agent_summary.json"), &summary)?;
    for s in &run.summary {
        info!("{}: F1 {:.4} -> {:.4}", s.stream, s.baseline_f1, s.final_f1);
    }
    Ok(())
}

pub fn infer(c: &Common, patches_dir: &Path, model_file: &Path) -> Result<()> {
    let out = out_dir(c)?;
    freeze(out, "infer", c.seed, &[("patches", patches_dir), ("model", model_file)], &())?;
    let patches = load_patches(patches_dir)?;
    let m = io::load_model(model_file)?;
    let preds = pipeline::predict_test(&m.model, &patches)?;
    let rows: Vec<PredictionRow> = preds
        .iter()
        .map(|p| PredictionRow {
            patch_id: p.patch_id,
            frame_id: p.frame_id,
            score: p.twin.positive_score(),
            pred: u8::from(p.twin.fused.is_positive()),
            label: u8::from(p.label),
        })
        .collect();
    io::write_csv_with_header(&out.join("predictions.csv"), &["patch_id", "frame_id", "score", "pred", "label"], &rows)?;
    info!("{} test predictions", rows.len());
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluationReport {
    confusion: octx::metrics::Confusion,
    report: octx::metrics::MetricReport,
}

fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let rows: Vec<PredictionRow> = io::read_csv(path)?;
    for (k, r) in rows.iter().enumerate() {
        if r.pred > 1 || r.label > 1 {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: k + 2,
                msg: "pred and label must be 0 or 1".into(),
            });
        }
    }
    Ok(rows)
}

pub fn evaluate(c: &Common, predictions: &Path) -> Result<()> {
    let out = out_dir(c)?;
    freeze(out, "evaluate", c.seed, &[("predictions", predictions)], &())?;
    let rows = read_predictions(predictions)?;
    let triples: Vec<(f64, bool, bool)> = rows.iter().map(|r| (r.score, r.pred == 1, r.label == 1)).collect();
    let (confusion, report, roc) = pipeline::evaluate(&triples)?;
    io::write_json(&out.join("report.json"), &EvaluationReport { confusion, report: report.clone() })?;
    io::write_csv(&out.join("roc.csv"), &roc)?;
    info!("accuracy {:.4}, AUC {:.4}", report.accuracy, report.auc.unwrap_or(f64::NAN));
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimlinkParams {
    pub link: LinkConfig,
    /// Shipped trace used when no `--trace` file is given.
    pub fixture: String,
}

impl Default for SimlinkParams {
    fn default() -> Self {
        Self {
            link: LinkConfig::default(),
            fixture: "fading".into(),
        }
    }
}

fn fixture(name: &str) -> Result<ChannelTrace> {
    multirate::fixture_suite()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| t)
        .ok_or_else(|| {
            let names: Vec<&str> = multirate::fixture_suite().iter().map(|(n, _)| *n).collect();
            Error::Parameter(format!("unknown trace fixture {name:?}; known: {}", names.join(", ")))
        })
}

fn load_table(path: Option<&Path>) -> Result<SchemeTable> {
    match path {
        Some(p) => {
            let t: SchemeTable = io::read_json(p)?;
            SchemeTable::new(t.schemes)
        }
        None => Ok(SchemeTable::default_table()),
    }
}

pub fn simlink(c: &Common, trace_file: Option<&Path>, fixture_name: Option<&str>, schemes: Option<&Path>) -> Result<()> {
    let mut p: SimlinkParams = resolve(&SimlinkParams::default(), c.config.as_deref())?;
    if let Some(f) = fixture_name {
        p.fixture = f.to_string();
    }
    let out = out_dir(c)?;
    let mut inputs = Vec::new();
    if let Some(t) = trace_file {
        inputs.push(("trace", t));
    }
    if let Some(s) = schemes {
        inputs.push(("schemes", s));
    }
    freeze(out, "simlink", c.seed, &inputs, &p)?;
    let trace = match trace_file {
        Some(path) => ChannelTrace::new(io::read_csv::<TraceSample>(path)?)?,
        None => fixture(&p.fixture)?,
    };
    let table = load_table(schemes)?;
    let outcome = multirate::run_link(&trace, &table, &p.link, c.seed)?;
    io::write_csv(&out.join("snr_trace.csv"), trace.samples())?;
    io::write_json(&out.join("scheme_table.json"), &table)?;
    io::write_csv(&out.join("link_events.csv"), &outcome.log)?;
    io::write_json(&out.join("link_state.json"), &outcome.state)?;
    info!(
        "goodput {:.0} bit/s, {} switches",
        outcome.state.goodput_bps(),
        outcome.state.switch_count
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepParams {
    pub link: LinkConfig,
    pub seeds: u64,
    pub traces: Vec<String>,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            link: LinkConfig::default(),
            seeds: 10,
            traces: multirate::fixture_suite().iter().map(|(n, _)| n.to_string()).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    trace: String,
    config: String,
    fps: f64,
    accuracy: f64,
    index: f64,
}

/// Frame-level correctness from a predictions file, frames in id order.
pub fn frame_scores(rows: &[PredictionRow]) -> FrameScores {
    let mut by_frame: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for r in rows {
        let e = by_frame.entry(r.frame_id).or_default();
        e.0 += u64::from(r.pred == r.label);
        e.1 += 1;
    }
    FrameScores {
        correct: by_frame.values().map(|v| v.0).collect(),
        total: by_frame.values().map(|v| v.1).collect(),
    }
}

pub fn sweep(c: &Common, predictions: &Path, schemes: Option<&Path>) -> Result<()> {
    let p: SweepParams = resolve(&SweepParams::default(), c.config.as_deref())?;
    let out = out_dir(c)?;
    let mut inputs = vec![("predictions", predictions)];
    if let Some(s) = schemes {
        inputs.push(("schemes", s));
    }
    freeze(out, "sweep", c.seed, &inputs, &p)?;
    let scores = frame_scores(&read_predictions(predictions)?);
    let table = load_table(schemes)?;
    let configs = multirate::standard_configs(&table, &p.link);
    let reference = multirate::peak_fps(&table, &p.link);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for name in &p.traces {
        let trace = fixture(name)?;
        let mut acc: BTreeMap<usize, (f64, f64, f64)> = BTreeMap::new();
        for s in 0..p.seeds {
            let r = multirate::speed_accuracy_sweep(&scores, name, &trace, &table, &configs, reference, c.seed + s)?;
            for (k, row) in r.iter().enumerate() {
                let e = acc.entry(k).or_default();
                e.0 += row.fps;
                e.1 += row.accuracy;
                e.2 += row.index;
            }
            rows.extend(r);
        }
        let n = p.seeds.max(1) as f64;
        for (k, (fps, a, i)) in acc {
            summary.push(SweepSummary {
                trace: name.clone(),
                config: configs[k].0.clone(),
                fps: fps / n,
                accuracy: a / n,
                index: i / n,
            });
        }
    }
    io::write_csv_with_header(&out.join("sweep.csv"), &["config", "trace", "seed", "fps", "accuracy", "index"], &rows)?;
    io::write_json(&out.join("sweep_summary.json"), &summary)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    Roc,
    Heatmap,
    SearchTrace,
    Sweep,
    AgentTrace,
    Snr,
}

impl PlotKind {
    fn detect(header: &[String]) -> Option<Self> {
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        match h.as_slice() {
            ["threshold", "fpr", "tpr"] => Some(Self::Roc),
            ["low", "high", "objective"] => Some(Self::Heatmap),
            ["iteration", "peak_value", "low_retrieval", "high_retrieval"] => Some(Self::SearchTrace),
            ["config", "trace", "seed", "fps", "accuracy", "index"] => Some(Self::Sweep),
            ["epoch", "stream", "removed", "f1", "reward"] => Some(Self::AgentTrace),
            ["t", "snr_db"] => Some(Self::Snr),
            _ => None,
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    path: PathBuf,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut r = csv::Reader::from_reader(file);
        let header = r.headers()?.iter().map(str::to_owned).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self {
            header,
            rows,
            path: path.to_path_buf(),
        })
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).expect("header checked by kind")
    }

    fn num(&self, row: usize, name: &str) -> Result<f64> {
        let v = &self.rows[row][self.col(name)];
        if v.is_empty() {
            return Ok(f64::NAN);
        }
        v.parse().map_err(|_| Error::Malformed {
            path: self.path.clone(),
            line: row + 2,
            msg: format!("{name} is not a number: {v:?}"),
        })
    }

    fn text(&self, row: usize, name: &str) -> &str {
        &self.rows[row][self.col(name)]
    }

    fn xy(&self, x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
        (0..self.rows.len()).map(|r| Ok((self.num(r, x)?, self.num(r, y)?))).collect()
    }
}

pub fn plot(c: &Common, input: &Path, kind: Option<PlotKind>) -> Result<()> {
    let out = out_dir(c)?;
    let t = Table::read(input)?;
    let kind = match kind.or_else(|| PlotKind::detect(&t.header)) {
        Some(k) => k,
        None => {
            return Err(Error::Malformed {
                path: input.to_path_buf(),
                line: 1,
                msg: format!("cannot tell what to plot from header {}", t.header.join(",")),
            })
        }
    };
    if PlotKind::detect(&t.header) != Some(kind) {
        return Err(Error::Malformed {
            path: input.to_path_buf(),
            line: 1,
            msg: format!("header {} does not fit a {kind:?} plot", t.header.join(",")),
        });
    }
    let svg = match kind {
        PlotKind::Roc => {
            let mut pts = t.xy("fpr", "tpr")?;
            pts.insert(0, (0.0, 0.0));
            let series = [
                Series { name: "ROC".into(), points: pts },
                Series { name: "chance".into(), points: vec![(0.0, 0.0), (1.0, 1.0)] },
            ];
            plot::line_chart("ROC", "false positive rate", "true positive rate", &series, Some(((0.0, 1.0), (0.0, 1.0))))
        }
        PlotKind::Heatmap => {
            let cells = (0..t.rows.len())
                .map(|r| Ok((t.num(r, "low")?, t.num(r, "high")?, t.num(r, "objective")?)))
                .collect::<Result<Vec<_>>>()?;
            plot::heatmap("FDT-GS objective", "low threshold", "high threshold", &cells)
        }
        PlotKind::SearchTrace => {
            let series = [
                Series { name: "objective".into(), points: t.xy("iteration", "peak_value")? },
                Series { name: "low".into(), points: t.xy("iteration", "low_retrieval")? },
                Series { name: "high".into(), points: t.xy("iteration", "high_retrieval")? },
            ];
            plot::line_chart("FDT-GS search", "iteration", "value", &series, None)
        }
        PlotKind::AgentTrace => {
            let mut by: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for r in 0..t.rows.len() {
                by.entry(format!("{} F1", t.text(r, "stream")))
                    .or_default()
                    .push((t.num(r, "epoch")?, t.num(r, "f1")?));
            }
            let series: Vec<Series> = by.into_iter().map(|(name, points)| Series { name, points }).collect();
            plot::line_chart("Agent", "epoch", "validation F1", &series, None)
        }
        PlotKind::Snr => plot::line_chart(
            "Channel",
            "time (s)",
            "SNR (dB)",
            &[Series { name: "SNR".into(), points: t.xy("t", "snr_db")? }],
            None,
        ),
        PlotKind::Sweep => {
            // per configuration: mean (fps, accuracy) on each trace, by fps
            let mut acc: BTreeMap<String, BTreeMap<String, (f64, f64, f64)>> = BTreeMap::new();
            for r in 0..t.rows.len() {
                let e = acc
                    .entry(t.text(r, "config").to_string())
                    .or_default()
                    .entry(t.text(r, "trace").to_string())
                    .or_default();
                e.0 += t.num(r, "fps")?;
                e.1 += t.num(r, "accuracy")?;
                e.2 += 1.0;
            }
            let series: Vec<Series> = acc
                .into_iter()
                .map(|(name, traces)| {
                    let mut points: Vec<(f64, f64)> = traces.values().map(|(f, a, n)| (f / n, a / n)).collect();
                    points.sort_by(|a, b| a.0.total_cmp(&b.0));
                    Series { name, points }
                })
                .collect();
            plot::line_chart("Speed vs accuracy", "delivered frames per second", "accuracy", &series, None)
        }
    };
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let path = out.join(format!("{stem}.svg"));
    std::fs::write(&path, svg).map_err(|e| Error::Io { path, source: e })
}
