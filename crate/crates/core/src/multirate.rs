//! Discrete-event model of an SNR-feedback adaptive modulation link.
//!
//! The receiver reports the channel SNR every `feedback_period`; the
//! transmitter switches to the scheme chosen from that report after
//! `latency`. Frames go out back to back (or as a capture source produces
//! them) and a frame in flight is never interrupted. Each frame is dropped
//! with a probability given by the active scheme's error model at the SNR
//! seen when it starts.
//!
//! Times are seconds and compared with a 1e-9 tolerance.

use std::collections::VecDeque;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::rng;

const EPS: f64 = 1e-9;

/// Drop probability as a function of the margin `m = snr − min_snr` (dB):
/// 1 below threshold, `p0·exp(−m/roll_db) + floor` up to `cutoff_db`, and
/// `floor` beyond it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub p0: f64,
    pub roll_db: f64,
    pub cutoff_db: f64,
    pub floor: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self {
            p0: 0.1,
            roll_db: 1.5,
            cutoff_db: 6.0,
            floor: 0.0,
        }
    }
}

impl ErrorModel {
    pub fn probability(&self, margin_db: f64) -> f64 {
        if margin_db < 0.0 {
            1.0
        } else if margin_db >= self.cutoff_db {
            self.floor.min(1.0)
        } else {
            (self.p0 * (-margin_db / self.roll_db).exp() + self.floor).min(1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationScheme {
    pub name: String,
    pub bits_per_symbol: u32,
    pub min_snr_db: f64,
    pub error: ErrorModel,
}

/// Schemes sorted by rate, with strictly increasing bits per symbol and
/// SNR thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeTable {
    pub schemes: Vec<ModulationScheme>,
}

impl SchemeTable {
    pub fn new(schemes: Vec<ModulationScheme>) -> Result<Self> {
        if schemes.is_empty() {
            return Err(Error::Parameter("scheme table is empty".into()));
        }
        for s in &schemes {
            if s.bits_per_symbol == 0 {
                return Err(Error::Parameter(format!("scheme {} has zero bits per symbol", s.name)));
            }
        }
        for w in schemes.windows(2) {
            if !(w[1].bits_per_symbol > w[0].bits_per_symbol && w[1].min_snr_db > w[0].min_snr_db) {
                return Err(Error::Parameter(format!(
                    "schemes {} and {} are not strictly ordered by rate and threshold",
                    w[0].name, w[1].name
                )));
            }
        }
        Ok(Self { schemes })
    }

    /// BPSK, QPSK, 16-QAM and 64-QAM at 3, 8, 14 and 20 dB.
    pub fn default_table() -> Self {
        let mk = |name: &str, bits, snr| ModulationScheme {
            name: name.into(),
            bits_per_symbol: bits,
            min_snr_db: snr,
            error: ErrorModel::default(),
        };
        Self {
            schemes: vec![
                mk("BPSK", 1, 3.0),
                mk("QPSK", 2, 8.0),
                mk("16QAM", 4, 14.0),
                mk("64QAM", 6, 20.0),
            ],
        }
    }

    /// A table that only uses the lower schemes, for traffic that values
    /// delivery over rate.
    pub fn conservative() -> Self {
        let mut t = Self::default_table();
        t.schemes.truncate(2);
        t
    }

    pub fn len(&self) -> usize {
        self.schemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemes.is_empty()
    }

    pub fn get(&self, i: usize) -> &ModulationScheme {
        &self.schemes[i]
    }
}

/// Index of the scheme to use after a report of `snr_db` while `current` is
/// in use. Downgrades happen as soon as the current threshold is missed;
/// upgrades need `hysteresis_db` of headroom above the new threshold. Below
/// every threshold the lowest scheme is used.
pub fn select_scheme(table: &SchemeTable, snr_db: f64, current: usize, hysteresis_db: f64) -> usize {
    let current = current.min(table.len() - 1);
    let best = table
        .schemes
        .iter()
        .rposition(|s| s.min_snr_db <= snr_db)
        .unwrap_or(0);
    if best < current {
        return best;
    }
    let upgrade = table
        .schemes
        .iter()
        .rposition(|s| s.min_snr_db + hysteresis_db <= snr_db)
        .unwrap_or(0);
    upgrade.max(current)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub snr_db: f64,
}

/// Sample-and-hold SNR over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTrace {
    samples: Vec<TraceSample>,
}

impl ChannelTrace {
    pub fn new(samples: Vec<TraceSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if let Some(s) = samples.iter().find(|s| !s.t.is_finite() || !s.snr_db.is_finite()) {
            return Err(Error::Parameter(format!("non-finite trace sample at t = {}", s.t)));
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::Parameter(format!(
                "trace times must increase strictly, got {} after {}",
                w[1].t, w[0].t
            )));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    /// SNR of the last sample at or before `t` (the first one before the
    /// trace starts).
    pub fn at(&self, t: f64) -> f64 {
        let k = self.samples.partition_point(|s| s.t <= t + EPS);
        self.samples[k.saturating_sub(1)].snr_db
    }

    pub fn constant(snr_db: f64, duration: f64) -> Result<Self> {
        Self::new(vec![
            TraceSample { t: 0.0, snr_db },
            TraceSample { t: duration, snr_db },
        ])
    }

    /// Piecewise-constant trace: `levels[k]` holds for `segment` seconds.
    pub fn piecewise(levels: &[f64], segment: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let mut samples: Vec<TraceSample> = levels
            .iter()
            .enumerate()
            .map(|(k, &snr_db)| TraceSample {
                t: k as f64 * segment,
                snr_db,
            })
            .collect();
        samples.push(TraceSample {
            t: levels.len() as f64 * segment,
            snr_db: levels[levels.len() - 1],
        });
        Self::new(samples)
    }

    /// Linear sweep sampled every `dt`.
    pub fn ramp(from_db: f64, to_db: f64, duration: f64, dt: f64) -> Result<Self> {
        let n = (duration / dt).round() as usize;
        if n == 0 {
            return Err(Error::Parameter("ramp needs at least one step".into()));
        }
        Self::new(
            (0..=n)
                .map(|k| TraceSample {
                    t: k as f64 * dt,
                    snr_db: from_db + (to_db - from_db) * k as f64 / n as f64,
                })
                .collect(),
        )
    }

    /// Seeded Gaussian random walk with step `sigma_db`, reflected into
    /// `[lo, hi]`, sampled every `dt`.
    pub fn fading(start_db: f64, sigma_db: f64, bounds: (f64, f64), duration: f64, dt: f64, seed: u64) -> Result<Self> {
        let (lo, hi) = bounds;
        if !(lo < hi) || !(sigma_db >= 0.0) {
            return Err(Error::Parameter("fading needs lo < hi and sigma >= 0".into()));
        }
        let n = (duration / dt).round() as usize;
        let normal = Normal::new(0.0, sigma_db).map_err(|e| Error::Parameter(e.to_string()))?;
        let mut r = rng::seeded(seed, rng::streams::TRACE);
        let mut snr = start_db.clamp(lo, hi);
        let mut samples = Vec::with_capacity(n + 1);
        for k in 0..=n {
            samples.push(TraceSample { t: k as f64 * dt, snr_db: snr });
            snr += normal.sample(&mut r);
            if snr > hi {
                snr = 2.0 * hi - snr;
            }
            if snr < lo {
                snr = 2.0 * lo - snr;
            }
            snr = snr.clamp(lo, hi);
        }
        Self::new(samples)
    }
}

/// The shipped trace suite. Segment lengths are whole multiples of the
/// default feedback period.
pub fn fixture_suite() -> Vec<(&'static str, ChannelTrace)> {
    vec![
        ("constant_high", ChannelTrace::constant(26.0, 2.0).expect("valid")),
        ("constant_low", ChannelTrace::constant(10.0, 2.0).expect("valid")),
        ("step_down", ChannelTrace::piecewise(&[26.0, 10.0], 1.0).expect("valid")),
        ("step_up", ChannelTrace::piecewise(&[5.0, 17.0], 1.0).expect("valid")),
        ("staircase", ChannelTrace::piecewise(&[26.0, 17.0, 10.0, 5.0, 17.0, 26.0], 0.5).expect("valid")),
        ("ramp", ChannelTrace::ramp(2.0, 28.0, 4.0, 0.05).expect("valid")),
        ("fading", fading_fixture(0)),
    ]
}

pub fn fading_fixture(seed: u64) -> ChannelTrace {
    ChannelTrace::fading(15.0, 1.5, (0.0, 30.0), 10.0, 0.05, seed).expect("valid fading parameters")
}

pub fn is_piecewise_constant(name: &str) -> bool {
    name.starts_with("constant") || name.starts_with("step") || name == "staircase"
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinkMode {
    Adaptive,
    /// Always the scheme at this table index.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub mode: LinkMode,
    pub frame_bits: u64,
    pub symbol_rate: f64,
    /// Seconds between receiver reports, the first at the trace start.
    /// Infinite means no reports, so the link keeps its initial scheme.
    pub feedback_period: f64,
    pub hysteresis_db: f64,
    pub latency: f64,
    /// Treat the error model as a per-symbol probability instead of per
    /// frame.
    pub per_symbol: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            mode: LinkMode::Adaptive,
            frame_bits: 60_000,
            symbol_rate: 1.0e6,
            feedback_period: 0.05,
            hysteresis_db: 0.0,
            latency: 0.0,
            per_symbol: false,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self, table: &SchemeTable) -> Result<()> {
        if self.frame_bits == 0 {
            return Err(Error::Parameter("frame size must be positive".into()));
        }
        if !(self.symbol_rate > 0.0 && self.symbol_rate.is_finite()) {
            return Err(Error::Parameter(format!("symbol rate must be positive, got {}", self.symbol_rate)));
        }
        if !(self.feedback_period > 0.0) {
            return Err(Error::Parameter(format!(
                "feedback period must be positive, got {}",
                self.feedback_period
            )));
        }
        if !(self.latency >= 0.0 && self.latency.is_finite()) || !(self.hysteresis_db >= 0.0) {
            return Err(Error::Parameter("latency and hysteresis must be non-negative".into()));
        }
        if let LinkMode::Fixed(i) = self.mode {
            if i >= table.len() {
                return Err(Error::Parameter(format!("fixed scheme {i} is outside the table")));
            }
        }
        Ok(())
    }

    fn frame_time(&self, scheme: &ModulationScheme) -> f64 {
        self.frame_bits as f64 / (scheme.bits_per_symbol as f64 * self.symbol_rate)
    }

    fn drop_probability(&self, scheme: &ModulationScheme, snr_db: f64) -> f64 {
        let p = scheme.error.probability(snr_db - scheme.min_snr_db);
        if self.per_symbol {
            let symbols = (self.frame_bits as f64 / scheme.bits_per_symbol as f64).ceil();
            1.0 - (1.0 - p).powf(symbols)
        } else {
            p
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Start,
    Report,
    Switch,
    End,
}

/// One event-log row. `frames` and `delivered` are running totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEvent {
    pub t: f64,
    pub event: EventKind,
    pub scheme: String,
    pub frames: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub active_scheme: usize,
    pub hysteresis_db: f64,
    pub switch_latency: f64,
    pub goodput_bits: u64,
    pub frames_sent: u64,
    pub frames_delivered: u64,
    pub switch_count: u64,
    pub duration: f64,
    /// Mean time from capture to delivery-or-loss; only defined for a
    /// capture source.
    pub mean_delay: Option<f64>,
}

impl LinkState {
    pub fn goodput_bps(&self) -> f64 {
        if self.duration > 0.0 {
            self.goodput_bits as f64 / self.duration
        } else {
            0.0
        }
    }

    pub fn delivered_fps(&self) -> f64 {
        if self.duration > 0.0 {
            self.frames_delivered as f64 / self.duration
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    pub state: LinkState,
    pub log: Vec<LinkEvent>,
    /// Delivery flag of every transmitted frame, in order.
    pub deliveries: Vec<bool>,
}

fn simulate(
    trace: &ChannelTrace,
    table: &SchemeTable,
    cfg: &LinkConfig,
    capture_fps: Option<f64>,
    rng: &mut rng::Rng,
) -> Result<LinkOutcome> {
    cfg.validate(table)?;
    if let Some(fps) = capture_fps {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::Parameter(format!("capture rate must be positive, got {fps}")));
        }
    }
    let (t0, t_end) = (trace.start(), trace.end());
    let adaptive = cfg.mode == LinkMode::Adaptive;
    let mut active = match cfg.mode {
        LinkMode::Adaptive => 0,
        LinkMode::Fixed(i) => i,
    };
    let mut requested = active;
    let mut next_report = if adaptive && cfg.feedback_period.is_finite() {
        Some(0u64)
    } else {
        None
    };
    let mut pending: VecDeque<(f64, usize)> = VecDeque::new();
    let mut log = vec![LinkEvent {
        t: t0,
        event: EventKind::Start,
        scheme: table.get(active).name.clone(),
        frames: 0,
        delivered: 0,
    }];
    let mut deliveries = Vec::new();
    let (mut goodput, mut sent, mut delivered, mut switches) = (0u64, 0u64, 0u64, 0u64);
    let mut backlog: VecDeque<f64> = VecDeque::new();
    let mut next_capture = 0u64;
    let mut delay_sum = 0.0;
    let mut t = t0;

    loop {
        // Let the source catch up; an empty queue idles the link until the
        // next capture.
        if let Some(fps) = capture_fps {
            loop {
                let at = t0 + next_capture as f64 / fps;
                if at <= t + EPS && at <= t_end + EPS {
                    backlog.push_back(at);
                    next_capture += 1;
                } else {
                    break;
                }
            }
            if backlog.is_empty() {
                let at = t0 + next_capture as f64 / fps;
                if at > t_end + EPS {
                    break;
                }
                t = at;
                continue;
            }
        }
        while let Some(j) = next_report {
            let at = t0 + j as f64 * cfg.feedback_period;
            if at > t + EPS || at > t_end + EPS {
                break;
            }
            let choice = select_scheme(table, trace.at(at), requested, cfg.hysteresis_db);
            log.push(LinkEvent {
                t: at,
                event: EventKind::Report,
                scheme: table.get(choice).name.clone(),
                frames: sent,
                delivered,
            });
            if choice != requested {
                requested = choice;
                pending.push_back((at + cfg.latency, choice));
            }
            next_report = Some(j + 1);
        }
        while let Some(&(at, s)) = pending.front() {
            if at > t + EPS {
                break;
            }
            pending.pop_front();
            if s != active {
                active = s;
                switches += 1;
                log.push(LinkEvent {
                    t: at.max(t),
                    event: EventKind::Switch,
                    scheme: table.get(active).name.clone(),
                    frames: sent,
                    delivered,
                });
            }
        }
        let scheme = table.get(active);
        let d = cfg.frame_time(scheme);
        if t + d > t_end + EPS {
            break;
        }
        let p = cfg.drop_probability(scheme, trace.at(t));
        let ok = rng.random::<f64>() >= p;
        sent += 1;
        if ok {
            delivered += 1;
            goodput += cfg.frame_bits;
        }
        deliveries.push(ok);
        t += d;
        if capture_fps.is_some() {
            let captured = backlog.pop_front().expect("backlog checked above");
            delay_sum += t - captured;
        }
    }
    log.push(LinkEvent {
        t: t_end,
        event: EventKind::End,
        scheme: table.get(active).name.clone(),
        frames: sent,
        delivered,
    });
    Ok(LinkOutcome {
        state: LinkState {
            active_scheme: active,
            hysteresis_db: cfg.hysteresis_db,
            switch_latency: cfg.latency,
            goodput_bits: goodput,
            frames_sent: sent,
            frames_delivered: delivered,
            switch_count: switches,
            duration: t_end - t0,
            mean_delay: capture_fps.map(|_| if sent > 0 { delay_sum / sent as f64 } else { 0.0 }),
        },
        log,
        deliveries,
    })
}

/// Runs a saturated source over the whole trace.
pub fn run_link(trace: &ChannelTrace, table: &SchemeTable, cfg: &LinkConfig, seed: u64) -> Result<LinkOutcome> {
    let mut r = rng::seeded(seed, rng::streams::LINK);
    simulate(trace, table, cfg, None, &mut r)
}

/// One class's traffic: its scheme table and, optionally, the rate at which
/// its frames are captured. Without a capture rate the source is saturated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTraffic {
    pub class: String,
    pub table: SchemeTable,
    pub capture_fps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResult {
    pub class: String,
    pub state: LinkState,
}

/// Each class gets its own link over the shared trace. Class `k` draws from
/// its own stream; class 0 uses the same stream as [`run_link`], so a single
/// saturated class reproduces it exactly.
pub fn per_class_run(classes: &[ClassTraffic], trace: &ChannelTrace, cfg: &LinkConfig, seed: u64) -> Result<Vec<ClassResult>> {
    if classes.is_empty() {
        return Err(Error::Parameter("at least one class stream is required".into()));
    }
    classes
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let mut r = rng::seeded(seed, rng::streams::LINK | ((k as u64) << 16));
            let out = simulate(trace, &c.table, cfg, c.capture_fps, &mut r)?;
            Ok(ClassResult {
                class: c.class.clone(),
                state: out.state,
            })
        })
        .collect()
}

/// Patch-level correctness per test frame; frame `k` of a link carries test
/// frame `k mod n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScores {
    pub correct: Vec<u64>,
    pub total: Vec<u64>,
}

impl FrameScores {
    pub fn offline_accuracy(&self) -> f64 {
        let c: u64 = self.correct.iter().sum();
        let t: u64 = self.total.iter().sum();
        if t == 0 {
            0.0
        } else {
            c as f64 / t as f64
        }
    }

    /// Patch accuracy pooled over the delivered frames, or `None` when
    /// nothing was delivered.
    pub fn delivered_accuracy(&self, deliveries: &[bool]) -> Option<f64> {
        let n = self.total.len();
        if n == 0 {
            return None;
        }
        let (mut c, mut t) = (0u64, 0u64);
        for (k, _) in deliveries.iter().enumerate().filter(|(_, d)| **d) {
            c += self.correct[k % n];
            t += self.total[k % n];
        }
        (t > 0).then(|| c as f64 / t as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: String,
    pub trace: String,
    pub seed: u64,
    pub fps: f64,
    pub accuracy: f64,
    pub index: f64,
}

/// Runs every named link configuration over the trace and scores the
/// delivered stream: `fps` counts delivered frames per second, `accuracy` is
/// taken over the delivered frames, and `index` is the speed-performance
/// index against `reference_fps`.
pub fn speed_accuracy_sweep(
    scores: &FrameScores,
    trace_name: &str,
    trace: &ChannelTrace,
    table: &SchemeTable,
    configs: &[(String, LinkConfig)],
    reference_fps: f64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    configs
        .iter()
        .map(|(name, cfg)| {
            let out = run_link(trace, table, cfg, seed)?;
            let fps = out.state.delivered_fps();
            let accuracy = scores.delivered_accuracy(&out.deliveries).unwrap_or(0.0);
            let index = if fps > 0.0 {
                metrics::speed_performance_index(accuracy, fps, reference_fps)?
            } else {
                0.0
            };
            Ok(SweepRow {
                config: name.clone(),
                trace: trace_name.to_string(),
                seed,
                fps,
                accuracy,
                index,
            })
        })
        .collect()
}

/// The adaptive link plus one fixed link per scheme, all otherwise equal to
/// `base`.
pub fn standard_configs(table: &SchemeTable, base: &LinkConfig) -> Vec<(String, LinkConfig)> {
    let mut out = vec![(
        "adaptive".to_string(),
        LinkConfig {
            mode: LinkMode::Adaptive,
            ..*base
        },
    )];
    for (i, s) in table.schemes.iter().enumerate() {
        out.push((
            format!("fixed-{}", s.name),
            LinkConfig {
                mode: LinkMode::Fixed(i),
                ..*base
            },
        ));
    }
    out
}

/// Delivered frame rate of the fastest scheme on a clean channel.
pub fn peak_fps(table: &SchemeTable, cfg: &LinkConfig) -> f64 {
    let top = table.get(table.len() - 1);
    1.0 / cfg.frame_time(top)
}
