//! Reward-driven noise filtering.
//!
//! Two streams work on the same reliable sets. The PL stream hunts for
//! mislabeled positives, the NL stream for mislabeled negatives. Every epoch a
//! stream starts from its original sets, lets its policy pick a removal set Ψ
//! among its target-labelled training instances, moves Ψ to the other class,
//! retrains a classifier and scores it on a validation set the policy has
//! filtered. The change in smoothed F1 is the reward for the removals.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glcm::{sigmoid, FeatureVector, FEATURE_COUNT};
use crate::metrics;
use crate::patching::PatchRecord;
use crate::rng::{self, Rng};
use crate::synth::NoiseOracle;
use crate::twin::{self, PatchClassifier, Standardizer, TrainConfig, TwinFeatures};

/// Length of the F1 smoothing window.
pub const REWARD_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stream {
    PL,
    NL,
}

impl Stream {
    pub const ALL: [Stream; 2] = [Stream::PL, Stream::NL];

    /// Working label of the instances this stream may remove.
    pub fn target_label(self) -> bool {
        self == Stream::PL
    }

    pub fn name(self) -> &'static str {
        match self {
            Stream::PL => "PL",
            Stream::NL => "NL",
        }
    }

    fn rng_stream(self) -> u64 {
        match self {
            Stream::PL => rng::streams::AGENT_PL,
            Stream::NL => rng::streams::AGENT_NL,
        }
    }
}

impl std::fmt::Display for Stream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Majority:minority ratio per stream.
    pub imbalance: usize,
    pub train_ratio: f64,
    pub epochs: usize,
    pub alpha: f64,
    pub policy_lr: f64,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub classifier: TrainConfig,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            imbalance: 10,
            train_ratio: 0.7,
            epochs: 10,
            alpha: 10.0,
            policy_lr: 0.005,
            pretrain_epochs: 300,
            pretrain_lr: 0.5,
            classifier: TrainConfig {
                epochs: 150,
                lr: 0.2,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

/// Policy input: standardized features of `x⁺` plus the working label.
pub const POLICY_INPUTS: usize = FEATURE_COUNT + 1;

/// `π(remove | s) = σ(w·s + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardizer: Standardizer,
}

impl Policy {
    pub const PARAM_COUNT: usize = POLICY_INPUTS + 1;

    pub fn new(standardizer: Standardizer) -> Self {
        Self {
            weights: vec![0.0; POLICY_INPUTS],
            bias: 0.0,
            standardizer,
        }
    }

    pub fn input(&self, f: &FeatureVector, label: bool) -> [f64; POLICY_INPUTS] {
        let mut s = [0.0; POLICY_INPUTS];
        s[..FEATURE_COUNT].copy_from_slice(&self.standardizer.apply(f));
        s[FEATURE_COUNT] = if label { 1.0 } else { -1.0 };
        s
    }

    pub fn remove_prob(&self, f: &FeatureVector, label: bool) -> f64 {
        let s = self.input(f, label);
        sigmoid(self.bias + self.weights.iter().zip(s.iter()).map(|(w, v)| w * v).sum::<f64>())
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), Self::PARAM_COUNT);
        self.weights.copy_from_slice(&p[..POLICY_INPUTS]);
        self.bias = p[POLICY_INPUTS];
    }

    /// Mean weighted log-likelihood `Σ c·(y log π + (1−y) log(1−π)) / n` of
    /// targets `y` (true = remove).
    pub fn log_likelihood(&self, states: &[(FeatureVector, bool)], y: &[bool], weight: &[f64]) -> f64 {
        let n = states.len().max(1) as f64;
        states
            .iter()
            .zip(y)
            .zip(weight)
            .map(|(((f, l), &y), c)| {
                let p = self.remove_prob(f, *l).clamp(1e-300, 1.0 - 1e-16);
                c * if y { p.ln() } else { (1.0 - p).ln() }
            })
            .sum::<f64>()
            / n
    }

    /// Gradient of [`Self::log_likelihood`] in [`Self::params`] layout.
    pub fn gradient(&self, states: &[(FeatureVector, bool)], y: &[bool], weight: &[f64]) -> Vec<f64> {
        let n = states.len().max(1) as f64;
        let mut g = vec![0.0; Self::PARAM_COUNT];
        for (((f, l), &y), c) in states.iter().zip(y).zip(weight) {
            let s = self.input(f, *l);
            let p = self.remove_prob(f, *l);
            let d = c * ((y as u8 as f64) - p) / n;
            for k in 0..POLICY_INPUTS {
                g[k] += d * s[k];
            }
            g[POLICY_INPUTS] += d;
        }
        g
    }

    fn ascend(&mut self, g: &[f64], step: f64) {
        let mut p = self.params();
        for (pi, gi) in p.iter_mut().zip(g) {
            *pi += step * gi;
        }
        self.set_params(&p);
    }
}

/// One labelled instance as seen by the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: u64,
    pub twin: TwinFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamState {
    pub stream: Stream,
    /// Removal set of the current epoch.
    pub psi: BTreeSet<u64>,
    pub policy: Policy,
    pub f1_history: Vec<f64>,
}

/// Both streams share one pair of training sets. PL removes from the
/// positives, NL from the negatives, and the removals are exchanged at the end
/// of each sampling step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub instances: BTreeMap<u64, TwinFeatures>,
    pub p_train_ori: BTreeSet<u64>,
    pub p_val_ori: BTreeSet<u64>,
    pub n_train_ori: BTreeSet<u64>,
    pub n_val_ori: BTreeSet<u64>,
    /// Working training sets: the originals with this epoch's Ψ exchanged.
    pub p_train: BTreeSet<u64>,
    pub n_train: BTreeSet<u64>,
    pub streams: [StreamState; 2],
    pub alpha: f64,
}

impl AgentState {
    pub fn stream(&self, s: Stream) -> &StreamState {
        &self.streams[s as usize]
    }

    pub fn stream_mut(&mut self, s: Stream) -> &mut StreamState {
        &mut self.streams[s as usize]
    }

    pub fn train_len(&self) -> usize {
        self.p_train.len() + self.n_train.len()
    }

    /// Original training ids carrying the stream's target label.
    pub fn candidates(&self, s: Stream) -> &BTreeSet<u64> {
        if s.target_label() {
            &self.p_train_ori
        } else {
            &self.n_train_ori
        }
    }

    /// Restores the original training sets and clears both Ψ.
    pub fn reset(&mut self) {
        self.p_train = self.p_train_ori.clone();
        self.n_train = self.n_train_ori.clone();
        for s in self.streams.iter_mut() {
            s.psi.clear();
        }
    }

    fn features(&self, id: u64) -> &FeatureVector {
        &self.instances[&id].plus
    }

    fn suspect(&self, s: Stream, id: u64) -> bool {
        self.stream(s).policy.remove_prob(self.features(id), s.target_label()) > 0.5
    }
}

fn split_ids(ids: &[u64], ratio: f64, rng: &mut Rng) -> (BTreeSet<u64>, BTreeSet<u64>) {
    let n = ids.len();
    let n_train = if n < 2 {
        n
    } else {
        ((ratio * n as f64).round() as usize).clamp(1, n - 1)
    };
    let picked: BTreeSet<usize> = index::sample(rng, n, n_train).into_iter().collect();
    let mut train = BTreeSet::new();
    let mut val = BTreeSet::new();
    for (i, &id) in ids.iter().enumerate() {
        if picked.contains(&i) {
            train.insert(id);
        } else {
            val.insert(id);
        }
    }
    (train, val)
}

/// Builds the working sets from the reliable positives and negatives: the
/// smaller class is kept whole, the larger one subsampled to `imbalance`
/// times its size (all of it, with a warning, when there are not enough),
/// each class split train/val, and both policies pretrained.
pub fn init_sets(rp: &[Instance], ns: &[Instance], cfg: &AgentConfig) -> Result<AgentState> {
    if rp.is_empty() || ns.is_empty() {
        return Err(Error::AgentInit(format!(
            "both classes are required, got {} positives and {} negatives",
            rp.len(),
            ns.len()
        )));
    }
    if cfg.imbalance == 0 {
        return Err(Error::Parameter("imbalance ratio must be positive".into()));
    }
    if !(cfg.train_ratio > 0.0 && cfg.train_ratio < 1.0) {
        return Err(Error::Parameter(format!("train ratio must lie in (0, 1), got {}", cfg.train_ratio)));
    }
    let mut instances = BTreeMap::new();
    for x in rp.iter().chain(ns) {
        if instances.insert(x.id, x.twin).is_some() {
            return Err(Error::AgentInit(format!("patch {} appears twice", x.id)));
        }
    }
    let pos_ids: Vec<u64> = rp.iter().map(|x| x.id).collect();
    let neg_ids: Vec<u64> = ns.iter().map(|x| x.id).collect();
    let pos_minor = pos_ids.len() <= neg_ids.len();
    let (minor, major) = if pos_minor { (&pos_ids, &neg_ids) } else { (&neg_ids, &pos_ids) };
    let want = cfg.imbalance * minor.len();
    if major.len() < want {
        warn!(
            "majority class has {} instances, fewer than {}x{}; using all of them",
            major.len(),
            cfg.imbalance,
            minor.len()
        );
    }
    let mut r = rng::seeded(cfg.seed, rng::streams::AGENT_INIT);
    let mut sub: Vec<u64> = index::sample(&mut r, major.len(), want.min(major.len()))
        .into_iter()
        .map(|i| major[i])
        .collect();
    sub.sort_unstable();
    let (pos, neg) = if pos_minor { (pos_ids.clone(), sub) } else { (sub, neg_ids.clone()) };
    let (p_train_ori, p_val_ori) = split_ids(&pos, cfg.train_ratio, &mut r);
    let (n_train_ori, n_val_ori) = split_ids(&neg, cfg.train_ratio, &mut r);
    let standardizer = Standardizer::fit(p_train_ori.iter().chain(&n_train_ori).map(|id| &instances[id].plus));
    let streams = Stream::ALL.map(|stream| {
        let (keep, drop) = if stream.target_label() {
            (&p_train_ori, &n_train_ori)
        } else {
            (&n_train_ori, &p_train_ori)
        };
        let mut policy = Policy::new(standardizer.clone());
        pretrain_policy(&mut policy, stream, keep, drop, &instances, cfg);
        StreamState {
            stream,
            psi: BTreeSet::new(),
            policy,
            f1_history: Vec::new(),
        }
    });
    Ok(AgentState {
        instances,
        p_train: p_train_ori.clone(),
        n_train: n_train_ori.clone(),
        p_train_ori,
        p_val_ori,
        n_train_ori,
        n_val_ori,
        streams,
        alpha: cfg.alpha,
    })
}

/// Logistic fit of "belongs to the other class": training instances of the
/// other class are removal examples, target-class ones are retention
/// examples. The label input is held at the target label, as it is for every
/// real candidate. No class weighting, so on noisy labels the fit estimates
/// the chance that an instance with these features is labelled otherwise.
fn pretrain_policy(
    policy: &mut Policy,
    stream: Stream,
    keep: &BTreeSet<u64>,
    drop: &BTreeSet<u64>,
    instances: &BTreeMap<u64, TwinFeatures>,
    cfg: &AgentConfig,
) {
    let target = stream.target_label();
    let mut states = Vec::with_capacity(keep.len() + drop.len());
    let mut y = Vec::with_capacity(states.capacity());
    for (set, remove) in [(keep, false), (drop, true)] {
        for id in set {
            states.push((instances[id].plus, target));
            y.push(remove);
        }
    }
    let w = vec![1.0; states.len()];
    for _ in 0..cfg.pretrain_epochs {
        let g = policy.gradient(&states, &y, &w);
        policy.ascend(&g, cfg.pretrain_lr);
    }
}

/// Removes each candidate independently with probability `π(remove | s)`.
/// Candidates are visited in id order, so a fixed generator state gives a
/// fixed Ψ.
pub fn sample_removals(state: &AgentState, stream: Stream, rng: &mut Rng) -> BTreeSet<u64> {
    let policy = &state.stream(stream).policy;
    let label = stream.target_label();
    state
        .candidates(stream)
        .iter()
        .copied()
        .filter(|id| {
            let p = policy.remove_prob(state.features(*id), label);
            rng.random::<f64>() < p
        })
        .collect()
}

/// Moves Ψ out of the stream's target-labelled training set into the other
/// class with the label flipped.
pub fn apply_removals(state: &mut AgentState, stream: Stream, psi: &BTreeSet<u64>) -> Result<()> {
    let before = state.train_len();
    let (from, to) = if stream.target_label() {
        (&mut state.p_train, &mut state.n_train)
    } else {
        (&mut state.n_train, &mut state.p_train)
    };
    if let Some(id) = psi.iter().find(|id| !from.contains(id)) {
        return Err(Error::Consistency(format!(
            "{stream} removal set contains patch {id}, which is not in its target training set"
        )));
    }
    for id in psi {
        from.remove(id);
        to.insert(*id);
    }
    state.stream_mut(stream).psi.extend(psi.iter().copied());
    if state.train_len() != before {
        return Err(Error::Consistency(format!(
            "training set changed size from {before} to {}",
            state.train_len()
        )));
    }
    Ok(())
}

/// `α · (mean(F1[i−k+1..=i]) − mean(F1[i−k..i]))` with `k = min(5, i)`: both
/// windows have the same length, so early epochs compare single values.
pub fn compute_reward(f1_history: &[f64], alpha: f64, i: usize) -> Result<f64> {
    if i == 0 {
        return Err(Error::NoReward);
    }
    if i >= f1_history.len() {
        return Err(Error::Parameter(format!(
            "epoch {i} is beyond the F1 history of length {}",
            f1_history.len()
        )));
    }
    let k = REWARD_WINDOW.min(i);
    let mean = |end: usize| f1_history[end + 1 - k..=end].iter().sum::<f64>() / k as f64;
    Ok(alpha * (mean(i) - mean(i - 1)))
}

/// One reward-weighted cross-entropy ascent step. Taken actions are the
/// targets when `reward > 0` and their inverse when `reward < 0`; the step is
/// `lr · |reward|`. A zero reward leaves the policy untouched.
pub fn update_policy(
    policy: &Policy,
    states: &[(FeatureVector, bool)],
    actions: &[bool],
    reward: f64,
    lr: f64,
) -> Result<Policy> {
    if states.len() != actions.len() {
        return Err(Error::LengthMismatch {
            left: states.len(),
            right: actions.len(),
        });
    }
    let mut next = policy.clone();
    if reward == 0.0 || states.is_empty() {
        return Ok(next);
    }
    let y: Vec<bool> = actions.iter().map(|&a| a == (reward > 0.0)).collect();
    let w = vec![1.0; states.len()];
    let g = policy.gradient(states, &y, &w);
    next.ascend(&g, lr * reward.abs());
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub stream: Stream,
    pub removed: usize,
    pub f1: f64,
    /// Empty for the first epoch, which has no predecessor.
    pub reward: Option<f64>,
}

/// Validation ids with their working labels, minus positives the PL policy
/// and negatives the NL policy would remove (`π > 0.5`).
pub fn filtered_validation(state: &AgentState) -> Vec<(u64, bool)> {
    let pos = state.p_val_ori.iter().filter(|id| !state.suspect(Stream::PL, **id)).map(|&id| (id, true));
    let neg = state.n_val_ori.iter().filter(|id| !state.suspect(Stream::NL, **id)).map(|&id| (id, false));
    pos.chain(neg).collect()
}

pub fn unfiltered_validation(state: &AgentState) -> Vec<(u64, bool)> {
    state
        .p_val_ori
        .iter()
        .map(|&id| (id, true))
        .chain(state.n_val_ori.iter().map(|&id| (id, false)))
        .collect()
}

fn fit_classifier<C: PatchClassifier + Clone>(
    proto: &C,
    state: &AgentState,
    pos: &BTreeSet<u64>,
    neg: &BTreeSet<u64>,
    cfg: &TrainConfig,
) -> Result<C> {
    let rp: Vec<TwinFeatures> = pos.iter().map(|id| state.instances[id]).collect();
    let ns: Vec<TwinFeatures> = neg.iter().map(|id| state.instances[id]).collect();
    let mut model = proto.clone();
    twin::train_classifier(&mut model, &rp, &ns, cfg)?;
    Ok(model)
}

/// F1 of the stream's target class against `labels`.
pub fn stream_f1<C: PatchClassifier>(model: &C, state: &AgentState, stream: Stream, labels: &[(u64, bool)]) -> Result<f64> {
    let target = stream.target_label();
    let preds: Vec<bool> = labels
        .iter()
        .map(|(id, _)| twin::predict_twin(model, &state.instances[id]).fused.is_positive() == target)
        .collect();
    let truth: Vec<bool> = labels.iter().map(|(_, l)| *l == target).collect();
    let c = metrics::from_predictions(&preds, &truth)?;
    Ok(metrics::report(&c)?.f_measure)
}

/// Final sets after deterministic filtering (`π > 0.5`) by both policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanedSet {
    pub positives_train: Vec<u64>,
    pub negatives_train: Vec<u64>,
    pub positives_val: Vec<u64>,
    pub negatives_val: Vec<u64>,
    /// Training positives relabelled negative by PL.
    pub moved_by_pl: Vec<u64>,
    /// Training negatives relabelled positive by NL.
    pub moved_by_nl: Vec<u64>,
    /// Validation ids dropped before scoring.
    pub dropped_val: Vec<u64>,
}

pub fn cleaned_set(state: &AgentState) -> CleanedSet {
    let moved_by_pl: BTreeSet<u64> = state.p_train_ori.iter().copied().filter(|id| state.suspect(Stream::PL, *id)).collect();
    let moved_by_nl: BTreeSet<u64> = state.n_train_ori.iter().copied().filter(|id| state.suspect(Stream::NL, *id)).collect();
    let positives_train = state
        .p_train_ori
        .difference(&moved_by_pl)
        .chain(moved_by_nl.iter())
        .copied()
        .collect::<BTreeSet<u64>>();
    let negatives_train = state
        .n_train_ori
        .difference(&moved_by_nl)
        .chain(moved_by_pl.iter())
        .copied()
        .collect::<BTreeSet<u64>>();
    let kept = filtered_validation(state);
    let kept_ids: BTreeSet<u64> = kept.iter().map(|(id, _)| *id).collect();
    CleanedSet {
        positives_train: positives_train.into_iter().collect(),
        negatives_train: negatives_train.into_iter().collect(),
        positives_val: kept.iter().filter(|(_, l)| *l).map(|(id, _)| *id).collect(),
        negatives_val: kept.iter().filter(|(_, l)| !*l).map(|(id, _)| *id).collect(),
        moved_by_pl: moved_by_pl.into_iter().collect(),
        moved_by_nl: moved_by_nl.into_iter().collect(),
        dropped_val: unfiltered_validation(state)
            .into_iter()
            .map(|(id, _)| id)
            .filter(|id| !kept_ids.contains(id))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub stream: Stream,
    /// Classifier on the original training set, scored on the unfiltered
    /// validation set.
    pub baseline_f1: f64,
    /// Classifier on the cleaned training set, scored on the filtered
    /// validation set.
    pub final_f1: f64,
}

#[derive(Debug, Clone)]
pub struct AgentRun<C> {
    pub state: AgentState,
    pub trace: Vec<TraceRow>,
    pub cleaned: CleanedSet,
    pub baseline_model: C,
    pub model: C,
    pub summary: [StreamSummary; 2],
}

/// The training loop. Per epoch: both streams sample Ψ in parallel, the
/// removals are exchanged, one classifier is retrained on the exchanged sets
/// and scored on the filtered validation set, and each stream turns its own
/// target-class F1 into a reward for its policy. Every stream draws from its
/// own seeded generator, so the result does not depend on scheduling.
/// With `epochs = 0` the state is returned unchanged with an empty trace.
pub fn run_agent<C>(mut state: AgentState, proto: &C, cfg: &AgentConfig) -> Result<AgentRun<C>>
where
    C: PatchClassifier + Clone + Send + Sync,
{
    let [mut pl_rng, mut nl_rng] = Stream::ALL.map(|s| rng::seeded(cfg.seed, s.rng_stream()));
    let size = state.p_train_ori.len() + state.n_train_ori.len();
    let mut trace = Vec::with_capacity(2 * cfg.epochs);
    for epoch in 0..cfg.epochs {
        state.reset();
        let (psi_pl, psi_nl) = rayon::join(
            || sample_removals(&state, Stream::PL, &mut pl_rng),
            || sample_removals(&state, Stream::NL, &mut nl_rng),
        );
        apply_removals(&mut state, Stream::PL, &psi_pl)?;
        apply_removals(&mut state, Stream::NL, &psi_nl)?;
        if state.train_len() != size {
            return Err(Error::Consistency(format!(
                "training set size {} differs from {size} in epoch {epoch}",
                state.train_len()
            )));
        }
        let model = fit_classifier(proto, &state, &state.p_train, &state.n_train, &cfg.classifier)?;
        let val = filtered_validation(&state);

        let mut updates = Vec::with_capacity(2);
        for stream in Stream::ALL {
            let f1 = stream_f1(&model, &state, stream, &val)?;
            state.stream_mut(stream).f1_history.push(f1);
            let s = state.stream(stream);
            let reward = if epoch == 0 {
                None
            } else {
                Some(compute_reward(&s.f1_history, cfg.alpha, epoch)?)
            };
            let label = stream.target_label();
            let (states, actions): (Vec<_>, Vec<_>) = state
                .candidates(stream)
                .iter()
                .map(|id| ((state.instances[id].plus, label), s.psi.contains(id)))
                .unzip();
            trace.push(TraceRow {
                epoch,
                stream,
                removed: s.psi.len(),
                f1,
                reward,
            });
            updates.push((states, actions, reward));
        }
        let [pl, nl] = &mut state.streams;
        let step = |s: &mut StreamState, (states, actions, reward): &(Vec<(FeatureVector, bool)>, Vec<bool>, Option<f64>)| -> Result<()> {
            if let Some(r) = reward {
                s.policy = update_policy(&s.policy, states, actions, *r, cfg.policy_lr)?;
            }
            Ok(())
        };
        let (a, b) = rayon::join(|| step(pl, &updates[0]), || step(nl, &updates[1]));
        a?;
        b?;
    }

    let cleaned = cleaned_set(&state);
    let baseline_model = fit_classifier(proto, &state, &state.p_train_ori, &state.n_train_ori, &cfg.classifier)?;
    let pos: BTreeSet<u64> = cleaned.positives_train.iter().copied().collect();
    let neg: BTreeSet<u64> = cleaned.negatives_train.iter().copied().collect();
    let model = fit_classifier(proto, &state, &pos, &neg, &cfg.classifier)?;
    let all_val = unfiltered_validation(&state);
    let kept_val = filtered_validation(&state);
    let summary = [Stream::PL, Stream::NL].map(|stream| -> Result<StreamSummary> {
        Ok(StreamSummary {
            stream,
            baseline_f1: stream_f1(&baseline_model, &state, stream, &all_val)?,
            final_f1: stream_f1(&model, &state, stream, &kept_val)?,
        })
    });
    let [a, b] = summary;
    Ok(AgentRun {
        summary: [a?, b?],
        state,
        trace,
        cleaned,
        baseline_model,
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub positives: usize,
    pub imbalance: usize,
    /// Fraction of each working class that carries the wrong label.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            positives: 100,
            imbalance: 10,
            noise_rate: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub rp: Vec<Instance>,
    pub ns: Vec<Instance>,
    pub oracle: NoiseOracle,
    /// Geometric ground truth of every drawn patch.
    pub truth: BTreeMap<u64, bool>,
}

/// Draws `positives` lesion and `imbalance · positives` background patches and
/// swaps the labels of `round(noise_rate · positives)` from each side, so that
/// the working positive set holds exactly that many background patches.
pub fn noisy_benchmark(patches: &[PatchRecord], cfg: &BenchmarkConfig) -> Result<Benchmark> {
    if !(0.0..1.0).contains(&cfg.noise_rate) {
        return Err(Error::Parameter(format!("noise rate must lie in [0, 1), got {}", cfg.noise_rate)));
    }
    let lesion: Vec<&PatchRecord> = patches.iter().filter(|p| p.gt.is_lesion()).collect();
    let background: Vec<&PatchRecord> = patches.iter().filter(|p| !p.gt.is_lesion()).collect();
    let n_pos = cfg.positives;
    let n_neg = cfg.positives * cfg.imbalance;
    if n_pos == 0 || lesion.len() < n_pos || background.len() < n_neg {
        return Err(Error::Parameter(format!(
            "benchmark needs {n_pos} lesion and {n_neg} background patches, have {} and {}",
            lesion.len(),
            background.len()
        )));
    }
    let mut r = rng::seeded(cfg.seed, rng::streams::NOISE);
    let mut draw = |pool: &[&PatchRecord], k: usize| -> Vec<PatchRecord> {
        let mut idx: Vec<usize> = index::sample(&mut r, pool.len(), k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i].clone()).collect()
    };
    let pos = draw(&lesion, n_pos);
    let neg = draw(&background, n_neg);
    let k = (cfg.noise_rate * n_pos as f64).round() as usize;
    let swap_pos: BTreeSet<usize> = index::sample(&mut r, n_pos, k).into_iter().collect();
    let swap_neg: BTreeSet<usize> = index::sample(&mut r, n_neg, k).into_iter().collect();

    let mut truth = BTreeMap::new();
    let mut rp = Vec::with_capacity(n_pos);
    let mut ns = Vec::with_capacity(n_neg);
    let mut flipped = Vec::with_capacity(2 * k);
    for (set, swaps, lesion) in [(&pos, &swap_pos, true), (&neg, &swap_neg, false)] {
        for (i, p) in set.iter().enumerate() {
            truth.insert(p.patch_id, lesion);
            let x = Instance {
                id: p.patch_id,
                twin: TwinFeatures::of(p)?,
            };
            let working = if swaps.contains(&i) {
                flipped.push(p.patch_id);
                !lesion
            } else {
                lesion
            };
            if working {
                rp.push(x);
            } else {
                ns.push(x);
            }
        }
    }
    flipped.sort_unstable();
    Ok(Benchmark {
        rp,
        ns,
        oracle: NoiseOracle {
            rate: cfg.noise_rate,
            seed: cfg.seed,
            flipped,
        },
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: u64, v: f64) -> Instance {
        let mut f = FeatureVector::zeros();
        f.0[0] = v;
        f.0[1] = (id % 7) as f64;
        Instance {
            id,
            twin: TwinFeatures { plus: f, minus: f },
        }
    }

    fn sets(np: usize, nn: usize) -> (Vec<Instance>, Vec<Instance>) {
        let rp = (0..np as u64).map(|i| inst(i, 2.0 + 0.01 * i as f64)).collect();
        let ns = (0..nn as u64).map(|i| inst(1000 + i, -2.0 - 0.01 * i as f64)).collect();
        (rp, ns)
    }

    fn quick() -> AgentConfig {
        AgentConfig {
            pretrain_epochs: 20,
            classifier: TrainConfig {
                epochs: 20,
                ..TrainConfig::default()
            },
            ..AgentConfig::default()
        }
    }

    #[test]
    fn imbalance_rule() {
        let (rp, ns) = sets(10, 200);
        let st = init_sets(&rp, &ns, &quick()).unwrap();
        assert_eq!(st.p_train_ori.len() + st.p_val_ori.len(), 10);
        assert_eq!(st.n_train_ori.len() + st.n_val_ori.len(), 100);
        assert_eq!(st.p_train_ori.len(), 7);
        let (rp, ns) = sets(10, 50);
        let st = init_sets(&rp, &ns, &quick()).unwrap();
        assert_eq!(st.n_train_ori.len() + st.n_val_ori.len(), 50);
        assert!(matches!(init_sets(&[], &ns, &quick()), Err(Error::AgentInit(_))));
        assert_eq!(st, init_sets(&rp, &ns, &quick()).unwrap());
    }

    #[test]
    fn removal_extremes() {
        let (rp, ns) = sets(20, 200);
        let mut st = init_sets(&rp, &ns, &quick()).unwrap();
        let mut r = rng::seeded(1, 0);
        let s = st.stream_mut(Stream::PL);
        s.policy.weights.iter_mut().for_each(|w| *w = 0.0);
        s.policy.bias = -1e3;
        assert!(sample_removals(&st, Stream::PL, &mut r).is_empty());
        st.stream_mut(Stream::PL).policy.bias = 1e3;
        let all = sample_removals(&st, Stream::PL, &mut r);
        assert_eq!(&all, st.candidates(Stream::PL));
    }

    #[test]
    fn half_removal_rate() {
        let rp: Vec<Instance> = (0..10_000u64).map(|i| inst(i, 1.0)).collect();
        let ns: Vec<Instance> = (0..10_000u64).map(|i| inst(100_000 + i, -1.0)).collect();
        let cfg = AgentConfig {
            train_ratio: 0.999,
            pretrain_epochs: 0,
            ..quick()
        };
        let st = init_sets(&rp, &ns, &cfg).unwrap();
        let n = st.candidates(Stream::PL).len() as f64;
        let mut mean = 0.0;
        for seed in 0..5 {
            let mut r = rng::seeded(seed, 0);
            mean += sample_removals(&st, Stream::PL, &mut r).len() as f64 / n / 5.0;
        }
        assert!((0.48..=0.52).contains(&mean), "{mean}");
    }

    #[test]
    fn moving_keeps_size() {
        let (rp, ns) = sets(10, 100);
        let cfg = AgentConfig {
            train_ratio: 0.9,
            ..quick()
        };
        let mut st = init_sets(&rp, &ns, &cfg).unwrap();
        let before = st.clone();
        apply_removals(&mut st, Stream::PL, &BTreeSet::new()).unwrap();
        assert_eq!(st, before);
        let psi: BTreeSet<u64> = st.p_train.iter().take(3).copied().collect();
        let (p0, n0) = (st.p_train.len(), st.n_train.len());
        apply_removals(&mut st, Stream::PL, &psi).unwrap();
        assert_eq!((st.p_train.len(), st.n_train.len()), (p0 - 3, n0 + 3));
        assert!(matches!(apply_removals(&mut st, Stream::PL, &psi), Err(Error::Consistency(_))));
    }

    #[test]
    fn reward_examples() {
        assert!((compute_reward(&[0.80, 0.85], 100.0, 1).unwrap() - 5.0).abs() < 1e-9);
        assert_eq!(compute_reward(&[0.7; 8], 10.0, 6).unwrap(), 0.0);
        let h = [0.5, 0.6, 0.7, 0.8, 0.9, 0.9];
        assert!((compute_reward(&h, 1.0, 5).unwrap() - 0.08).abs() < 1e-12);
        assert!(matches!(compute_reward(&h, 1.0, 0), Err(Error::NoReward)));
    }

    #[test]
    fn zero_reward_is_noop() {
        let p = Policy::new(Standardizer::identity());
        let states = vec![(FeatureVector::zeros(), true)];
        assert_eq!(update_policy(&p, &states, &[true], 0.0, 1.0).unwrap(), p);
    }

    #[test]
    fn positive_reward_raises_removed() {
        let mut noisy = FeatureVector::zeros();
        noisy.0[0] = 1.0;
        let mut clean = FeatureVector::zeros();
        clean.0[0] = -1.0;
        let states = vec![(noisy, true), (noisy, true), (clean, true), (clean, true)];
        let actions = [true, true, false, false];
        let p = Policy::new(Standardizer::identity());
        let q = update_policy(&p, &states, &actions, 0.5, 0.1).unwrap();
        assert!(q.remove_prob(&noisy, true) > p.remove_prob(&noisy, true));
        assert!(q.remove_prob(&clean, true) < p.remove_prob(&clean, true));
        let q = update_policy(&p, &states, &actions, -0.5, 0.1).unwrap();
        assert!(q.remove_prob(&noisy, true) < p.remove_prob(&noisy, true));
    }

    #[test]
    fn zero_epochs() {
        let (rp, ns) = sets(10, 100);
        let cfg = AgentConfig { epochs: 0, ..quick() };
        let st = init_sets(&rp, &ns, &cfg).unwrap();
        let run = run_agent(st.clone(), &twin::LinearSoftmax::init(0), &cfg).unwrap();
        assert!(run.trace.is_empty());
        assert_eq!(run.state, st);
    }

    #[test]
    fn deterministic_and_size_preserving() {
        let (rp, ns) = sets(12, 120);
        let cfg = AgentConfig { epochs: 4, ..quick() };
        let st = init_sets(&rp, &ns, &cfg).unwrap();
        let proto = twin::LinearSoftmax::init(0);
        let a = run_agent(st.clone(), &proto, &cfg).unwrap();
        let b = run_agent(st, &proto, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.state, b.state);
        assert_eq!(a.trace.len(), 8);
        assert_eq!(a.state.train_len(), a.state.p_train_ori.len() + a.state.n_train_ori.len());
    }
}
