//! Evaluation harness: cross-validated classifier metrics and the
//! four-method grasp benchmark.
//!
//! The classifier side builds k-fold splits — label-stratified "seen"
//! folds or family-disjoint "unseen" folds — retrains one model per fold
//! and reports ROC/AUC (tie-grouped, trapezoidal) plus accuracy and F1
//! at a fixed decision threshold, with both a pooled ROC curve and a
//! vertically averaged one.
//!
//! The benchmark side replays a deterministic scene stream and pits four
//! grasp selectors against the simulated oracle: executing the heuristic
//! initializations directly, picking the initialization the model scores
//! highest (max-eval), ranking uniform samples, and running gradient
//! ascent from every initialization (inference keeps the best endpoint).
//! Every trial becomes one plain-text record, and reports rebuild from
//! those records alone, so logs are the ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::model::{Model, ModelObjective};
use crate::plan::{self, Objective, PlannerConfig};
use crate::train::{self, LossKind, TrainConfig};
use crate::world::{
    generate_scene, heuristic_inits, oracle_execute, world_bounds, GraspOutcome, WorldParams,
};
use crate::zoo::ArchKind;

// ── fold construction ────────────────────────────────────────────────────

pub const DEFAULT_FOLDS: usize = 5;

/// Absolute tolerance on a stratified fold's positive rate, relative to
/// the whole dataset's.
pub const STRATIFY_TOL: f64 = 0.02;

/// What a held-out fold is allowed to share with its training folds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldMode {
    /// Test shapes come from families also seen in training; folds are
    /// stratified so every test fold matches the global positive rate.
    Seen,
    /// Whole shape families are held out: no family appears on both
    /// sides of any fold.
    Unseen,
}

impl FoldMode {
    pub fn tag(self) -> &'static str {
        match self {
            FoldMode::Seen => "seen",
            FoldMode::Unseen => "unseen",
        }
    }

    pub fn from_tag(tag: &str) -> Option<FoldMode> {
        match tag {
            "seen" => Some(FoldMode::Seen),
            "unseen" => Some(FoldMode::Unseen),
            _ => None,
        }
    }
}

/// One train/test split; indices point into the dataset's sample list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    pub mode: FoldMode,
    pub folds: Vec<Fold>,
}

/// Split `ds` into `k` cross-validation folds, deterministically in
/// `seed`. Seen mode deals positives and negatives round-robin after a
/// shuffle, which keeps every fold's positive rate within
/// [`STRATIFY_TOL`] of the global rate; unseen mode deals whole families.
pub fn make_folds(ds: &Dataset, mode: FoldMode, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let samples = ds.samples();
    let n = samples.len();
    if n < k {
        return Err(Error::Config(format!("{n} samples cannot fill {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    match mode {
        FoldMode::Seen => {
            let mut pos: Vec<usize> = (0..n).filter(|&i| samples[i].is_positive()).collect();
            let mut neg: Vec<usize> = (0..n).filter(|&i| !samples[i].is_positive()).collect();
            if pos.len() < k {
                return Err(Error::Config(format!(
                    "stratification infeasible: {} positive samples for {k} folds",
                    pos.len()
                )));
            }
            if neg.len() < k {
                return Err(Error::Config(format!(
                    "stratification infeasible: {} negative samples for {k} folds",
                    neg.len()
                )));
            }
            pos.shuffle(&mut rng);
            neg.shuffle(&mut rng);
            for (i, &idx) in pos.iter().chain(neg.iter()).enumerate() {
                tests[i % k].push(idx);
            }
            // dealing keeps per-fold class counts within one of each
            // other; reject datasets where that still misses the rate
            let global = pos.len() as f64 / n as f64;
            for test in &tests {
                let p = test.iter().filter(|&&i| samples[i].is_positive()).count();
                let rate = p as f64 / test.len() as f64;
                if (rate - global).abs() > STRATIFY_TOL {
                    return Err(Error::Config(format!(
                        "stratification infeasible: fold positive rate {rate:.3} \
                         vs global {global:.3}"
                    )));
                }
            }
        }
        FoldMode::Unseen => {
            let mut by_family: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for (i, s) in samples.iter().enumerate() {
                by_family.entry(s.shape.family_id).or_default().push(i);
            }
            if by_family.len() < k {
                return Err(Error::Config(format!(
                    "family-disjoint folds need at least {k} families, dataset has {}",
                    by_family.len()
                )));
            }
            let mut families: Vec<u32> = by_family.keys().copied().collect();
            families.shuffle(&mut rng);
            for (i, family) in families.iter().enumerate() {
                tests[i % k].extend(&by_family[family]);
            }
        }
    }
    let folds: Vec<Fold> = tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut held = vec![false; n];
            for &i in &test {
                held[i] = true;
            }
            let train = (0..n).filter(|&i| !held[i]).collect();
            Fold { train, test }
        })
        .collect();
    for fold in &folds {
        if fold.test.is_empty() || fold.train.is_empty() {
            return Err(Error::Config("a fold came out empty".into()));
        }
    }
    Ok(FoldSplit { mode, folds })
}

// ── threshold-free and thresholded metrics ───────────────────────────────

/// Classify as positive strictly above this score.
pub const DECISION_THRESHOLD: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve and area under it. The sweep visits every distinct score
/// once, so tied scores move diagonally in one block and the trapezoidal
/// area matches the ranking probability with ties counted half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<(Vec<RocPoint>, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score passed to the ROC sweep".into()));
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Config(format!(
            "ROC needs both classes, got {pos} positive and {neg} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        let mut j = i;
        while j < order.len() && scores[order[j]] == score {
            if labels[order[j]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let prev = *points.last().expect("sweep starts at the origin");
        let next = RocPoint { fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 };
        auc += (next.fpr - prev.fpr) * (prev.tpr + next.tpr) / 2.0;
        points.push(next);
        i = j;
    }
    Ok((points, auc))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy, precision, recall and F1 with predictions `score > threshold`
/// (strict, so a score exactly at the threshold is negative). Empty
/// denominators — no predicted positives, no true positives — give zero.
pub fn accuracy_f1(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ThresholdMetrics> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Config(format!(
            "need matching nonempty score/label vectors, got {} and {}",
            scores.len(),
            labels.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fnn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > threshold, l != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fnn += 1,
        }
    }
    let accuracy = (tp + tn) as f64 / scores.len() as f64;
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fnn == 0 { 0.0 } else { tp as f64 / (tp + fnn) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ThresholdMetrics { accuracy, precision, recall, f1 })
}

// ── cross-validated classifier evaluation ────────────────────────────────

/// Fixed abscissa count for the vertically averaged ROC curve.
pub const ROC_GRID: usize = 101;

/// Metrics for one fold's freshly trained model on its held-out samples.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldMetrics {
    pub fold: usize,
    pub test_size: usize,
    /// Mean training loss over the last up-to-20 iterations.
    pub train_loss: f64,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierReport {
    pub mode: FoldMode,
    pub folds: Vec<FoldMetrics>,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    /// ROC over all held-out scores pooled across folds.
    pub pooled_roc: Vec<RocPoint>,
    pub pooled_auc: f64,
    /// Per-fold curves averaged vertically on a fixed grid of [`ROC_GRID`]
    /// false-positive rates.
    pub averaged_roc: Vec<RocPoint>,
}

impl ClassifierReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("mode={} folds={}\n", self.mode.tag(), self.folds.len()));
        for f in &self.folds {
            out.push_str(&format!(
                "fold={} test={} auc={:.4} acc={:.4} f1={:.4} train-loss={:.4}\n",
                f.fold, f.test_size, f.auc, f.accuracy, f.f1, f.train_loss
            ));
        }
        out.push_str(&format!(
            "auc mean={:.4} std={:.4}\nacc mean={:.4} std={:.4}\nf1 mean={:.4} std={:.4}\n",
            self.auc_mean,
            self.auc_std,
            self.accuracy_mean,
            self.accuracy_std,
            self.f1_mean,
            self.f1_std
        ));
        out.push_str(&format!("pooled auc={:.4}\n", self.pooled_auc));
        out
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Curve value at a false-positive rate: vertical tie groups collapse to
/// their top, and distinct abscissae interpolate linearly.
fn tpr_at(points: &[RocPoint], fpr: f64) -> f64 {
    let mut envelope: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for p in points {
        match envelope.last_mut() {
            Some(last) if last.0 == p.fpr => last.1 = last.1.max(p.tpr),
            _ => envelope.push((p.fpr, p.tpr)),
        }
    }
    if fpr <= envelope[0].0 {
        return envelope[0].1;
    }
    for w in envelope.windows(2) {
        let (a, b) = (w[0], w[1]);
        if fpr <= b.0 {
            let t = (fpr - a.0) / (b.0 - a.0);
            return a.1 + t * (b.1 - a.1);
        }
    }
    envelope.last().expect("nonempty curve").1
}

/// Retrain one model per fold (a fresh copy of `template`, seeded
/// `cfg.seed + fold`) and score its held-out samples. The template's
/// weights are never used; only its architecture and patch settings are.
pub fn evaluate_classifier(
    template: &Model,
    ds: &Dataset,
    split: &FoldSplit,
    cfg: &TrainConfig,
) -> Result<ClassifierReport> {
    if !template.arch().is_classifier() {
        return Err(Error::Config(format!(
            "{} has no success probability to cross-validate",
            template.arch().tag()
        )));
    }
    let samples = ds.samples();
    for fold in &split.folds {
        if let Some(&bad) = fold.train.iter().chain(&fold.test).find(|&&i| i >= samples.len()) {
            return Err(Error::Config(format!(
                "fold references sample {bad} but the dataset has {}",
                samples.len()
            )));
        }
    }
    let mut folds = Vec::with_capacity(split.folds.len());
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    for (f, fold) in split.folds.iter().enumerate() {
        let mut fold_cfg = cfg.clone();
        fold_cfg.seed = cfg.seed.wrapping_add(f as u64);
        let mut model = Model::new(
            template.arch(),
            template.theta_dim(),
            cfg.dropout_keep,
            fold_cfg.seed,
            template.patch_mode(),
            template.interp(),
        )?;
        let positives: Vec<usize> = fold
            .train
            .iter()
            .enumerate()
            .filter(|(_, &s)| samples[s].is_positive())
            .map(|(i, _)| i)
            .collect();
        let featurizer = model.clone();
        let outcome = train::train(
            model.graph_mut(),
            fold.train.len(),
            &positives,
            LossKind::CrossEntropy,
            &fold_cfg,
            |i, mirror| featurizer.train_example(&samples[fold.train[i]], mirror),
        )?;
        let mut ws = model.graph().workspace();
        let mut scores = Vec::with_capacity(fold.test.len());
        let mut labels = Vec::with_capacity(fold.test.len());
        for &s in &fold.test {
            let sample = &samples[s];
            scores.push(model.predict(&mut ws, &sample.observation, &sample.theta)?);
            labels.push(sample.label);
        }
        let (roc, auc) = roc_auc(&scores, &labels)?;
        let tm = accuracy_f1(&scores, &labels, DECISION_THRESHOLD)?;
        pooled_scores.extend_from_slice(&scores);
        pooled_labels.extend_from_slice(&labels);
        folds.push(FoldMetrics {
            fold: f,
            test_size: fold.test.len(),
            train_loss: outcome.tail_mean(20),
            roc,
            auc,
            accuracy: tm.accuracy,
            precision: tm.precision,
            recall: tm.recall,
            f1: tm.f1,
        });
    }
    let (auc_mean, auc_std) = mean_std(&folds.iter().map(|f| f.auc).collect::<Vec<_>>());
    let (accuracy_mean, accuracy_std) =
        mean_std(&folds.iter().map(|f| f.accuracy).collect::<Vec<_>>());
    let (f1_mean, f1_std) = mean_std(&folds.iter().map(|f| f.f1).collect::<Vec<_>>());
    let (pooled_roc, pooled_auc) = roc_auc(&pooled_scores, &pooled_labels)?;
    let averaged_roc = (0..ROC_GRID)
        .map(|i| {
            let fpr = i as f64 / (ROC_GRID - 1) as f64;
            let tpr =
                folds.iter().map(|f| tpr_at(&f.roc, fpr)).sum::<f64>() / folds.len() as f64;
            RocPoint { fpr, tpr }
        })
        .collect();
    Ok(ClassifierReport {
        mode: split.mode,
        folds,
        auc_mean,
        auc_std,
        accuracy_mean,
        accuracy_std,
        f1_mean,
        f1_std,
        pooled_roc,
        pooled_auc,
        averaged_roc,
    })
}

// ── benchmark records ────────────────────────────────────────────────────

/// How a grasp was chosen in one benchmark trial. `Ascent` rows are the
/// per-initialization refinement runs backing both the inference row and
/// the rescue analysis; the other four are the compared methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Heuristic,
    Ascent,
    MaxEval,
    Sampling,
    Inference,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Heuristic => "heuristic",
            Method::Ascent => "ascent",
            Method::MaxEval => "max-eval",
            Method::Sampling => "sampling",
            Method::Inference => "inference",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Method> {
        match tag {
            "heuristic" => Some(Method::Heuristic),
            "ascent" => Some(Method::Ascent),
            "max-eval" => Some(Method::MaxEval),
            "sampling" => Some(Method::Sampling),
            "inference" => Some(Method::Inference),
            _ => None,
        }
    }
}

/// One executed grasp, serializable as a single `key=value` line.
/// Probabilities and milliseconds print in shortest round-trip form, so
/// parsing a line reproduces the record exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub scene: u64,
    pub family: u32,
    pub method: Method,
    /// Heuristic initialization index; `None` for sampled grasps.
    pub init: Option<usize>,
    /// Predicted success where the trial started.
    pub p0: f64,
    /// Predicted success at the executed configuration.
    pub p: f64,
    pub outcome: GraspOutcome,
    /// Ascent stop reason, `-` for methods that do not ascend.
    pub reason: String,
    pub ms: f64,
}

impl TrialRecord {
    pub fn to_line(&self) -> String {
        let init = match self.init {
            Some(i) => i.to_string(),
            None => "-".into(),
        };
        format!(
            "scene={} family={} method={} init={} p0={} p={} outcome={} reason={} ms={}",
            self.scene,
            self.family,
            self.method.tag(),
            init,
            self.p0,
            self.p,
            self.outcome.label(),
            self.reason,
            self.ms
        )
    }

    pub fn from_line(line: &str) -> Result<TrialRecord> {
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for token in line.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| bad_record(line, &format!("token `{token}` has no `=`")))?;
            if fields.insert(key, value).is_some() {
                return Err(bad_record(line, &format!("duplicate key `{key}`")));
            }
        }
        let mut take = |key: &str| {
            fields
                .remove(key)
                .ok_or_else(|| bad_record(line, &format!("missing key `{key}`")))
        };
        let scene = parse_num::<u64>(line, "scene", take("scene")?)?;
        let family = parse_num::<u32>(line, "family", take("family")?)?;
        let method_tag = take("method")?;
        let method = Method::from_tag(method_tag)
            .ok_or_else(|| bad_record(line, &format!("unknown method `{method_tag}`")))?;
        let init = match take("init")? {
            "-" => None,
            digits => Some(parse_num::<usize>(line, "init", digits)?),
        };
        let p0 = parse_num::<f64>(line, "p0", take("p0")?)?;
        let p = parse_num::<f64>(line, "p", take("p")?)?;
        let outcome_label = take("outcome")?;
        let outcome = GraspOutcome::from_label(outcome_label)
            .ok_or_else(|| bad_record(line, &format!("unknown outcome `{outcome_label}`")))?;
        let reason = take("reason")?.to_string();
        let ms = parse_num::<f64>(line, "ms", take("ms")?)?;
        if let Some(key) = fields.keys().next() {
            return Err(bad_record(line, &format!("unknown key `{key}`")));
        }
        Ok(TrialRecord { scene, family, method, init, p0, p, outcome, reason, ms })
    }
}

fn bad_record(line: &str, what: &str) -> Error {
    Error::Format(format!("{what} in trial record {line:?}"))
}

fn parse_num<T: std::str::FromStr>(line: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| bad_record(line, &format!("unparsable {key} `{value}`")))
}

// ── benchmark aggregation ────────────────────────────────────────────────

/// Success tally for one method, overall and per shape family.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MethodStats {
    pub successes: usize,
    pub attempts: usize,
    /// family id → (successes, attempts)
    pub per_family: BTreeMap<u32, (usize, usize)>,
}

impl MethodStats {
    fn add(&mut self, family: u32, success: bool) {
        self.attempts += 1;
        let slot = self.per_family.entry(family).or_insert((0, 0));
        slot.1 += 1;
        if success {
            self.successes += 1;
            slot.0 += 1;
        }
    }

    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.successes as f64 / self.attempts as f64
        }
    }
}

/// Aggregate view of a benchmark run. The heuristic tally pools every
/// initialization as its own attempt; the other methods execute one grasp
/// per scene.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkReport {
    pub scenes: usize,
    pub heuristic: MethodStats,
    pub max_eval: MethodStats,
    pub sampling: MethodStats,
    pub inference: MethodStats,
    /// Mean predicted success over every ascent start.
    pub mean_p_init: f64,
    /// Mean predicted success over the matching ascent endpoints.
    pub mean_p_final: f64,
    /// Initializations that failed when executed directly.
    pub failing_inits: usize,
    /// Of those, how many succeed after ascent from that initialization.
    pub rescued: usize,
}

impl BenchmarkReport {
    /// Rebuild the aggregate report from per-trial records; record order
    /// does not matter. Rescue counting joins each ascent row with the
    /// heuristic row of the same scene and initialization.
    pub fn from_records(records: &[TrialRecord]) -> Result<BenchmarkReport> {
        let mut scenes = BTreeSet::new();
        let mut direct: BTreeMap<(u64, usize), bool> = BTreeMap::new();
        let mut heuristic = MethodStats::default();
        for r in records {
            scenes.insert(r.scene);
            if r.method == Method::Heuristic {
                let init = r
                    .init
                    .ok_or_else(|| Error::Format("heuristic record without init".into()))?;
                direct.insert((r.scene, init), r.outcome.is_success());
                heuristic.add(r.family, r.outcome.is_success());
            }
        }
        let mut max_eval = MethodStats::default();
        let mut sampling = MethodStats::default();
        let mut inference = MethodStats::default();
        let (mut p0_sum, mut p_sum, mut ascents) = (0.0, 0.0, 0usize);
        let (mut failing_inits, mut rescued) = (0usize, 0usize);
        for r in records {
            match r.method {
                Method::Heuristic => {}
                Method::MaxEval => max_eval.add(r.family, r.outcome.is_success()),
                Method::Sampling => sampling.add(r.family, r.outcome.is_success()),
                Method::Inference => inference.add(r.family, r.outcome.is_success()),
                Method::Ascent => {
                    let init = r
                        .init
                        .ok_or_else(|| Error::Format("ascent record without init".into()))?;
                    let direct_success =
                        *direct.get(&(r.scene, init)).ok_or_else(|| {
                            Error::Format(format!(
                                "ascent record for scene {} init {init} has no matching \
                                 heuristic record",
                                r.scene
                            ))
                        })?;
                    p0_sum += r.p0;
                    p_sum += r.p;
                    ascents += 1;
                    if !direct_success {
                        failing_inits += 1;
                        if r.outcome.is_success() {
                            rescued += 1;
                        }
                    }
                }
            }
        }
        let (mean_p_init, mean_p_final) = if ascents == 0 {
            (0.0, 0.0)
        } else {
            (p0_sum / ascents as f64, p_sum / ascents as f64)
        };
        Ok(BenchmarkReport {
            scenes: scenes.len(),
            heuristic,
            max_eval,
            sampling,
            inference,
            mean_p_init,
            mean_p_final,
            failing_inits,
            rescued,
        })
    }

    /// Fraction of failing initializations rescued by ascent; `None` when
    /// nothing failed, since the ratio is then undefined.
    pub fn improvement_fraction(&self) -> Option<f64> {
        if self.failing_inits == 0 {
            None
        } else {
            Some(self.rescued as f64 / self.failing_inits as f64)
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenes={}\n", self.scenes));
        for (name, stats) in [
            ("heuristic", &self.heuristic),
            ("max-eval", &self.max_eval),
            ("sampling", &self.sampling),
            ("inference", &self.inference),
        ] {
            out.push_str(&format!(
                "{name:<10} rate={:.4} ({}/{})\n",
                stats.rate(),
                stats.successes,
                stats.attempts
            ));
        }
        out.push_str(&format!(
            "predicted success: init mean={:.4} final mean={:.4}\n",
            self.mean_p_init, self.mean_p_final
        ));
        match self.improvement_fraction() {
            Some(f) => out.push_str(&format!(
                "rescued {}/{} failing initializations ({:.4})\n",
                self.rescued, self.failing_inits, f
            )),
            None => out.push_str("rescue fraction undefined: no failing initializations\n"),
        }
        out
    }
}

/// Convenience wrapper: the rescue fraction straight from records.
pub fn improvement_analysis(records: &[TrialRecord]) -> Result<Option<f64>> {
    Ok(BenchmarkReport::from_records(records)?.improvement_fraction())
}

// ── benchmark execution ──────────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub scenes: usize,
    pub seed: u64,
    pub planner: PlannerConfig,
    pub params: WorldParams,
    /// With this off, every record's `ms` field is written as zero, which
    /// makes whole logs byte-comparable across runs.
    pub record_ms: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            scenes: 200,
            seed: DEFAULT_SEED,
            planner: PlannerConfig::default(),
            params: WorldParams::default(),
            record_ms: true,
        }
    }
}

/// Scene `index` draws from its own stream of the run seed, so any scene
/// can be regenerated without replaying the ones before it.
fn scene_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Regenerate one scene of the benchmark stream. The returned generator
/// continues that scene's stream (the next draws are the heuristic
/// initializations' noise), so callers can extend a trial faithfully.
pub fn benchmark_scene(
    seed: u64,
    index: usize,
    families: &[u32],
) -> Result<(crate::world::ObjectShape, crate::world::Observation, ChaCha8Rng)> {
    if families.is_empty() {
        return Err(Error::Config("family pool is empty".into()));
    }
    let mut rng = scene_rng(seed, index);
    let family = families[rng.gen_range(0..families.len())];
    let shape = generate_scene(&mut rng, family);
    let obs = shape.render();
    Ok((shape, obs, rng))
}

/// Run the four-method benchmark for a classifier and return both the
/// per-trial records (nine per scene: three heuristic, three ascent, one
/// each for max-eval, sampling and inference) and their aggregate report.
/// Fully deterministic in the config seed, up to wall-clock `ms` fields.
pub fn run_benchmark(
    model: &Model,
    families: &[u32],
    cfg: &BenchmarkConfig,
) -> Result<(Vec<TrialRecord>, BenchmarkReport)> {
    if !model.arch().is_classifier() {
        return Err(Error::Config(format!(
            "{} cannot score grasps, so it cannot drive the benchmark",
            model.arch().tag()
        )));
    }
    if families.is_empty() {
        return Err(Error::Config("family pool is empty".into()));
    }
    if cfg.scenes == 0 {
        return Err(Error::Config("scene count must be at least 1".into()));
    }
    let world = world_bounds();
    let mask = |ms: f64| if cfg.record_ms { ms } else { 0.0 };
    let mut records = Vec::with_capacity(cfg.scenes * 9);
    for s in 0..cfg.scenes {
        let (shape, obs, mut rng) = benchmark_scene(cfg.seed, s, families)?;
        let family = shape.family_id;
        let inits = heuristic_inits(&obs, &cfg.params, &mut rng)?;
        let mut obj =
            ModelObjective::new(model, &obs, cfg.planner.grad_mode, cfg.planner.fd_eps)?;

        for (i, init) in inits.iter().enumerate() {
            let p0 = obj.value(init.as_slice())?;
            let outcome = oracle_execute(&shape, init, &cfg.params);
            records.push(TrialRecord {
                scene: s as u64,
                family,
                method: Method::Heuristic,
                init: Some(i),
                p0,
                p: p0,
                outcome,
                reason: "-".into(),
                ms: 0.0,
            });
        }

        let mut ascents = Vec::with_capacity(inits.len());
        for (i, init) in inits.iter().enumerate() {
            let bounds = cfg.planner.bounds_around(init, &world)?;
            let mut result = plan::ascend(&mut obj, init, &bounds, &cfg.planner)?;
            result.init_index = i;
            let outcome = oracle_execute(&shape, &result.theta, &cfg.params);
            records.push(TrialRecord {
                scene: s as u64,
                family,
                method: Method::Ascent,
                init: Some(i),
                p0: result.p0,
                p: result.p,
                outcome,
                reason: result.reason.tag().into(),
                ms: mask(result.millis),
            });
            ascents.push((result, outcome));
        }

        let (chosen, value) = plan::max_eval(&mut obj, &inits)?;
        let outcome = oracle_execute(&shape, &inits[chosen], &cfg.params);
        records.push(TrialRecord {
            scene: s as u64,
            family,
            method: Method::MaxEval,
            init: Some(chosen),
            p0: value,
            p: value,
            outcome,
            reason: "-".into(),
            ms: 0.0,
        });

        // sampling shares the planner's search region: the hull of the
        // per-initialization ascent boxes
        let mut sample_bounds = cfg.planner.bounds_around(&inits[0], &world)?;
        for init in &inits[1..] {
            sample_bounds = sample_bounds.hull(&cfg.planner.bounds_around(init, &world)?)?;
        }
        let started = Instant::now();
        let (theta_s, p_s) =
            plan::sample_and_rank(&mut obj, &sample_bounds, cfg.planner.sample_count, &mut rng)?;
        let sample_ms = started.elapsed().as_secs_f64() * 1e3;
        let outcome = oracle_execute(&shape, &theta_s, &cfg.params);
        records.push(TrialRecord {
            scene: s as u64,
            family,
            method: Method::Sampling,
            init: None,
            p0: p_s,
            p: p_s,
            outcome,
            reason: "-".into(),
            ms: mask(sample_ms),
        });

        let mut best = 0;
        for i in 1..ascents.len() {
            if ascents[i].0.p > ascents[best].0.p {
                best = i;
            }
        }
        let total_ms: f64 = ascents.iter().map(|(r, _)| r.millis).sum();
        let (result, outcome) = &ascents[best];
        records.push(TrialRecord {
            scene: s as u64,
            family,
            method: Method::Inference,
            init: Some(best),
            p0: result.p0,
            p: result.p,
            outcome: *outcome,
            reason: result.reason.tag().into(),
            ms: mask(total_ms),
        });
    }
    let report = BenchmarkReport::from_records(&records)?;
    Ok((records, report))
}

/// Execute the regression baseline's one-shot prediction on the same
/// scene stream [`run_benchmark`] uses and return (successes, scenes).
pub fn run_regression_baseline(
    model: &Model,
    families: &[u32],
    cfg: &BenchmarkConfig,
) -> Result<(usize, usize)> {
    if model.arch() != ArchKind::RegressionNet {
        return Err(Error::Config(format!(
            "{} is not the regression baseline",
            model.arch().tag()
        )));
    }
    if families.is_empty() {
        return Err(Error::Config("family pool is empty".into()));
    }
    let mut ws = model.graph().workspace();
    let mut successes = 0;
    for s in 0..cfg.scenes {
        let (shape, obs, _) = benchmark_scene(cfg.seed, s, families)?;
        let theta = model.predict_theta(&mut ws, &obs)?;
        if oracle_execute(&shape, &theta, &cfg.params).is_success() {
            successes += 1;
        }
    }
    Ok((successes, cfg.scenes))
}
