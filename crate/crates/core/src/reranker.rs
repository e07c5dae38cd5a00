//! Two-stage warning reranker: a shared affine layer with a rectifier feeds
//! a binary head (warm-up: actionable vs. false) and a four-way head
//! (fine-tune: VTB/LTB/UTB/false with oversampling and weighted loss).
//! Predicted class and confidence combine into a total ranking score.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{Encoder, SparseVec};
use crate::features::FeatureBundle;
use crate::labeler::AggregateClass;
use crate::scalar::Scalar;

/// Four-way class with its base ranking score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    FalseWarning,
    UTB,
    LTB,
    VTB,
}

pub const ALL_CLASSES: [ClassLabel; 4] = [
    ClassLabel::FalseWarning,
    ClassLabel::UTB,
    ClassLabel::LTB,
    ClassLabel::VTB,
];

impl ClassLabel {
    pub fn base_score(self) -> u8 {
        match self {
            ClassLabel::FalseWarning => 0,
            ClassLabel::UTB => 1,
            ClassLabel::LTB => 2,
            ClassLabel::VTB => 3,
        }
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        ALL_CLASSES.get(idx).copied()
    }

    pub fn is_actionable(self) -> bool {
        self != ClassLabel::FalseWarning
    }

    pub fn is_awhb(self) -> bool {
        matches!(self, ClassLabel::VTB | ClassLabel::LTB)
    }
}

impl From<AggregateClass> for ClassLabel {
    fn from(c: AggregateClass) -> Self {
        match c {
            AggregateClass::VTB => ClassLabel::VTB,
            AggregateClass::LTB => ClassLabel::LTB,
            AggregateClass::UTB => ClassLabel::UTB,
        }
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ClassLabel::FalseWarning => "FalseWarning",
            ClassLabel::UTB => "UTB",
            ClassLabel::LTB => "LTB",
            ClassLabel::VTB => "VTB",
        };
        f.write_str(s)
    }
}

/// Training hyperparameters; all overridable through the pipeline config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Duplication factor for actionable examples in the fine-tune stage.
    pub oversample: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { learning_rate: 0.05, epochs: 10, batch_size: 32, oversample: 10 }
    }
}

/// Default hidden width of the shared layer.
pub const DEFAULT_HIDDEN: usize = 128;

/// Model weights plus everything needed to replay training.
///
/// Layouts: `shared_w` is `dim x hidden` row-major (feature-major), head
/// weights are `classes x hidden` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModelParams<S: Scalar> {
    pub dim: usize,
    pub hidden: usize,
    pub seed: u64,
    pub hyper: Hyperparams,
    pub shared_w: Vec<S>,
    pub shared_b: Vec<S>,
    pub binary_w: Vec<S>,
    pub binary_b: Vec<S>,
    pub multi_w: Vec<S>,
    pub multi_b: Vec<S>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("encoder dim {encoder} does not match model dim {model}")]
    DimensionMismatch { encoder: usize, model: usize },
}

fn uniform<S: Scalar>(rng: &mut ChaCha8Rng, bound: f64) -> S {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    S::from_f64_lit((2.0 * u - 1.0) * bound)
}

fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn init_matrix<S: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<S> {
    let bound = xavier_bound(cols, rows);
    (0..rows * cols).map(|_| uniform(rng, bound)).collect()
}

/// Freshly seeded, untrained parameters. The draw order is fixed: shared
/// matrix, binary head, multiclass head.
pub fn init_params<S: Scalar>(dim: usize, hidden: usize, seed: u64, hyper: Hyperparams) -> ModelParams<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared_w = {
        let bound = xavier_bound(dim, hidden);
        (0..dim * hidden).map(|_| uniform(&mut rng, bound)).collect()
    };
    let binary_w = init_matrix(&mut rng, 2, hidden);
    let multi_w = init_matrix(&mut rng, 4, hidden);
    ModelParams {
        dim,
        hidden,
        seed,
        hyper,
        shared_w,
        shared_b: vec![S::zero(); hidden],
        binary_w,
        binary_b: vec![S::zero(); 2],
        multi_w,
        multi_b: vec![S::zero(); 4],
    }
}

fn fresh_multi_head<S: Scalar>(params: &mut ModelParams<S>) {
    // Derived seed keeps the head draw independent of the init stream.
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(2));
    params.multi_w = init_matrix(&mut rng, 4, params.hidden);
    params.multi_b = vec![S::zero(); 4];
}

/// Shared-layer activation: `relu(W x + b)` over a sparse input.
fn hidden_activations<S: Scalar>(params: &ModelParams<S>, x: &SparseVec<S>) -> (Vec<S>, Vec<S>) {
    let h = params.hidden;
    let mut z = params.shared_b.clone();
    for &(k, xv) in x.entries() {
        let row = &params.shared_w[k as usize * h..(k as usize + 1) * h];
        for (zj, &wj) in z.iter_mut().zip(row) {
            *zj += wj * xv;
        }
    }
    let a = z.iter().map(|&v| if v > S::zero() { v } else { S::zero() }).collect();
    (z, a)
}

fn head_logits<S: Scalar>(head_w: &[S], head_b: &[S], a: &[S], classes: usize) -> Vec<S> {
    let h = a.len();
    (0..classes)
        .map(|c| {
            let row = &head_w[c * h..(c + 1) * h];
            row.iter().zip(a).fold(head_b[c], |acc, (&w, &av)| acc + w * av)
        })
        .collect()
}

fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().fold(S::zero(), |acc, &e| acc + e);
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_softmax_at<S: Scalar>(logits: &[S], target: usize) -> S {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let log_sum = logits
        .iter()
        .map(|&z| (z - max).exp())
        .fold(S::zero(), |acc, e| acc + e)
        .ln();
    logits[target] - max - log_sum
}

/// One training sample with its target class index and loss weight.
struct TrainSample<S: Scalar> {
    x: SparseVec<S>,
    target: usize,
    weight: S,
}

/// Which head a stage trains.
#[derive(Clone, Copy, PartialEq)]
enum Stage {
    Warmup,
    Finetune,
}

fn stage_classes(stage: Stage) -> usize {
    match stage {
        Stage::Warmup => 2,
        Stage::Finetune => 4,
    }
}

/// Mean weighted cross-entropy of a batch. The warm-up target is binary, so
/// this is exactly the binary cross-entropy of the positive-class
/// probability there.
fn batch_loss<S: Scalar>(params: &ModelParams<S>, stage: Stage, batch: &[&TrainSample<S>]) -> S {
    let classes = stage_classes(stage);
    let (head_w, head_b) = match stage {
        Stage::Warmup => (&params.binary_w, &params.binary_b),
        Stage::Finetune => (&params.multi_w, &params.multi_b),
    };
    let mut total = S::zero();
    for s in batch {
        let (_, a) = hidden_activations(params, &s.x);
        let logits = head_logits(head_w, head_b, &a, classes);
        total += -s.weight * log_softmax_at(&logits, s.target);
    }
    total / S::from_f64_lit(batch.len() as f64)
}

/// Backward pass over one batch; applies the mean-gradient SGD step in
/// place. Returns the batch loss measured before the step.
fn sgd_step<S: Scalar>(params: &mut ModelParams<S>, stage: Stage, batch: &[&TrainSample<S>], lr: S) -> S {
    let h = params.hidden;
    let classes = stage_classes(stage);
    let scale = lr / S::from_f64_lit(batch.len() as f64);

    let mut d_head_w = vec![S::zero(); classes * h];
    let mut d_head_b = vec![S::zero(); classes];
    // Shared-layer gradients stay factored as (dz1, x) pairs: materializing
    // a dim x hidden buffer per batch would dwarf the actual math.
    let mut shared_updates: Vec<(Vec<S>, SparseVec<S>)> = Vec::with_capacity(batch.len());
    let mut d_shared_b = vec![S::zero(); h];
    let mut loss = S::zero();

    for s in batch {
        let (z, a) = hidden_activations(params, &s.x);
        let (head_w, head_b) = match stage {
            Stage::Warmup => (&params.binary_w, &params.binary_b),
            Stage::Finetune => (&params.multi_w, &params.multi_b),
        };
        let logits = head_logits(head_w, head_b, &a, classes);
        loss += -s.weight * log_softmax_at(&logits, s.target);
        let probs = softmax(&logits);

        let dz2: Vec<S> = probs
            .iter()
            .enumerate()
            .map(|(c, &p)| {
                let y = if c == s.target { S::one() } else { S::zero() };
                s.weight * (p - y)
            })
            .collect();
        for (c, &g) in dz2.iter().enumerate() {
            d_head_b[c] += g;
            let row = &mut d_head_w[c * h..(c + 1) * h];
            for (dw, &av) in row.iter_mut().zip(&a) {
                *dw += g * av;
            }
        }
        let mut dz1 = vec![S::zero(); h];
        for (c, &g) in dz2.iter().enumerate() {
            let row = &head_w[c * h..(c + 1) * h];
            for (d, &w) in dz1.iter_mut().zip(row) {
                *d += g * w;
            }
        }
        for (d, &zv) in dz1.iter_mut().zip(&z) {
            if zv <= S::zero() {
                *d = S::zero();
            }
        }
        for (db, &d) in d_shared_b.iter_mut().zip(&dz1) {
            *db += d;
        }
        shared_updates.push((dz1, s.x.clone()));
    }

    let (head_w, head_b) = match stage {
        Stage::Warmup => (&mut params.binary_w, &mut params.binary_b),
        Stage::Finetune => (&mut params.multi_w, &mut params.multi_b),
    };
    for (w, dw) in head_w.iter_mut().zip(&d_head_w) {
        *w -= scale * *dw;
    }
    for (b, db) in head_b.iter_mut().zip(&d_head_b) {
        *b -= scale * *db;
    }
    for (b, db) in params.shared_b.iter_mut().zip(&d_shared_b) {
        *b -= scale * *db;
    }
    for (dz1, x) in shared_updates {
        for &(k, xv) in x.entries() {
            let row = &mut params.shared_w[k as usize * h..(k as usize + 1) * h];
            let step = scale * xv;
            for (w, &d) in row.iter_mut().zip(&dz1) {
                *w -= step * d;
            }
        }
    }
    loss / S::from_f64_lit(batch.len() as f64)
}

fn shuffle(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..indices.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        indices.swap(i, j);
    }
}

fn train_loop<S: Scalar>(
    params: &mut ModelParams<S>,
    stage: Stage,
    samples: &[TrainSample<S>],
    indices: &mut [usize],
    shuffle_seed: u64,
) {
    let lr = S::from_f64_lit(params.hyper.learning_rate);
    let batch = params.hyper.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    for _ in 0..params.hyper.epochs {
        shuffle(indices, &mut rng);
        for chunk in indices.chunks(batch) {
            let refs: Vec<&TrainSample<S>> = chunk.iter().map(|&i| &samples[i]).collect();
            sgd_step(params, stage, &refs, lr);
        }
    }
}

/// Warm up the shared layer and binary head on actionable-vs-false labels,
/// preserving the original class distribution. Deterministic given the seed
/// carried by `init`.
pub fn warmup_train<S: Scalar>(
    encoder: &dyn Encoder<S>,
    data: &[(FeatureBundle, bool)],
    init: ModelParams<S>,
) -> Result<ModelParams<S>, TrainError> {
    if encoder.dim() != init.dim {
        return Err(TrainError::DimensionMismatch { encoder: encoder.dim(), model: init.dim });
    }
    let positives = data.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == data.len() {
        return Err(TrainError::DegenerateData(format!(
            "warm-up needs both classes, got {positives} actionable of {}",
            data.len()
        )));
    }
    let samples: Vec<TrainSample<S>> = data
        .iter()
        .map(|(b, y)| TrainSample {
            x: encoder.encode(b),
            target: usize::from(*y),
            weight: S::one(),
        })
        .collect();
    let mut params = init;
    let mut indices: Vec<usize> = (0..samples.len()).collect();
    let shuffle_seed = params.seed.wrapping_add(1);
    train_loop(&mut params, Stage::Warmup, &samples, &mut indices, shuffle_seed);
    Ok(params)
}

/// Loss weight of a fine-tune sample: false warnings weigh 1, actionable
/// warnings `1 + (cm + cc) / 5`, so a full-score VTB weighs 2.
pub fn sample_weight<S: Scalar>(label: ClassLabel, weak_sum: u8) -> S {
    if label.is_actionable() {
        S::one() + S::from_f64_lit(f64::from(weak_sum) / 5.0)
    } else {
        S::one()
    }
}

/// Index multiset after duplicating actionable examples `factor` times.
pub fn oversample_indices(labels: &[ClassLabel], factor: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let copies = if label.is_actionable() { factor.max(1) } else { 1 };
        out.extend(std::iter::repeat_n(i, copies));
    }
    out
}

/// Fine-tune the four-way head (freshly seeded) and the warmed-up shared
/// layer on weak labels, with actionable oversampling and weighted
/// cross-entropy.
pub fn finetune_train<S: Scalar>(
    encoder: &dyn Encoder<S>,
    data: &[(FeatureBundle, ClassLabel, u8)],
    warm: &ModelParams<S>,
) -> Result<ModelParams<S>, TrainError> {
    if encoder.dim() != warm.dim {
        return Err(TrainError::DimensionMismatch { encoder: encoder.dim(), model: warm.dim });
    }
    for class in ALL_CLASSES {
        if !data.iter().any(|(_, l, _)| *l == class) {
            return Err(TrainError::DegenerateData(format!(
                "fine-tune needs every class, missing {class}"
            )));
        }
    }
    let samples: Vec<TrainSample<S>> = data
        .iter()
        .map(|(b, label, weak_sum)| TrainSample {
            x: encoder.encode(b),
            target: label.base_score() as usize,
            weight: sample_weight(*label, *weak_sum),
        })
        .collect();
    let labels: Vec<ClassLabel> = data.iter().map(|(_, l, _)| *l).collect();
    let mut params = warm.clone();
    fresh_multi_head(&mut params);
    let mut indices = oversample_indices(&labels, params.hyper.oversample);
    let shuffle_seed = params.seed.wrapping_add(3);
    train_loop(&mut params, Stage::Finetune, &samples, &mut indices, shuffle_seed);
    Ok(params)
}

/// Four-class probability vector for one bundle.
pub fn predict<S: Scalar>(params: &ModelParams<S>, encoder: &dyn Encoder<S>, bundle: &FeatureBundle) -> [S; 4] {
    predict_encoded(params, &encoder.encode(bundle))
}

/// Four-class probabilities from an already-encoded input.
pub fn predict_encoded<S: Scalar>(params: &ModelParams<S>, x: &SparseVec<S>) -> [S; 4] {
    assert_eq!(x.dim(), params.dim, "encoded input dim mismatch");
    let (_, a) = hidden_activations(params, x);
    let logits = head_logits(&params.multi_w, &params.multi_b, &a, 4);
    let p = softmax(&logits);
    [p[0], p[1], p[2], p[3]]
}

/// Binary (false, actionable) probabilities from the warm-up head.
pub fn predict_binary<S: Scalar>(params: &ModelParams<S>, encoder: &dyn Encoder<S>, bundle: &FeatureBundle) -> [S; 2] {
    let x = encoder.encode(bundle);
    let (_, a) = hidden_activations(params, &x);
    let logits = head_logits(&params.binary_w, &params.binary_b, &a, 2);
    let p = softmax(&logits);
    [p[0], p[1]]
}

/// Predicted class with argmax ties broken toward the higher class.
pub fn predicted_class<S: Scalar>(probs: &[S; 4]) -> ClassLabel {
    let mut best = 3usize;
    for c in (0..3).rev() {
        if probs[c] > probs[best] {
            best = c;
        }
    }
    ClassLabel::from_index(best).expect("index 0..4")
}

/// Total ranking score: base class score plus the predicted-class
/// probability for actionable classes, minus it for false warnings.
pub fn ranking_score<S: Scalar>(probs: &[S; 4]) -> S {
    let class = predicted_class(probs);
    let p = probs[class.base_score() as usize];
    let base = S::from_f64_lit(f64::from(class.base_score()));
    match class {
        ClassLabel::FalseWarning => -p,
        _ => base + p,
    }
}

/// One scored warning in a ranked list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RankedWarning<S: Scalar> {
    pub identity: u64,
    pub score: S,
    pub predicted: ClassLabel,
    pub confidence: S,
}

/// Score and order warnings: descending score, ties by ascending identity.
pub fn rank<'a, S: Scalar>(
    params: &ModelParams<S>,
    encoder: &dyn Encoder<S>,
    items: impl IntoIterator<Item = (u64, &'a FeatureBundle)>,
) -> Vec<RankedWarning<S>> {
    let mut out: Vec<RankedWarning<S>> = items
        .into_iter()
        .map(|(identity, bundle)| {
            let probs = predict(params, encoder, bundle);
            let predicted = predicted_class(&probs);
            RankedWarning {
                identity,
                score: ranking_score(&probs),
                predicted,
                confidence: probs[predicted.base_score() as usize],
            }
        })
        .collect();
    sort_ranked(&mut out);
    out
}

/// Sort scored warnings into presentation order.
pub fn sort_ranked<S: Scalar>(list: &mut [RankedWarning<S>]) {
    list.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("ranking scores are finite")
            .then(a.identity.cmp(&b.identity))
    });
}

/// Relative-error report from comparing analytic gradients against central
/// finite differences of the batch loss.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_rel_err: f64,
}

/// Compare analytic gradients with central finite differences on random
/// small models and samples, for both training losses. Deterministic for a
/// fixed seed.
pub fn gradient_check(seed: u64, probes: usize) -> GradCheckReport {
    let dim = 32;
    let hidden = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel: f64 = 0.0;

    for probe in 0..probes {
        let stage = if probe % 2 == 0 { Stage::Warmup } else { Stage::Finetune };
        let classes = stage_classes(stage);
        let mut params: ModelParams<f64> =
            init_params(dim, hidden, rng.next_u64(), Hyperparams::default());
        // Nudge biases off zero so every parameter group participates.
        for b in params.shared_b.iter_mut() {
            *b = uniform::<f64>(&mut rng, 0.2);
        }
        let samples: Vec<TrainSample<f64>> = (0..3)
            .map(|_| {
                let nnz = 4 + (rng.next_u64() % 6) as usize;
                let mut idx: Vec<u32> =
                    (0..nnz).map(|_| (rng.next_u64() % dim as u64) as u32).collect();
                idx.sort_unstable();
                idx.dedup();
                let entries: Vec<(u32, f64)> =
                    idx.into_iter().map(|i| (i, uniform::<f64>(&mut rng, 1.0))).collect();
                TrainSample {
                    x: SparseVec::from_entries(dim, entries),
                    target: (rng.next_u64() % classes as u64) as usize,
                    weight: 1.0 + (rng.next_u64() % 6) as f64 / 5.0,
                }
            })
            .collect();
        let batch: Vec<&TrainSample<f64>> = samples.iter().collect();

        let analytic = analytic_gradients(&params, stage, &batch);
        // Probe a handful of coordinates in every parameter group.
        let coords = pick_coords(&params, stage, &mut rng);
        for (group, index) in coords {
            let a = analytic.read(group, index);
            let h = 1e-5;
            let orig = *param_at(&mut params, stage, group, index);
            *param_at(&mut params, stage, group, index) = orig + h;
            let up = batch_loss(&params, stage, &batch);
            *param_at(&mut params, stage, group, index) = orig - h;
            let down = batch_loss(&params, stage, &batch);
            *param_at(&mut params, stage, group, index) = orig;
            let fd = (up - down) / (2.0 * h);
            let denom = a.abs().max(fd.abs());
            if denom > 1e-8 {
                max_rel = max_rel.max((a - fd).abs() / denom);
            }
        }
    }
    GradCheckReport { probes, max_rel_err: max_rel }
}

/// Parameter groups addressed by the gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ParamGroup {
    SharedW,
    SharedB,
    HeadW,
    HeadB,
}

fn pick_coords(
    params: &ModelParams<f64>,
    stage: Stage,
    rng: &mut ChaCha8Rng,
) -> Vec<(ParamGroup, usize)> {
    let head_len = stage_classes(stage) * params.hidden;
    let mut coords = Vec::new();
    for _ in 0..3 {
        coords.push((ParamGroup::SharedW, (rng.next_u64() % params.shared_w.len() as u64) as usize));
        coords.push((ParamGroup::SharedB, (rng.next_u64() % params.shared_b.len() as u64) as usize));
        coords.push((ParamGroup::HeadW, (rng.next_u64() % head_len as u64) as usize));
    }
    coords.push((ParamGroup::HeadB, (rng.next_u64() % stage_classes(stage) as u64) as usize));
    coords
}

fn param_at(params: &mut ModelParams<f64>, stage: Stage, group: ParamGroup, index: usize) -> &mut f64 {
    match (group, stage) {
        (ParamGroup::SharedW, _) => &mut params.shared_w[index],
        (ParamGroup::SharedB, _) => &mut params.shared_b[index],
        (ParamGroup::HeadW, Stage::Warmup) => &mut params.binary_w[index],
        (ParamGroup::HeadW, Stage::Finetune) => &mut params.multi_w[index],
        (ParamGroup::HeadB, Stage::Warmup) => &mut params.binary_b[index],
        (ParamGroup::HeadB, Stage::Finetune) => &mut params.multi_b[index],
    }
}

/// Dense analytic gradients of the mean batch loss, for the check only.
struct AnalyticGrads {
    shared_w: Vec<f64>,
    shared_b: Vec<f64>,
    head_w: Vec<f64>,
    head_b: Vec<f64>,
}

impl AnalyticGrads {
    fn read(&self, group: ParamGroup, index: usize) -> f64 {
        match group {
            ParamGroup::SharedW => self.shared_w[index],
            ParamGroup::SharedB => self.shared_b[index],
            ParamGroup::HeadW => self.head_w[index],
            ParamGroup::HeadB => self.head_b[index],
        }
    }
}


fn analytic_gradients(
    params: &ModelParams<f64>,
    stage: Stage,
    batch: &[&TrainSample<f64>],
) -> AnalyticGrads {
    let h = params.hidden;
    let classes = stage_classes(stage);
    let (head_w, head_b) = match stage {
        Stage::Warmup => (&params.binary_w, &params.binary_b),
        Stage::Finetune => (&params.multi_w, &params.multi_b),
    };
    let mut g = AnalyticGrads {
        shared_w: vec![0.0; params.shared_w.len()],
        shared_b: vec![0.0; h],
        head_w: vec![0.0; classes * h],
        head_b: vec![0.0; classes],
    };
    let n = batch.len() as f64;
    for s in batch {
        let (z, a) = hidden_activations(params, &s.x);
        let logits = head_logits(head_w, head_b, &a, classes);
        let probs = softmax(&logits);
        let dz2: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(c, &p)| s.weight * (p - if c == s.target { 1.0 } else { 0.0 }) / n)
            .collect();
        for (c, &gc) in dz2.iter().enumerate() {
            g.head_b[c] += gc;
            for (j, &aj) in a.iter().enumerate() {
                g.head_w[c * h + j] += gc * aj;
            }
        }
        let mut dz1 = vec![0.0; h];
        for (c, &gc) in dz2.iter().enumerate() {
            for (j, d) in dz1.iter_mut().enumerate() {
                *d += gc * head_w[c * h + j];
            }
        }
        for (j, d) in dz1.iter_mut().enumerate() {
            if z[j] <= 0.0 {
                *d = 0.0;
            }
        }
        for (j, &d) in dz1.iter().enumerate() {
            g.shared_b[j] += d;
        }
        for &(k, xv) in s.x.entries() {
            for (j, &d) in dz1.iter().enumerate() {
                g.shared_w[k as usize * h + j] += d * xv;
            }
        }
    }
    g
}
