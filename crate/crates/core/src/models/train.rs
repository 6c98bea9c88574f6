use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Head, ModelSpec};
use crate::image::Image;
use crate::nn::{
    entropy, inverse_freq_weights, loss_mse, softmax, Adam, LossKind, LossSpec, Network, NnError, Optimizer,
    OptimizerKind, Sgd, Target,
};
use crate::pipeline::{bin_of, bin_to_angle, straight_bin, PipelineError, PipelineSpec};
use crate::recorder::Dataset;

/// Train MSE below which a regression model counts as memorized.
pub const OVERFIT_MSE: f64 = 1e-3;

const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    /// SGD only.
    pub momentum: f64,
    pub seed: u64,
    pub val_fraction: f64,
    pub loss: LossSpec,
    pub pipeline: PipelineSpec,
    /// Regression targets are `angle · label_scale`.
    pub label_scale: f64,
    /// Stop after this many epochs without a better validation loss.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            lr: 1e-3,
            optimizer: OptimizerKind::Adam,
            momentum: 0.9,
            seed: 0,
            val_fraction: 0.2,
            loss: LossSpec::default(),
            pipeline: PipelineSpec::default(),
            label_scale: 1.0,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must be in [0, 1)");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        if !(self.label_scale > 0.0 && self.label_scale.is_finite()) {
            return bad("label_scale must be positive");
        }
        self.loss.validate()?;
        self.pipeline.validate()?;
        Ok(())
    }

    /// Checks that the loss fits the model head.
    pub fn check_head(&self, head: Head) -> Result<(), TrainError> {
        match head {
            Head::Regression if self.loss.kind == LossKind::Mse => Ok(()),
            Head::Classification(n) if self.loss.kind.is_classification() && n == self.loss.n_bins => Ok(()),
            Head::Classification(n) if self.loss.kind.is_classification() => Err(TrainError::Config(format!(
                "model has {n} bins but loss has {}",
                self.loss.n_bins
            ))),
            _ => Err(TrainError::Config(format!("{:?} loss does not fit a {head:?} head", self.loss.kind))),
        }
    }

    fn make_optimizer(&self) -> Box<dyn Optimizer<f32>> {
        match self.optimizer {
            OptimizerKind::Sgd => Box::new(Sgd::new(self.lr, self.momentum)),
            OptimizerKind::Adam => Box::new(Adam::new(self.lr)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("empty training set")]
    EmptyDataset,
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("sample {id} has {got} input values, model expects {expected}")]
    InputShape { id: u64, expected: usize, got: usize },
}

/// A sample after the image pipeline: channels-first network input plus
/// its steering label.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: u64,
    pub input: Vec<f32>,
    pub angle: f64,
}

/// Runs the image stages of `pipeline` on every sample (dataset stages are
/// the caller's business).
pub fn prepare_examples(ds: &Dataset, pipeline: &PipelineSpec) -> Result<Vec<Example>, PipelineError> {
    ds.samples
        .iter()
        .map(|s| {
            let img = pipeline.apply_image(&Image::from_rgb(&s.rgb), s.id)?;
            Ok(Example { id: s.id, input: img.to_chw(), angle: s.angle })
        })
        .collect()
}

fn target_of(angle: f64, head: Head, label_scale: f64) -> Target {
    match head {
        Head::Classification(n) => Target::Class(bin_of(angle, n)),
        _ => Target::Value(angle * label_scale),
    }
}

/// Steering command from one network output: the argmax bin's center, or
/// with `expectation` the softmax-weighted mean of bin centers.
pub fn decode_steer(output: &[f32], head: Head, label_scale: f64, expectation: bool) -> f64 {
    match head {
        Head::Classification(n) => {
            if expectation {
                let p = softmax(&output.iter().map(|&v| v as f64).collect::<Vec<_>>());
                p.iter().enumerate().map(|(i, &pi)| pi * bin_to_angle(i, n).unwrap_or(0.0)).sum()
            } else {
                bin_to_angle(argmax(output), n).unwrap_or(0.0)
            }
        }
        _ => (output[0] as f64 / label_scale).clamp(-1.0, 1.0),
    }
}

fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Loss and steering statistics of a model over a set of examples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub loss: f64,
    /// Share of examples whose predicted bin equals the label's bin.
    pub accuracy: f64,
    /// H(mean softmax) for classifiers, entropy of the predicted-bin
    /// histogram for regressors, in nats.
    pub pred_entropy: f64,
    pub straight_fraction: f64,
    /// `confusion[true_bin][predicted_bin]`.
    pub confusion: Vec<Vec<usize>>,
}

/// `n_bins` sets the binning for accuracy and the confusion matrix.
pub fn evaluate_set(
    net: &Network<f32>,
    examples: &[Example],
    loss: &LossSpec,
    head: Head,
    label_scale: f64,
) -> Result<SetMetrics, TrainError> {
    let n_bins = match head {
        Head::Classification(n) => n,
        _ => loss.n_bins,
    };
    let mut confusion = vec![vec![0usize; n_bins]; n_bins];
    let mut mean_p = vec![0.0f64; n_bins];
    let mut total = 0.0;
    for ex in examples {
        let out = forward_checked(net, ex)?;
        total += loss.evaluate(&out, target_of(ex.angle, head, label_scale))?.0 as f64;
        let pred = match head {
            Head::Classification(_) => {
                let p = softmax(&out.iter().map(|&v| v as f64).collect::<Vec<_>>());
                mean_p.iter_mut().zip(&p).for_each(|(m, v)| *m += v);
                argmax(&out)
            }
            _ => {
                let b = bin_of(decode_steer(&out, head, label_scale, false), n_bins);
                mean_p[b] += 1.0;
                b
            }
        };
        confusion[bin_of(ex.angle, n_bins)][pred] += 1;
    }
    let n = examples.len().max(1) as f64;
    mean_p.iter_mut().for_each(|m| *m /= n);
    let correct: usize = (0..n_bins).map(|i| confusion[i][i]).sum();
    let straight: usize = confusion.iter().map(|row| row[straight_bin(n_bins)]).sum();
    Ok(SetMetrics {
        loss: total / n,
        accuracy: correct as f64 / n,
        pred_entropy: entropy(&mean_p),
        straight_fraction: straight as f64 / n,
        confusion,
    })
}

fn check_len(net: &Network<f32>, ex: &Example) -> Result<(), TrainError> {
    let expected: usize = net.input_shape.iter().product();
    if ex.input.len() != expected {
        return Err(TrainError::InputShape { id: ex.id, expected, got: ex.input.len() });
    }
    Ok(())
}

fn forward_checked(net: &Network<f32>, ex: &Example) -> Result<Vec<f32>, TrainError> {
    check_len(net, ex)?;
    Ok(net.forward(&ex.input)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
    pub pred_entropy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn train_losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_loss).collect()
    }

    /// `epoch,train_loss,val_loss,val_acc,pred_entropy`; absent values are
    /// left empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_acc,pred_entropy\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.epoch,
                r.train_loss,
                opt(r.val_loss),
                opt(r.val_acc),
                r.pred_entropy
            );
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Network<f32>,
    /// Parameters at the epoch with the lowest validation loss (training
    /// loss when there is no validation split).
    pub best: Network<f32>,
    pub best_epoch: usize,
    pub history: TrainHistory,
    /// The loss actually used, with `weighted_ce` weights filled in.
    pub loss: LossSpec,
}

enum Objective {
    Supervised { loss: LossSpec, head: Head, label_scale: f64 },
    Reconstruct,
}

impl Objective {
    fn eval(&self, out: &[f32], ex: &Example) -> Result<(f32, Vec<f32>), NnError> {
        match self {
            Objective::Supervised { loss, head, label_scale } => {
                loss.evaluate(out, target_of(ex.angle, *head, *label_scale))
            }
            Objective::Reconstruct => Ok(loss_mse(out, &ex.input)),
        }
    }
}

/// One model, its optimizer and a shuffling stream, advanced an epoch at a
/// time.
struct Trainer {
    net: Network<f32>,
    opt: Box<dyn Optimizer<f32>>,
    rng: ChaCha8Rng,
    batch_size: usize,
    objective: Objective,
    epoch: usize,
}

impl Trainer {
    fn new(net: Network<f32>, cfg: &TrainConfig, objective: Objective) -> Self {
        Self {
            net,
            opt: cfg.make_optimizer(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM),
            batch_size: cfg.batch_size,
            objective,
            epoch: 0,
        }
    }

    /// Shuffled mini-batch pass; returns the mean per-sample loss.
    fn epoch(&mut self, examples: &[Example]) -> Result<f64, TrainError> {
        self.epoch += 1;
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0f64;
        for (b, batch) in order.chunks(self.batch_size).enumerate() {
            self.net.zero_grad();
            let scale = 1.0 / batch.len() as f32;
            for &i in batch {
                let ex = &examples[i];
                check_len(&self.net, ex)?;
                let trace = self.net.forward_trace(&ex.input)?;
                let (l, mut g) = self.objective.eval(trace.output(), ex)?;
                if !l.is_finite() {
                    return Err(TrainError::NonFinite { epoch: self.epoch, batch: b + 1 });
                }
                g.iter_mut().for_each(|v| *v *= scale);
                self.net.backward(&trace, &g);
                total += l as f64;
            }
            self.opt.step(&mut self.net.params);
        }
        Ok(total / examples.len() as f64)
    }
}

fn split(ds: &Dataset, val_fraction: f64, seed: u64) -> (Dataset, Dataset) {
    let n_val = crate::math::floor(val_fraction * ds.len() as f64) as usize;
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_val = vec![false; ds.len()];
    idx[..n_val].iter().for_each(|&i| is_val[i] = true);
    let pick = |want: bool| {
        let samples = ds.samples.iter().zip(&is_val).filter(|(_, &v)| v == want).map(|(s, _)| s.clone()).collect();
        Dataset::new(samples, ds.meta.clone())
    };
    (pick(false), pick(true))
}

/// Splits off a validation set, runs the dataset stages of the pipeline on
/// the training part only and the image stages on both, then trains.
pub fn train(ds: &Dataset, spec: &ModelSpec, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let pipeline = cfg.pipeline.clone().with_seed(cfg.seed);
    let (train_ds, val_ds) = split(ds, cfg.val_fraction, cfg.seed);
    let train_ds = pipeline.apply_dataset(&train_ds)?;
    let train_ex = prepare_examples(&train_ds, &pipeline)?;
    let val_ex = prepare_examples(&val_ds, &pipeline)?;
    train_examples(spec, &train_ex, &val_ex, cfg)
}

/// Trains on already prepared examples. Initialization, shuffling and
/// results depend only on `cfg.seed`.
pub fn train_examples(
    spec: &ModelSpec,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    cfg.check_head(spec.head)?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let loss = resolve_loss(&cfg.loss, spec.head, train)?;
    let objective = Objective::Supervised { loss: loss.clone(), head: spec.head, label_scale: cfg.label_scale };
    let mut t = Trainer::new(spec.build(cfg.seed)?, cfg, objective);
    let mut history = TrainHistory::default();
    let mut best = (f64::INFINITY, t.net.clone(), 0usize);
    for epoch in 1..=cfg.epochs {
        let train_loss = t.epoch(train)?;
        let (val_loss, val_acc, pred_entropy) = if val.is_empty() {
            (None, None, evaluate_set(&t.net, train, &loss, spec.head, cfg.label_scale)?.pred_entropy)
        } else {
            let m = evaluate_set(&t.net, val, &loss, spec.head, cfg.label_scale)?;
            (Some(m.loss), Some(m.accuracy), m.pred_entropy)
        };
        history.records.push(EpochRecord { epoch, train_loss, val_loss, val_acc, pred_entropy });
        let score = val_loss.unwrap_or(train_loss);
        if score < best.0 {
            best = (score, t.net.clone(), epoch);
        }
        if cfg.patience.is_some_and(|p| epoch - best.2 >= p) {
            break;
        }
    }
    let (_, best_net, best_epoch) = best;
    Ok(TrainOutcome { model: t.net, best: best_net, best_epoch: best_epoch.max(1), history, loss })
}

/// Fills in inverse-frequency weights for `weighted_ce` when none are given.
fn resolve_loss(loss: &LossSpec, head: Head, train: &[Example]) -> Result<LossSpec, TrainError> {
    let mut loss = loss.clone();
    if let (LossKind::WeightedCe, None, Head::Classification(n)) = (loss.kind, &loss.class_weights, head) {
        let mut hist = vec![0usize; n];
        train.iter().for_each(|ex| hist[bin_of(ex.angle, n)] += 1);
        loss.class_weights = Some(inverse_freq_weights(&hist)?);
    }
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverfitReport {
    pub passed: bool,
    pub epochs_run: usize,
    pub accuracy: f64,
    pub mse: Option<f64>,
    /// Ids of two samples with identical inputs and different targets.
    pub inconsistent: Option<(u64, u64)>,
}

impl OverfitReport {
    pub fn summary(&self) -> String {
        let verdict = if self.passed { "pass" } else { "fail" };
        let mut s = format!("{verdict} after {} epochs, train accuracy {:.3}", self.epochs_run, self.accuracy);
        if let Some(m) = self.mse {
            let _ = write!(s, ", train mse {m:.2e}");
        }
        if let Some((a, b)) = self.inconsistent {
            let _ = write!(s, "; inconsistent labels (samples {a} and {b} share an image)");
        }
        s
    }
}

/// Trains on every sample (no validation split, image stages only) for up
/// to `cfg.epochs` epochs and passes once train accuracy reaches 100%
/// (classification) or train MSE drops below [`OVERFIT_MSE`] (regression).
pub fn overfit_sanity(ds: &Dataset, spec: &ModelSpec, cfg: &TrainConfig) -> Result<OverfitReport, TrainError> {
    cfg.validate()?;
    cfg.check_head(spec.head)?;
    if ds.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let examples = prepare_examples(ds, &cfg.pipeline.clone().with_seed(cfg.seed))?;
    let inconsistent = find_contradiction(&examples, spec.head, cfg.label_scale);
    let loss = resolve_loss(&cfg.loss, spec.head, &examples)?;
    let objective = Objective::Supervised { loss: loss.clone(), head: spec.head, label_scale: cfg.label_scale };
    let mut t = Trainer::new(spec.build(cfg.seed)?, cfg, objective);
    let mut report = OverfitReport { passed: false, epochs_run: 0, accuracy: 0.0, mse: None, inconsistent };
    for epoch in 1..=cfg.epochs {
        t.epoch(&examples)?;
        let m = evaluate_set(&t.net, &examples, &loss, spec.head, cfg.label_scale)?;
        report.epochs_run = epoch;
        report.accuracy = m.accuracy;
        report.passed = match spec.head {
            Head::Classification(_) => m.accuracy == 1.0,
            _ => {
                report.mse = Some(m.loss);
                m.loss < OVERFIT_MSE
            }
        };
        if report.passed {
            break;
        }
    }
    Ok(report)
}

fn find_contradiction(examples: &[Example], head: Head, label_scale: f64) -> Option<(u64, u64)> {
    for (i, a) in examples.iter().enumerate() {
        for b in &examples[i + 1..] {
            if a.input == b.input && target_of(a.angle, head, label_scale) != target_of(b.angle, head, label_scale) {
                return Some((a.id, b.id));
            }
        }
    }
    None
}

pub struct AutoencoderOutcome {
    pub encoder: Network<f32>,
    pub decoder: Network<f32>,
    /// Per-epoch mean reconstruction MSE.
    pub history: TrainHistory,
}

/// Fits encoder and decoder jointly to reproduce `examples`' inputs, then
/// splits them apart.
pub fn train_autoencoder(
    encoder: &ModelSpec,
    decoder: &ModelSpec,
    examples: &[Example],
    cfg: &TrainConfig,
) -> Result<AutoencoderOutcome, TrainError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let stack = super::autoencoder_stack(encoder, decoder);
    let mut t = Trainer::new(stack.build(cfg.seed)?, cfg, Objective::Reconstruct);
    let mut history = TrainHistory::default();
    for epoch in 1..=cfg.epochs {
        let train_loss = t.epoch(examples)?;
        history.records.push(EpochRecord { epoch, train_loss, val_loss: None, val_acc: None, pred_entropy: 0.0 });
    }
    let (enc, dec) = t.net.split_at(encoder.layers.len())?;
    Ok(AutoencoderOutcome { encoder: enc, decoder: dec, history })
}

/// Sliding windows of `seq_len` consecutive embeddings, labelled with the
/// last frame's angle. `examples` must be in time order.
pub fn embed_sequences(
    encoder: &Network<f32>,
    examples: &[Example],
    seq_len: usize,
) -> Result<Vec<Example>, TrainError> {
    if seq_len == 0 {
        return Err(TrainError::Config("sequence length must be positive".into()));
    }
    let emb: Vec<Vec<f32>> = examples.iter().map(|ex| forward_checked(encoder, ex)).collect::<Result<_, _>>()?;
    Ok((seq_len - 1..examples.len())
        .map(|end| {
            let start = end + 1 - seq_len;
            Example { id: examples[end].id, input: emb[start..=end].concat(), angle: examples[end].angle }
        })
        .collect())
}
