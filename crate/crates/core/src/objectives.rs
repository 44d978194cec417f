//! The two supervision signals as trainable objectives.
//!
//! * NLI: pooled embeddings `u`, `v` of premise and hypothesis are composed
//!   into `[u; v; |u − v|]` and classified by a 3-way softmax head.
//! * Definitions: the pooled embedding of a definition is fed to a
//!   vocabulary-sized word prediction layer that must output the defined
//!   word. By default the layer is tied to the encoder's embedding table.
//!
//! Gradients are computed analytically and applied with Adam under a linear
//! warmup schedule. Batches come from length-bucketed "smart" batching.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, DefinitionExample, NliExample};
use crate::encoder::ToyEncoder;
use crate::error::{Error, Result};
use crate::numstat::{axpy, cross_entropy, softmax, RealMatrix, Rng};

/// Bucket width, in tokens, used by smart batching.
pub const BUCKET_WIDTH: usize = 8;

/// Learning-rate grid searched for fine-tuning.
pub const FINE_TUNE_LR_GRID: [f64; 6] = [1e-6, 2e-6, 5e-6, 10e-6, 20e-6, 50e-6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliHead {
    /// `3 × 3d`
    pub weights: RealMatrix,
    pub bias: Vec<f64>,
    pub use_bias: bool,
}

impl NliHead {
    pub fn zeros(dim: usize) -> Self {
        NliHead {
            weights: RealMatrix::zeros(3, 3 * dim),
            bias: vec![0.0; 3],
            use_bias: true,
        }
    }

    /// Weights from `U(-1/√(3d), 1/√(3d))`, zero bias.
    pub fn init(dim: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / ((3 * dim) as f64).sqrt();
        NliHead {
            weights: RealMatrix::uniform(3, 3 * dim, -bound, bound, rng),
            bias: vec![0.0; 3],
            use_bias: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.cols() / 3
    }
}

/// `[u; v; |u − v|]`
pub fn nli_features(u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut f = Vec::with_capacity(3 * u.len());
    f.extend_from_slice(u);
    f.extend_from_slice(v);
    f.extend(u.iter().zip(v).map(|(a, b)| (a - b).abs()));
    f
}

pub fn nli_forward(u: &[f64], v: &[f64], head: &NliHead) -> Result<Vec<f64>> {
    let d = head.dim();
    for x in [u, v] {
        if x.len() != d {
            return Err(Error::DimMismatch {
                expected: d,
                got: x.len(),
            });
        }
    }
    let mut logits = head.weights.matvec(&nli_features(u, v))?;
    if head.use_bias {
        axpy(1.0, &head.bias, &mut logits);
    }
    Ok(logits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NliGrads {
    pub table: RealMatrix,
    pub weights: RealMatrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
struct EncodedNli {
    premise: Vec<usize>,
    hypothesis: Vec<usize>,
    label: usize,
}

fn encode_nli(enc: &ToyEncoder, batch: &[NliExample]) -> Result<Vec<EncodedNli>> {
    batch
        .iter()
        .map(|ex| {
            Ok(EncodedNli {
                premise: enc.sentence_ids(&ex.premise)?,
                hypothesis: enc.sentence_ids(&ex.hypothesis)?,
                label: ex.label.index(),
            })
        })
        .collect()
}

fn check_nli_head(enc: &ToyEncoder, head: &NliHead) -> Result<()> {
    if head.weights.rows() != 3 || head.weights.cols() != 3 * enc.dim() || head.bias.len() != 3 {
        return Err(Error::DimMismatch {
            expected: 3 * enc.dim(),
            got: head.weights.cols(),
        });
    }
    Ok(())
}

fn nli_pass(
    enc: &ToyEncoder,
    head: &NliHead,
    batch: &[EncodedNli],
    mut grads: Option<&mut NliGrads>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty NLI batch"));
    }
    let d = enc.dim();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for ex in batch {
        let tu = enc.pool_ids(&ex.premise);
        let tv = enc.pool_ids(&ex.hypothesis);
        let logits = nli_forward(&tu.vector, &tv.vector, head)?;
        let mut dz = softmax(&logits);
        loss += cross_entropy(&dz, ex.label)?;

        let Some(g) = grads.as_deref_mut() else {
            continue;
        };
        dz[ex.label] -= 1.0;
        dz.iter_mut().for_each(|x| *x *= scale);
        let feats = nli_features(&tu.vector, &tv.vector);
        g.weights.add_outer(1.0, &dz, &feats);
        if head.use_bias {
            axpy(1.0, &dz, &mut g.bias);
        }
        let df = head.weights.transpose_matvec(&dz)?;
        let mut du = df[..d].to_vec();
        let mut dv = df[d..2 * d].to_vec();
        for j in 0..d {
            let diff = tu.vector[j] - tv.vector[j];
            // subgradient of |x| at 0 is taken as 0
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            du[j] += sign * df[2 * d + j];
            dv[j] -= sign * df[2 * d + j];
        }
        enc.pool_backward(&ex.premise, &tu, &du, &mut g.table);
        enc.pool_backward(&ex.hypothesis, &tv, &dv, &mut g.table);
    }
    Ok(loss * scale)
}

/// Mean cross-entropy of the NLI head over `batch`.
pub fn nli_loss(batch: &[NliExample], enc: &ToyEncoder, head: &NliHead) -> Result<f64> {
    check_nli_head(enc, head)?;
    nli_pass(enc, head, &encode_nli(enc, batch)?, None)
}

/// Mean loss and its gradient w.r.t. the embedding table and the head.
pub fn nli_loss_and_grads(
    batch: &[NliExample],
    enc: &ToyEncoder,
    head: &NliHead,
) -> Result<(f64, NliGrads)> {
    check_nli_head(enc, head)?;
    let encoded = encode_nli(enc, batch)?;
    let mut grads = NliGrads {
        table: RealMatrix::zeros(enc.table.rows(), enc.dim()),
        weights: RealMatrix::zeros(3, 3 * enc.dim()),
        bias: vec![0.0; 3],
    };
    let loss = nli_pass(enc, head, &encoded, Some(&mut grads))?;
    Ok((loss, grads))
}

/// Vocabulary-sized output layer. `output: None` means the weights are the
/// encoder's embedding table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordPredictionHead {
    pub output: Option<RealMatrix>,
    pub bias: Vec<f64>,
}

impl WordPredictionHead {
    pub fn tied(vocab_size: usize) -> Self {
        WordPredictionHead {
            output: None,
            bias: vec![0.0; vocab_size],
        }
    }

    /// Separate `V × d` weights from `U(-0.5/d, 0.5/d)`.
    pub fn untied(vocab_size: usize, dim: usize, rng: &mut Rng) -> Self {
        let half = 0.5 / dim as f64;
        WordPredictionHead {
            output: Some(RealMatrix::uniform(vocab_size, dim, -half, half, rng)),
            bias: vec![0.0; vocab_size],
        }
    }

    pub fn is_tied(&self) -> bool {
        self.output.is_none()
    }

    fn weights<'a>(&'a self, enc: &'a ToyEncoder) -> &'a RealMatrix {
        self.output.as_ref().unwrap_or(&enc.table)
    }
}

fn check_def_head(enc: &ToyEncoder, head: &WordPredictionHead) -> Result<()> {
    let w = head.weights(enc);
    if w.rows() != enc.vocab.len() || head.bias.len() != enc.vocab.len() {
        return Err(Error::DimMismatch {
            expected: enc.vocab.len(),
            got: head.bias.len(),
        });
    }
    if w.cols() != enc.dim() {
        return Err(Error::DimMismatch {
            expected: enc.dim(),
            got: w.cols(),
        });
    }
    Ok(())
}

/// `output · s + bias`; a tied head reads the encoder table.
pub fn def_forward(s: &[f64], head: &WordPredictionHead, enc: &ToyEncoder) -> Result<Vec<f64>> {
    check_def_head(enc, head)?;
    let mut logits = head.weights(enc).matvec(s)?;
    axpy(1.0, &head.bias, &mut logits);
    Ok(logits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefGrads {
    /// Encoder-path gradient, plus the output-path gradient when tied.
    pub table: RealMatrix,
    pub output: Option<RealMatrix>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
struct EncodedDef {
    target: usize,
    definition: Vec<usize>,
}

fn target_id(enc: &ToyEncoder, word: &str) -> Option<usize> {
    enc.vocab.get(word).or_else(|| enc.vocab.get(&word.to_lowercase()))
}

fn encode_defs(enc: &ToyEncoder, batch: &[DefinitionExample]) -> Result<Vec<EncodedDef>> {
    batch
        .iter()
        .map(|ex| {
            let target = target_id(enc, &ex.word).ok_or_else(|| {
                Error::invalid(format!("definition target {:?} is not in the vocabulary", ex.word))
            })?;
            Ok(EncodedDef {
                target,
                definition: enc.sentence_ids(&ex.definition)?,
            })
        })
        .collect()
}

/// Drop definitions whose target word is missing from the vocabulary.
/// Returns the kept examples and the number dropped.
pub fn filter_definitions(
    enc: &ToyEncoder,
    data: &[DefinitionExample],
) -> (Vec<DefinitionExample>, usize) {
    let (kept, dropped): (Vec<_>, Vec<_>) = data.iter().cloned().partition(|ex| {
        target_id(enc, &ex.word).is_some() && !tokenize(&ex.definition).is_empty()
    });
    (kept, dropped.len())
}

fn def_pass(
    enc: &ToyEncoder,
    head: &WordPredictionHead,
    batch: &[EncodedDef],
    mut grads: Option<&mut DefGrads>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty definition batch"));
    }
    let scale = 1.0 / batch.len() as f64;
    let weights = head.weights(enc);
    let mut loss = 0.0;
    for ex in batch {
        let trace = enc.pool_ids(&ex.definition);
        let mut logits = weights.matvec(&trace.vector)?;
        axpy(1.0, &head.bias, &mut logits);
        let mut dz = softmax(&logits);
        loss += cross_entropy(&dz, ex.target)?;

        let Some(g) = grads.as_deref_mut() else {
            continue;
        };
        dz[ex.target] -= 1.0;
        dz.iter_mut().for_each(|x| *x *= scale);
        let ds = weights.transpose_matvec(&dz)?;
        match g.output.as_mut() {
            Some(out) => out.add_outer(1.0, &dz, &trace.vector),
            None => g.table.add_outer(1.0, &dz, &trace.vector),
        }
        axpy(1.0, &dz, &mut g.bias);
        enc.pool_backward(&ex.definition, &trace, &ds, &mut g.table);
    }
    Ok(loss * scale)
}

pub fn def_loss(batch: &[DefinitionExample], enc: &ToyEncoder, head: &WordPredictionHead) -> Result<f64> {
    check_def_head(enc, head)?;
    def_pass(enc, head, &encode_defs(enc, batch)?, None)
}

/// Mean loss over `V` classes and gradients. Every target must be in the
/// vocabulary; see [`filter_definitions`].
pub fn def_loss_and_grads(
    batch: &[DefinitionExample],
    enc: &ToyEncoder,
    head: &WordPredictionHead,
) -> Result<(f64, DefGrads)> {
    check_def_head(enc, head)?;
    let encoded = encode_defs(enc, batch)?;
    let (v, d) = (enc.vocab.len(), enc.dim());
    let mut grads = DefGrads {
        table: RealMatrix::zeros(v, d),
        output: head.output.as_ref().map(|_| RealMatrix::zeros(v, d)),
        bias: vec![0.0; v],
    };
    let loss = def_pass(enc, head, &encoded, Some(&mut grads))?;
    Ok((loss, grads))
}

/// Most probable word for each definition.
pub fn predict_words(
    definitions: &[&str],
    enc: &ToyEncoder,
    head: &WordPredictionHead,
) -> Result<Vec<String>> {
    definitions
        .iter()
        .map(|d| {
            let ids = enc.sentence_ids(d)?;
            let logits = def_forward(&enc.pool_ids(&ids).vector, head, enc)?;
            Ok(enc.vocab.word(crate::numstat::argmax(&logits)).to_string())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// Adam moments for a set of parameter slots. Each slot keeps its own step
/// counter, so a parameter group that skips a step keeps exact bias
/// correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    slots: BTreeMap<usize, Moments>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            slots: BTreeMap::new(),
        }
    }

    /// Steps taken by `slot` so far.
    pub fn t(&self, slot: usize) -> u64 {
        self.slots.get(&slot).map_or(0, |m| m.t)
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, slot: usize, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimMismatch {
                expected: params.len(),
                got: grads.len(),
            });
        }
        let n = params.len();
        let mom = self.slots.entry(slot).or_insert_with(|| Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        });
        if mom.m.len() != n {
            return Err(Error::DimMismatch {
                expected: mom.m.len(),
                got: n,
            });
        }
        let AdamConfig { beta1, beta2, eps } = self.config;
        mom.t += 1;
        let bc1 = 1.0 - beta1.powi(mom.t as i32);
        let bc2 = 1.0 - beta2.powi(mom.t as i32);
        for i in 0..n {
            let g = grads[i];
            mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * g;
            mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * g * g;
            let m_hat = mom.m[i] / bc1;
            let v_hat = mom.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

const SLOT_TABLE: usize = 0;
const SLOT_NLI_W: usize = 1;
const SLOT_NLI_B: usize = 2;
const SLOT_DEF_OUT: usize = 3;
const SLOT_DEF_B: usize = 4;

/// Linear warmup over the first `⌈warmup_fraction · total⌉` steps, then
/// constant. `step` is 1-based.
pub fn lr_at(step: usize, total_steps: usize, base_lr: f64, warmup_fraction: f64) -> Result<f64> {
    lr_schedule(step, total_steps, base_lr, warmup_fraction, false)
}

/// As [`lr_at`], optionally decaying linearly after warmup so the last step
/// runs at `base_lr / (total − warmup)`.
pub fn lr_schedule(
    step: usize,
    total_steps: usize,
    base_lr: f64,
    warmup_fraction: f64,
    decay: bool,
) -> Result<f64> {
    if step == 0 || step > total_steps {
        return Err(Error::invalid(format!(
            "step {step} outside 1..={total_steps}"
        )));
    }
    let warmup = (warmup_fraction * total_steps as f64).ceil() as usize;
    if step <= warmup {
        return Ok(base_lr * step as f64 / warmup as f64);
    }
    if decay {
        let remaining = (total_steps - step + 1) as f64;
        return Ok(base_lr * remaining / (total_steps - warmup) as f64);
    }
    Ok(base_lr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub lr: f64,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub smart_batching: bool,
    /// Decay the learning rate linearly after warmup.
    pub lr_decay: bool,
    /// Hard cap on optimizer steps (after cycle rounding for multi-task).
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            epochs: 1,
            adam: AdamConfig::default(),
            // toy-scale default; the fine-tuning grid lives in FINE_TUNE_LR_GRID
            lr: 1e-2,
            warmup_fraction: 0.1,
            seed: 0,
            smart_batching: true,
            lr_decay: false,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config("warmup_fraction must be in [0, 1)".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        Ok(())
    }

    fn lr(&self, step: usize, total: usize) -> Result<f64> {
        lr_schedule(step, total, self.lr, self.warmup_fraction, self.lr_decay)
    }
}

/// Batches of example indices for one epoch. With `smart` set, examples are
/// bucketed by length (width [`BUCKET_WIDTH`]) and each batch draws from one
/// bucket; batch order is shuffled either way.
pub fn smart_batches(lengths: &[usize], batch_size: usize, smart: bool, rng: &mut Rng) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch_size must be positive");
    let mut batches = Vec::new();
    if smart {
        let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &len) in lengths.iter().enumerate() {
            buckets.entry(len.saturating_sub(1) / BUCKET_WIDTH).or_default().push(i);
        }
        for mut members in buckets.into_values() {
            rng.shuffle(&mut members);
            batches.extend(members.chunks(batch_size).map(<[usize]>::to_vec));
        }
    } else {
        let mut order: Vec<usize> = (0..lengths.len()).collect();
        rng.shuffle(&mut order);
        batches.extend(order.chunks(batch_size).map(<[usize]>::to_vec));
    }
    rng.shuffle(&mut batches);
    batches
}

/// Number of batches [`smart_batches`] yields per epoch (shuffle-independent).
pub fn batches_per_epoch(lengths: &[usize], batch_size: usize, smart: bool) -> usize {
    if !smart {
        return lengths.len().div_ceil(batch_size);
    }
    let mut buckets: BTreeMap<usize, usize> = BTreeMap::new();
    for &len in lengths {
        *buckets.entry(len.saturating_sub(1) / BUCKET_WIDTH).or_default() += 1;
    }
    buckets.values().map(|n| n.div_ceil(batch_size)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Nli,
    Def,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Nli => "nli",
            Objective::Def => "def",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub objective: Objective,
    pub loss: f64,
    pub lr: f64,
    /// Indices (into that objective's dataset) of the batch.
    #[serde(skip)]
    pub batch: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
}

impl TrainLog {
    pub fn pattern(&self) -> Vec<Objective> {
        self.steps.iter().map(|s| s.objective).collect()
    }

    /// Run-length encoding of the objective sequence, e.g. `19×nli 1×def`.
    pub fn pattern_summary(&self) -> String {
        let mut runs: Vec<(Objective, usize)> = Vec::new();
        for s in &self.steps {
            match runs.last_mut() {
                Some((o, n)) if *o == s.objective => *n += 1,
                _ => runs.push((s.objective, 1)),
            }
        }
        runs.iter()
            .map(|(o, n)| format!("{n}×{o}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Endless supply of batches over one dataset; reshuffles on exhaustion.
struct BatchStream {
    lengths: Vec<usize>,
    batch_size: usize,
    smart: bool,
    rng: Rng,
    queue: VecDeque<Vec<usize>>,
}

impl BatchStream {
    fn new(lengths: Vec<usize>, config: &TrainConfig, rng: Rng) -> Self {
        BatchStream {
            lengths,
            batch_size: config.batch_size,
            smart: config.smart_batching,
            rng,
            queue: VecDeque::new(),
        }
    }

    fn next_batch(&mut self) -> Vec<usize> {
        if self.queue.is_empty() {
            self.queue = smart_batches(&self.lengths, self.batch_size, self.smart, &mut self.rng).into();
        }
        self.queue.pop_front().expect("nonempty dataset")
    }
}

fn nli_lengths(data: &[NliExample]) -> Vec<usize> {
    data.iter()
        .map(|e| tokenize(&e.premise).len().max(tokenize(&e.hypothesis).len()))
        .collect()
}

fn def_lengths(data: &[DefinitionExample]) -> Vec<usize> {
    data.iter().map(|e| tokenize(&e.definition).len()).collect()
}

// rng stream ids, fixed so runs are reproducible
const STREAM_NLI_HEAD: u64 = 1;
const STREAM_NLI_BATCHES: u64 = 2;
const STREAM_DEF_BATCHES: u64 = 3;

/// Optimizer state for one model being trained on one or both objectives.
struct Trainer<'a> {
    enc: &'a mut ToyEncoder,
    adam: AdamState,
}

impl<'a> Trainer<'a> {
    fn new(enc: &'a mut ToyEncoder, config: &'a TrainConfig) -> Self {
        Trainer {
            enc,
            adam: AdamState::new(config.adam),
        }
    }

    fn nli_step(&mut self, head: &mut NliHead, batch: &[EncodedNli], lr: f64) -> Result<f64> {
        let d = self.enc.dim();
        let mut g = NliGrads {
            table: RealMatrix::zeros(self.enc.table.rows(), d),
            weights: RealMatrix::zeros(3, 3 * d),
            bias: vec![0.0; 3],
        };
        let loss = nli_pass(self.enc, head, batch, Some(&mut g))?;
        self.adam.step(SLOT_TABLE, self.enc.table.as_mut_slice(), g.table.as_slice(), lr)?;
        self.adam.step(SLOT_NLI_W, head.weights.as_mut_slice(), g.weights.as_slice(), lr)?;
        if head.use_bias {
            self.adam.step(SLOT_NLI_B, &mut head.bias, &g.bias, lr)?;
        }
        Ok(loss)
    }

    fn def_step(&mut self, head: &mut WordPredictionHead, batch: &[EncodedDef], lr: f64) -> Result<f64> {
        let (v, d) = (self.enc.vocab.len(), self.enc.dim());
        let mut g = DefGrads {
            table: RealMatrix::zeros(v, d),
            output: head.output.as_ref().map(|_| RealMatrix::zeros(v, d)),
            bias: vec![0.0; v],
        };
        let loss = def_pass(self.enc, head, batch, Some(&mut g))?;
        self.adam.step(SLOT_TABLE, self.enc.table.as_mut_slice(), g.table.as_slice(), lr)?;
        if let (Some(out), Some(gout)) = (head.output.as_mut(), g.output.as_ref()) {
            self.adam.step(SLOT_DEF_OUT, out.as_mut_slice(), gout.as_slice(), lr)?;
        }
        self.adam.step(SLOT_DEF_B, &mut head.bias, &g.bias, lr)?;
        Ok(loss)
    }
}

fn total_steps(natural: usize, config: &TrainConfig) -> usize {
    config.max_steps.map_or(natural, |cap| natural.min(cap))
}

/// Fine-tune `enc` on NLI data with a freshly initialized classifier head.
pub fn train_sbert(
    enc: &mut ToyEncoder,
    data: &[NliExample],
    config: &TrainConfig,
) -> Result<(NliHead, TrainLog)> {
    let rng = Rng::new(config.seed);
    let mut head = NliHead::init(enc.dim(), &mut rng.fork(STREAM_NLI_HEAD));
    let log = train_sbert_with_head(enc, &mut head, data, config)?;
    Ok((head, log))
}

pub fn train_sbert_with_head(
    enc: &mut ToyEncoder,
    head: &mut NliHead,
    data: &[NliExample],
    config: &TrainConfig,
) -> Result<TrainLog> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("no NLI training data"));
    }
    check_nli_head(enc, head)?;
    let encoded = encode_nli(enc, data)?;
    let lengths = nli_lengths(data);
    let per_epoch = batches_per_epoch(&lengths, config.batch_size, config.smart_batching);
    let total = total_steps(config.epochs * per_epoch, config);
    let mut stream = BatchStream::new(lengths, config, Rng::new(config.seed).fork(STREAM_NLI_BATCHES));

    let mut trainer = Trainer::new(enc, config);
    let mut log = TrainLog::default();
    for step in 1..=total {
        let idx = stream.next_batch();
        let batch: Vec<EncodedNli> = idx.iter().map(|&i| encoded[i].clone()).collect();
        let lr = config.lr(step, total)?;
        let loss = trainer.nli_step(head, &batch, lr)?;
        log.steps.push(StepRecord {
            step,
            objective: Objective::Nli,
            loss,
            lr,
            batch: idx,
        });
    }
    debug!("nli training finished after {total} steps");
    Ok(log)
}

/// Fine-tune `enc` on definitions with a word prediction head tied to the
/// embedding table.
pub fn train_defsent(
    enc: &mut ToyEncoder,
    data: &[DefinitionExample],
    config: &TrainConfig,
) -> Result<(WordPredictionHead, TrainLog)> {
    let mut head = WordPredictionHead::tied(enc.vocab.len());
    let log = train_defsent_with_head(enc, &mut head, data, config)?;
    Ok((head, log))
}

pub fn train_defsent_with_head(
    enc: &mut ToyEncoder,
    head: &mut WordPredictionHead,
    data: &[DefinitionExample],
    config: &TrainConfig,
) -> Result<TrainLog> {
    config.validate()?;
    check_def_head(enc, head)?;
    let (data, dropped) = filter_definitions(enc, data);
    if dropped > 0 {
        info!("dropped {dropped} definitions whose target word is out of vocabulary");
    }
    if data.is_empty() {
        return Err(Error::invalid("no usable definition training data"));
    }
    let encoded = encode_defs(enc, &data)?;
    let lengths = def_lengths(&data);
    let per_epoch = batches_per_epoch(&lengths, config.batch_size, config.smart_batching);
    let total = total_steps(config.epochs * per_epoch, config);
    let mut stream = BatchStream::new(lengths, config, Rng::new(config.seed).fork(STREAM_DEF_BATCHES));

    let mut trainer = Trainer::new(enc, config);
    let mut log = TrainLog::default();
    for step in 1..=total {
        let idx = stream.next_batch();
        let batch: Vec<EncodedDef> = idx.iter().map(|&i| encoded[i].clone()).collect();
        let lr = config.lr(step, total)?;
        let loss = trainer.def_step(head, &batch, lr)?;
        log.steps.push(StepRecord {
            step,
            objective: Objective::Def,
            loss,
            lr,
            batch: idx,
        });
    }
    Ok(log)
}

/// Interleaving of the two objectives in multi-task training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiSchedule {
    pub nli_steps_per_cycle: usize,
    pub def_steps_per_cycle: usize,
}

impl Default for MultiSchedule {
    fn default() -> Self {
        MultiSchedule {
            nli_steps_per_cycle: 19,
            def_steps_per_cycle: 1,
        }
    }
}

impl MultiSchedule {
    pub fn cycle_len(&self) -> usize {
        self.nli_steps_per_cycle + self.def_steps_per_cycle
    }
}

/// Objective for every step: whole cycles covering `nli_steps` NLI steps.
pub fn multi_plan(nli_steps: usize, schedule: MultiSchedule) -> Result<Vec<Objective>> {
    if schedule.nli_steps_per_cycle == 0 || schedule.def_steps_per_cycle == 0 {
        return Err(Error::Config("multi-task schedule counts must be positive".into()));
    }
    let cycles = nli_steps.div_ceil(schedule.nli_steps_per_cycle);
    let mut plan = Vec::with_capacity(cycles * schedule.cycle_len());
    for _ in 0..cycles {
        plan.extend(std::iter::repeat_n(Objective::Nli, schedule.nli_steps_per_cycle));
        plan.extend(std::iter::repeat_n(Objective::Def, schedule.def_steps_per_cycle));
    }
    Ok(plan)
}

/// Joint training of both objectives on one encoder: repeating cycles of
/// NLI steps followed by definition steps.
pub fn train_multi(
    enc: &mut ToyEncoder,
    nli: &[NliExample],
    defs: &[DefinitionExample],
    config: &TrainConfig,
    schedule: MultiSchedule,
) -> Result<(NliHead, WordPredictionHead, TrainLog)> {
    config.validate()?;
    if nli.is_empty() {
        return Err(Error::invalid("no NLI training data"));
    }
    let (defs, dropped) = filter_definitions(enc, defs);
    if dropped > 0 {
        info!("dropped {dropped} definitions whose target word is out of vocabulary");
    }
    if defs.is_empty() {
        return Err(Error::invalid("no usable definition training data"));
    }
    let rng = Rng::new(config.seed);
    let mut nli_head = NliHead::init(enc.dim(), &mut rng.fork(STREAM_NLI_HEAD));
    let mut def_head = WordPredictionHead::tied(enc.vocab.len());

    let nli_enc = encode_nli(enc, nli)?;
    let def_enc = encode_defs(enc, &defs)?;
    let nli_len = nli_lengths(nli);
    let nli_steps = config.epochs * batches_per_epoch(&nli_len, config.batch_size, config.smart_batching);
    let mut plan = multi_plan(nli_steps, schedule)?;
    plan.truncate(total_steps(plan.len(), config));
    let total = plan.len();

    let mut nli_stream = BatchStream::new(nli_len, config, rng.fork(STREAM_NLI_BATCHES));
    let mut def_stream = BatchStream::new(def_lengths(&defs), config, rng.fork(STREAM_DEF_BATCHES));
    let mut trainer = Trainer::new(enc, config);
    let mut log = TrainLog::default();
    for (i, &objective) in plan.iter().enumerate() {
        let step = i + 1;
        let lr = config.lr(step, total)?;
        let (loss, idx) = match objective {
            Objective::Nli => {
                let idx = nli_stream.next_batch();
                let batch: Vec<EncodedNli> = idx.iter().map(|&i| nli_enc[i].clone()).collect();
                (trainer.nli_step(&mut nli_head, &batch, lr)?, idx)
            }
            Objective::Def => {
                let idx = def_stream.next_batch();
                let batch: Vec<EncodedDef> = idx.iter().map(|&i| def_enc[i].clone()).collect();
                (trainer.def_step(&mut def_head, &batch, lr)?, idx)
            }
        };
        log.steps.push(StepRecord {
            step,
            objective,
            loss,
            lr,
            batch: idx,
        });
    }
    Ok((nli_head, def_head, log))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best_lr: f64,
    /// `(lr, mean score over seeds)` in grid order.
    pub mean_scores: Vec<(f64, f64)>,
}

/// Pick the learning rate with the highest mean validation score over
/// `seeds`. Ties go to the smaller learning rate.
pub fn lr_grid_search<M, T, S>(
    grid: &[f64],
    seeds: &[u64],
    mut train: T,
    mut score: S,
) -> Result<GridSearchResult>
where
    T: FnMut(f64, u64) -> Result<M>,
    S: FnMut(&M) -> Result<f64>,
{
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("grid search needs at least one lr and one seed"));
    }
    let mut mean_scores = Vec::with_capacity(grid.len());
    for &lr in grid {
        let mut total = 0.0;
        for &seed in seeds {
            total += score(&train(lr, seed)?)?;
        }
        mean_scores.push((lr, total / seeds.len() as f64));
    }
    let mut ranked = mean_scores.clone();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = ranked[0];
    for &cand in &ranked[1..] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(GridSearchResult {
        best_lr: best.0,
        mean_scores,
    })
}
