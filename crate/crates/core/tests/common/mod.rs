//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use sentcompare::corpus::{DefinitionExample, NliExample, NliLabel};
use sentcompare::encoder::{EmbeddingProvider, Pooling, ToyEncoder, Vocabulary, CLS_ID};
use sentcompare::evalsuite::eval_sts;
use sentcompare::numstat::{RealMatrix, Rng};
use sentcompare::objectives::{
    def_loss, def_loss_and_grads, nli_loss, nli_loss_and_grads, train_defsent_with_head, train_sbert_with_head,
    NliHead, TrainConfig, WordPredictionHead,
};
use sentcompare::synth::{CorpusSpec, SyntheticCorpus};

pub const FD_STEP: f64 = 1e-5;
/// Components closer than this to a max-pool tie or to `|u - v| = 0` are
/// treated as kinks and the instance is redrawn.
pub const KINK_MARGIN: f64 = 1e-3;

// ---------------------------------------------------------------------------
// Finite differences

#[derive(Debug, Clone)]
pub enum GradObjective {
    Nli { batch: Vec<NliExample>, head: NliHead },
    Def { batch: Vec<DefinitionExample>, head: WordPredictionHead },
}

#[derive(Debug, Clone)]
pub struct GradCase {
    pub enc: ToyEncoder,
    pub objective: GradObjective,
}

impl GradCase {
    pub fn describe(&self) -> String {
        let kind = match &self.objective {
            GradObjective::Nli { .. } => "nli".to_string(),
            GradObjective::Def { head, .. } => format!("def-{}", if head.is_tied() { "tied" } else { "untied" }),
        };
        format!("{kind}/{}/d{}/V{}", self.enc.pooling, self.enc.dim(), self.enc.vocab.len())
    }
}

/// Kinds of instance the checks cycle through: 3 poolings x {nli, tied, untied}.
pub const GRAD_KINDS: usize = 9;

fn random_sentence(words: &[String], rng: &mut Rng) -> String {
    let len = 1 + rng.below(5);
    (0..len)
        .map(|_| {
            if rng.bernoulli(0.1) {
                "zzz".to_string()
            } else {
                words[rng.below(words.len())].clone()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// A random small instance (d <= 8, V <= 20) of kind `kind % GRAD_KINDS`.
pub fn grad_case(kind: usize, rng: &mut Rng) -> GradCase {
    let pooling = [Pooling::Cls, Pooling::Mean, Pooling::Max][kind % 3];
    let d = 1 + rng.below(8);
    let k = 2 + rng.below(17);
    let words: Vec<String> = (0..k).map(|i| format!("w{i}")).collect();
    let mut vocab_words = vec!["[CLS]".to_string(), "[UNK]".to_string()];
    vocab_words.extend(words.iter().cloned());
    let vocab = Vocabulary::from_words(vocab_words).unwrap();
    let v = vocab.len();
    assert!(v <= 20);
    let table = RealMatrix::uniform(v, d, -1.0, 1.0, rng);
    let enc = ToyEncoder::from_parts(vocab, table, pooling).unwrap();
    let n = 1 + rng.below(3);
    let objective = match (kind / 3) % 3 {
        0 => {
            let mut head = NliHead::init(d, rng);
            head.bias.iter_mut().for_each(|b| *b = rng.uniform(-1.0, 1.0));
            let batch = (0..n)
                .map(|i| NliExample {
                    premise: random_sentence(&words, rng),
                    hypothesis: random_sentence(&words, rng),
                    label: NliLabel::ALL[(i + rng.below(3)) % 3],
                })
                .collect();
            GradObjective::Nli { batch, head }
        }
        tied_or_not => {
            let mut head = if tied_or_not == 1 {
                WordPredictionHead::tied(v)
            } else {
                WordPredictionHead::untied(v, d, rng)
            };
            head.bias.iter_mut().for_each(|b| *b = rng.uniform(-1.0, 1.0));
            let batch = (0..n)
                .map(|_| DefinitionExample {
                    word: words[rng.below(words.len())].clone(),
                    definition: random_sentence(&words, rng),
                })
                .collect();
            GradObjective::Def { batch, head }
        }
    };
    GradCase { enc, objective }
}

fn pooled(enc: &ToyEncoder, s: &str) -> Vec<f64> {
    enc.embed(s).unwrap().into_inner()
}

/// Whether a max-pool tie or a near-zero `|u - v|` component is within
/// [`KINK_MARGIN`].
fn near_kink(case: &GradCase) -> bool {
    let enc = &case.enc;
    let max_tie = |s: &str| {
        if enc.pooling != Pooling::Max {
            return false;
        }
        let ids: BTreeSet<usize> = enc.sentence_ids(s).unwrap().into_iter().filter(|&i| i != CLS_ID).collect();
        (0..enc.dim()).any(|c| {
            let mut vals: Vec<f64> = ids.iter().map(|&i| enc.table.row(i)[c]).collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            vals.len() > 1 && vals[0] - vals[1] < KINK_MARGIN
        })
    };
    match &case.objective {
        GradObjective::Nli { batch, .. } => batch.iter().any(|e| {
            let (u, v) = (pooled(enc, &e.premise), pooled(enc, &e.hypothesis));
            max_tie(&e.premise)
                || max_tie(&e.hypothesis)
                || u.iter().zip(&v).any(|(a, b)| {
                    let gap = (a - b).abs();
                    gap > 0.0 && gap < KINK_MARGIN
                })
        }),
        GradObjective::Def { batch, .. } => batch.iter().any(|e| max_tie(&e.definition)),
    }
}

/// Draw instances until one is away from every kink.
pub fn smooth_grad_case(kind: usize, rng: &mut Rng) -> GradCase {
    loop {
        let case = grad_case(kind, rng);
        if !near_kink(&case) {
            return case;
        }
    }
}

fn loss(case: &GradCase) -> f64 {
    match &case.objective {
        GradObjective::Nli { batch, head } => nli_loss(batch, &case.enc, head).unwrap(),
        GradObjective::Def { batch, head } => def_loss(batch, &case.enc, head).unwrap(),
    }
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central difference of the loss at one parameter, selected by `slot`.
fn central_diff(case: &mut GradCase, slot: &dyn Fn(&mut GradCase) -> &mut f64) -> f64 {
    let orig = *slot(case);
    *slot(case) = orig + FD_STEP;
    let up = loss(case);
    *slot(case) = orig - FD_STEP;
    let down = loss(case);
    *slot(case) = orig;
    (up - down) / (2.0 * FD_STEP)
}

/// Largest relative error between analytic and numerical gradients over
/// every parameter of the instance.
pub fn max_grad_error(case: &GradCase) -> f64 {
    let mut case = case.clone();
    let mut worst: f64 = 0.0;
    let table_len = case.enc.table.as_slice().len();
    match case.objective.clone() {
        GradObjective::Nli { batch, head } => {
            let (_, g) = nli_loss_and_grads(&batch, &case.enc, &head).unwrap();
            for i in 0..table_len {
                let n = central_diff(&mut case, &|c| &mut c.enc.table.as_mut_slice()[i]);
                worst = worst.max(rel_err(g.table.as_slice()[i], n));
            }
            for i in 0..g.weights.as_slice().len() {
                let n = central_diff(&mut case, &|c| match &mut c.objective {
                    GradObjective::Nli { head, .. } => &mut head.weights.as_mut_slice()[i],
                    _ => unreachable!(),
                });
                worst = worst.max(rel_err(g.weights.as_slice()[i], n));
            }
            for i in 0..3 {
                let n = central_diff(&mut case, &|c| match &mut c.objective {
                    GradObjective::Nli { head, .. } => &mut head.bias[i],
                    _ => unreachable!(),
                });
                worst = worst.max(rel_err(g.bias[i], n));
            }
        }
        GradObjective::Def { batch, head } => {
            let (_, g) = def_loss_and_grads(&batch, &case.enc, &head).unwrap();
            for i in 0..table_len {
                let n = central_diff(&mut case, &|c| &mut c.enc.table.as_mut_slice()[i]);
                worst = worst.max(rel_err(g.table.as_slice()[i], n));
            }
            if let Some(out) = &g.output {
                for i in 0..out.as_slice().len() {
                    let n = central_diff(&mut case, &|c| match &mut c.objective {
                        GradObjective::Def { head, .. } => &mut head.output.as_mut().unwrap().as_mut_slice()[i],
                        _ => unreachable!(),
                    });
                    worst = worst.max(rel_err(out.as_slice()[i], n));
                }
            }
            for i in 0..g.bias.len() {
                let n = central_diff(&mut case, &|c| match &mut c.objective {
                    GradObjective::Def { head, .. } => &mut head.bias[i],
                    _ => unreachable!(),
                });
                worst = worst.max(rel_err(g.bias[i], n));
            }
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Rank correlation oracle

/// Rank of each value: 1 + number below + half the number of other equal
/// values.
pub fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&a| {
            let below = x.iter().filter(|&&b| b < a).count() as f64;
            let equal = x.iter().filter(|&&b| b == a).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Sum-of-products Pearson, written independently of the library.
pub fn brute_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx <= 0.0 || vy <= 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / (vx * vy).sqrt())
}

pub fn brute_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    brute_pearson(&brute_ranks(x), &brute_ranks(y))
}

/// Values drawn from a small pool so ties are common.
pub fn tied_sample(n: usize, rng: &mut Rng) -> Vec<f64> {
    let pool = 1 + rng.below(n.max(2));
    (0..n)
        .map(|_| {
            if rng.bernoulli(0.5) {
                rng.below(pool) as f64 * 0.5
            } else {
                rng.normal()
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Training efficacy on the synthetic corpus

pub const EFFICACY_DIM: usize = 16;

pub fn efficacy_corpus() -> SyntheticCorpus {
    SyntheticCorpus::generate(&CorpusSpec::default(), 100)
}

pub fn efficacy_vocab(corpus: &SyntheticCorpus) -> Vocabulary {
    let mut texts = corpus.lexicon.all_words();
    texts.extend(corpus.nli.iter().map(|e| e.premise.clone()));
    Vocabulary::build(&texts, 1).unwrap()
}

pub fn sbert_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 10,
        seed,
        ..Default::default()
    }
}

pub fn defsent_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 50,
        seed,
        ..Default::default()
    }
}

#[derive(Debug, Clone)]
pub struct EfficacyRun {
    pub base_sts: f64,
    pub sbert_sts: f64,
    pub defsent_sts: f64,
    pub nli_loss: (f64, f64),
    pub def_loss: (f64, f64),
}

/// Train both objectives from the same seeded random encoder; losses are
/// full-dataset losses before and after training.
pub fn efficacy_run(corpus: &SyntheticCorpus, vocab: &Vocabulary, seed: u64) -> EfficacyRun {
    let base = ToyEncoder::new(vocab.clone(), EFFICACY_DIM, Pooling::Mean, &mut Rng::new(seed)).unwrap();
    let base_sts = eval_sts(&base, &corpus.sts).unwrap().spearman;

    let mut sbert = base.clone();
    let mut head = NliHead::init(EFFICACY_DIM, &mut Rng::new(seed).fork(1));
    let before = nli_loss(&corpus.nli, &sbert, &head).unwrap();
    train_sbert_with_head(&mut sbert, &mut head, &corpus.nli, &sbert_config(seed)).unwrap();
    let nli_loss_pair = (before, nli_loss(&corpus.nli, &sbert, &head).unwrap());

    let mut defsent = base.clone();
    let mut head = WordPredictionHead::tied(vocab.len());
    let before = def_loss(&corpus.definitions, &defsent, &head).unwrap();
    train_defsent_with_head(&mut defsent, &mut head, &corpus.definitions, &defsent_config(seed)).unwrap();
    let def_loss_pair = (before, def_loss(&corpus.definitions, &defsent, &head).unwrap());

    EfficacyRun {
        base_sts,
        sbert_sts: eval_sts(&sbert, &corpus.sts).unwrap().spearman,
        defsent_sts: eval_sts(&defsent, &corpus.sts).unwrap().spearman,
        nli_loss: nli_loss_pair,
        def_loss: def_loss_pair,
    }
}
