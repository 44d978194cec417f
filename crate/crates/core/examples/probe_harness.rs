//! 10-fold cross-validated logistic-regression probe on frozen embeddings.
//!
//! Run with `cargo run --release --example probe_harness`.

use sentcompare::encoder::{EmbeddingProvider, Pooling, ToyEncoder, Vocabulary};
use sentcompare::evalsuite::{cross_validate, eval_probe, kfold_split, ProbeConfig, ProbeData, ProbeTask};
use sentcompare::numstat::Rng;
use sentcompare::objectives::{train_sbert, TrainConfig};
use sentcompare::synth::{CorpusSpec, SyntheticCorpus};

fn main() -> sentcompare::Result<()> {
    let folds = kfold_split(23, 10, &mut Rng::new(0))?;
    let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    println!("fold sizes for n=23: {sizes:?}");

    // Two Gaussian blobs, then the same points with shuffled labels.
    let mut rng = Rng::new(1);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..1000 {
        let c = i % 2;
        let shift = if c == 0 { -2.0 } else { 2.0 };
        features.push((0..4).map(|_| shift + rng.normal()).collect::<Vec<f64>>());
        labels.push(c);
    }
    let cfg = ProbeConfig::default();
    let data = ProbeData {
        features: &features,
        labels: &labels,
        classes: 2,
    };
    println!("separable blobs:  {:.3}", cross_validate("blobs", &data, &cfg)?.accuracy);
    rng.shuffle(&mut labels);
    let data = ProbeData {
        features: &features,
        labels: &labels,
        classes: 2,
    };
    println!("shuffled labels:  {:.3}", cross_validate("shuffled", &data, &cfg)?.accuracy);

    // Probe a trained encoder on the synthetic concept task.
    let corpus = SyntheticCorpus::generate(&CorpusSpec::default(), 5);
    let task = ProbeTask::from_labeled("first-half", &corpus.probe)?;
    let mut texts = corpus.lexicon.all_words();
    texts.extend(corpus.nli.iter().map(|e| e.premise.clone()));
    let mut enc = ToyEncoder::new(Vocabulary::build(&texts, 1)?, 16, Pooling::Mean, &mut Rng::new(0))?;
    let cfg = ProbeConfig {
        epochs: 50,
        lr: 1e-2,
        ..Default::default()
    };
    println!("{} random init: {:.3}", enc.name(), eval_probe(&enc, &task, &cfg)?.accuracy);
    let train = TrainConfig {
        epochs: 5,
        ..Default::default()
    };
    train_sbert(&mut enc, &corpus.nli, &train)?;
    println!("{} after NLI:   {:.3}", enc.name(), eval_probe(&enc, &task, &cfg)?.accuracy);
    Ok(())
}
