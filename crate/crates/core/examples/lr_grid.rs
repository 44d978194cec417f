//! Learning-rate selection by mean validation STS over seeds.
//!
//! Run with `cargo run --release --example lr_grid`.

use sentcompare::encoder::{Pooling, ToyEncoder, Vocabulary};
use sentcompare::evalsuite::eval_sts;
use sentcompare::numstat::Rng;
use sentcompare::objectives::{lr_grid_search, train_defsent, TrainConfig};
use sentcompare::synth::{CorpusSpec, SyntheticCorpus};

fn main() -> sentcompare::Result<()> {
    let corpus = SyntheticCorpus::generate(&CorpusSpec::default(), 11);
    let (dev, _test) = corpus.sts.split_at(250);
    let vocab = Vocabulary::build(&corpus.lexicon.all_words(), 1)?;
    let grid = [1e-3, 3e-3, 1e-2, 3e-2];
    let result = lr_grid_search(
        &grid,
        &[0, 1],
        |lr, seed| {
            let mut enc = ToyEncoder::new(vocab.clone(), 16, Pooling::Mean, &mut Rng::new(seed))?;
            let cfg = TrainConfig {
                lr,
                seed,
                epochs: 20,
                ..Default::default()
            };
            train_defsent(&mut enc, &corpus.definitions, &cfg)?;
            Ok(enc)
        },
        |enc| Ok(eval_sts(enc, dev)?.spearman),
    )?;
    for (lr, score) in &result.mean_scores {
        println!("lr {lr:<8} dev spearman {score:.3}");
    }
    println!("best lr: {}", result.best_lr);
    Ok(())
}
