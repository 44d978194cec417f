//! Train the NLI objective and the definition objective from the same random
//! encoder and compare unsupervised STS before and after.
//!
//! Run with `cargo run --release --example train_objectives`.

use sentcompare::encoder::{Pooling, ToyEncoder, Vocabulary};
use sentcompare::evalsuite::eval_sts;
use sentcompare::numstat::Rng;
use sentcompare::objectives::{train_defsent, train_sbert, TrainConfig};
use sentcompare::synth::{CorpusSpec, SyntheticCorpus};

fn main() -> sentcompare::Result<()> {
    let corpus = SyntheticCorpus::generate(&CorpusSpec::default(), 7);
    let mut texts = corpus.lexicon.all_words();
    texts.extend(corpus.nli.iter().map(|e| e.premise.clone()));
    let vocab = Vocabulary::build(&texts, 1)?;

    // CLS pooling returns the [CLS] row for every sentence in a model without
    // context, so its cosine scores have no variance and it is left out here.
    for pooling in [Pooling::Mean, Pooling::Max] {
        let base = ToyEncoder::new(vocab.clone(), 16, pooling, &mut Rng::new(0))?;
        let before = eval_sts(&base, &corpus.sts)?.spearman;

        let mut sbert = base.clone();
        let cfg = TrainConfig {
            epochs: 10,
            ..Default::default()
        };
        let (_, nli_log) = train_sbert(&mut sbert, &corpus.nli, &cfg)?;

        let mut defsent = base.clone();
        let cfg = TrainConfig {
            epochs: 50,
            ..Default::default()
        };
        let (_, def_log) = train_defsent(&mut defsent, &corpus.definitions, &cfg)?;

        let first_last = |log: &sentcompare::objectives::TrainLog| {
            let l = &log.steps;
            (l[0].loss, l[l.len() - 1].loss)
        };
        println!("pooling {pooling}");
        println!("  random init  STS spearman {before:.3}");
        let (a, b) = first_last(&nli_log);
        println!(
            "  sbert        STS spearman {:.3}  loss {a:.3} -> {b:.3} over {} steps",
            eval_sts(&sbert, &corpus.sts)?.spearman,
            nli_log.steps.len()
        );
        let (a, b) = first_last(&def_log);
        println!(
            "  defsent      STS spearman {:.3}  loss {a:.3} -> {b:.3} over {} steps",
            eval_sts(&defsent, &corpus.sts)?.spearman,
            def_log.steps.len()
        );
    }
    Ok(())
}
