//! Train every method from the same random encoder and print a method by
//! Dice-quintile STS table.
//!
//! Run with `cargo run --release --example combination_methods`.

use std::sync::Arc;

use sentcompare::combiner::{run_pipeline, CombinedProvider, Datasets, Method, PipelineSpec, Stage};
use sentcompare::corpus::partition_by_dice;
use sentcompare::encoder::{EmbeddingProvider, Pooling, ToyEncoder, Vocabulary};
use sentcompare::evalsuite::{comparison_markdown, eval_sts_partitioned};
use sentcompare::numstat::Rng;
use sentcompare::objectives::{MultiSchedule, TrainConfig};
use sentcompare::synth::{CorpusSpec, SyntheticCorpus};

fn main() -> sentcompare::Result<()> {
    let corpus = SyntheticCorpus::generate(&CorpusSpec::default(), 3);
    let partition = partition_by_dice(&corpus.sts, 5)?.partition;
    let mut texts = corpus.lexicon.all_words();
    texts.extend(corpus.nli.iter().map(|e| e.premise.clone()));
    let base = ToyEncoder::new(Vocabulary::build(&texts, 1)?, 16, Pooling::Mean, &mut Rng::new(0))?;
    let data = Datasets {
        nli: Some(&corpus.nli),
        definitions: Some(&corpus.definitions),
    };
    let cfg = TrainConfig {
        epochs: 5,
        ..Default::default()
    };
    let train = |stages: &[Stage]| -> sentcompare::Result<ToyEncoder> {
        let spec = PipelineSpec::uniform(stages, &cfg, MultiSchedule::default());
        Ok(run_pipeline(&spec, &base, &data)?.encoder)
    };
    let sbert = Arc::new(train(&[Stage::Sbert])?);
    let defsent = Arc::new(train(&[Stage::DefSent])?);

    let mut rows = Vec::new();
    for method in Method::ALL {
        let provider: Arc<dyn EmbeddingProvider> = match method {
            Method::None => Arc::new(base.clone()),
            Method::Sbert => sbert.clone(),
            Method::DefSent => defsent.clone(),
            Method::Average | Method::Concat => Arc::new(CombinedProvider::new(
                method.combine_mode().expect("combination method"),
                sbert.clone(),
                defsent.clone(),
            )?),
            other => Arc::new(train(&other.stages().expect("training method"))?),
        };
        rows.push((method.to_string(), eval_sts_partitioned(&provider, &partition)?));
    }
    print!("{}", comparison_markdown(&rows));
    Ok(())
}
