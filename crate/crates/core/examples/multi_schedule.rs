//! Show the step pattern of interleaved multi-task training.
//!
//! Run with `cargo run --example multi_schedule`.

use sentcompare::encoder::{Pooling, ToyEncoder, Vocabulary};
use sentcompare::numstat::Rng;
use sentcompare::objectives::{multi_plan, train_multi, MultiSchedule, TrainConfig};
use sentcompare::synth::{CorpusSpec, SyntheticCorpus};

fn main() -> sentcompare::Result<()> {
    let schedule = MultiSchedule::default();
    let plan = multi_plan(38, schedule)?;
    println!("plan for 38 NLI steps: {} steps", plan.len());

    let spec = CorpusSpec {
        nli_examples: 38 * 16,
        ..Default::default()
    };
    let corpus = SyntheticCorpus::generate(&spec, 0);
    let mut texts = corpus.lexicon.all_words();
    texts.extend(corpus.nli.iter().map(|e| e.premise.clone()));
    let mut enc = ToyEncoder::new(Vocabulary::build(&texts, 1)?, 8, Pooling::Mean, &mut Rng::new(0))?;
    let cfg = TrainConfig {
        smart_batching: false,
        ..Default::default()
    };
    let (_, _, log) = train_multi(&mut enc, &corpus.nli, &corpus.definitions, &cfg, schedule)?;
    println!("logged {} steps: {}", log.steps.len(), log.pattern_summary());
    for r in log.steps.iter().skip(17).take(4) {
        println!("  step {:>3} {:<3} loss {:.4} lr {:.5}", r.step, r.objective, r.loss, r.lr);
    }
    Ok(())
}
