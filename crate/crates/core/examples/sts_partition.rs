//! Split an STS set by source tag and by Dice quintile, then score a random
//! encoder on each subset.
//!
//! Run with `cargo run --example sts_partition [-- <sts.tsv>]`. Without an
//! argument a synthetic set is used.

use sentcompare::corpus::{load_sts, partition_by_dice, partition_by_source};
use sentcompare::encoder::{Pooling, ToyEncoder, Vocabulary};
use sentcompare::evalsuite::eval_sts_partitioned;
use sentcompare::numstat::Rng;
use sentcompare::synth::{CorpusSpec, SyntheticCorpus};

fn main() -> sentcompare::Result<()> {
    let pairs = match std::env::args().nth(1) {
        Some(path) => load_sts(path)?,
        None => SyntheticCorpus::generate(&CorpusSpec::default(), 0).sts,
    };

    let by_source = partition_by_source(&pairs)?;
    println!("by source:");
    for s in &by_source.subsets {
        println!("  {:<12} {:>5}", s.label, s.pairs.len());
    }

    let by_dice = partition_by_dice(&pairs, 5)?;
    println!("by dice:");
    for (s, (lo, hi)) in by_dice.partition.subsets.iter().zip(&by_dice.bounds) {
        println!("  {:<12} {:>5}  dice {lo:.3}..{hi:.3}", s.label, s.pairs.len());
    }

    let texts: Vec<&str> = pairs.iter().flat_map(|p| [p.sentence1.as_str(), p.sentence2.as_str()]).collect();
    let enc = ToyEncoder::new(Vocabulary::build(&texts, 1)?, 16, Pooling::Mean, &mut Rng::new(0))?;
    println!();
    print!("{}", eval_sts_partitioned(&enc, &by_dice.partition)?.to_markdown());
    Ok(())
}
