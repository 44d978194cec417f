//! Write a synthetic corpus (STS, NLI, dictionary, probe task, sentences)
//! that the `sentcompare` binary can consume.
//!
//! Run with `cargo run --example synthetic_corpus -- <dir> [seed]`.

use std::path::PathBuf;

use sentcompare::synth::{CorpusSpec, SyntheticCorpus};

fn main() -> sentcompare::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic-data".into()));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    let spec = CorpusSpec::default();
    let corpus = SyntheticCorpus::generate(&spec, seed);
    corpus.write_to(&dir)?;
    println!(
        "wrote {} STS pairs, {} NLI examples, {} definitions, {} probe rows to {}",
        corpus.sts.len(),
        corpus.nli.len(),
        corpus.definitions.len(),
        corpus.probe.len(),
        dir.display()
    );
    Ok(())
}
