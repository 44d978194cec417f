//! Externally produced embeddings enter through dump files. This writes a
//! dump from a toy encoder, reads it back and checks the STS report is
//! unchanged.
//!
//! Run with `cargo run --example dump_pipeline`.

use sentcompare::corpus::partition_by_source;
use sentcompare::encoder::{EmbeddingStore, Pooling, ToyEncoder, Vocabulary};
use sentcompare::evalsuite::eval_sts_partitioned;
use sentcompare::numstat::Rng;
use sentcompare::synth::{CorpusSpec, SyntheticCorpus};

fn main() -> sentcompare::Result<()> {
    let corpus = SyntheticCorpus::generate(&CorpusSpec::default(), 0);
    let sentences = corpus.sts_sentences();
    let enc = ToyEncoder::new(Vocabulary::build(&sentences, 1)?, 12, Pooling::Max, &mut Rng::new(2))?;

    let dir = std::env::temp_dir().join("sentcompare-dump-example");
    let path = dir.join("embeddings.txt");
    EmbeddingStore::from_provider(&enc, &sentences)?.save_dump(&path)?;
    let store = EmbeddingStore::load_dump(&path)?;
    println!("dump {} holds {} sentences of dim {}", path.display(), store.len(), 12);

    let partition = partition_by_source(&corpus.sts)?;
    let direct = eval_sts_partitioned(&enc, &partition)?;
    let reloaded = eval_sts_partitioned(&store, &partition)?;
    print!("{}", reloaded.to_markdown());
    assert_eq!(direct.rows, reloaded.rows);
    assert_eq!(direct.all, reloaded.all);
    println!("reloaded dump scores are identical to the in-memory encoder");
    Ok(())
}
