//! Synthetic corpora for exercising the pipeline end to end without any
//! licensed data.
//!
//! The generator works over a [`Lexicon`] of concepts, each expressed by a
//! handful of interchangeable surface words. Sentences are bags of concepts
//! realized with randomly chosen synonyms, so surface word overlap is only a
//! noisy proxy for concept overlap. STS gold scores, NLI labels and
//! dictionary definitions are all defined at the concept level.

use std::path::Path;

use crate::corpus::{
    definitions_to_tsv, nli_to_tsv, sts_to_tsv, DefinitionExample, NliExample, NliLabel, Split, StsPair,
};
use crate::error::Result;
use crate::fsutil::write_atomic;
use crate::numstat::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub concepts: usize,
    pub synonyms: usize,
}

impl Lexicon {
    pub fn new(concepts: usize, synonyms: usize) -> Self {
        assert!(concepts >= 2 && synonyms >= 2, "lexicon too small");
        Lexicon { concepts, synonyms }
    }

    /// Surface form of synonym `s` of concept `c`, e.g. `c12v3`.
    pub fn word(&self, concept: usize, synonym: usize) -> String {
        format!("c{concept}v{synonym}")
    }

    pub fn all_words(&self) -> Vec<String> {
        (0..self.concepts)
            .flat_map(|c| (0..self.synonyms).map(move |s| (c, s)))
            .map(|(c, s)| self.word(c, s))
            .collect()
    }

    /// Realize a concept bag as a sentence with random synonyms.
    pub fn realize(&self, concepts: &[usize], rng: &mut Rng) -> String {
        let mut words: Vec<String> = concepts
            .iter()
            .map(|&c| self.word(c, rng.below(self.synonyms)))
            .collect();
        rng.shuffle(&mut words);
        let mut s = words.join(" ");
        s.push('.');
        s
    }

    /// `k` distinct concepts, none of them in `exclude`.
    fn sample_concepts(&self, k: usize, exclude: &[usize], rng: &mut Rng) -> Vec<usize> {
        assert!(k + exclude.len() <= self.concepts, "not enough concepts");
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let c = rng.below(self.concepts);
            if !exclude.contains(&c) && !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }
}

/// STS pairs whose gold score is `5 · shared / per_sentence` at the concept
/// level. Sources are `synth-0`, `synth-1`, … in round robin.
pub fn sts_pairs(lex: &Lexicon, n: usize, per_sentence: usize, sources: usize, rng: &mut Rng) -> Vec<StsPair> {
    (0..n)
        .map(|i| {
            let a = lex.sample_concepts(per_sentence, &[], rng);
            let shared = rng.below(per_sentence + 1);
            let mut b: Vec<usize> = a[..shared].to_vec();
            b.extend(lex.sample_concepts(per_sentence - shared, &a, rng));
            let gold = 5.0 * shared as f64 / per_sentence as f64;
            StsPair {
                sentence1: lex.realize(&a, rng),
                sentence2: lex.realize(&b, rng),
                gold,
                source: format!("synth-{}", i % sources.max(1)),
                split: Split::None,
            }
        })
        .collect()
}

/// NLI triples: entailment keeps every concept, neutral keeps half,
/// contradiction keeps none. Labels are balanced in round robin.
pub fn nli_examples(lex: &Lexicon, n: usize, per_sentence: usize, rng: &mut Rng) -> Vec<NliExample> {
    (0..n)
        .map(|i| {
            let label = NliLabel::ALL[i % 3];
            let premise = lex.sample_concepts(per_sentence, &[], rng);
            let keep = match label {
                NliLabel::Entailment => per_sentence,
                NliLabel::Neutral => per_sentence / 2,
                NliLabel::Contradiction => 0,
            };
            let mut hyp = premise[..keep].to_vec();
            hyp.extend(lex.sample_concepts(per_sentence - keep, &premise, rng));
            NliExample {
                premise: lex.realize(&premise, rng),
                hypothesis: lex.realize(&hyp, rng),
                label,
            }
        })
        .collect()
}

/// One definition per surface word, made of the concept's other synonyms.
pub fn definitions(lex: &Lexicon, rng: &mut Rng) -> Vec<DefinitionExample> {
    let mut out = Vec::with_capacity(lex.concepts * lex.synonyms);
    for c in 0..lex.concepts {
        for s in 0..lex.synonyms {
            let mut words: Vec<String> = (0..lex.synonyms)
                .filter(|&o| o != s)
                .map(|o| lex.word(c, o))
                .collect();
            rng.shuffle(&mut words);
            out.push(DefinitionExample {
                word: lex.word(c, s),
                definition: words.join(" "),
            });
        }
    }
    out
}

/// Dictionary where each entry's definition carries a marker word unique to
/// it, plus shared filler.
pub fn marker_dictionary(n: usize) -> Vec<DefinitionExample> {
    (0..n)
        .map(|i| DefinitionExample {
            word: format!("word{i}"),
            definition: format!("a thing marked by marker{i} in the dictionary"),
        })
        .collect()
}

/// Labeled texts for a probe task: a label is a class index and the text
/// realizes concepts. `label_of` maps the concept bag to a class.
pub fn probe_texts<F>(lex: &Lexicon, n: usize, per_sentence: usize, rng: &mut Rng, mut label_of: F) -> Vec<(String, String)>
where
    F: FnMut(&[usize]) -> usize,
{
    (0..n)
        .map(|_| {
            let c = lex.sample_concepts(per_sentence, &[], rng);
            let label = label_of(&c);
            (label.to_string(), lex.realize(&c, rng))
        })
        .collect()
}

/// Sizes of a generated corpus. The defaults are small enough to train in
/// well under a second per seed in release builds.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub concepts: usize,
    pub synonyms: usize,
    pub per_sentence: usize,
    pub sts_pairs: usize,
    pub sts_sources: usize,
    pub nli_examples: usize,
    pub probe_examples: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            concepts: 60,
            synonyms: 4,
            per_sentence: 4,
            sts_pairs: 500,
            sts_sources: 5,
            nli_examples: 3000,
            probe_examples: 200,
        }
    }
}

/// Everything one experiment needs, generated from a single seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub lexicon: Lexicon,
    pub sts: Vec<StsPair>,
    pub nli: Vec<NliExample>,
    pub definitions: Vec<DefinitionExample>,
    /// `label<TAB>text` rows: is at least half of the sentence drawn from the
    /// first half of the concept inventory.
    pub probe: Vec<(String, String)>,
}

impl SyntheticCorpus {
    pub fn generate(spec: &CorpusSpec, seed: u64) -> Self {
        let lexicon = Lexicon::new(spec.concepts, spec.synonyms);
        let root = Rng::new(seed);
        let sts = sts_pairs(&lexicon, spec.sts_pairs, spec.per_sentence, spec.sts_sources, &mut root.fork(0));
        let nli = nli_examples(&lexicon, spec.nli_examples, spec.per_sentence, &mut root.fork(1));
        let definitions = definitions(&lexicon, &mut root.fork(2));
        let half = spec.concepts / 2;
        let probe = probe_texts(&lexicon, spec.probe_examples, spec.per_sentence, &mut root.fork(3), |c| {
            usize::from(2 * c.iter().filter(|&&x| x < half).count() >= c.len())
        });
        SyntheticCorpus {
            lexicon,
            sts,
            nli,
            definitions,
            probe,
        }
    }

    /// Every sentence of the STS set, in file order.
    pub fn sts_sentences(&self) -> Vec<String> {
        self.sts
            .iter()
            .flat_map(|p| [p.sentence1.clone(), p.sentence2.clone()])
            .collect()
    }

    /// Write `sts.tsv`, `nli.tsv`, `definitions.tsv`, `probe.tsv` and
    /// `sentences.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let probe: String = self.probe.iter().map(|(l, t)| format!("{l}\t{t}\n")).collect();
        let sentences: String = self.sts_sentences().iter().map(|s| format!("{s}\n")).collect();
        for (name, body) in [
            ("sts.tsv", sts_to_tsv(&self.sts)),
            ("nli.tsv", nli_to_tsv(&self.nli)),
            ("definitions.tsv", definitions_to_tsv(&self.definitions)),
            ("probe.tsv", probe),
            ("sentences.txt", sentences),
        ] {
            write_atomic(&dir.join(name), body.as_bytes())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn sts_gold_follows_concept_overlap() {
        let lex = Lexicon::new(30, 3);
        let pairs = sts_pairs(&lex, 50, 4, 2, &mut Rng::new(1));
        for p in &pairs {
            assert!((0.0..=5.0).contains(&p.gold));
            assert_eq!(tokenize(&p.sentence1).len(), 4);
        }
        assert_eq!(pairs[0].source, "synth-0");
        assert_eq!(pairs[1].source, "synth-1");
    }

    #[test]
    fn definitions_cover_every_word() {
        let lex = Lexicon::new(5, 4);
        let defs = definitions(&lex, &mut Rng::new(2));
        assert_eq!(defs.len(), 20);
        for d in &defs {
            assert!(!tokenize(&d.definition).contains(&d.word));
            assert_eq!(tokenize(&d.definition).len(), 3);
        }
    }

    #[test]
    fn nli_labels_balanced() {
        let lex = Lexicon::new(20, 3);
        let ex = nli_examples(&lex, 30, 4, &mut Rng::new(3));
        let ent = ex.iter().filter(|e| e.label == NliLabel::Entailment).count();
        assert_eq!(ent, 10);
    }
}
