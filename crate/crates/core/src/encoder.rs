//! Sentence-embedding providers.
//!
//! [`ToyEncoder`] is a vocabulary plus a trainable `V × d` embedding table
//! with CLS / Mean / Max pooling: a context-free stand-in for a transformer
//! that can be trained end to end on a desk. [`EmbeddingStore`] serves
//! precomputed vectors (e.g. from a real model) loaded from a text dump.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::numstat::{RealMatrix, RealVector, Rng};

pub const CLS_TOKEN: &str = "[CLS]";
pub const UNK_TOKEN: &str = "[UNK]";
pub const CLS_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Maximum encoded length, counting the leading `[CLS]`.
pub const MAX_SEQ_LEN: usize = 128;

/// Anything that maps a sentence to a fixed-dimension vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, sentence: &str) -> Result<RealVector>;

    fn name(&self) -> String {
        "provider".to_string()
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, sentence: &str) -> Result<RealVector> {
        (**self).embed(sentence)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, sentence: &str) -> Result<RealVector> {
        (**self).embed(sentence)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

/// Dense word → index map. `[CLS]` is always 0 and `[UNK]` always 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Words with frequency `>= min_count`, ordered by descending frequency
    /// then lexicographically, after the two reserved tokens.
    pub fn build<S: AsRef<str>>(texts: &[S], min_count: usize) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
        }
        if min_count == 0 {
            return Err(Error::invalid("min_count must be >= 1"));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for tok in tokenize(text.as_ref()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|&(ref w, c)| c >= min_count && w != CLS_TOKEN && w != UNK_TOKEN)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let words = [CLS_TOKEN.to_string(), UNK_TOKEN.to_string()]
            .into_iter()
            .chain(kept.into_iter().map(|(w, _)| w))
            .collect();
        Self::from_words(words)
    }

    pub fn from_words(words: Vec<String>) -> Result<Self> {
        if words.len() < 2 || words[CLS_ID] != CLS_TOKEN || words[UNK_ID] != UNK_TOKEN {
            return Err(Error::invalid("vocabulary must start with [CLS], [UNK]"));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary entry {w:?}")));
            }
        }
        Ok(Vocabulary { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Index of `word`, or `[UNK]`.
    pub fn id(&self, word: &str) -> usize {
        self.get(word).unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(words: Vec<String>) -> Result<Self> {
        Vocabulary::from_words(words)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Cls,
    #[default]
    Mean,
    Max,
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cls" => Ok(Pooling::Cls),
            "mean" => Ok(Pooling::Mean),
            "max" => Ok(Pooling::Max),
            other => Err(Error::invalid(format!("unknown pooling strategy {other:?}"))),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Cls => "cls",
            Pooling::Mean => "mean",
            Pooling::Max => "max",
        })
    }
}

/// Reduce a token-vector sequence to one vector. Position 0 is the `[CLS]`
/// vector; Mean and Max skip it unless `include_cls` is set.
pub fn pool<V: AsRef<[f64]>>(vectors: &[V], strategy: Pooling, include_cls: bool) -> Result<RealVector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::invalid("cannot pool an empty sequence"))?
        .as_ref();
    let dim = first.len();
    if let Some(bad) = vectors.iter().find(|v| v.as_ref().len() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            got: bad.as_ref().len(),
        });
    }
    if strategy == Pooling::Cls {
        return RealVector::new(first.to_vec());
    }
    let window = if include_cls { vectors } else { &vectors[1..] };
    if window.is_empty() {
        return Err(Error::invalid("no word positions to pool"));
    }
    let out = match strategy {
        Pooling::Mean => {
            let mut acc = vec![0.0; dim];
            for v in window {
                for (a, x) in acc.iter_mut().zip(v.as_ref()) {
                    *a += x;
                }
            }
            let n = window.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        }
        Pooling::Max => {
            let mut acc = window[0].as_ref().to_vec();
            for v in &window[1..] {
                for (a, &x) in acc.iter_mut().zip(v.as_ref()) {
                    if x > *a {
                        *a = x;
                    }
                }
            }
            acc
        }
        Pooling::Cls => unreachable!(),
    };
    RealVector::new(out)
}

/// Pooled vector plus what backprop needs to route gradients.
#[derive(Debug, Clone)]
pub(crate) struct PoolTrace {
    pub vector: Vec<f64>,
    /// Max pooling: for each component, the sequence position that won.
    argmax: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyEncoder {
    pub vocab: Vocabulary,
    pub table: RealMatrix,
    pub pooling: Pooling,
    /// Let Mean/Max pooling see the `[CLS]` position too.
    #[serde(default)]
    pub include_cls: bool,
}

impl ToyEncoder {
    /// Table entries drawn from `U(-0.5/d, 0.5/d)`.
    pub fn new(vocab: Vocabulary, dim: usize, pooling: Pooling, rng: &mut Rng) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dim must be >= 1"));
        }
        let half = 0.5 / dim as f64;
        let table = RealMatrix::uniform(vocab.len(), dim, -half, half, rng);
        Ok(ToyEncoder {
            vocab,
            table,
            pooling,
            include_cls: false,
        })
    }

    pub fn from_parts(vocab: Vocabulary, table: RealMatrix, pooling: Pooling) -> Result<Self> {
        if table.rows() != vocab.len() {
            return Err(Error::DimMismatch {
                expected: vocab.len(),
                got: table.rows(),
            });
        }
        Ok(ToyEncoder {
            vocab,
            table,
            pooling,
            include_cls: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    /// `[CLS]` followed by one id per word, truncated to [`MAX_SEQ_LEN`].
    pub fn token_ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        std::iter::once(CLS_ID)
            .chain(
                tokens
                    .iter()
                    .take(MAX_SEQ_LEN - 1)
                    .map(|t| self.vocab.id(t.as_ref())),
            )
            .collect()
    }

    pub fn sentence_ids(&self, sentence: &str) -> Result<Vec<usize>> {
        let tokens = tokenize(sentence);
        if tokens.is_empty() {
            return Err(Error::invalid(format!("sentence {sentence:?} has no tokens")));
        }
        Ok(self.token_ids(&tokens))
    }

    /// Table rows for `[CLS]` and each token.
    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<RealVector> {
        self.token_ids(tokens)
            .into_iter()
            .map(|id| RealVector::new(self.table.row(id).to_vec()).expect("finite table"))
            .collect()
    }

    pub(crate) fn pool_ids(&self, ids: &[usize]) -> PoolTrace {
        let d = self.dim();
        match self.pooling {
            Pooling::Cls => PoolTrace {
                vector: self.table.row(ids[0]).to_vec(),
                argmax: Vec::new(),
            },
            Pooling::Mean => {
                let window = self.window(ids);
                let mut acc = vec![0.0; d];
                for &id in window {
                    for (a, x) in acc.iter_mut().zip(self.table.row(id)) {
                        *a += x;
                    }
                }
                let n = window.len() as f64;
                acc.iter_mut().for_each(|a| *a /= n);
                PoolTrace {
                    vector: acc,
                    argmax: Vec::new(),
                }
            }
            Pooling::Max => {
                let start = self.window_start();
                let mut vector = self.table.row(ids[start]).to_vec();
                let mut argmax = vec![start; d];
                for (pos, &id) in ids.iter().enumerate().skip(start + 1) {
                    for (j, &x) in self.table.row(id).iter().enumerate() {
                        if x > vector[j] {
                            vector[j] = x;
                            argmax[j] = pos;
                        }
                    }
                }
                PoolTrace { vector, argmax }
            }
        }
    }

    /// Accumulate `∂L/∂table` given `∂L/∂pooled`.
    pub(crate) fn pool_backward(
        &self,
        ids: &[usize],
        trace: &PoolTrace,
        grad: &[f64],
        table_grad: &mut RealMatrix,
    ) {
        match self.pooling {
            Pooling::Cls => crate::numstat::axpy(1.0, grad, table_grad.row_mut(ids[0])),
            Pooling::Mean => {
                let window = self.window(ids);
                let scale = 1.0 / window.len() as f64;
                for &id in window {
                    crate::numstat::axpy(scale, grad, table_grad.row_mut(id));
                }
            }
            Pooling::Max => {
                for (j, &pos) in trace.argmax.iter().enumerate() {
                    table_grad.row_mut(ids[pos])[j] += grad[j];
                }
            }
        }
    }

    fn window_start(&self) -> usize {
        usize::from(!self.include_cls)
    }

    fn window<'a>(&self, ids: &'a [usize]) -> &'a [usize] {
        &ids[self.window_start()..]
    }
}

impl EmbeddingProvider for ToyEncoder {
    fn dim(&self) -> usize {
        self.table.cols()
    }

    fn embed(&self, sentence: &str) -> Result<RealVector> {
        let ids = self.sentence_ids(sentence)?;
        RealVector::new(self.pool_ids(&ids).vector)
    }

    fn name(&self) -> String {
        format!("toy-{}-d{}", self.pooling, self.dim())
    }
}

/// Sentence text → vector map backed by a dump file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<String, RealVector>,
    name: String,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            vectors: BTreeMap::new(),
            name: "dump".to_string(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Embed each sentence with `provider`. Repeated sentences are stored once.
    pub fn from_provider<P, S>(provider: &P, sentences: &[S]) -> Result<Self>
    where
        P: EmbeddingProvider + ?Sized,
        S: AsRef<str>,
    {
        let mut store = EmbeddingStore::new(provider.dim()).with_name(provider.name());
        for s in sentences {
            let s = s.as_ref();
            if !store.contains(s) {
                store.insert(s, provider.embed(s)?)?;
            }
        }
        Ok(store)
    }

    pub fn insert(&mut self, sentence: impl Into<String>, vector: RealVector) -> Result<()> {
        let sentence = sentence.into();
        if sentence.contains(['\t', '\n', '\r']) {
            return Err(Error::invalid("dump keys may not contain tab or newline"));
        }
        if vector.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: vector.dim(),
            });
        }
        if self.vectors.contains_key(&sentence) {
            return Err(Error::invalid(format!("duplicate dump key {sentence:?}")));
        }
        self.vectors.insert(sentence, vector);
        Ok(())
    }

    pub fn get(&self, sentence: &str) -> Option<&RealVector> {
        self.vectors.get(sentence)
    }

    pub fn contains(&self, sentence: &str) -> bool {
        self.vectors.contains_key(sentence)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RealVector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Dump text: `dim=<d>` header, then `sentence<TAB>v1 v2 … vd` rows in
    /// key order, floats in shortest round-trip form.
    pub fn to_dump_string(&self) -> String {
        let mut out = format!("dim={}\n", self.dim);
        for (k, v) in &self.vectors {
            out.push_str(k);
            out.push('\t');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_dump(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "missing `dim=<d>` header"))?;
        let dim: usize = header
            .strip_prefix("dim=")
            .and_then(|d| d.trim().parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::parse(origin, 1, format!("bad header {header:?}")))?;
        let mut store = EmbeddingStore::new(dim).with_name(origin.display().to_string());
        for (i, line) in lines {
            let n = i + 1;
            if line.is_empty() {
                continue;
            }
            let (key, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, n, "expected `sentence<TAB>values`"))?;
            let values = values
                .split(' ')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::parse(origin, n, format!("bad float: {e}")))?;
            if values.len() != dim {
                return Err(Error::parse(
                    origin,
                    n,
                    format!("expected {dim} values, found {}", values.len()),
                ));
            }
            let vector = RealVector::new(values).map_err(|e| Error::parse(origin, n, e.to_string()))?;
            if store.contains(key) {
                return Err(Error::parse(origin, n, format!("duplicate key {key:?}")));
            }
            store.insert(key, vector).map_err(|e| Error::parse(origin, n, e.to_string()))?;
        }
        Ok(store)
    }

    pub fn save_dump(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_dump_string().as_bytes())
    }

    pub fn load_dump(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_dump(&text, path)
    }
}

impl EmbeddingProvider for EmbeddingStore {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sentence: &str) -> Result<RealVector> {
        self.vectors
            .get(sentence)
            .cloned()
            .ok_or_else(|| Error::MissingEmbedding(sentence.to_string()))
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}
