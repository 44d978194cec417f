//! Dataset records, TSV loaders, tokenization, the Dice coefficient and the
//! two STS partitioning schemes (by source, by Dice quantile).
//!
//! File formats (UTF-8, LF, tab-separated, one record per nonempty line):
//!
//! | file        | columns                                     |
//! |-------------|---------------------------------------------|
//! | STS         | source, gold, sentence1, sentence2 [, split]|
//! | NLI         | label, premise, hypothesis                  |
//! | definitions | word, definition                            |
//! | probe task  | label, text                                 |
//!
//! The optional fifth STS column is one of `train`, `dev`, `test`, `none`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
    #[default]
    None,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            "none" | "" => Ok(Split::None),
            other => Err(format!("unknown split tag {other:?}")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsPair {
    pub sentence1: String,
    pub sentence2: String,
    pub gold: f64,
    pub source: String,
    pub split: Split,
}

impl StsPair {
    pub fn new(
        source: impl Into<String>,
        gold: f64,
        sentence1: impl Into<String>,
        sentence2: impl Into<String>,
    ) -> Result<Self> {
        let pair = StsPair {
            sentence1: sentence1.into(),
            sentence2: sentence2.into(),
            gold,
            source: source.into(),
            split: Split::None,
        };
        pair.validate().map_err(Error::InvalidInput)?;
        Ok(pair)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0..=5.0).contains(&self.gold) {
            return Err(format!("gold score {} outside [0, 5]", self.gold));
        }
        for s in [&self.sentence1, &self.sentence2] {
            check_text_field(s, "sentence")?;
        }
        if self.source.contains(['\t', '\n']) {
            return Err("source tag contains tab or newline".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Contradiction,
    Neutral,
}

impl NliLabel {
    pub const ALL: [NliLabel; 3] = [NliLabel::Entailment, NliLabel::Contradiction, NliLabel::Neutral];

    pub fn index(self) -> usize {
        match self {
            NliLabel::Entailment => 0,
            NliLabel::Contradiction => 1,
            NliLabel::Neutral => 2,
        }
    }
}

impl FromStr for NliLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "entailment" => Ok(NliLabel::Entailment),
            "contradiction" => Ok(NliLabel::Contradiction),
            "neutral" => Ok(NliLabel::Neutral),
            other => Err(format!("unknown NLI label {other:?}")),
        }
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NliLabel::Entailment => "entailment",
            NliLabel::Contradiction => "contradiction",
            NliLabel::Neutral => "neutral",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliExample {
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitionExample {
    pub word: String,
    pub definition: String,
}

impl DefinitionExample {
    pub fn new(word: impl Into<String>, definition: impl Into<String>) -> Result<Self> {
        let word = word.into();
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "definition target {word:?} must be a single nonempty token"
            )));
        }
        let definition = definition.into();
        check_text_field(&definition, "definition").map_err(Error::InvalidInput)?;
        Ok(DefinitionExample { word, definition })
    }
}

/// Lowercase, split on whitespace, strip non-alphanumeric characters from
/// both ends of each token and drop tokens that end up empty.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|tok| tok.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|tok| !tok.is_empty())
        .collect()
}

/// Set of distinct word types of a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSet(BTreeSet<String>);

impl WordSet {
    pub fn from_text(text: &str) -> Self {
        WordSet(tokenize(text).into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn intersection_len(&self, other: &WordSet) -> usize {
        self.0.intersection(&other.0).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// `2|W1 ∩ W2| / (|W1| + |W2|)` over word types.
pub fn dice(s1: &str, s2: &str) -> Result<f64> {
    let (w1, w2) = (WordSet::from_text(s1), WordSet::from_text(s2));
    if w1.is_empty() || w2.is_empty() {
        return Err(Error::invalid("dice: sentence has no words after tokenization"));
    }
    Ok(2.0 * w1.intersection_len(&w2) as f64 / (w1.len() + w2.len()) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subset {
    pub label: String,
    pub pairs: Vec<StsPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub name: String,
    pub subsets: Vec<Subset>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.subsets.iter().map(|s| s.pairs.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One subset per distinct source tag, ordered by first appearance.
pub fn partition_by_source(pairs: &[StsPair]) -> Result<Partition> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut subsets: Vec<Subset> = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        if pair.source.is_empty() {
            return Err(Error::invalid(format!("pair {i} has no source tag")));
        }
        let slot = *index.entry(pair.source.as_str()).or_insert_with(|| {
            subsets.push(Subset {
                label: pair.source.clone(),
                pairs: Vec::new(),
            });
            subsets.len() - 1
        });
        subsets[slot].pairs.push(pair.clone());
    }
    Ok(Partition {
        name: "source".into(),
        subsets,
    })
}

/// Sizes of `k` contiguous groups over `n` items; earlier groups take the
/// extra item when `n % k != 0`.
pub fn group_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

fn percent(i: usize, k: usize) -> String {
    let v = i as f64 * 100.0 / k as f64;
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

/// Label of the `i`-th of `k` quantile groups, e.g. `"20–40%"`.
pub fn quantile_label(i: usize, k: usize) -> String {
    format!("{}–{}%", percent(i, k), percent(i + 1, k))
}

/// Dice partition plus the per-subset Dice range, for summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct DicePartition {
    pub partition: Partition,
    /// `(min, max)` Dice value of each subset.
    pub bounds: Vec<(f64, f64)>,
}

/// Sort pairs ascending by (Dice, original index) and cut into `k`
/// contiguous groups of near-equal size.
pub fn partition_by_dice(pairs: &[StsPair], k: usize) -> Result<DicePartition> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if pairs.len() < k {
        return Err(Error::invalid(format!(
            "cannot split {} pairs into {k} groups",
            pairs.len()
        )));
    }
    let mut scored = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| Ok((dice(&p.sentence1, &p.sentence2)?, i)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut subsets = Vec::with_capacity(k);
    let mut bounds = Vec::with_capacity(k);
    let mut start = 0;
    for (g, size) in group_sizes(pairs.len(), k).into_iter().enumerate() {
        let chunk = &scored[start..start + size];
        bounds.push((chunk[0].0, chunk[size - 1].0));
        subsets.push(Subset {
            label: quantile_label(g, k),
            pairs: chunk.iter().map(|&(_, i)| pairs[i].clone()).collect(),
        });
        start += size;
    }
    Ok(DicePartition {
        partition: Partition {
            name: "dice".into(),
            subsets,
        },
        bounds,
    })
}

/// All pairs of a partition, subset by subset.
pub fn concat_subsets(partition: &Partition) -> Vec<StsPair> {
    partition
        .subsets
        .iter()
        .flat_map(|s| s.pairs.iter().cloned())
        .collect()
}

fn check_text_field(s: &str, what: &str) -> std::result::Result<(), String> {
    if s.trim().is_empty() {
        return Err(format!("{what} is empty"));
    }
    if s.contains(['\t', '\n', '\r']) {
        return Err(format!("{what} contains tab or newline"));
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l).to_string()))
        .collect())
}

pub fn parse_sts_line(line: &str) -> std::result::Result<StsPair, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 4 && cols.len() != 5 {
        return Err(format!("expected 4 or 5 tab-separated columns, found {}", cols.len()));
    }
    let gold: f64 = cols[1]
        .trim()
        .parse()
        .map_err(|_| format!("gold score {:?} is not a number", cols[1]))?;
    let pair = StsPair {
        source: cols[0].to_string(),
        gold,
        sentence1: cols[2].to_string(),
        sentence2: cols[3].to_string(),
        split: match cols.get(4) {
            Some(s) => s.trim().parse()?,
            None => Split::None,
        },
    };
    pair.validate()?;
    Ok(pair)
}

pub fn load_sts(path: impl AsRef<Path>) -> Result<Vec<StsPair>> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|(n, l)| parse_sts_line(&l).map_err(|m| Error::parse(path, n, m)))
        .collect()
}

pub fn load_nli(path: impl AsRef<Path>) -> Result<Vec<NliExample>> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|(n, l)| {
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(
                    path,
                    n,
                    format!("expected 3 tab-separated columns, found {}", cols.len()),
                ));
            }
            let label = cols[0].trim().parse().map_err(|m| Error::parse(path, n, m))?;
            for s in &cols[1..] {
                check_text_field(s, "sentence").map_err(|m| Error::parse(path, n, m))?;
            }
            Ok(NliExample {
                premise: cols[1].to_string(),
                hypothesis: cols[2].to_string(),
                label,
            })
        })
        .collect()
}

pub fn load_definitions(path: impl AsRef<Path>) -> Result<Vec<DefinitionExample>> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|(n, l)| {
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != 2 {
                return Err(Error::parse(
                    path,
                    n,
                    format!("expected 2 tab-separated columns, found {}", cols.len()),
                ));
            }
            DefinitionExample::new(cols[0].trim(), cols[1]).map_err(|e| Error::parse(path, n, e.to_string()))
        })
        .collect()
}

/// Probe task rows: `label \t text`. Labels are arbitrary strings.
pub fn load_labeled_texts(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|(n, l)| {
            let mut cols = l.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(label), Some(text), None) if !label.trim().is_empty() => {
                    check_text_field(text, "text").map_err(|m| Error::parse(path, n, m))?;
                    Ok((label.trim().to_string(), text.to_string()))
                }
                _ => Err(Error::parse(path, n, "expected `label<TAB>text`")),
            }
        })
        .collect()
}

fn format_gold(g: f64) -> String {
    format!("{g}")
}

pub fn sts_to_tsv(pairs: &[StsPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&p.source);
        out.push('\t');
        out.push_str(&format_gold(p.gold));
        out.push('\t');
        out.push_str(&p.sentence1);
        out.push('\t');
        out.push_str(&p.sentence2);
        if p.split != Split::None {
            out.push('\t');
            out.push_str(&p.split.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn nli_to_tsv(examples: &[NliExample]) -> String {
    examples
        .iter()
        .map(|e| format!("{}\t{}\t{}\n", e.label, e.premise, e.hypothesis))
        .collect()
}

pub fn definitions_to_tsv(examples: &[DefinitionExample]) -> String {
    examples
        .iter()
        .map(|e| format!("{}\t{}\n", e.word, e.definition))
        .collect()
}
