//! Evaluation of sentence embeddings.
//!
//! * Unsupervised STS: cosine similarity of the two embeddings against the
//!   gold score, summarized with Spearman (headline) and Pearson, per subset
//!   of a [`Partition`] plus an `ALL` row over the pooled pairs.
//! * Probing: a softmax logistic regression trained on frozen embeddings
//!   with k-fold cross-validation.
//!
//! Report values are correlations or accuracies ×100.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{concat_subsets, Partition, StsPair};
use crate::encoder::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::numstat::{argmax, cosine, cross_entropy, pearson, softmax, spearman, RealMatrix, Rng};
use crate::objectives::{AdamConfig, AdamState};

pub const ALL_LABEL: &str = "ALL";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StsScore {
    pub spearman: f64,
    pub pearson: f64,
}

/// Cosine similarity of each pair's embeddings.
pub fn pair_cosines<P: EmbeddingProvider + ?Sized>(provider: &P, pairs: &[StsPair]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|p| {
            let u = provider.embed(&p.sentence1)?;
            let v = provider.embed(&p.sentence2)?;
            cosine(&u, &v)
        })
        .collect()
}

/// Correlate cosine similarities with gold scores.
pub fn eval_sts<P: EmbeddingProvider + ?Sized>(provider: &P, pairs: &[StsPair]) -> Result<StsScore> {
    if pairs.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 pairs, got {}", pairs.len())));
    }
    let sims = pair_cosines(provider, pairs)?;
    let gold: Vec<f64> = pairs.iter().map(|p| p.gold).collect();
    let degenerate = |e: Error| match e {
        Error::ZeroVariance("first sequence") => Error::ZeroVariance("cosine similarities (degenerate provider)"),
        Error::ZeroVariance(_) => Error::ZeroVariance("gold scores"),
        other => other,
    };
    Ok(StsScore {
        spearman: spearman(&sims, &gold).map_err(degenerate)?,
        pearson: pearson(&sims, &gold).map_err(degenerate)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsRow {
    pub label: String,
    pub n: usize,
    /// Mean over seeds, ×100. `None` when the subset could not be scored.
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    pub per_seed_spearman: Vec<f64>,
    pub per_seed_pearson: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl StsRow {
    fn scored(label: &str, n: usize, score: StsScore) -> Self {
        let (s, p) = (100.0 * score.spearman, 100.0 * score.pearson);
        StsRow {
            label: label.to_string(),
            n,
            spearman: Some(s),
            pearson: Some(p),
            per_seed_spearman: vec![s],
            per_seed_pearson: vec![p],
            note: None,
        }
    }

    fn flagged(label: &str, n: usize, note: String) -> Self {
        StsRow {
            label: label.to_string(),
            n,
            spearman: None,
            pearson: None,
            per_seed_spearman: Vec::new(),
            per_seed_pearson: Vec::new(),
            note: Some(note),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsReport {
    pub provider: String,
    pub partition: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<StsRow>,
    /// Scored on the concatenation of all subsets.
    pub all: StsRow,
}

fn score_row<P: EmbeddingProvider + ?Sized>(provider: &P, label: &str, pairs: &[StsPair]) -> Result<StsRow> {
    if pairs.len() < 2 {
        return Ok(StsRow::flagged(label, pairs.len(), "too few pairs".into()));
    }
    match eval_sts(provider, pairs) {
        Ok(score) => Ok(StsRow::scored(label, pairs.len(), score)),
        Err(e @ Error::ZeroVariance(_)) => Ok(StsRow::flagged(label, pairs.len(), e.to_string())),
        Err(e) => Err(e),
    }
}

/// Score every subset and the pooled concatenation.
pub fn eval_sts_partitioned<P: EmbeddingProvider + ?Sized>(provider: &P, partition: &Partition) -> Result<StsReport> {
    let rows = partition
        .subsets
        .iter()
        .map(|s| score_row(provider, &s.label, &s.pairs))
        .collect::<Result<Vec<_>>>()?;
    let all = score_row(provider, ALL_LABEL, &concat_subsets(partition))?;
    Ok(StsReport {
        provider: provider.name(),
        partition: partition.name.clone(),
        seeds: Vec::new(),
        rows,
        all,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn merge_rows(rows: &[&StsRow]) -> Result<StsRow> {
    let first = rows[0];
    if rows.iter().any(|r| r.label != first.label || r.n != first.n) {
        return Err(Error::invalid(format!("report rows disagree at {:?}", first.label)));
    }
    if let Some(r) = rows.iter().find(|r| r.spearman.is_none()) {
        return Ok(StsRow::flagged(&first.label, first.n, r.note.clone().unwrap_or_default()));
    }
    let per_seed_spearman: Vec<f64> = rows.iter().flat_map(|r| r.per_seed_spearman.iter().copied()).collect();
    let per_seed_pearson: Vec<f64> = rows.iter().flat_map(|r| r.per_seed_pearson.iter().copied()).collect();
    Ok(StsRow {
        label: first.label.clone(),
        n: first.n,
        spearman: Some(mean(&per_seed_spearman)),
        pearson: Some(mean(&per_seed_pearson)),
        per_seed_spearman,
        per_seed_pearson,
        note: None,
    })
}

/// Cell-wise mean of reports from different seeds. Raw per-seed values are
/// kept so spreads can be recomputed.
pub fn aggregate_seeds(reports: &[StsReport]) -> Result<StsReport> {
    let first = reports.first().ok_or_else(|| Error::invalid("no reports to aggregate"))?;
    if reports.iter().any(|r| r.rows.len() != first.rows.len()) {
        return Err(Error::invalid("reports have different shapes"));
    }
    let rows = (0..first.rows.len())
        .map(|i| merge_rows(&reports.iter().map(|r| &r.rows[i]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let all = merge_rows(&reports.iter().map(|r| &r.all).collect::<Vec<_>>())?;
    Ok(StsReport {
        provider: first.provider.clone(),
        partition: first.partition.clone(),
        seeds: reports.iter().flat_map(|r| r.seeds.iter().copied()).collect(),
        rows,
        all,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "–".to_string(), |x| format!("{x:.2}"))
}

impl StsReport {
    /// Number of runs averaged into this report (at least 1).
    pub fn runs(&self) -> usize {
        self.all.per_seed_spearman.len().max(1)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "STS ({} partition), provider `{}`, mean of {} run(s)\n",
            self.partition,
            self.provider,
            self.runs()
        );
        let _ = writeln!(out, "| Subset | n | Spearman×100 | Pearson×100 |");
        let _ = writeln!(out, "|---|---:|---:|---:|");
        for r in self.rows.iter().chain(std::iter::once(&self.all)) {
            let note = r.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
            let _ = writeln!(out, "| {}{} | {} | {} | {} |", r.label, note, r.n, cell(r.spearman), cell(r.pearson));
        }
        out
    }
}

/// Method × subset table of Spearman×100, with the pooled `ALL` column and
/// the average over subsets.
pub fn comparison_markdown(entries: &[(String, StsReport)]) -> String {
    let mut out = String::new();
    let Some((_, head)) = entries.first() else {
        return out;
    };
    let labels: Vec<&str> = head.rows.iter().map(|r| r.label.as_str()).collect();
    let _ = writeln!(out, "| Method | {} | {} | Avg |", labels.join(" | "), ALL_LABEL);
    let _ = writeln!(out, "|---|{}---:|---:|", "---:|".repeat(labels.len()));
    for (name, rep) in entries {
        let vals: Vec<Option<f64>> = rep.rows.iter().map(|r| r.spearman).collect();
        let avg = if vals.iter().all(Option::is_some) && !vals.is_empty() {
            Some(mean(&vals.iter().flatten().copied().collect::<Vec<_>>()))
        } else {
            None
        };
        let cells: Vec<String> = vals.into_iter().map(cell).collect();
        let _ = writeln!(out, "| {} | {} | {} | {} |", name, cells.join(" | "), cell(rep.all.spearman), cell(avg));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub folds: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            folds: 10,
            batch_size: 64,
            epochs: 4,
            lr: 1e-3,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config("probe folds must be >= 2".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("probe batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("probe learning rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Sentence classification task; labels are indices into `classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTask {
    pub name: String,
    pub classes: Vec<String>,
    pub examples: Vec<(String, usize)>,
}

impl ProbeTask {
    /// Class names are sorted so label indices do not depend on row order.
    pub fn from_labeled(name: impl Into<String>, rows: &[(String, String)]) -> Result<Self> {
        let classes: Vec<String> = rows
            .iter()
            .map(|(l, _)| l.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let examples = rows.iter().map(|(l, t)| (t.clone(), index[l.as_str()])).collect();
        let task = ProbeTask {
            name: name.into(),
            classes,
            examples,
        };
        if task.classes.len() < 2 {
            return Err(Error::invalid(format!("probe task {} needs at least 2 classes", task.name)));
        }
        Ok(task)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &(_, c) in &self.examples {
            counts[c] += 1;
        }
        counts
    }

    pub fn validate(&self, folds: usize) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::invalid("probe task needs at least 2 classes"));
        }
        if let Some((c, n)) = self.class_counts().into_iter().enumerate().find(|&(_, n)| n < folds) {
            return Err(Error::invalid(format!(
                "class {:?} of task {} has {n} examples, fewer than {folds} folds",
                self.classes[c], self.name
            )));
        }
        Ok(())
    }
}

/// Shuffle `0..n` and cut into `k` folds whose sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if k == 0 || n < k {
        return Err(Error::invalid(format!("cannot split {n} items into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for size in crate::corpus::group_sizes(n, k) {
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// `classes × dim`
    pub weights: RealMatrix,
    pub bias: Vec<f64>,
}

impl LogRegModel {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        LogRegModel {
            weights: RealMatrix::zeros(classes, dim),
            bias: vec![0.0; classes],
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.weights.matvec(x)?;
        crate::numstat::axpy(1.0, &self.bias, &mut z);
        Ok(z)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }
}

/// Mean cross-entropy of `model` over the given rows, and its gradient.
pub fn logreg_loss_and_grads(
    model: &LogRegModel,
    features: &[Vec<f64>],
    labels: &[usize],
    rows: &[usize],
) -> Result<(f64, LogRegModel)> {
    let mut grad = LogRegModel::zeros(model.weights.rows(), model.weights.cols());
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for &i in rows {
        let mut dz = softmax(&model.logits(&features[i])?);
        loss += cross_entropy(&dz, labels[i])?;
        dz[labels[i]] -= 1.0;
        dz.iter_mut().for_each(|x| *x *= scale);
        grad.weights.add_outer(1.0, &dz, &features[i]);
        crate::numstat::axpy(1.0, &dz, &mut grad.bias);
    }
    Ok((loss * scale, grad))
}

/// Minibatch Adam on softmax cross-entropy from a zero initialization, for
/// `epochs × ⌈n / batch_size⌉` steps.
pub fn train_logreg(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    config: &ProbeConfig,
    rng: &mut Rng,
) -> Result<LogRegModel> {
    config.validate()?;
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::invalid("features and labels must be nonempty and aligned"));
    }
    let dim = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            got: f.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {classes} classes")));
    }
    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        return Err(Error::invalid("training data has a single class"));
    }

    let mut model = LogRegModel::zeros(classes, dim);
    let mut adam = AdamState::new(config.adam);
    let mut order: Vec<usize> = (0..features.len()).collect();
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            let (_, g) = logreg_loss_and_grads(&model, features, labels, batch)?;
            adam.step(0, model.weights.as_mut_slice(), g.weights.as_slice(), config.lr)?;
            adam.step(1, &mut model.bias, &g.bias, config.lr)?;
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub task: String,
    pub accuracy: f64,
    /// Held-out prediction for every example.
    pub predictions: Vec<usize>,
    /// Fold each example was tested in.
    pub fold_of: Vec<usize>,
}

/// k-fold CV accuracy of a logistic regression on frozen embeddings.
pub fn eval_probe<P: EmbeddingProvider + ?Sized>(provider: &P, task: &ProbeTask, config: &ProbeConfig) -> Result<ProbeResult> {
    config.validate()?;
    task.validate(config.folds)?;
    let features = task
        .examples
        .iter()
        .map(|(t, _)| provider.embed(t).map(|v| v.into_inner()))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = task.examples.iter().map(|&(_, l)| l).collect();
    let probe_features = ProbeData {
        features: &features,
        labels: &labels,
        classes: task.classes.len(),
    };
    cross_validate(&task.name, &probe_features, config)
}

/// Precomputed features for [`cross_validate`].
pub struct ProbeData<'a> {
    pub features: &'a [Vec<f64>],
    pub labels: &'a [usize],
    pub classes: usize,
}

pub fn cross_validate(name: &str, data: &ProbeData<'_>, config: &ProbeConfig) -> Result<ProbeResult> {
    let n = data.features.len();
    let root = Rng::new(config.seed);
    let folds = kfold_split(n, config.folds, &mut root.fork(0))?;
    let mut predictions = vec![usize::MAX; n];
    let mut fold_of = vec![usize::MAX; n];
    let mut in_test = vec![false; n];
    for (f, test) in folds.iter().enumerate() {
        in_test.iter_mut().for_each(|t| *t = false);
        test.iter().for_each(|&i| in_test[i] = true);
        let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        debug_assert!(train.iter().all(|&i| !in_test[i]));
        let train_x: Vec<Vec<f64>> = train.iter().map(|&i| data.features[i].clone()).collect();
        let train_y: Vec<usize> = train.iter().map(|&i| data.labels[i]).collect();
        let model = train_logreg(&train_x, &train_y, data.classes, config, &mut root.fork(1 + f as u64))?;
        for &i in test {
            predictions[i] = model.predict(&data.features[i])?;
            fold_of[i] = f;
        }
    }
    let correct = predictions.iter().zip(data.labels).filter(|(p, l)| p == l).count();
    Ok(ProbeResult {
        task: name.to_string(),
        accuracy: correct as f64 / n as f64,
        predictions,
        fold_of,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub task: String,
    pub n: usize,
    /// Mean accuracy ×100.
    pub accuracy: f64,
    pub per_seed_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub provider: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<ProbeRow>,
}

impl ProbeReport {
    pub fn from_results(provider: &str, seed: u64, results: &[(usize, ProbeResult)]) -> Self {
        ProbeReport {
            provider: provider.to_string(),
            seeds: vec![seed],
            rows: results
                .iter()
                .map(|(n, r)| ProbeRow {
                    task: r.task.clone(),
                    n: *n,
                    accuracy: 100.0 * r.accuracy,
                    per_seed_accuracy: vec![100.0 * r.accuracy],
                })
                .collect(),
        }
    }

    pub fn average(&self) -> f64 {
        mean(&self.rows.iter().map(|r| r.accuracy).collect::<Vec<_>>())
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let runs = self.rows.first().map_or(1, |r| r.per_seed_accuracy.len());
        let _ = writeln!(out, "Probing, provider `{}`, mean of {runs} run(s)\n", self.provider);
        let _ = writeln!(out, "| Task | n | Accuracy×100 |");
        let _ = writeln!(out, "|---|---:|---:|");
        for r in &self.rows {
            let _ = writeln!(out, "| {} | {} | {:.2} |", r.task, r.n, r.accuracy);
        }
        if !self.rows.is_empty() {
            let _ = writeln!(out, "| Avg | | {:.2} |", self.average());
        }
        out
    }
}

pub fn aggregate_probe_reports(reports: &[ProbeReport]) -> Result<ProbeReport> {
    let first = reports.first().ok_or_else(|| Error::invalid("no reports to aggregate"))?;
    let shape = |r: &ProbeReport| r.rows.iter().map(|x| (x.task.clone(), x.n)).collect::<Vec<_>>();
    if reports.iter().any(|r| shape(r) != shape(first)) {
        return Err(Error::invalid("probe reports have different shapes"));
    }
    let rows = first
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let per_seed: Vec<f64> = reports
                .iter()
                .flat_map(|r| r.rows[i].per_seed_accuracy.iter().copied())
                .collect();
            ProbeRow {
                task: row.task.clone(),
                n: row.n,
                accuracy: mean(&per_seed),
                per_seed_accuracy: per_seed,
            }
        })
        .collect();
    Ok(ProbeReport {
        provider: first.provider.clone(),
        seeds: reports.iter().flat_map(|r| r.seeds.iter().copied()).collect(),
        rows,
    })
}
