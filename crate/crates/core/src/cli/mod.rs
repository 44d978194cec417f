//! Command implementations behind the `sentcompare` binary.
//!
//! Each `cmd_*` function takes a resolved [`ExperimentConfig`], writes its
//! outputs under `config.out` and finishes with a `manifest.json`. Outputs are
//! staged in memory and written in one go at the end; when a write fails, the
//! files already written by the command are removed again.

pub mod config;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointBody, ModelState};
use crate::combiner::{run_pipeline, CombineMode, CombinedProvider, Datasets, Method, PipelineSpec, Stage, StageRecord};
use crate::corpus::{
    load_definitions, load_labeled_texts, load_nli, load_sts, partition_by_dice, partition_by_source, sts_to_tsv,
    tokenize, DefinitionExample, NliExample, Partition, Subset,
};
use crate::encoder::{EmbeddingProvider, EmbeddingStore, ToyEncoder, Vocabulary};
use crate::error::{Error, Result};
use crate::evalsuite::{
    aggregate_probe_reports, aggregate_seeds, comparison_markdown, eval_probe, eval_sts_partitioned, ProbeReport,
    ProbeTask, StsReport,
};
use crate::fsutil::write_atomic;
use crate::numstat::Rng;

pub use config::{DataPaths, ExperimentConfig, PartitionConfig, Scheme};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageRecord>,
}

/// What a command read and wrote. The config snapshot plus the inputs are
/// enough to re-run it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub inputs: Vec<InputRecord>,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<ArtifactRecord>,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Files a command is about to write, committed together.
struct Outputs {
    dir: PathBuf,
    files: Vec<(PathBuf, Vec<u8>)>,
    artifacts: Vec<ArtifactRecord>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) -> PathBuf {
        let path = self.dir.join(name);
        self.files.push((path.clone(), bytes));
        path
    }

    fn artifact(&mut self, name: &str, bytes: Vec<u8>, seed: Option<u64>, stages: Vec<StageRecord>) -> PathBuf {
        let path = self.add(name, bytes);
        self.artifacts.push(ArtifactRecord {
            path: path.clone(),
            seed,
            stages,
        });
        path
    }

    fn commit(mut self, command: &str, cfg: &ExperimentConfig, inputs: Vec<InputRecord>, started: Instant) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            version: VERSION.to_string(),
            config: cfg.clone(),
            inputs,
            seeds: cfg.seeds.clone(),
            artifacts: std::mem::take(&mut self.artifacts),
            wall_clock_secs: started.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_vec_pretty(&manifest)?;
        self.add(MANIFEST_FILE, json);
        let mut written: Vec<&Path> = Vec::new();
        for (path, bytes) in &self.files {
            if let Err(e) = write_atomic(path, bytes) {
                for p in written {
                    let _ = fs::remove_file(p);
                }
                return Err(e);
            }
            written.push(path);
        }
        info!("wrote {} file(s) to {}", self.files.len(), self.dir.display());
        Ok(manifest)
    }
}

fn input_records<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<Vec<InputRecord>> {
    paths
        .into_iter()
        .map(|p| {
            let meta = fs::metadata(p).map_err(|e| Error::io(p, e))?;
            Ok(InputRecord {
                path: p.clone(),
                bytes: meta.len(),
            })
        })
        .collect()
}

fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Error::Config(format!("missing input: {what}")))
}

fn slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let out = out.trim_matches('-').to_string();
    if out.is_empty() {
        "subset".to_string()
    } else {
        out
    }
}

/// Per-subset entry of a partition `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSummary {
    pub label: String,
    pub file: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_dice: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dice: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub scheme: Scheme,
    pub total: usize,
    pub subsets: Vec<SubsetSummary>,
}

impl PartitionSummary {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("Partition by {}, {} pairs\n\n", self.scheme, self.total);
        out.push_str("| Subset | File | n | Dice range |\n|---|---|---:|---|\n");
        for s in &self.subsets {
            let range = match (s.min_dice, s.max_dice) {
                (Some(a), Some(b)) => format!("{a:.3}–{b:.3}"),
                _ => String::new(),
            };
            out.push_str(&format!("| {} | {} | {} | {} |\n", s.label, s.file, s.n, range));
        }
        out
    }
}

/// Split an STS file into one file per subset plus a summary.
pub fn cmd_partition(cfg: &ExperimentConfig) -> Result<PartitionSummary> {
    let started = Instant::now();
    cfg.validate()?;
    let sts = require(&cfg.data.sts, "STS file (--sts)")?;
    let out = cfg.out_dir()?;
    let pairs = load_sts(sts)?;
    let (partition, bounds) = match cfg.partition.scheme {
        Scheme::Source => (partition_by_source(&pairs)?, None),
        Scheme::Dice => {
            let dp = partition_by_dice(&pairs, cfg.partition.k)?;
            (dp.partition, Some(dp.bounds))
        }
    };
    let mut outputs = Outputs::new(out);
    let mut subsets = Vec::new();
    for (i, s) in partition.subsets.iter().enumerate() {
        let file = format!("{i:02}_{}.tsv", slug(&s.label));
        outputs.artifact(&file, sts_to_tsv(&s.pairs).into_bytes(), None, Vec::new());
        let b = bounds.as_ref().map(|b| b[i]);
        subsets.push(SubsetSummary {
            label: s.label.clone(),
            file,
            n: s.pairs.len(),
            min_dice: b.map(|b| b.0),
            max_dice: b.map(|b| b.1),
        });
    }
    let summary = PartitionSummary {
        scheme: cfg.partition.scheme,
        total: pairs.len(),
        subsets,
    };
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    outputs.add(SUMMARY_FILE, json);
    outputs.add("summary.md", summary.to_markdown().into_bytes());
    outputs.commit("partition", cfg, input_records([sts])?, started)?;
    Ok(summary)
}

/// Read a directory written by [`cmd_partition`].
pub fn load_partition_dir(dir: &Path) -> Result<Partition> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let summary: PartitionSummary = serde_json::from_str(&text)?;
    let subsets = summary
        .subsets
        .iter()
        .map(|s| {
            let pairs = load_sts(dir.join(&s.file))?;
            if pairs.len() != s.n {
                return Err(Error::invalid(format!(
                    "{}: summary lists {} pairs, file has {}",
                    s.file,
                    s.n,
                    pairs.len()
                )));
            }
            Ok(Subset {
                label: s.label.clone(),
                pairs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition {
        name: summary.scheme.to_string(),
        subsets,
    })
}

/// Training corpora named by the config.
struct TrainingData {
    nli: Vec<NliExample>,
    definitions: Vec<DefinitionExample>,
    extra_texts: Vec<String>,
}

impl TrainingData {
    fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let nli = cfg.data.nli.as_ref().map(load_nli).transpose()?.unwrap_or_default();
        let definitions = cfg
            .data
            .definitions
            .as_ref()
            .map(load_definitions)
            .transpose()?
            .unwrap_or_default();
        let mut extra_texts = Vec::new();
        if let Some(p) = &cfg.data.sts {
            for pair in load_sts(p)? {
                extra_texts.push(pair.sentence1);
                extra_texts.push(pair.sentence2);
            }
        }
        if let Some(p) = &cfg.data.sentences {
            extra_texts.extend(read_sentences(p)?);
        }
        Ok(TrainingData {
            nli,
            definitions,
            extra_texts,
        })
    }

    /// Vocabulary over every text the run sees, including defined words.
    fn vocabulary(&self, min_count: usize) -> Result<Vocabulary> {
        let mut texts: Vec<&str> = Vec::new();
        for e in &self.nli {
            texts.push(&e.premise);
            texts.push(&e.hypothesis);
        }
        for d in &self.definitions {
            texts.push(&d.word);
            texts.push(&d.definition);
        }
        texts.extend(self.extra_texts.iter().map(String::as_str));
        if texts.is_empty() {
            return Err(Error::Config("no text to build a vocabulary from".into()));
        }
        Vocabulary::build(&texts, min_count)
    }

    fn datasets(&self) -> Datasets<'_> {
        Datasets {
            nli: Some(&self.nli),
            definitions: Some(&self.definitions),
        }
    }
}

fn check_method_data(method: Method, data: &TrainingData) -> Result<()> {
    if method.needs_nli() && data.nli.is_empty() {
        return Err(Error::Config(format!("method {method} needs NLI data (--nli)")));
    }
    if method.needs_definitions() && data.definitions.is_empty() {
        return Err(Error::Config(format!("method {method} needs definition data (--definitions)")));
    }
    Ok(())
}

/// Result of [`cmd_train`]: one checkpoint per seed.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoints: Vec<PathBuf>,
    pub manifest: RunManifest,
}

/// Train one model per seed with the configured method.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let out = cfg.out_dir()?;
    let data = TrainingData::load(cfg)?;
    check_method_data(cfg.method, &data)?;
    let vocab = data.vocabulary(cfg.min_count)?;
    info!("vocabulary: {} entries", vocab.len());

    let mut outputs = Outputs::new(out);
    let mut checkpoints = Vec::new();
    for &seed in &cfg.seeds {
        let train = crate::objectives::TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        let base = ToyEncoder::new(vocab.clone(), cfg.dim, cfg.pooling, &mut Rng::new(seed))?;
        let run = |stages: &[Stage]| -> Result<ModelState> {
            let spec = PipelineSpec::uniform(stages, &train, cfg.schedule);
            Ok(run_pipeline(&spec, &base, &data.datasets())?.into())
        };
        let body = match (cfg.method.stages(), cfg.method.combine_mode()) {
            (Some(stages), _) if stages.is_empty() => CheckpointBody::Single {
                model: ModelState {
                    encoder: base.clone(),
                    nli_head: None,
                    def_head: None,
                    stages: Vec::new(),
                },
            },
            (Some(stages), _) => CheckpointBody::Single { model: run(&stages)? },
            (None, Some(mode)) => CheckpointBody::Combined {
                mode,
                a: run(&[Stage::Sbert])?,
                b: run(&[Stage::DefSent])?,
            },
            (None, None) => unreachable!("every method either trains or combines"),
        };
        let ck = Checkpoint::new(cfg.method, seed, train, cfg.schedule, body);
        let stages: Vec<StageRecord> = ck.models().iter().flat_map(|m| m.stages.iter().cloned()).collect();
        for s in &stages {
            info!("seed {seed}: {} ran {} steps ({})", s.stage, s.steps, s.pattern);
        }
        let path = outputs.artifact(&format!("checkpoint-seed{seed}.json"), ck.to_json()?.into_bytes(), Some(seed), stages);
        checkpoints.push(path);
    }
    let inputs = [&cfg.data.nli, &cfg.data.definitions, &cfg.data.sts, &cfg.data.sentences];
    let manifest = outputs.commit("train", cfg, input_records(inputs.into_iter().flatten())?, started)?;
    Ok(TrainOutcome { checkpoints, manifest })
}

/// A provider read from disk, with the seed it was trained with if known.
pub struct LoadedProvider {
    pub path: PathBuf,
    pub seed: Option<u64>,
    pub combined: bool,
    pub provider: Arc<dyn EmbeddingProvider>,
}

/// Load an embedding dump (`dim=` header) or a JSON checkpoint.
pub fn load_provider(path: &Path) -> Result<LoadedProvider> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.starts_with("dim=") {
        let store = EmbeddingStore::parse_dump(&text, path)?;
        return Ok(LoadedProvider {
            path: path.to_path_buf(),
            seed: None,
            combined: false,
            provider: Arc::new(store),
        });
    }
    let ck = Checkpoint::from_json(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    Ok(LoadedProvider {
        path: path.to_path_buf(),
        seed: Some(ck.seed),
        combined: matches!(ck.body, CheckpointBody::Combined { .. }),
        provider: ck.provider()?,
    })
}

/// One evaluable run: a single provider, or a combined pair.
pub struct Run {
    pub seed: u64,
    pub provider: Arc<dyn EmbeddingProvider>,
}

/// Turn the configured providers into runs. With `average` / `concat`,
/// consecutive plain providers are paired; already combined checkpoints are
/// used as they are.
pub fn build_runs(cfg: &ExperimentConfig) -> Result<Vec<Run>> {
    if cfg.providers.is_empty() {
        return Err(Error::Config("no providers given (--provider)".into()));
    }
    let loaded = cfg.providers.iter().map(|p| load_provider(p)).collect::<Result<Vec<_>>>()?;
    let seed_of = |i: usize, l: &LoadedProvider| l.seed.unwrap_or(i as u64);
    let mode = cfg.method.combine_mode();
    match mode {
        Some(mode) if loaded.iter().all(|l| !l.combined) => {
            if loaded.len() % 2 != 0 {
                return Err(Error::Config(format!(
                    "method {} pairs providers, got an odd number ({})",
                    cfg.method,
                    loaded.len()
                )));
            }
            loaded
                .chunks(2)
                .enumerate()
                .map(|(i, pair)| {
                    Ok(Run {
                        seed: seed_of(i, &pair[0]),
                        provider: Arc::new(CombinedProvider::new(
                            mode,
                            pair[0].provider.clone(),
                            pair[1].provider.clone(),
                        )?),
                    })
                })
                .collect()
        }
        Some(_) if loaded.iter().any(|l| !l.combined) => Err(Error::Config(
            "cannot mix combined checkpoints with plain providers".into(),
        )),
        _ => Ok(loaded
            .iter()
            .enumerate()
            .map(|(i, l)| Run {
                seed: seed_of(i, l),
                provider: l.provider.clone(),
            })
            .collect()),
    }
}

/// Non-empty lines of a sentences file.
pub fn read_sentences(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

/// Write an embedding dump per run for the sentences file.
pub fn cmd_embed(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    cfg.validate()?;
    let out = cfg.out_dir()?;
    let sentences_path = require(&cfg.data.sentences, "sentences file (--sentences)")?;
    let sentences = read_sentences(sentences_path)?;
    let mut seen = HashSet::new();
    let mut unique = Vec::with_capacity(sentences.len());
    for s in &sentences {
        if tokenize(s).is_empty() {
            warn!("skipping line without words: {s:?}");
        } else if !seen.insert(s.as_str()) {
            warn!("duplicate sentence embedded once: {s:?}");
        } else {
            unique.push(s.as_str());
        }
    }
    let runs = build_runs(cfg)?;
    let mut outputs = Outputs::new(out);
    let mut dumps = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let store = EmbeddingStore::from_provider(&run.provider, &unique)?;
        let name = format!("embeddings-{i:02}.txt");
        dumps.push(outputs.artifact(&name, store.to_dump_string().into_bytes(), Some(run.seed), Vec::new()));
    }
    let inputs = std::iter::once(sentences_path).chain(cfg.providers.iter());
    outputs.commit("embed", cfg, input_records(inputs)?, started)?;
    Ok(dumps)
}

/// STS partition named by the config: a partition directory, or an STS file
/// split by the configured scheme.
pub fn configured_partition(cfg: &ExperimentConfig) -> Result<Option<Partition>> {
    if let Some(dir) = &cfg.data.partition_dir {
        return load_partition_dir(dir).map(Some);
    }
    let Some(sts) = &cfg.data.sts else {
        return Ok(None);
    };
    let pairs = load_sts(sts)?;
    Ok(Some(match cfg.partition.scheme {
        Scheme::Source => partition_by_source(&pairs)?,
        Scheme::Dice => partition_by_dice(&pairs, cfg.partition.k)?.partition,
    }))
}

fn probe_tasks(cfg: &ExperimentConfig) -> Result<Vec<ProbeTask>> {
    cfg.data
        .probe
        .iter()
        .map(|p| {
            let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            ProbeTask::from_labeled(name, &load_labeled_texts(p)?)
        })
        .collect()
}

/// STS and probing results for one provider, aggregated over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sts: Option<StsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeReport>,
}

impl EvalReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if let Some(s) = &self.sts {
            out.push_str(&s.to_markdown());
        }
        if let Some(p) = &self.probe {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&p.to_markdown());
        }
        out
    }
}

fn evaluate(runs: &[Run], partition: Option<&Partition>, tasks: &[ProbeTask], cfg: &ExperimentConfig) -> Result<EvalReport> {
    let mut sts = Vec::new();
    let mut probe = Vec::new();
    for run in runs {
        if let Some(partition) = partition {
            let mut rep = eval_sts_partitioned(&run.provider, partition)?;
            rep.seeds = vec![run.seed];
            sts.push(rep);
        }
        if !tasks.is_empty() {
            let results = tasks
                .iter()
                .map(|t| Ok((t.examples.len(), eval_probe(&run.provider, t, &cfg.probing)?)))
                .collect::<Result<Vec<_>>>()?;
            probe.push(ProbeReport::from_results(&run.provider.name(), run.seed, &results));
        }
    }
    Ok(EvalReport {
        runs: runs.len(),
        sts: if sts.is_empty() { None } else { Some(aggregate_seeds(&sts)?) },
        probe: if probe.is_empty() {
            None
        } else {
            Some(aggregate_probe_reports(&probe)?)
        },
    })
}

fn eval_inputs(cfg: &ExperimentConfig) -> Result<Vec<InputRecord>> {
    let mut paths: Vec<PathBuf> = cfg.providers.clone();
    paths.extend(cfg.data.sts.iter().cloned());
    if let Some(dir) = &cfg.data.partition_dir {
        paths.push(dir.join(SUMMARY_FILE));
    }
    paths.extend(cfg.data.probe.iter().cloned());
    input_records(&paths)
}

fn nothing_to_evaluate(partition: &Option<Partition>, tasks: &[ProbeTask]) -> Result<()> {
    if partition.is_none() && tasks.is_empty() {
        return Err(Error::Config(
            "nothing to evaluate: give an STS file, a partition dir or probe tasks".into(),
        ));
    }
    Ok(())
}

/// Evaluate the configured providers. Several providers count as seed runs
/// of one model and are averaged.
pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<EvalReport> {
    let started = Instant::now();
    cfg.validate()?;
    let out = cfg.out_dir()?;
    let partition = configured_partition(cfg)?;
    let tasks = probe_tasks(cfg)?;
    nothing_to_evaluate(&partition, &tasks)?;
    let runs = build_runs(cfg)?;
    let report = evaluate(&runs, partition.as_ref(), &tasks, cfg)?;
    let mut outputs = Outputs::new(out);
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    outputs.artifact(REPORT_JSON, json, None, Vec::new());
    outputs.artifact(REPORT_MD, report.to_markdown().into_bytes(), None, Vec::new());
    outputs.commit("eval", cfg, eval_inputs(cfg)?, started)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombineEvalReport {
    /// `(row name, report)` for A, B and each combination.
    pub entries: Vec<(String, EvalReport)>,
}

impl CombineEvalReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let sts: Vec<(String, StsReport)> = self
            .entries
            .iter()
            .filter_map(|(n, r)| r.sts.clone().map(|s| (n.clone(), s)))
            .collect();
        if !sts.is_empty() {
            out.push_str(&format!("STS ({} partition), Spearman×100\n\n", sts[0].1.partition));
            out.push_str(&comparison_markdown(&sts));
        }
        let probes: Vec<(&String, &ProbeReport)> =
            self.entries.iter().filter_map(|(n, r)| r.probe.as_ref().map(|p| (n, p))).collect();
        if let Some((_, first)) = probes.first() {
            if !out.is_empty() {
                out.push('\n');
            }
            let tasks: Vec<&str> = first.rows.iter().map(|r| r.task.as_str()).collect();
            out.push_str("Probing accuracy×100\n\n");
            out.push_str(&format!("| Method | {} | Avg |\n", tasks.join(" | ")));
            out.push_str(&format!("|---|{}---:|\n", "---:|".repeat(tasks.len())));
            for (name, p) in probes {
                let cells: Vec<String> = p.rows.iter().map(|r| format!("{:.2}", r.accuracy)).collect();
                out.push_str(&format!("| {} | {} | {:.2} |\n", name, cells.join(" | "), p.average()));
            }
        }
        out
    }
}

/// Evaluate two providers A and B next to their combinations. With more than
/// two providers, the first half are seed runs of A and the second half of B.
pub fn cmd_combine_eval(cfg: &ExperimentConfig) -> Result<CombineEvalReport> {
    let started = Instant::now();
    cfg.validate()?;
    let out = cfg.out_dir()?;
    let n = cfg.providers.len();
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "combine-eval needs an even number (>= 2) of providers, got {n}"
        )));
    }
    let partition = configured_partition(cfg)?;
    let tasks = probe_tasks(cfg)?;
    nothing_to_evaluate(&partition, &tasks)?;
    let loaded = cfg.providers.iter().map(|p| load_provider(p)).collect::<Result<Vec<_>>>()?;
    let (a, b) = loaded.split_at(n / 2);
    let as_runs = |side: &[LoadedProvider]| -> Vec<Run> {
        side.iter()
            .enumerate()
            .map(|(i, l)| Run {
                seed: l.seed.unwrap_or(i as u64),
                provider: l.provider.clone(),
            })
            .collect()
    };
    let modes: Vec<CombineMode> = match cfg.method.combine_mode() {
        Some(m) => vec![m],
        None => vec![CombineMode::Average, CombineMode::Concat],
    };
    let mut entries = vec![
        ("A".to_string(), evaluate(&as_runs(a), partition.as_ref(), &tasks, cfg)?),
        ("B".to_string(), evaluate(&as_runs(b), partition.as_ref(), &tasks, cfg)?),
    ];
    for mode in modes {
        if mode == CombineMode::Average && a[0].provider.dim() != b[0].provider.dim() {
            warn!("skipping average: dimensions {} and {} differ", a[0].provider.dim(), b[0].provider.dim());
            continue;
        }
        let runs = a
            .iter()
            .zip(b)
            .enumerate()
            .map(|(i, (x, y))| {
                Ok(Run {
                    seed: x.seed.unwrap_or(i as u64),
                    provider: Arc::new(CombinedProvider::new(mode, x.provider.clone(), y.provider.clone())?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        entries.push((mode.to_string(), evaluate(&runs, partition.as_ref(), &tasks, cfg)?));
    }
    let report = CombineEvalReport { entries };
    let mut outputs = Outputs::new(out);
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    outputs.artifact(REPORT_JSON, json, None, Vec::new());
    outputs.artifact(REPORT_MD, report.to_markdown().into_bytes(), None, Vec::new());
    outputs.commit("combine-eval", cfg, eval_inputs(cfg)?, started)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("MSRpar"), "msrpar");
        assert_eq!(slug("0–20%"), "0-20");
        assert_eq!(slug("SMT-europarl"), "smt-europarl");
        assert_eq!(slug("%%"), "subset");
    }
}
