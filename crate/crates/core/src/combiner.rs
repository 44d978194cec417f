//! Combining the two objectives.
//!
//! Sequential (`s+d`, `d+s`) and joint (`multi`) training run through
//! [`run_pipeline`] on a single parameter set. `average` and `concat` merge
//! the embeddings of two separately trained providers through
//! [`CombinedProvider`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{DefinitionExample, NliExample};
use crate::encoder::{EmbeddingProvider, ToyEncoder};
use crate::error::{Error, Result};
use crate::numstat::RealVector;
use crate::objectives::{
    train_defsent_with_head, train_multi, train_sbert_with_head, MultiSchedule, NliHead, TrainConfig,
    TrainLog, WordPredictionHead,
};

/// `(a + b) / 2`
pub fn combine_average(a: &[f64], b: &[f64]) -> Result<RealVector> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    RealVector::new(a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect())
}

/// `a` followed by `b`.
pub fn combine_concat(a: &[f64], b: &[f64]) -> Result<RealVector> {
    RealVector::new(a.iter().chain(b).copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    Average,
    Concat,
}

impl fmt::Display for CombineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombineMode::Average => "average",
            CombineMode::Concat => "concat",
        })
    }
}

impl FromStr for CombineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(CombineMode::Average),
            "concat" => Ok(CombineMode::Concat),
            other => Err(Error::invalid(format!("unknown combination mode {other:?}"))),
        }
    }
}

/// Post-hoc merge of two providers' embeddings.
#[derive(Clone)]
pub struct CombinedProvider {
    mode: CombineMode,
    a: Arc<dyn EmbeddingProvider>,
    b: Arc<dyn EmbeddingProvider>,
}

impl CombinedProvider {
    pub fn new(mode: CombineMode, a: Arc<dyn EmbeddingProvider>, b: Arc<dyn EmbeddingProvider>) -> Result<Self> {
        if mode == CombineMode::Average && a.dim() != b.dim() {
            return Err(Error::DimMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        Ok(CombinedProvider { mode, a, b })
    }

    pub fn mode(&self) -> CombineMode {
        self.mode
    }
}

impl fmt::Debug for CombinedProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CombinedProvider")
            .field("mode", &self.mode)
            .field("a", &self.a.name())
            .field("b", &self.b.name())
            .finish()
    }
}

impl EmbeddingProvider for CombinedProvider {
    fn dim(&self) -> usize {
        match self.mode {
            CombineMode::Average => self.a.dim(),
            CombineMode::Concat => self.a.dim() + self.b.dim(),
        }
    }

    fn embed(&self, sentence: &str) -> Result<RealVector> {
        let (u, v) = (self.a.embed(sentence)?, self.b.embed(sentence)?);
        match self.mode {
            CombineMode::Average => combine_average(&u, &v),
            CombineMode::Concat => combine_concat(&u, &v),
        }
    }

    fn name(&self) -> String {
        format!("{}({}, {})", self.mode, self.a.name(), self.b.name())
    }
}

/// Method keywords accepted on the command line and in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "sbert")]
    Sbert,
    #[serde(rename = "defsent")]
    DefSent,
    #[serde(rename = "s+d")]
    SbertThenDefSent,
    #[serde(rename = "d+s")]
    DefSentThenSbert,
    #[serde(rename = "multi")]
    Multi,
    #[serde(rename = "average")]
    Average,
    #[serde(rename = "concat")]
    Concat,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::None,
        Method::Sbert,
        Method::DefSent,
        Method::SbertThenDefSent,
        Method::DefSentThenSbert,
        Method::Multi,
        Method::Average,
        Method::Concat,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Sbert => "sbert",
            Method::DefSent => "defsent",
            Method::SbertThenDefSent => "s+d",
            Method::DefSentThenSbert => "d+s",
            Method::Multi => "multi",
            Method::Average => "average",
            Method::Concat => "concat",
        }
    }

    /// Stages for single-model methods; `None` for post-hoc combinations.
    pub fn stages(self) -> Option<Vec<Stage>> {
        match self {
            Method::None => Some(Vec::new()),
            Method::Sbert => Some(vec![Stage::Sbert]),
            Method::DefSent => Some(vec![Stage::DefSent]),
            Method::SbertThenDefSent => Some(vec![Stage::Sbert, Stage::DefSent]),
            Method::DefSentThenSbert => Some(vec![Stage::DefSent, Stage::Sbert]),
            Method::Multi => Some(vec![Stage::Multi]),
            Method::Average | Method::Concat => None,
        }
    }

    pub fn combine_mode(self) -> Option<CombineMode> {
        match self {
            Method::Average => Some(CombineMode::Average),
            Method::Concat => Some(CombineMode::Concat),
            _ => None,
        }
    }

    pub fn needs_nli(self) -> bool {
        !matches!(self, Method::None | Method::DefSent)
    }

    pub fn needs_definitions(self) -> bool {
        !matches!(self, Method::None | Method::Sbert)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.keyword() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                let known: Vec<&str> = Method::ALL.iter().map(|m| m.keyword()).collect();
                Error::invalid(format!("unknown method {s:?}; expected one of {}", known.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Sbert,
    DefSent,
    Multi,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Sbert => "sbert",
            Stage::DefSent => "defsent",
            Stage::Multi => "multi",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineStage {
    pub stage: Stage,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub stages: Vec<PipelineStage>,
    #[serde(default)]
    pub schedule: MultiSchedule,
}

impl PipelineSpec {
    /// Every stage runs with `config`.
    pub fn uniform(stages: &[Stage], config: &TrainConfig, schedule: MultiSchedule) -> Self {
        PipelineSpec {
            stages: stages
                .iter()
                .map(|&stage| PipelineStage {
                    stage,
                    config: config.clone(),
                })
                .collect(),
            schedule,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("pipeline needs at least one stage".into()));
        }
        if self.stages.len() > 1 && self.stages.iter().any(|s| s.stage == Stage::Multi) {
            return Err(Error::Config("a multi stage must be the only stage".into()));
        }
        Ok(())
    }
}

/// Training data available to a pipeline.
#[derive(Debug, Clone, Copy, Default)]
pub struct Datasets<'a> {
    pub nli: Option<&'a [NliExample]>,
    pub definitions: Option<&'a [DefinitionExample]>,
}

impl<'a> Datasets<'a> {
    fn nli(&self, stage: Stage) -> Result<&'a [NliExample]> {
        self.nli
            .filter(|d| !d.is_empty())
            .ok_or_else(|| Error::Config(format!("stage {stage} needs NLI data")))
    }

    fn definitions(&self, stage: Stage) -> Result<&'a [DefinitionExample]> {
        self.definitions
            .filter(|d| !d.is_empty())
            .ok_or_else(|| Error::Config(format!("stage {stage} needs definition data")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub steps: usize,
    /// Run-length objective pattern, e.g. `19×nli 1×def 19×nli 1×def`.
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub encoder: ToyEncoder,
    pub nli_head: Option<NliHead>,
    pub def_head: Option<WordPredictionHead>,
    pub stages: Vec<StageRecord>,
    pub logs: Vec<TrainLog>,
}

/// Apply the stages in order to one copy of `base`. Heads persist across
/// stages, so a second NLI stage continues the first one's classifier.
pub fn run_pipeline(spec: &PipelineSpec, base: &ToyEncoder, data: &Datasets<'_>) -> Result<TrainedModel> {
    spec.validate()?;
    let mut encoder = base.clone();
    let mut nli_head: Option<NliHead> = None;
    let mut def_head: Option<WordPredictionHead> = None;
    let mut stages = Vec::new();
    let mut logs = Vec::new();
    for PipelineStage { stage, config } in &spec.stages {
        let log = match stage {
            Stage::Sbert => {
                let head = nli_head.get_or_insert_with(|| {
                    NliHead::init(encoder.dim(), &mut crate::numstat::Rng::new(config.seed).fork(1))
                });
                train_sbert_with_head(&mut encoder, head, data.nli(*stage)?, config)?
            }
            Stage::DefSent => {
                let head = def_head.get_or_insert_with(|| WordPredictionHead::tied(encoder.vocab.len()));
                train_defsent_with_head(&mut encoder, head, data.definitions(*stage)?, config)?
            }
            Stage::Multi => {
                let (nh, dh, log) = train_multi(
                    &mut encoder,
                    data.nli(*stage)?,
                    data.definitions(*stage)?,
                    config,
                    spec.schedule,
                )?;
                nli_head = Some(nh);
                def_head = Some(dh);
                log
            }
        };
        stages.push(StageRecord {
            stage: *stage,
            steps: log.steps.len(),
            pattern: log.pattern_summary(),
        });
        logs.push(log);
    }
    Ok(TrainedModel {
        encoder,
        nli_head,
        def_head,
        stages,
        logs,
    })
}
