//! Versioned JSON checkpoint container.
//!
//! A checkpoint holds the vocabulary, embedding table, trained heads and the
//! configuration of one training run. Runs of the `average` / `concat`
//! methods store both component models. Floats are written in shortest
//! round-trip form, so save → load is value exact and two identical runs
//! produce byte-identical files.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::combiner::{CombineMode, CombinedProvider, Method, StageRecord, TrainedModel};
use crate::encoder::{EmbeddingProvider, ToyEncoder};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::objectives::{MultiSchedule, NliHead, TrainConfig, WordPredictionHead};

pub const CHECKPOINT_FORMAT: &str = "sentcompare-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub encoder: ToyEncoder,
    pub nli_head: Option<NliHead>,
    pub def_head: Option<WordPredictionHead>,
    pub stages: Vec<StageRecord>,
}

impl From<TrainedModel> for ModelState {
    fn from(m: TrainedModel) -> Self {
        ModelState {
            encoder: m.encoder,
            nli_head: m.nli_head,
            def_head: m.def_head,
            stages: m.stages,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CheckpointBody {
    Single {
        model: ModelState,
    },
    Combined {
        mode: CombineMode,
        a: ModelState,
        b: ModelState,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub method: Method,
    pub seed: u64,
    pub train: TrainConfig,
    pub schedule: MultiSchedule,
    pub body: CheckpointBody,
}

impl Checkpoint {
    pub fn new(method: Method, seed: u64, train: TrainConfig, schedule: MultiSchedule, body: CheckpointBody) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            method,
            seed,
            train,
            schedule,
            body,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::invalid(format!("not a checkpoint (format {:?})", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        for m in ck.models() {
            if m.encoder.table.rows() != m.encoder.vocab.len() {
                return Err(Error::invalid("checkpoint table does not match its vocabulary"));
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn models(&self) -> Vec<&ModelState> {
        match &self.body {
            CheckpointBody::Single { model } => vec![model],
            CheckpointBody::Combined { a, b, .. } => vec![a, b],
        }
    }

    /// Embedding provider for the stored model(s).
    pub fn provider(&self) -> Result<Arc<dyn EmbeddingProvider>> {
        Ok(match &self.body {
            CheckpointBody::Single { model } => Arc::new(model.encoder.clone()),
            CheckpointBody::Combined { mode, a, b } => Arc::new(CombinedProvider::new(
                *mode,
                Arc::new(a.encoder.clone()),
                Arc::new(b.encoder.clone()),
            )?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{Pooling, Vocabulary};
    use crate::numstat::Rng;

    fn model(seed: u64) -> ModelState {
        let vocab = Vocabulary::build(&["a b c"], 1).unwrap();
        ModelState {
            encoder: ToyEncoder::new(vocab, 3, Pooling::Max, &mut Rng::new(seed)).unwrap(),
            nli_head: Some(NliHead::init(3, &mut Rng::new(seed))),
            def_head: None,
            stages: Vec::new(),
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ck = Checkpoint::new(
            Method::Sbert,
            4,
            TrainConfig::default(),
            MultiSchedule::default(),
            CheckpointBody::Single { model: model(4) },
        );
        let text = ck.to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn combined_provider_dim() {
        let ck = Checkpoint::new(
            Method::Concat,
            0,
            TrainConfig::default(),
            MultiSchedule::default(),
            CheckpointBody::Combined {
                mode: CombineMode::Concat,
                a: model(1),
                b: model(2),
            },
        );
        assert_eq!(ck.provider().unwrap().dim(), 6);
    }

    #[test]
    fn rejects_foreign_or_future_files() {
        let ck = Checkpoint::new(
            Method::None,
            0,
            TrainConfig::default(),
            MultiSchedule::default(),
            CheckpointBody::Single { model: model(0) },
        );
        let text = ck.to_json().unwrap();
        assert!(Checkpoint::from_json(&text.replace("\"version\":1", "\"version\":2")).is_err());
        assert!(Checkpoint::from_json(&text.replace(CHECKPOINT_FORMAT, "other")).is_err());
        assert!(Checkpoint::from_json("{}").is_err());
    }
}
