//! Experiment configuration file.
//!
//! The file is TOML. Top-level keys select the method and model shape,
//! `[data]` names input files, and `[train]`, `[probing]`, `[schedule]` and
//! `[partition]` hold the corresponding settings. Every key is optional;
//! relative paths are resolved against the config file's directory.
//! Command-line flags override file values.
//!
//! ```toml
//! method = "s+d"
//! seeds = [0, 1, 2]
//! dim = 32
//! pooling = "mean"
//! out = "runs/sd"
//!
//! [data]
//! nli = "nli.tsv"
//! definitions = "defs.tsv"
//! sts = "sts.tsv"
//! probe = ["tasks/length.tsv"]
//!
//! [train]
//! epochs = 3
//! lr = 0.01
//!
//! [schedule]
//! nli_steps_per_cycle = 19
//! def_steps_per_cycle = 1
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::combiner::Method;
use crate::encoder::Pooling;
use crate::error::{Error, Result};
use crate::evalsuite::ProbeConfig;
use crate::objectives::{MultiSchedule, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Source,
    Dice,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(Scheme::Source),
            "dice" => Ok(Scheme::Dice),
            other => Err(Error::Config(format!("unknown partition scheme {other:?}"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Source => "source",
            Scheme::Dice => "dice",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub scheme: Scheme,
    pub k: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            scheme: Scheme::Source,
            k: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub nli: Option<PathBuf>,
    pub definitions: Option<PathBuf>,
    pub sts: Option<PathBuf>,
    pub partition_dir: Option<PathBuf>,
    pub probe: Vec<PathBuf>,
    pub sentences: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub dim: usize,
    pub pooling: Pooling,
    pub min_count: usize,
    /// Checkpoints or embedding dumps to evaluate / embed with.
    pub providers: Vec<PathBuf>,
    pub data: DataPaths,
    pub train: TrainConfig,
    pub probing: ProbeConfig,
    pub schedule: MultiSchedule,
    pub partition: PartitionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::None,
            seeds: vec![0],
            out: None,
            dim: 32,
            pooling: Pooling::Mean,
            min_count: 1,
            providers: Vec::new(),
            data: DataPaths::default(),
            train: TrainConfig::default(),
            probing: ProbeConfig::default(),
            schedule: MultiSchedule::default(),
            partition: PartitionConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse a config file and resolve its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let d = &mut self.data;
        for p in [&mut d.nli, &mut d.definitions, &mut d.sts, &mut d.partition_dir, &mut d.sentences, &mut self.out]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        d.probe.iter_mut().for_each(fix);
        self.providers.iter_mut().for_each(fix);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Check invariants that do not depend on the command.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be >= 1".into()));
        }
        if self.min_count == 0 {
            return Err(Error::Config("min_count must be >= 1".into()));
        }
        self.train.validate()?;
        self.probing.validate()?;
        let d = &self.data;
        let paths = [&d.nli, &d.definitions, &d.sts, &d.partition_dir, &d.sentences]
            .into_iter()
            .flatten()
            .chain(d.probe.iter())
            .chain(self.providers.iter());
        for p in paths {
            if !p.exists() {
                return Err(Error::Config(format!("input {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("no output location given (--out)".into()))
    }
}
