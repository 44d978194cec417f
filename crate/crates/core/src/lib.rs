//! Train a toy sentence encoder with two supervision signals (NLI
//! classification and definition-to-word prediction), combine the results,
//! and evaluate sentence embeddings with unsupervised STS scoring and a
//! frozen-feature probing harness.

pub mod checkpoint;
pub mod cli;
pub mod combiner;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evalsuite;
pub(crate) mod fsutil;
pub mod numstat;
pub mod objectives;
pub mod synth;

pub use error::{Error, Result};
