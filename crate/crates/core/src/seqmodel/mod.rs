//! Sequence-to-sequence LSTM models over word trajectories.
//!
//! A two-layer encoder reads the first `i` steps of each trajectory. Its final
//! hidden state is repeated as the input of every decoder step; each decoder is
//! a two-layer LSTM followed by a linear head shared across steps.

mod checkpoint;
mod config;
mod lstm;
mod model;
mod network;
mod search;
mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::embedstore::EmbedError;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedTensor};
pub use config::{DecoderKind, LayerUnits, ModelConfig, Variant};
pub use lstm::{lstm_backward, lstm_forward, LstmGrads, LstmInput, LstmTrace, LstmWeights};
pub use model::{change_scores, loss, ChangeScores, PredictionSet, SeqModel, Segment};
pub use network::TensorSpec;
pub use search::{search, SearchOutcome, SearchSpace, TrialRecord};
pub use train::{train, train_with_log, EpochRecord, TrainingRun};

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("split has no training words")]
    NoTrainingWords,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
