use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SeqError;

/// Which decoders the model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Reconstructs the `i` input steps.
    Reconstruct,
    /// Predicts steps `i..T` from the first `i`.
    Future,
    /// Both decoders on a shared encoder; loss is the sum of the two.
    Joint,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Reconstruct, Variant::Future, Variant::Joint];

    pub fn decoder_count(self) -> usize {
        match self {
            Variant::Joint => 2,
            _ => 1,
        }
    }

    /// Output ranges `[start, end)` of each decoder, in decoder order.
    pub fn spans(self, split_index: usize, timesteps: usize) -> Vec<(DecoderKind, usize, usize)> {
        match self {
            Variant::Reconstruct => vec![(DecoderKind::Reconstruct, 0, split_index)],
            Variant::Future => vec![(DecoderKind::Future, split_index, timesteps)],
            Variant::Joint => vec![
                (DecoderKind::Reconstruct, 0, split_index),
                (DecoderKind::Future, split_index, timesteps),
            ],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Reconstruct => "seq2seq_r",
            Variant::Future => "seq2seq_f",
            Variant::Joint => "seq2seq_rf",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = SeqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "reconstruct" | "r" | "seq2seq_r" => Ok(Variant::Reconstruct),
            "future" | "f" | "seq2seq_f" => Ok(Variant::Future),
            "joint" | "rf" | "seq2seq_rf" => Ok(Variant::Joint),
            other => Err(SeqError::Config(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Reconstruct,
    Future,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Reconstruct => "reconstruct",
            DecoderKind::Future => "future",
        }
    }
}

/// Widths of a two-layer LSTM stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerUnits {
    pub first: usize,
    pub second: usize,
}

impl LayerUnits {
    pub fn new(first: usize, second: usize) -> Self {
        Self { first, second }
    }
}

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Number of input timesteps fed to the encoder.
    pub split_index: usize,
    /// Length of the full sequence the model is defined over.
    pub timesteps: usize,
    /// Embedding dimension.
    pub dim: usize,
    /// The second encoder layer's width is the bottleneck width.
    pub encoder: LayerUnits,
    /// One entry per decoder, reconstruction first.
    pub decoders: Vec<LayerUnits>,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// A config with the smallest grid widths, for quick runs.
    pub fn small(variant: Variant, split_index: usize, timesteps: usize, dim: usize) -> Self {
        Self {
            variant,
            split_index,
            timesteps,
            dim,
            encoder: LayerUnits::new(32, 32),
            decoders: vec![LayerUnits::new(32, 32); variant.decoder_count()],
            dropout: 0.1,
            batch_size: 32,
            epochs: 10,
            learning_rate: crate::numerics::DEFAULT_LEARNING_RATE,
            seed: 0,
        }
    }

    /// Width-2 layers and no dropout: the instance gradients are checked on.
    pub fn gradient_check(variant: Variant, split_index: usize, timesteps: usize, dim: usize) -> Self {
        Self {
            encoder: LayerUnits::new(2, 2),
            decoders: vec![LayerUnits::new(2, 2); variant.decoder_count()],
            dropout: 0.0,
            seed: 3,
            ..Self::small(variant, split_index, timesteps, dim)
        }
    }

    pub fn validate(&self) -> Result<(), SeqError> {
        let t = self.timesteps;
        let i = self.split_index;
        let ok_split = match self.variant {
            Variant::Reconstruct => i >= 1 && i <= t,
            Variant::Future | Variant::Joint => i >= 1 && i < t,
        };
        if !ok_split {
            return Err(SeqError::Config(format!(
                "split index {i} invalid for {} over {t} timesteps",
                self.variant
            )));
        }
        if self.dim == 0 {
            return Err(SeqError::Config("dimension must be positive".into()));
        }
        if self.decoders.len() != self.variant.decoder_count() {
            return Err(SeqError::Config(format!(
                "{} needs {} decoder(s), config has {}",
                self.variant,
                self.variant.decoder_count(),
                self.decoders.len()
            )));
        }
        let widths = std::iter::once(&self.encoder).chain(&self.decoders);
        if widths.flat_map(|u| [u.first, u.second]).any(|w| w == 0) {
            return Err(SeqError::Config("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(SeqError::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(SeqError::Config("batch size and epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SeqError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn spans(&self) -> Vec<(DecoderKind, usize, usize)> {
        self.variant.spans(self.split_index, self.timesteps)
    }

    /// Timesteps the predictions cover.
    pub fn output_steps(&self) -> usize {
        self.spans().iter().map(|(_, s, e)| e - s).sum()
    }
}
