use serde::{Deserialize, Serialize};

use crate::embedstore::{SplitSpec, TemporalEmbeddings};
use crate::numerics::SeedRng;

use super::config::{LayerUnits, ModelConfig};
use super::model::SeqModel;
use super::train::{train_with_log, TrainingRun};
use super::SeqError;

/// Value grids sampled by [`search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub encoder_first: Vec<usize>,
    pub encoder_second: Vec<usize>,
    pub decoder_first: Vec<usize>,
    pub decoder_second: Vec<usize>,
    pub dropout: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub epochs: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            encoder_first: vec![32, 64, 128, 256, 512],
            encoder_second: vec![32, 64],
            decoder_first: vec![32, 64],
            decoder_second: vec![32, 64, 128, 256, 512],
            dropout: vec![0.1, 0.25, 0.5],
            batch_size: vec![32, 64, 128, 256, 512, 1024],
            epochs: vec![10, 20, 30, 40, 50],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), SeqError> {
        let empty = [
            ("encoder_first", self.encoder_first.is_empty()),
            ("encoder_second", self.encoder_second.is_empty()),
            ("decoder_first", self.decoder_first.is_empty()),
            ("decoder_second", self.decoder_second.is_empty()),
            ("dropout", self.dropout.is_empty()),
            ("batch_size", self.batch_size.is_empty()),
            ("epochs", self.epochs.is_empty()),
        ];
        match empty.iter().find(|(_, e)| *e) {
            Some((name, _)) => Err(SeqError::Config(format!("search grid {name} is empty"))),
            None => Ok(()),
        }
    }

    /// Draws one config; every field is sampled independently and uniformly.
    pub fn sample(&self, base: &ModelConfig, rng: &mut SeedRng) -> ModelConfig {
        let mut pick = |grid: &[usize]| grid[rng.index(grid.len())];
        let encoder = LayerUnits::new(pick(&self.encoder_first), pick(&self.encoder_second));
        let decoders = (0..base.variant.decoder_count())
            .map(|_| LayerUnits::new(pick(&self.decoder_first), pick(&self.decoder_second)))
            .collect();
        let batch_size = pick(&self.batch_size);
        let epochs = pick(&self.epochs);
        let dropout = self.dropout[rng.index(self.dropout.len())];
        ModelConfig {
            encoder,
            decoders,
            dropout,
            batch_size,
            epochs,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: ModelConfig,
    pub run: TrainingRun,
}

impl TrialRecord {
    /// Best validation cosine, or minus the last training loss without validation words.
    pub fn score(&self) -> f64 {
        match self.run.best_validation_cosine {
            Some(v) => v,
            None => -self.run.epochs.last().map_or(f64::INFINITY, |e| e.train_loss),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: ModelConfig,
    pub best_trial: usize,
    pub trials: Vec<TrialRecord>,
}

/// Random search: `trials` configs drawn from `space`, each trained with its
/// own seed; the config with the highest validation cosine wins, earliest on ties.
///
/// `base` supplies the variant, split index, shape, and learning rate.
/// The winning trial's trained model is returned alongside the outcome.
pub fn search<F: FnMut(&TrialRecord)>(
    emb: &TemporalEmbeddings,
    split: &SplitSpec,
    base: &ModelConfig,
    space: &SearchSpace,
    trials: usize,
    seed: u64,
    mut on_trial: F,
) -> Result<(SeqModel, SearchOutcome), SeqError> {
    space.validate()?;
    base.validate()?;
    if trials == 0 {
        return Err(SeqError::Config("search needs at least one trial".into()));
    }
    let root = SeedRng::new(seed);
    let mut sampler = root.split(0);
    let mut records: Vec<TrialRecord> = Vec::with_capacity(trials);
    let mut best: Option<(usize, SeqModel)> = None;
    for trial in 0..trials {
        let mut config = space.sample(base, &mut sampler);
        config.seed = root.split(1 + trial as u64).next_u64();
        let (model, run) = train_with_log(emb, split, &config, |_| {})?;
        let record = TrialRecord { trial, config, run };
        on_trial(&record);
        let better = match &best {
            None => true,
            Some((k, _)) => record.score() > records[*k].score(),
        };
        if better {
            best = Some((trial, model));
        }
        records.push(record);
    }
    let (best_trial, model) = best.expect("at least one trial");
    Ok((
        model,
        SearchOutcome {
            best: records[best_trial].config.clone(),
            best_trial,
            trials: records,
        },
    ))
}
