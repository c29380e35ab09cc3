use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::embedstore::{SplitSpec, TemporalEmbeddings};
use crate::numerics::{adam_step, AdamState, SeedRng};

use super::config::ModelConfig;
use super::model::{change_scores, SeqModel};
use super::network::DropoutMasks;
use super::SeqError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch, weighted by batch size.
    pub train_loss: f64,
    /// Mean change score over validation words; `None` without validation words.
    pub validation_cosine: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_validation_cosine: Option<f64>,
    pub seed: u64,
}

impl TrainingRun {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    pub fn validation_curve(&self) -> Vec<Option<f64>> {
        self.epochs.iter().map(|e| e.validation_cosine).collect()
    }
}

/// Trains a fresh model and returns the best-validation snapshot.
pub fn train(
    emb: &TemporalEmbeddings,
    split: &SplitSpec,
    config: &ModelConfig,
) -> Result<(SeqModel, TrainingRun), SeqError> {
    train_with_log(emb, split, config, |_| {})
}

/// Like [`train`], calling `log` after every epoch.
///
/// Without validation words the last epoch is kept.
pub fn train_with_log<F: FnMut(&EpochRecord)>(
    emb: &TemporalEmbeddings,
    split: &SplitSpec,
    config: &ModelConfig,
    mut log: F,
) -> Result<(SeqModel, TrainingRun), SeqError> {
    if split.train.is_empty() {
        return Err(SeqError::NoTrainingWords);
    }
    let mut model = SeqModel::new(config.clone())?;
    let root = SeedRng::new(config.seed);
    let mut order_rng = root.split(1);
    let mut dropout_rng = root.split(2);
    let mut adam = AdamState::new(model.num_params(), config.learning_rate);
    let mut grads = vec![0.0; model.num_params()];
    let mut order = split.train.clone();

    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, Option<f64>, Vec<f64>)> = None;
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order_rng.shuffle(&mut order);
        let mut weighted = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let masks = (config.dropout > 0.0).then(|| {
                DropoutMasks::sample(model.layout(), batch.len(), config.dropout, &mut dropout_rng)
            });
            grads.fill(0.0);
            let loss = model.accumulate_gradient(emb, batch, masks.as_ref(), &mut grads)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(SeqError::NonFinite {
                    epoch,
                    batch: b + 1,
                });
            }
            adam_step(&mut adam, model.params_mut(), &grads)
                .map_err(|e| SeqError::Shape(e.to_string()))?;
            weighted += loss * batch.len() as f64;
        }
        let validation_cosine = if split.validation.is_empty() {
            None
        } else {
            Some(change_scores(&model, emb, &split.validation)?.mean())
        };
        let record = EpochRecord {
            epoch,
            train_loss: weighted / order.len() as f64,
            validation_cosine,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        log(&record);
        let improved = match (&best, validation_cosine) {
            (None, _) => true,
            (Some(_), None) => true,
            (Some((_, Some(prev), _)), Some(v)) => v > *prev,
            (Some((_, None, _)), Some(_)) => true,
        };
        if improved {
            best = Some((epoch, validation_cosine, model.params().to_vec()));
        }
        epochs.push(record);
    }
    let (best_epoch, best_validation_cosine, params) = best.expect("at least one epoch");
    let model = model.with_params(params)?;
    Ok((
        model,
        TrainingRun {
            epochs,
            best_epoch,
            best_validation_cosine,
            seed: config.seed,
        },
    ))
}
