use crate::embedstore::TemporalEmbeddings;
use crate::numerics::{cosine, SeedRng};

use super::config::{DecoderKind, ModelConfig};
use super::network::{backward, forward, mse_loss, DropoutMasks, ForwardPass, NetLayout, TensorSpec};
use super::SeqError;

/// Words per forward pass at inference time.
const INFERENCE_CHUNK: usize = 256;

/// A configured network and its flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqModel {
    config: ModelConfig,
    layout: NetLayout,
    params: Vec<f64>,
}

impl SeqModel {
    /// Freshly initialized model, seeded from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self, SeqError> {
        config.validate()?;
        let layout = NetLayout::new(&config);
        let mut rng = SeedRng::new(config.seed).split(0);
        let params = layout.initialize(&mut rng);
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub fn from_params(config: ModelConfig, params: Vec<f64>) -> Result<Self, SeqError> {
        config.validate()?;
        let layout = NetLayout::new(&config);
        if params.len() != layout.total {
            return Err(SeqError::Shape(format!(
                "config needs {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(SeqError::Shape("parameters must be finite".into()));
        }
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    /// Same architecture with different weights.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self, SeqError> {
        Self::from_params(self.config.clone(), params)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut Vec<f64> {
        &mut self.params
    }

    pub(crate) fn layout(&self) -> &NetLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Named weight tensors in storage order.
    pub fn tensors(&self) -> Vec<TensorSpec> {
        self.layout.tensors()
    }

    /// Runs the network on `batch` trajectories of `i` steps each, given
    /// word-major as `batch × i × d`. Returns one word-major
    /// `batch × steps × d` block per decoder.
    pub fn forward(&self, trajectories: &[f64], batch: usize) -> Result<Vec<Vec<f64>>, SeqError> {
        let i = self.config.split_index;
        let d = self.config.dim;
        if trajectories.len() != batch * i * d {
            return Err(SeqError::Shape(format!(
                "expected {batch} trajectories of {i} steps × {d}, got {} values",
                trajectories.len()
            )));
        }
        let input = to_time_major(trajectories, batch, i, d);
        let pass = forward(&self.layout, &self.params, input, batch, None)?;
        Ok(pass
            .decoders
            .iter()
            .zip(&self.layout.decoders)
            .map(|(p, slots)| to_word_major(&p.output, batch, slots.steps(), d))
            .collect())
    }

    fn check_dataset(&self, emb: &TemporalEmbeddings) -> Result<(), SeqError> {
        if emb.num_timesteps() != self.config.timesteps || emb.dim() != self.config.dim {
            return Err(SeqError::Shape(format!(
                "model expects {} timesteps of dimension {}, dataset has {} of dimension {}",
                self.config.timesteps,
                self.config.dim,
                emb.num_timesteps(),
                emb.dim()
            )));
        }
        Ok(())
    }

    /// Predicted and actual trajectories of `words`, in inference mode.
    pub fn predict(&self, emb: &TemporalEmbeddings, words: &[usize]) -> Result<PredictionSet, SeqError> {
        self.check_dataset(emb)?;
        let d = self.config.dim;
        let mut segments: Vec<Segment> = self
            .layout
            .decoders
            .iter()
            .map(|s| Segment {
                kind: s.kind,
                start: s.start,
                end: s.end,
                predicted: Vec::with_capacity(words.len() * s.steps() * d),
                actual: emb.gather(words, s.start, s.end),
            })
            .collect();
        for chunk in words.chunks(INFERENCE_CHUNK) {
            let input = gather_time_major(emb, chunk, 0, self.config.split_index);
            let pass = forward(&self.layout, &self.params, input, chunk.len(), None)?;
            for (seg, p) in segments.iter_mut().zip(&pass.decoders) {
                let steps = seg.end - seg.start;
                seg.predicted
                    .extend(to_word_major(&p.output, chunk.len(), steps, d));
            }
        }
        Ok(PredictionSet {
            words: words.to_vec(),
            dim: d,
            segments,
        })
    }

    /// Loss and its gradient for one batch, with dropout off.
    pub fn loss_and_gradient(
        &self,
        emb: &TemporalEmbeddings,
        words: &[usize],
    ) -> Result<(f64, Vec<f64>), SeqError> {
        self.check_dataset(emb)?;
        let mut grads = vec![0.0; self.params.len()];
        let loss = self.accumulate_gradient(emb, words, None, &mut grads)?;
        Ok((loss, grads))
    }

    /// Adds the batch gradient into `grads` and returns the batch loss.
    pub(crate) fn accumulate_gradient(
        &self,
        emb: &TemporalEmbeddings,
        words: &[usize],
        masks: Option<&DropoutMasks>,
        grads: &mut [f64],
    ) -> Result<f64, SeqError> {
        let (pass, targets) = self.forward_batch(emb, words, masks)?;
        let (loss, d_out) = mse_loss(&self.layout, &pass, &targets);
        backward(&self.layout, &self.params, &pass, d_out, masks, grads);
        Ok(loss)
    }

    fn forward_batch(
        &self,
        emb: &TemporalEmbeddings,
        words: &[usize],
        masks: Option<&DropoutMasks>,
    ) -> Result<(ForwardPass, Vec<Vec<f64>>), SeqError> {
        let input = gather_time_major(emb, words, 0, self.config.split_index);
        let pass = forward(&self.layout, &self.params, input, words.len(), masks)?;
        let targets = self
            .layout
            .decoders
            .iter()
            .map(|s| gather_time_major(emb, words, s.start, s.end))
            .collect();
        Ok((pass, targets))
    }
}

fn gather_time_major(emb: &TemporalEmbeddings, words: &[usize], from: usize, to: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(words.len() * (to - from) * emb.dim());
    for t in from..to {
        for &w in words {
            out.extend_from_slice(emb.vector(w, t));
        }
    }
    out
}

fn to_time_major(buf: &[f64], batch: usize, steps: usize, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; buf.len()];
    for b in 0..batch {
        for t in 0..steps {
            let src = (b * steps + t) * dim;
            let dst = (t * batch + b) * dim;
            out[dst..dst + dim].copy_from_slice(&buf[src..src + dim]);
        }
    }
    out
}

fn to_word_major(buf: &[f64], batch: usize, steps: usize, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; buf.len()];
    for t in 0..steps {
        for b in 0..batch {
            let src = (t * batch + b) * dim;
            let dst = (b * steps + t) * dim;
            out[dst..dst + dim].copy_from_slice(&buf[src..src + dim]);
        }
    }
    out
}

/// One decoder's output over timesteps `[start, end)`, word-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub kind: DecoderKind,
    pub start: usize,
    pub end: usize,
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
}

impl Segment {
    pub fn steps(&self) -> usize {
        self.end - self.start
    }

    /// Mean over steps of the squared error averaged over words and dimensions.
    pub fn loss(&self) -> f64 {
        let n = self.predicted.len();
        if n == 0 {
            return 0.0;
        }
        let sq: f64 = self
            .predicted
            .iter()
            .zip(&self.actual)
            .map(|(p, a)| (p - a) * (p - a))
            .sum();
        sq / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub words: Vec<usize>,
    pub dim: usize,
    pub segments: Vec<Segment>,
}

impl PredictionSet {
    /// Sorted timesteps covered by any segment.
    pub fn covered_steps(&self) -> Vec<usize> {
        let mut steps: Vec<usize> = self.segments.iter().flat_map(|s| s.start..s.end).collect();
        steps.sort_unstable();
        steps.dedup();
        steps
    }

    /// `(timestep, predicted, actual)` for the word at position `pos`.
    pub fn word_steps(&self, pos: usize) -> impl Iterator<Item = (usize, &[f64], &[f64])> + '_ {
        let d = self.dim;
        self.segments.iter().flat_map(move |s| {
            let n = s.steps();
            (0..n).map(move |k| {
                let at = (pos * n + k) * d;
                (s.start + k, &s.predicted[at..at + d], &s.actual[at..at + d])
            })
        })
    }
}

/// Sum over decoders of the per-decoder mean squared error.
pub fn loss(pred: &PredictionSet) -> f64 {
    pred.segments.iter().map(Segment::loss).sum()
}

/// Mean predicted-vs-actual cosine per word; higher means less change.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeScores {
    pub words: Vec<usize>,
    pub scores: Vec<f64>,
    /// `(word, timestep)` pairs whose prediction had zero norm and scored 0.
    pub zero_norm: Vec<(usize, usize)>,
}

impl ChangeScores {
    pub fn from_predictions(pred: &PredictionSet) -> Self {
        let mut scores = Vec::with_capacity(pred.words.len());
        let mut zero_norm = Vec::new();
        for (pos, &w) in pred.words.iter().enumerate() {
            let mut sum = 0.0;
            let mut n = 0usize;
            for (t, p, a) in pred.word_steps(pos) {
                match cosine(p, a) {
                    Some(c) => sum += c,
                    None => zero_norm.push((w, t)),
                }
                n += 1;
            }
            scores.push(if n == 0 { 0.0 } else { sum / n as f64 });
        }
        Self {
            words: pred.words.clone(),
            scores,
            zero_norm,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.scores.is_empty() {
            return 0.0;
        }
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }
}

pub fn change_scores(
    model: &SeqModel,
    emb: &TemporalEmbeddings,
    words: &[usize],
) -> Result<ChangeScores, SeqError> {
    Ok(ChangeScores::from_predictions(&model.predict(emb, words)?))
}
