use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

/// Every experiment setting. Each field is also a command-line flag of the
/// same name; flags override values read from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed for splits, injection, training and random baselines.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Dataset manifest (TOML listing one embedding file per timestep).
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Previously written split.json; overrides the fractions below.
    #[arg(long, global = true)]
    pub split_file: Option<PathBuf>,
    /// Fraction of non-holdout words used for training plus validation.
    #[arg(long, global = true)]
    pub train_frac: Option<f64>,
    /// Fraction of the training portion held out for validation.
    #[arg(long, global = true)]
    pub val_frac: Option<f64>,
    /// File of words (one per line) forced into the test set.
    #[arg(long, global = true)]
    pub holdout: Option<PathBuf>,

    /// Gold changed words: a word list, or a gold TSV written by `inject`.
    #[arg(long, global = true)]
    pub gold: Option<PathBuf>,
    /// Similarity threshold c of injected target words.
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Duration regime of injected change: full, half, ot, quarter.
    #[arg(long, global = true)]
    pub regime: Option<String>,
    /// Fraction of test words receiving injected change.
    #[arg(long, global = true)]
    pub change_fraction: Option<f64>,

    /// Sequence model variant: reconstruct, future, joint.
    #[arg(long, global = true)]
    pub variant: Option<String>,
    /// Number of input timesteps of the sequence model.
    #[arg(long, global = true)]
    pub split_index: Option<usize>,
    #[arg(long, global = true)]
    pub encoder_units: Option<String>,
    /// Decoder widths `first/second`; joint models take two, comma separated.
    #[arg(long, global = true)]
    pub decoder_units: Option<String>,
    #[arg(long, global = true)]
    pub dropout: Option<f64>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    /// Random-search budget; when set, unit and training flags are ignored.
    #[arg(long, global = true)]
    pub search_trials: Option<usize>,
    /// Checkpoint to score with.
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,

    /// Comma-separated methods, e.g. `seq2seq_rf,procr,procr_k:0.9,rand:1000`.
    #[arg(long, global = true)]
    pub methods: Option<String>,
    /// Values of i: `7`, `3,7,11`, or a range `1-13`.
    #[arg(long, global = true)]
    pub i_values: Option<String>,
    /// Rec@k cut-offs in percent, comma separated.
    #[arg(long, global = true)]
    pub ks: Option<String>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// `self` with every field set in `top` replaced.
    pub fn overlay(mut self, top: &ExperimentConfig) -> Self {
        overlay!(self, top;
            seed, out, dataset, split_file, train_frac, val_frac, holdout, gold, c, regime,
            change_fraction, variant, split_index, encoder_units, decoder_units, dropout,
            batch_size, epochs, learning_rate, search_trials, checkpoint, methods, i_values, ks,
        );
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().context("--out is required")
    }

    pub fn dataset(&self) -> Result<&Path> {
        self.dataset.as_deref().context("--dataset is required")
    }

    pub fn i_list(&self) -> Result<Option<Vec<usize>>> {
        self.i_values.as_deref().map(parse_index_list).transpose()
    }

    pub fn k_list(&self) -> Result<Vec<f64>> {
        match &self.ks {
            None => Ok(semshift::evalrank::DEFAULT_KS.to_vec()),
            Some(s) => s
                .split(',')
                .map(|k| k.trim().parse::<f64>().with_context(|| format!("bad k {k:?}")))
                .collect(),
        }
    }
}

/// Parses `3`, `3,7,11`, `1-13`, or mixtures like `1-3,7`.
pub fn parse_index_list(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().with_context(|| format!("bad range {part:?}"))?;
                let b: usize = b.trim().parse().with_context(|| format!("bad range {part:?}"))?;
                if a > b {
                    bail!("empty range {part:?}");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().with_context(|| format!("bad index {part:?}"))?),
        }
    }
    if out.is_empty() {
        bail!("no i values in {s:?}");
    }
    Ok(out)
}

/// Parses `first/second`.
pub fn parse_units(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once('/')
        .with_context(|| format!("layer widths must look like 64/32, got {s:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}
