//! Temporal word-embedding datasets: one `|V|×d` matrix per timestep over a
//! shared vocabulary.
//!
//! [`TemporalEmbeddings`] is immutable. Views produced by [`TemporalEmbeddings::subsequence`]
//! and [`TemporalEmbeddings::select_timesteps`] share the parent's vector storage.

mod io;
mod split;

pub use io::{
    export, ingest, read_embedding_file, write_embedding_file, IngestReport, Manifest,
    ManifestEntry,
};
pub use split::{split, SplitSpec};

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::numerics::Matrix;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: vector has dimension {found}, dataset dimension is {expected}")]
    Dimension {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("no word occurs in every timestep")]
    EmptyIntersection,
    #[error("words not in vocabulary: {0:?}")]
    MissingWords(Vec<String>),
    #[error("timestep range [{from}, {to}) invalid for {len} timesteps")]
    Range { from: usize, to: usize, len: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Word vectors for every word of a fixed vocabulary at every timestep.
#[derive(Clone, Debug)]
pub struct TemporalEmbeddings {
    vocab: Arc<Vec<String>>,
    index: Arc<HashMap<String, usize>>,
    labels: Vec<String>,
    /// Storage timestep for each timestep of this view.
    steps: Vec<usize>,
    stored_steps: usize,
    dim: usize,
    data: Arc<Vec<f64>>,
}

impl TemporalEmbeddings {
    /// Builds a dataset from word-major vectors: the vector of word `w` at
    /// timestep `t` starts at `(w·|T| + t)·dim`.
    ///
    /// Words are reordered lexicographically. Duplicate words or labels,
    /// unordered labels, non-finite values and all-zero vectors are rejected.
    pub fn from_parts(
        vocab: Vec<String>,
        labels: Vec<String>,
        dim: usize,
        vectors: Vec<f64>,
    ) -> Result<Self, EmbedError> {
        let n_words = vocab.len();
        let n_steps = labels.len();
        if n_words == 0 || n_steps == 0 || dim == 0 {
            return Err(EmbedError::Invalid(format!(
                "empty dataset: {n_words} words, {n_steps} timesteps, dimension {dim}"
            )));
        }
        if vectors.len() != n_words * n_steps * dim {
            return Err(EmbedError::Invalid(format!(
                "expected {} values for {n_words}x{n_steps}x{dim}, got {}",
                n_words * n_steps * dim,
                vectors.len()
            )));
        }
        check_labels(&labels)?;
        for word in &vocab {
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(EmbedError::Invalid(format!("invalid word token {word:?}")));
            }
        }
        let stride = n_steps * dim;
        for (w, word) in vocab.iter().enumerate() {
            for t in 0..n_steps {
                let v = &vectors[w * stride + t * dim..w * stride + (t + 1) * dim];
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(EmbedError::Invalid(format!(
                        "non-finite vector for {word:?} at {}",
                        labels[t]
                    )));
                }
                if v.iter().all(|x| *x == 0.0) {
                    return Err(EmbedError::Invalid(format!(
                        "zero vector for {word:?} at {}",
                        labels[t]
                    )));
                }
            }
        }

        let mut order: Vec<usize> = (0..n_words).collect();
        order.sort_by(|&a, &b| vocab[a].cmp(&vocab[b]));
        for pair in order.windows(2) {
            if vocab[pair[0]] == vocab[pair[1]] {
                return Err(EmbedError::Invalid(format!(
                    "duplicate word {:?}",
                    vocab[pair[0]]
                )));
            }
        }
        let sorted_already = order.iter().enumerate().all(|(i, &o)| i == o);
        let (vocab, data) = if sorted_already {
            (vocab, vectors)
        } else {
            let mut data = Vec::with_capacity(vectors.len());
            for &o in &order {
                data.extend_from_slice(&vectors[o * stride..(o + 1) * stride]);
            }
            let vocab = order.iter().map(|&o| vocab[o].clone()).collect();
            (vocab, data)
        };
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w): (usize, &String)| (w.clone(), i))
            .collect();
        Ok(Self {
            vocab: Arc::new(vocab),
            index: Arc::new(index),
            labels,
            steps: (0..n_steps).collect(),
            stored_steps: n_steps,
            dim,
            data: Arc::new(data),
        })
    }

    pub fn num_words(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_timesteps(&self) -> usize {
        self.steps.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn word(&self, w: usize) -> &str {
        &self.vocab[w]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Vector of word `w` at timestep `t` of this view.
    #[inline]
    pub fn vector(&self, w: usize, t: usize) -> &[f64] {
        let start = (w * self.stored_steps + self.steps[t]) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// Copies `words × timesteps[range] × dim` into a contiguous word-major buffer.
    pub fn gather(&self, words: &[usize], from: usize, to: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(words.len() * (to - from) * self.dim);
        for &w in words {
            for t in from..to {
                out.extend_from_slice(self.vector(w, t));
            }
        }
        out
    }

    /// The `|V|×d` matrix of timestep `t`.
    pub fn timestep_matrix(&self, t: usize) -> Matrix {
        let mut data = Vec::with_capacity(self.num_words() * self.dim);
        for w in 0..self.num_words() {
            data.extend_from_slice(self.vector(w, t));
        }
        Matrix::from_vec(self.num_words(), self.dim, data).expect("length matches shape")
    }

    /// All vectors in word-major layout for this view.
    pub fn to_vectors(&self) -> Vec<f64> {
        let words: Vec<usize> = (0..self.num_words()).collect();
        self.gather(&words, 0, self.num_timesteps())
    }

    /// View over timesteps `[from, to)`.
    pub fn subsequence(&self, from: usize, to: usize) -> Result<Self, EmbedError> {
        if from >= to || to > self.num_timesteps() {
            return Err(EmbedError::Range {
                from,
                to,
                len: self.num_timesteps(),
            });
        }
        let picks: Vec<usize> = (from..to).collect();
        self.select_timesteps(&picks)
    }

    /// View over an increasing list of timesteps, e.g. `[0, i]` for pairwise models.
    pub fn select_timesteps(&self, picks: &[usize]) -> Result<Self, EmbedError> {
        let len = self.num_timesteps();
        let increasing = picks.windows(2).all(|w| w[0] < w[1]);
        if picks.is_empty() || !increasing || picks.iter().any(|&t| t >= len) {
            return Err(EmbedError::Invalid(format!(
                "timestep selection {picks:?} invalid for {len} timesteps"
            )));
        }
        Ok(Self {
            vocab: Arc::clone(&self.vocab),
            index: Arc::clone(&self.index),
            labels: picks.iter().map(|&t| self.labels[t].clone()).collect(),
            steps: picks.iter().map(|&t| self.steps[t]).collect(),
            stored_steps: self.stored_steps,
            dim: self.dim,
            data: Arc::clone(&self.data),
        })
    }

    /// Whether two datasets share vector storage.
    pub fn shares_storage(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.data, &other.data)
    }

    /// Resolves words to indices, failing with the full list of unknown words.
    pub fn indices_of<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<usize>, EmbedError> {
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(words.len());
        for w in words {
            match self.word_index(w.as_ref()) {
                Some(i) => out.push(i),
                None => missing.push(w.as_ref().to_string()),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(EmbedError::MissingWords(missing))
        }
    }
}

/// Numeric labels compare numerically, anything else lexicographically.
fn compare_labels(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    }
}

fn check_labels(labels: &[String]) -> Result<(), EmbedError> {
    for pair in labels.windows(2) {
        if compare_labels(&pair[0], &pair[1]) != Ordering::Less {
            return Err(EmbedError::Invalid(format!(
                "timestep labels must be unique and strictly increasing: {:?} then {:?}",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}
