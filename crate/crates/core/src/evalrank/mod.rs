//! Rankings, percentile-rank and recall metrics, and per-split sweeps.

mod methods;
mod sweep;

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use methods::{run_method, Method, MethodContext, MethodOutput, SeqSetup};
pub use sweep::{sweep_over_i, sweep_seed, MeanStd, SweepRow, SweepSummary, SweepTable};

/// Recall cut-offs reported by default, in percent of the test set.
pub const DEFAULT_KS: [f64; 3] = [5.0, 10.0, 50.0];

/// Largest test set checked against a brute-force recomputation.
pub const SELF_CHECK_LIMIT: usize = 1000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold set is empty")]
    EmptyGold,
    #[error("gold words missing from the ranking: {0:?}")]
    GoldNotRanked(Vec<String>),
    #[error("word {0:?} appears twice in a ranking")]
    DuplicateWord(String),
    #[error("score for {word:?} is not finite")]
    NonFinite { word: String },
    #[error("k must lie in (0, 100], got {0}")]
    BadK(f64),
    #[error("report self-check failed: {0}")]
    SelfCheck(String),
    #[error(transparent)]
    Seq(#[from] crate::seqmodel::SeqError),
    #[error(transparent)]
    Baseline(#[from] crate::baselines::BaselineError),
    #[error(transparent)]
    Embed(#[from] crate::embedstore::EmbedError),
    #[error("{0}")]
    Method(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub word: String,
    pub score: f64,
}

/// Test words ordered from most to least changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub method: String,
    pub parameters: String,
    entries: Vec<RankEntry>,
}

impl Ranking {
    /// Lowest score first: for similarities, where low means changed.
    pub fn ascending<I, S>(method: &str, parameters: &str, scores: I) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self::build(method, parameters, scores, false)
    }

    /// Highest score first: for distances and trend strengths.
    pub fn descending<I, S>(method: &str, parameters: &str, scores: I) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self::build(method, parameters, scores, true)
    }

    fn build<I, S>(method: &str, parameters: &str, scores: I, desc: bool) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut entries: Vec<RankEntry> = Vec::new();
        for (w, score) in scores {
            let word = w.into();
            if !score.is_finite() {
                return Err(EvalError::NonFinite { word });
            }
            entries.push(RankEntry { word, score });
        }
        entries.sort_by(|a, b| {
            let by_score = if desc {
                b.score.partial_cmp(&a.score)
            } else {
                a.score.partial_cmp(&b.score)
            };
            by_score
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.word.cmp(&b.word))
        });
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.word.as_str()) {
                return Err(EvalError::DuplicateWord(e.word.clone()));
            }
        }
        Ok(Self {
            method: method.to_string(),
            parameters: parameters.to_string(),
            entries,
        })
    }

    /// Uses an explicit order, e.g. a random permutation; scores are positions.
    pub fn from_order<S: Into<String>>(
        method: &str,
        parameters: &str,
        words: impl IntoIterator<Item = S>,
    ) -> Result<Self, EvalError> {
        let entries: Vec<RankEntry> = words
            .into_iter()
            .enumerate()
            .map(|(k, w)| RankEntry {
                word: w.into(),
                score: (k + 1) as f64,
            })
            .collect();
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.word.as_str()) {
                return Err(EvalError::DuplicateWord(e.word.clone()));
            }
        }
        Ok(Self {
            method: method.to_string(),
            parameters: parameters.to_string(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.word.as_str())
    }

    /// 1-based position of every word.
    pub fn positions(&self) -> HashMap<&str, usize> {
        self.entries
            .iter()
            .enumerate()
            .map(|(k, e)| (e.word.as_str(), k + 1))
            .collect()
    }

    /// The same words in the opposite order.
    pub fn reversed(&self) -> Self {
        let mut r = self.clone();
        r.entries.reverse();
        r
    }

    /// `rank word score method parameters`, with a header line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "rank\tword\tscore\tmethod\tparameters")?;
        for (k, e) in self.entries.iter().enumerate() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                k + 1,
                e.word,
                e.score,
                self.method,
                self.parameters
            )?;
        }
        Ok(())
    }
}

fn gold_positions<S: AsRef<str>>(ranking: &Ranking, gold: &[S]) -> Result<Vec<usize>, EvalError> {
    let mut uniq: Vec<&str> = gold.iter().map(AsRef::as_ref).collect();
    uniq.sort_unstable();
    uniq.dedup();
    if uniq.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let pos = ranking.positions();
    let missing: Vec<String> = uniq
        .iter()
        .filter(|g| !pos.contains_key(*g))
        .map(|g| g.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::GoldNotRanked(missing));
    }
    Ok(uniq.iter().map(|g| pos[g]).collect())
}

/// Mean over gold words of `position / n · 100`, positions 1-based.
pub fn mu_r<S: AsRef<str>>(ranking: &Ranking, gold: &[S]) -> Result<f64, EvalError> {
    let pos = gold_positions(ranking, gold)?;
    Ok(mu_r_from_positions(&pos, ranking.len()))
}

fn mu_r_from_positions(pos: &[usize], n: usize) -> f64 {
    let total: usize = pos.iter().sum();
    total as f64 / pos.len() as f64 / n as f64 * 100.0
}

/// Window size for Rec@k: `⌈k/100 · n⌉`.
pub fn recall_window(k_percent: f64, n: usize) -> usize {
    // k·n is formed first so that 5% of 100 gives exactly 5
    let w = (k_percent * n as f64 / 100.0).ceil() as usize;
    w.min(n)
}

/// Percentage of gold words within the top `⌈k%·n⌉` positions.
pub fn rec_at_k<S: AsRef<str>>(ranking: &Ranking, gold: &[S], k_percent: f64) -> Result<f64, EvalError> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(EvalError::BadK(k_percent));
    }
    let pos = gold_positions(ranking, gold)?;
    Ok(rec_from_positions(&pos, ranking.len(), k_percent))
}

fn rec_from_positions(pos: &[usize], n: usize, k_percent: f64) -> f64 {
    let window = recall_window(k_percent, n);
    let hits = pos.iter().filter(|&&p| p <= window).count();
    hits as f64 / pos.len() as f64 * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub parameters: String,
    pub mu_r: f64,
    /// `(k, Rec@k)` pairs in percent.
    pub rec_at: Vec<(f64, f64)>,
    pub gold_size: usize,
    pub test_size: usize,
    /// Number of rankings averaged; 1 unless the method is randomized.
    pub repetitions: usize,
    /// `(word, position)` for each gold word; only for single rankings.
    pub gold_ranks: Vec<(String, usize)>,
}

impl EvaluationReport {
    pub fn rec(&self, k: f64) -> Option<f64> {
        self.rec_at.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Scores one ranking; reports on up to [`SELF_CHECK_LIMIT`] words are
/// recomputed by a linear scan and must agree exactly.
pub fn evaluate<S: AsRef<str>>(
    ranking: &Ranking,
    gold: &[S],
    ks: &[f64],
) -> Result<EvaluationReport, EvalError> {
    if let Some(&k) = ks.iter().find(|&&k| !(k > 0.0 && k <= 100.0)) {
        return Err(EvalError::BadK(k));
    }
    let pos = gold_positions(ranking, gold)?;
    let n = ranking.len();
    let mu = mu_r_from_positions(&pos, n);
    let rec_at: Vec<(f64, f64)> = ks.iter().map(|&k| (k, rec_from_positions(&pos, n, k))).collect();
    let mut gold_words: Vec<&str> = gold.iter().map(AsRef::as_ref).collect();
    gold_words.sort_unstable();
    gold_words.dedup();
    let report = EvaluationReport {
        method: ranking.method.clone(),
        parameters: ranking.parameters.clone(),
        mu_r: mu,
        rec_at,
        gold_size: pos.len(),
        test_size: n,
        repetitions: 1,
        gold_ranks: gold_words
            .iter()
            .zip(&pos)
            .map(|(g, &p)| (g.to_string(), p))
            .collect(),
    };
    if n <= SELF_CHECK_LIMIT {
        self_check(ranking, &gold_words, &report)?;
    }
    Ok(report)
}

fn self_check(ranking: &Ranking, gold: &[&str], report: &EvaluationReport) -> Result<(), EvalError> {
    let n = ranking.len();
    let mut sum = 0usize;
    let mut raw = Vec::with_capacity(gold.len());
    for (k, word) in ranking.words().enumerate() {
        if gold.contains(&word) {
            sum += k + 1;
            raw.push(k + 1);
        }
    }
    let mu = sum as f64 / gold.len() as f64 / n as f64 * 100.0;
    if mu != report.mu_r {
        return Err(EvalError::SelfCheck(format!("μ_r {} vs scan {mu}", report.mu_r)));
    }
    for &(k, v) in &report.rec_at {
        let window = recall_window(k, n);
        let hits = raw.iter().filter(|&&p| p <= window).count();
        let scan = hits as f64 / gold.len() as f64 * 100.0;
        if scan != v {
            return Err(EvalError::SelfCheck(format!("Rec@{k} {v} vs scan {scan}")));
        }
    }
    Ok(())
}

/// Averages the metrics of several rankings of the same test set.
pub fn evaluate_repeated<S: AsRef<str>>(
    rankings: &[Ranking],
    gold: &[S],
    ks: &[f64],
) -> Result<EvaluationReport, EvalError> {
    let first = rankings
        .first()
        .ok_or_else(|| EvalError::Method("no rankings to evaluate".into()))?;
    if rankings.len() == 1 {
        return evaluate(first, gold, ks);
    }
    let reports = rankings
        .iter()
        .map(|r| evaluate(r, gold, ks))
        .collect::<Result<Vec<_>, _>>()?;
    let m = reports.len() as f64;
    let mu = reports.iter().map(|r| r.mu_r).sum::<f64>() / m;
    let rec_at = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| (k, reports.iter().map(|r| r.rec_at[j].1).sum::<f64>() / m))
        .collect();
    Ok(EvaluationReport {
        method: first.method.clone(),
        parameters: first.parameters.clone(),
        mu_r: mu,
        rec_at,
        gold_size: reports[0].gold_size,
        test_size: reports[0].test_size,
        repetitions: reports.len(),
        gold_ranks: Vec::new(),
    })
}
