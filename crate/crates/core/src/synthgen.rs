//! Controlled artificial semantic change.
//!
//! A fraction of the test words ("sources") is blended towards a randomly
//! chosen "target" word at every timestep:
//! `w*_t = λ_t·w_t(source) + (1 − λ_t)·w_t(target)`, where `λ_t` is a
//! decreasing sigmoid anchored at exactly 0.5 on a midpoint timestep. Targets
//! are drawn among words whose cosine similarity to the source at the first
//! timestep lies in the band `(c − 0.1, c]`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedstore::{EmbedError, TemporalEmbeddings};
use crate::numerics::{cosine, SeedRng};

/// Width of the target-similarity band.
pub const BAND_WIDTH: f64 = 0.1;
/// `λ` at the start (and `1 − λ` at the end) of the regime's window.
pub const SHOULDER: f64 = 0.95;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error("timestep label {0:?} not in dataset")]
    UnknownLabel(String),
    #[error("no test words to inject into")]
    EmptyTestSet,
    #[error("no source word has a target in the band ({low}, {high}]")]
    NoPairs { low: f64, high: f64 },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("{path}: {message}")]
    Gold { path: String, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// How long the change lasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeKind {
    Full,
    Half,
    #[serde(rename = "OT")]
    OneThird,
    Quarter,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 4] = [
        RegimeKind::Full,
        RegimeKind::Half,
        RegimeKind::OneThird,
        RegimeKind::Quarter,
    ];

    /// Default `[start, end]` years for the 2000–2013 yearly setting.
    pub fn default_window(self) -> (&'static str, &'static str) {
        match self {
            RegimeKind::Full => ("2001", "2013"),
            RegimeKind::Half => ("2005", "2010"),
            RegimeKind::OneThird => ("2006", "2009"),
            RegimeKind::Quarter => ("2007", "2008"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegimeKind::Full => "Full",
            RegimeKind::Half => "Half",
            RegimeKind::OneThird => "OT",
            RegimeKind::Quarter => "Quarter",
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegimeKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(RegimeKind::Full),
            "half" => Ok(RegimeKind::Half),
            "ot" | "onethird" | "one-third" => Ok(RegimeKind::OneThird),
            "quarter" => Ok(RegimeKind::Quarter),
            other => Err(SynthError::Spec(format!("unknown duration regime {other:?}"))),
        }
    }
}

/// A duration regime with explicit anchor labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationRegime {
    pub kind: RegimeKind,
    pub start: String,
    pub midpoint: String,
    pub end: String,
}

impl DurationRegime {
    /// The yearly 2000–2013 windows with the midpoint at 2007.
    pub fn yearly(kind: RegimeKind) -> Self {
        let (start, end) = kind.default_window();
        Self {
            kind,
            start: start.into(),
            midpoint: "2007".into(),
            end: end.into(),
        }
    }

    /// Resolves the anchors against a dataset's timestep labels.
    pub fn schedule(&self, labels: &[String]) -> Result<DecaySchedule, SynthError> {
        let find = |l: &String| {
            labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| SynthError::UnknownLabel(l.clone()))
        };
        let start = find(&self.start)?;
        let mid = find(&self.midpoint)?;
        let end = find(&self.end)?;
        if !(start <= mid && mid <= end) {
            return Err(SynthError::Spec(format!(
                "regime anchors out of order: start {} midpoint {} end {}",
                self.start, self.midpoint, self.end
            )));
        }
        let half_width = (mid - start).max(end - mid).max(1) as f64;
        Ok(DecaySchedule {
            midpoint: mid,
            steepness: (SHOULDER / (1.0 - SHOULDER)).ln() / half_width,
        })
    }
}

impl fmt::Display for DurationRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({},{},{})",
            self.kind, self.start, self.midpoint, self.end
        )
    }
}

impl FromStr for DurationRegime {
    type Err = SynthError;

    /// Parses the `Kind(start,midpoint,end)` form written to gold files.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SynthError::Spec(format!("cannot parse regime {s:?}"));
        let (kind, rest) = s.split_once('(').ok_or_else(bad)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(Self {
            kind: kind.parse()?,
            start: parts[0].into(),
            midpoint: parts[1].into(),
            end: parts[2].into(),
        })
    }
}

/// `λ_t = 1 / (1 + exp(k·(t − t_mid)))` over timestep indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySchedule {
    pub midpoint: usize,
    pub steepness: f64,
}

impl DecaySchedule {
    pub fn lambda(&self, t: usize) -> f64 {
        if t == self.midpoint {
            return 0.5;
        }
        let x = self.steepness * (t as f64 - self.midpoint as f64);
        1.0 / (1.0 + x.exp())
    }
}

/// Parameters of one injection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub change_fraction: f64,
    pub c_threshold: f64,
    pub regime: DurationRegime,
    pub seed: u64,
}

impl SyntheticSpec {
    /// 5% of the test words, yearly anchors.
    pub fn new(c_threshold: f64, kind: RegimeKind, seed: u64) -> Self {
        Self {
            change_fraction: 0.05,
            c_threshold,
            regime: DurationRegime::yearly(kind),
            seed,
        }
    }

    pub fn band(&self) -> (f64, f64) {
        (self.c_threshold - BAND_WIDTH, self.c_threshold)
    }

    pub fn validate(&self, labels: &[String]) -> Result<DecaySchedule, SynthError> {
        if !(self.change_fraction > 0.0 && self.change_fraction <= 1.0) {
            return Err(SynthError::Spec(format!(
                "change fraction must lie in (0, 1], got {}",
                self.change_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.c_threshold) {
            return Err(SynthError::Spec(format!(
                "c must lie in [0, 1), got {}",
                self.c_threshold
            )));
        }
        self.regime.schedule(labels)
    }
}

/// `λ_t` for timestep index `t` of a dataset with the given labels.
pub fn decay_lambda(t: usize, spec: &SyntheticSpec, labels: &[String]) -> Result<f64, SynthError> {
    if t >= labels.len() {
        return Err(SynthError::Spec(format!(
            "timestep {t} outside {} timesteps",
            labels.len()
        )));
    }
    Ok(spec.regime.schedule(labels)?.lambda(t))
}

/// Source/target pairs plus whether fewer than requested were found.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPicks {
    pub pairs: Vec<(usize, usize)>,
    pub requested: usize,
}

impl TargetPicks {
    pub fn shortfall(&self) -> bool {
        self.pairs.len() < self.requested
    }
}

/// Draws `⌈fraction·|test|⌉` distinct sources from `test_words` and a band target for each.
///
/// Sources without any candidate in the band are skipped and replaced by the
/// next source in the shuffled order.
pub fn pick_targets(
    emb: &TemporalEmbeddings,
    test_words: &[usize],
    spec: &SyntheticSpec,
) -> Result<TargetPicks, SynthError> {
    if test_words.is_empty() {
        return Err(SynthError::EmptyTestSet);
    }
    spec.validate(emb.labels())?;
    let requested = (spec.change_fraction * test_words.len() as f64 - 1e-9).ceil() as usize;
    let requested = requested.max(1);
    let (low, high) = spec.band();

    let mut rng = SeedRng::new(spec.seed);
    let mut order = test_words.to_vec();
    order.sort_unstable();
    order.dedup();
    rng.shuffle(&mut order);

    let mut pairs = Vec::with_capacity(requested);
    let mut candidates = Vec::new();
    for &source in &order {
        if pairs.len() == requested {
            break;
        }
        let s0 = emb.vector(source, 0);
        candidates.clear();
        for w in 0..emb.num_words() {
            if w == source {
                continue;
            }
            let sim = cosine(s0, emb.vector(w, 0)).unwrap_or(0.0);
            if sim > low && sim <= high {
                candidates.push(w);
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let target = candidates[rng.index(candidates.len())];
        pairs.push((source, target));
    }
    if pairs.is_empty() {
        return Err(SynthError::NoPairs { low, high });
    }
    Ok(TargetPicks { pairs, requested })
}

/// Ground truth for one injected word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub source: String,
    pub target: String,
    pub initial_cos: f64,
    pub regime: DurationRegime,
    pub c_threshold: f64,
    pub lambdas: Vec<f64>,
}

/// Result of [`inject`].
#[derive(Debug, Clone)]
pub struct Injection {
    pub embeddings: TemporalEmbeddings,
    pub records: Vec<InjectionRecord>,
    pub requested: usize,
}

impl Injection {
    pub fn shortfall(&self) -> bool {
        self.records.len() < self.requested
    }

    pub fn gold_words(&self) -> Vec<String> {
        self.records.iter().map(|r| r.source.clone()).collect()
    }
}

/// Blends each picked source towards its target at every timestep.
pub fn inject(
    emb: &TemporalEmbeddings,
    test_words: &[usize],
    spec: &SyntheticSpec,
) -> Result<Injection, SynthError> {
    let schedule = spec.validate(emb.labels())?;
    let picks = pick_targets(emb, test_words, spec)?;
    let n_steps = emb.num_timesteps();
    let dim = emb.dim();
    let lambdas: Vec<f64> = (0..n_steps).map(|t| schedule.lambda(t)).collect();

    let mut vectors = emb.to_vectors();
    let mut records = Vec::with_capacity(picks.pairs.len());
    for &(source, target) in &picks.pairs {
        for (t, &lambda) in lambdas.iter().enumerate() {
            let s = emb.vector(source, t);
            let g = emb.vector(target, t);
            let base = (source * n_steps + t) * dim;
            for k in 0..dim {
                vectors[base + k] = lambda * s[k] + (1.0 - lambda) * g[k];
            }
        }
        records.push(InjectionRecord {
            source: emb.word(source).to_string(),
            target: emb.word(target).to_string(),
            initial_cos: cosine(emb.vector(source, 0), emb.vector(target, 0)).unwrap_or(0.0),
            regime: spec.regime.clone(),
            c_threshold: spec.c_threshold,
            lambdas: lambdas.clone(),
        });
    }
    let embeddings = TemporalEmbeddings::from_parts(
        emb.vocab().to_vec(),
        emb.labels().to_vec(),
        dim,
        vectors,
    )?;
    Ok(Injection {
        embeddings,
        records,
        requested: picks.requested,
    })
}

/// Writes the gold-standard TSV: a header, then
/// `source target initial_cos regime c λ_0 … λ_{T−1}` per record.
pub fn write_records<W: Write>(
    mut w: W,
    labels: &[String],
    records: &[InjectionRecord],
) -> std::io::Result<()> {
    write!(w, "source\ttarget\tinitial_cos\tregime\tc")?;
    for l in labels {
        write!(w, "\tlambda_{l}")?;
    }
    writeln!(w)?;
    for r in records {
        write!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            r.source, r.target, r.initial_cos, r.regime, r.c_threshold
        )?;
        for l in &r.lambdas {
            write!(w, "\t{l}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a gold TSV written by [`write_records`].
pub fn read_records(path: &Path) -> Result<Vec<InjectionRecord>, SynthError> {
    let text = std::fs::read_to_string(path)?;
    let err = |line: usize, message: String| SynthError::Gold {
        path: format!("{}:{line}", path.display()),
        message,
    };
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 && line.starts_with("source\t") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 5 {
            return Err(err(n + 1, format!("expected at least 5 columns, got {}", cols.len())));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(n + 1, format!("cannot parse {s:?}")))
        };
        out.push(InjectionRecord {
            source: cols[0].into(),
            target: cols[1].into(),
            initial_cos: num(cols[2])?,
            regime: cols[3].parse()?,
            c_threshold: num(cols[4])?,
            lambdas: cols[5..].iter().map(|s| num(s)).collect::<Result<_, _>>()?,
        });
    }
    Ok(out)
}
