use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    self, distance_series, rank_gt_beta, rank_gt_c, rank_procr, rank_procr_k, rank_procr_kt,
    rank_procr_star, rank_random, DEFAULT_K_PROCR_K, DEFAULT_K_PROCR_KT, MIN_TREND_LENGTH,
};
use crate::embedstore::{SplitSpec, TemporalEmbeddings};
use crate::numerics::derive_seed;
use crate::seqmodel::{
    change_scores, search, train, DecoderKind, ModelConfig, SearchSpace, SeqModel, Variant,
};

use super::{EvalError, Ranking};

/// Random rankings averaged per evaluation unless told otherwise.
pub const DEFAULT_RAND_REPS: usize = 1000;

/// A ranking method.
///
/// For the sequence models `i` is the split index, the number of input
/// timesteps. For every other method `i` is a year index: the timestep
/// compared against timestep 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Seq { variant: Variant },
    /// The sequence architecture trained on the two-step view `[W_0, W_i]`.
    Pairwise { kind: DecoderKind },
    Procr,
    ProcrK { k: f64 },
    ProcrKt { k: f64 },
    ProcrStar,
    GtC,
    GtBeta,
    Rand { reps: usize },
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Seq { variant } => variant.name().to_string(),
            Method::Pairwise { kind: DecoderKind::Reconstruct } => "lstm_r".into(),
            Method::Pairwise { kind: DecoderKind::Future } => "lstm_f".into(),
            Method::Procr => "procr".into(),
            Method::ProcrK { .. } => "procr_k".into(),
            Method::ProcrKt { .. } => "procr_kt".into(),
            Method::ProcrStar => "procr_star".into(),
            Method::GtC => "gt_c".into(),
            Method::GtBeta => "gt_beta".into(),
            Method::Rand { .. } => "rand".into(),
        }
    }

    /// Why the method cannot run at `i` over `timesteps` steps, if it cannot.
    pub fn skip_reason(&self, i: usize, timesteps: usize) -> Option<String> {
        match self {
            Method::Seq { variant } => {
                let max = match variant {
                    Variant::Reconstruct => timesteps,
                    _ => timesteps - 1,
                };
                (i == 0 || i > max).then(|| format!("split index {i} outside 1..={max}"))
            }
            Method::GtC | Method::GtBeta if i < MIN_TREND_LENGTH => {
                Some(format!("trend models need i >= {MIN_TREND_LENGTH}"))
            }
            Method::Rand { .. } => None,
            _ => (i == 0 || i >= timesteps)
                .then(|| format!("year index {i} outside 1..{timesteps}")),
        }
    }

    pub fn uses_sequence_model(&self) -> bool {
        matches!(self, Method::Seq { .. } | Method::Pairwise { .. })
    }

    /// Every method, with default parameters.
    pub fn all() -> Vec<Method> {
        let mut v: Vec<Method> = Variant::ALL.iter().map(|&variant| Method::Seq { variant }).collect();
        v.extend([
            Method::Pairwise { kind: DecoderKind::Reconstruct },
            Method::Pairwise { kind: DecoderKind::Future },
            Method::Procr,
            Method::ProcrK { k: DEFAULT_K_PROCR_K },
            Method::ProcrKt { k: DEFAULT_K_PROCR_KT },
            Method::ProcrStar,
            Method::GtC,
            Method::GtBeta,
            Method::Rand { reps: DEFAULT_RAND_REPS },
        ]);
        v
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::ProcrK { k } | Method::ProcrKt { k } => write!(f, "{}:{k}", self.name()),
            Method::Rand { reps } => write!(f, "rand:{reps}"),
            _ => f.write_str(&self.name()),
        }
    }
}

/// Parses `name` or `name:param`, e.g. `procr_k:0.9`, `rand:1000`, `seq2seq_rf`.
impl FromStr for Method {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let bad = || EvalError::Method(format!("bad method parameter in {s:?}"));
        let frac = |default: f64| -> Result<f64, EvalError> {
            param.map_or(Ok(default), |p| p.parse().map_err(|_| bad()))
        };
        let name = name.to_ascii_lowercase();
        let m = match name.as_str() {
            "procr" => Method::Procr,
            "procr_k" => Method::ProcrK { k: frac(DEFAULT_K_PROCR_K)? },
            "procr_kt" => Method::ProcrKt { k: frac(DEFAULT_K_PROCR_KT)? },
            "procr_star" | "procr*" => Method::ProcrStar,
            "gt_c" => Method::GtC,
            "gt_beta" => Method::GtBeta,
            "rand" | "random" => Method::Rand {
                reps: param.map_or(Ok(DEFAULT_RAND_REPS), |p| p.parse().map_err(|_| bad()))?,
            },
            "lstm_r" => Method::Pairwise { kind: DecoderKind::Reconstruct },
            "lstm_f" => Method::Pairwise { kind: DecoderKind::Future },
            other => Method::Seq {
                variant: other
                    .parse()
                    .map_err(|_| EvalError::Method(format!("unknown method {s:?}")))?,
            },
        };
        if param.is_some() && !matches!(m, Method::ProcrK { .. } | Method::ProcrKt { .. } | Method::Rand { .. }) {
            return Err(bad());
        }
        Ok(m)
    }
}

/// How sequence models get their hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqSetup {
    /// Train this config; variant, split index, shape and seed are filled in per run.
    Fixed(ModelConfig),
    /// Random search per run.
    Search { space: SearchSpace, trials: usize },
}

/// Shared inputs of every method run.
pub struct MethodContext<'a> {
    pub emb: &'a TemporalEmbeddings,
    pub split: &'a SplitSpec,
    pub seq: SeqSetup,
}

pub enum MethodOutput {
    Single(Ranking),
    /// Independent random rankings to be averaged.
    Repeated(Vec<Ranking>),
}

impl MethodOutput {
    pub fn rankings(&self) -> &[Ranking] {
        match self {
            MethodOutput::Single(r) => std::slice::from_ref(r),
            MethodOutput::Repeated(v) => v,
        }
    }
}

fn fit_sequence(
    ctx: &MethodContext<'_>,
    emb: &TemporalEmbeddings,
    variant: Variant,
    i: usize,
    seed: u64,
) -> Result<SeqModel, EvalError> {
    let mut base = match &ctx.seq {
        SeqSetup::Fixed(c) => c.clone(),
        SeqSetup::Search { .. } => ModelConfig::small(variant, i, emb.num_timesteps(), emb.dim()),
    };
    base.decoders.resize(variant.decoder_count(), base.decoders[0]);
    base.variant = variant;
    base.split_index = i;
    base.timesteps = emb.num_timesteps();
    base.dim = emb.dim();
    base.seed = seed;
    Ok(match &ctx.seq {
        SeqSetup::Fixed(_) => train(emb, ctx.split, &base)?.0,
        SeqSetup::Search { space, trials } => {
            search(emb, ctx.split, &base, space, *trials, seed, |_| {})?.0
        }
    })
}

fn similarity_ranking(
    method: &Method,
    model: &SeqModel,
    emb: &TemporalEmbeddings,
    test: &[usize],
    i: usize,
) -> Result<Ranking, EvalError> {
    let scores = change_scores(model, emb, test)?;
    let c = model.config();
    let params = format!(
        "i={i} enc={}/{} dec={} dropout={} batch={} epochs={}",
        c.encoder.first,
        c.encoder.second,
        c.decoders
            .iter()
            .map(|d| format!("{}/{}", d.first, d.second))
            .collect::<Vec<_>>()
            .join(","),
        c.dropout,
        c.batch_size,
        c.epochs
    );
    Ranking::ascending(
        &method.name(),
        &params,
        scores
            .words
            .iter()
            .zip(&scores.scores)
            .map(|(&w, &s)| (emb.word(w), s)),
    )
}

/// Ranks the test words of `ctx.split` with `method` at `i`.
pub fn run_method(
    ctx: &MethodContext<'_>,
    method: &Method,
    i: usize,
    seed: u64,
) -> Result<MethodOutput, EvalError> {
    let emb = ctx.emb;
    let test = &ctx.split.test;
    if let Some(reason) = method.skip_reason(i, emb.num_timesteps()) {
        return Err(EvalError::Method(format!("{method} cannot run: {reason}")));
    }
    let single = |r: Result<Ranking, baselines::BaselineError>| Ok(MethodOutput::Single(r?));
    match *method {
        Method::Seq { variant } => {
            let model = fit_sequence(ctx, emb, variant, i, seed)?;
            Ok(MethodOutput::Single(similarity_ranking(method, &model, emb, test, i)?))
        }
        Method::Pairwise { kind } => {
            let view = emb.select_timesteps(&[0, i])?;
            let (variant, split_index) = match kind {
                DecoderKind::Reconstruct => (Variant::Reconstruct, 2),
                DecoderKind::Future => (Variant::Future, 1),
            };
            let model = fit_sequence(ctx, &view, variant, split_index, seed)?;
            Ok(MethodOutput::Single(similarity_ranking(method, &model, &view, test, i)?))
        }
        Method::Procr => single(rank_procr(emb, i, test)),
        Method::ProcrK { k } => single(rank_procr_k(emb, i, k, test).map(|a| a.ranking)),
        Method::ProcrKt { k } => single(rank_procr_kt(emb, i, k, test).map(|a| a.ranking)),
        Method::ProcrStar => single(rank_procr_star(emb, &distance_series(emb, i)?, test)),
        Method::GtC => single(rank_gt_c(emb, &distance_series(emb, i)?, test)),
        Method::GtBeta => single(rank_gt_beta(emb, &distance_series(emb, i)?, test)),
        Method::Rand { reps } => {
            let words: Vec<&str> = test.iter().map(|&w| emb.word(w)).collect();
            let rankings = (0..reps.max(1))
                .map(|r| rank_random(&words, derive_seed(seed, r as u64)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(MethodOutput::Repeated(rankings))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for m in Method::all() {
            let back: Method = m.to_string().parse().unwrap();
            assert_eq!(back, m);
        }
        assert_eq!("procr_k:0.5".parse::<Method>().unwrap(), Method::ProcrK { k: 0.5 });
        assert!("procr:3".parse::<Method>().is_err());
        assert!("nonsense".parse::<Method>().is_err());
    }

    #[test]
    fn skip_rules() {
        assert!(Method::GtC.skip_reason(2, 14).is_some());
        assert!(Method::GtBeta.skip_reason(3, 14).is_none());
        assert!(Method::Seq { variant: Variant::Joint }.skip_reason(14, 14).is_some());
        assert!(Method::Seq { variant: Variant::Reconstruct }.skip_reason(14, 14).is_none());
        assert!(Method::Procr.skip_reason(14, 14).is_some());
        assert!(Method::Procr.skip_reason(13, 14).is_none());
    }
}
