use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use semshift::embedstore::{export, ingest, split, SplitSpec, TemporalEmbeddings};
use semshift::evalrank::{
    evaluate, evaluate_repeated, run_method, sweep_seed, EvaluationReport, Method, MethodContext,
    MethodOutput, Ranking, SeqSetup, SweepRow, SweepTable,
};
use semshift::seqmodel::{
    change_scores, load_checkpoint, save_checkpoint, search, train_with_log, LayerUnits,
    ModelConfig, SearchSpace, Variant,
};
use semshift::synthgen::{inject, read_records, write_records, DurationRegime, RegimeKind, SyntheticSpec};

use crate::config::{parse_units, ExperimentConfig};
use crate::run::RunDir;

const DEFAULT_TRAIN_FRAC: f64 = 0.8;
const DEFAULT_VAL_FRAC: f64 = 0.25;

fn load_dataset(cfg: &ExperimentConfig) -> Result<TemporalEmbeddings> {
    let path = cfg.dataset()?;
    let (emb, _) = ingest(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(emb)
}

fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().next().unwrap_or(l).to_string())
        .collect())
}

/// Gold words from an injection TSV or a plain word list.
fn read_gold(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.starts_with("source\ttarget") {
        let records = read_records(path).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(records.into_iter().map(|r| r.source).collect());
    }
    read_word_list(path)
}

fn resolve_split(cfg: &ExperimentConfig, emb: &TemporalEmbeddings, extra_holdout: &[String]) -> Result<SplitSpec> {
    if let Some(path) = &cfg.split_file {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let s: SplitSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let n = emb.num_words();
        if s.train.iter().chain(&s.validation).chain(&s.test).any(|&w| w >= n) {
            bail!("{} does not match a dataset of {n} words", path.display());
        }
        return Ok(s);
    }
    let mut holdout = match &cfg.holdout {
        Some(p) => read_word_list(p)?,
        None => Vec::new(),
    };
    holdout.extend_from_slice(extra_holdout);
    Ok(split(
        emb,
        cfg.train_frac.unwrap_or(DEFAULT_TRAIN_FRAC),
        cfg.val_frac.unwrap_or(DEFAULT_VAL_FRAC),
        cfg.seed(),
        &holdout,
    )?)
}

fn synthetic_spec(cfg: &ExperimentConfig) -> Result<Option<SyntheticSpec>> {
    let Some(c) = cfg.c else {
        return Ok(None);
    };
    let regime_text = cfg.regime.as_deref().unwrap_or("full");
    let regime = if regime_text.contains('(') {
        regime_text.parse::<DurationRegime>()?
    } else {
        DurationRegime::yearly(regime_text.parse::<RegimeKind>()?)
    };
    Ok(Some(SyntheticSpec {
        change_fraction: cfg.change_fraction.unwrap_or(0.05),
        c_threshold: c,
        regime,
        seed: cfg.seed(),
    }))
}

#[derive(Serialize)]
struct DatasetSummary<'a> {
    words: usize,
    timesteps: usize,
    dim: usize,
    labels: &'a [String],
    fingerprint: String,
}

pub fn cmd_ingest(cfg: &ExperimentConfig) -> Result<()> {
    let mut run = RunDir::create(cfg, "ingest")?;
    let path = cfg.dataset()?;
    let (emb, report) = ingest(path).with_context(|| format!("loading {}", path.display()))?;
    println!(
        "|V| = {}, |T| = {}, d = {}",
        emb.num_words(),
        emb.num_timesteps(),
        emb.dim()
    );
    for (label, in_file, dropped) in &report.timesteps {
        println!("  {label}: {in_file} words, {dropped} dropped");
    }
    let manifest = export(&emb, &run.path("dataset"), report.name.as_deref())?;
    let fingerprint = run.write_fingerprint(&emb)?;
    run.write_json(
        "ingest.json",
        &serde_json::json!({
            "summary": DatasetSummary {
                words: emb.num_words(),
                timesteps: emb.num_timesteps(),
                dim: emb.dim(),
                labels: emb.labels(),
                fingerprint,
            },
            "per_timestep": report.timesteps,
        }),
    )?;
    run.note(&format!("normalized dataset written to {}", manifest.display()));
    Ok(())
}

pub fn cmd_split(cfg: &ExperimentConfig) -> Result<()> {
    let mut run = RunDir::create(cfg, "split")?;
    let emb = load_dataset(cfg)?;
    run.write_fingerprint(&emb)?;
    let gold = match &cfg.gold {
        Some(p) => read_gold(p)?,
        None => Vec::new(),
    };
    let s = resolve_split(cfg, &emb, &gold)?;
    let path = run.write_json("split.json", &s)?;
    println!(
        "train {}, validation {}, test {}",
        s.train.len(),
        s.validation.len(),
        s.test.len()
    );
    run.note(&format!("split written to {}", path.display()));
    Ok(())
}

pub fn cmd_inject(cfg: &ExperimentConfig) -> Result<()> {
    let mut run = RunDir::create(cfg, "inject")?;
    let emb = load_dataset(cfg)?;
    let spec = synthetic_spec(cfg)?.context("--c is required for inject")?;
    let s = resolve_split(cfg, &emb, &[])?;
    let injection = inject(&emb, &s.test, &spec)?;
    if injection.shortfall() {
        run.note(&format!(
            "warning: only {} of {} requested source words had a target in the similarity band",
            injection.records.len(),
            injection.requested
        ));
    }
    let manifest = export(&injection.embeddings, &run.path("dataset"), Some("injected"))?;
    let gold_path = run.path("gold.tsv");
    let file = File::create(&gold_path).with_context(|| format!("creating {}", gold_path.display()))?;
    write_records(BufWriter::new(file), emb.labels(), &injection.records)?;
    run.write_json("split.json", &s)?;
    run.write_fingerprint(&injection.embeddings)?;
    println!("{} words changed", injection.records.len());
    run.note(&format!(
        "dataset {} and gold {} written",
        manifest.display(),
        gold_path.display()
    ));
    Ok(())
}

fn model_config(cfg: &ExperimentConfig, emb: &TemporalEmbeddings) -> Result<ModelConfig> {
    let variant: Variant = cfg.variant.as_deref().unwrap_or("joint").parse()?;
    let t = emb.num_timesteps();
    let i = cfg.split_index.unwrap_or(default_split_index(variant, t));
    let mut c = ModelConfig::small(variant, i, t, emb.dim());
    if let Some(u) = &cfg.encoder_units {
        let (a, b) = parse_units(u)?;
        c.encoder = LayerUnits::new(a, b);
    }
    if let Some(u) = &cfg.decoder_units {
        let parsed = u.split(',').map(parse_units).collect::<Result<Vec<_>>>()?;
        let mut decoders: Vec<LayerUnits> = parsed.into_iter().map(|(a, b)| LayerUnits::new(a, b)).collect();
        if decoders.len() == 1 {
            decoders.resize(variant.decoder_count(), decoders[0]);
        }
        c.decoders = decoders;
    }
    if let Some(v) = cfg.dropout {
        c.dropout = v;
    }
    if let Some(v) = cfg.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = cfg.epochs {
        c.epochs = v;
    }
    if let Some(v) = cfg.learning_rate {
        c.learning_rate = v;
    }
    c.seed = cfg.seed();
    c.validate()?;
    Ok(c)
}

/// The split index at which a variant covers the whole sequence.
fn default_split_index(variant: Variant, timesteps: usize) -> usize {
    match variant {
        Variant::Reconstruct => timesteps,
        Variant::Future => 1,
        Variant::Joint => (timesteps / 2).max(1),
    }
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    let mut run = RunDir::create(cfg, "train")?;
    let emb = load_dataset(cfg)?;
    run.write_fingerprint(&emb)?;
    let gold = match &cfg.gold {
        Some(p) => read_gold(p)?,
        None => Vec::new(),
    };
    let s = resolve_split(cfg, &emb, &gold)?;
    run.write_json("split.json", &s)?;
    let base = model_config(cfg, &emb)?;

    let model = if let Some(trials) = cfg.search_trials {
        let mut trial_log = run.jsonl("search_trials.jsonl")?;
        let mut failed = None;
        let (model, outcome) = search(&emb, &s, &base, &SearchSpace::default(), trials, cfg.seed(), |t| {
            eprintln!(
                "trial {}: validation cosine {:.4}",
                t.trial + 1,
                t.score()
            );
            if let Err(e) = trial_log.push(t) {
                failed.get_or_insert(e);
            }
        })?;
        if let Some(e) = failed {
            return Err(e);
        }
        trial_log.finish()?;
        run.write_json("search.json", &outcome)?;
        let best = &outcome.trials[outcome.best_trial];
        let mut epoch_log = run.jsonl("train_log.jsonl")?;
        for e in &best.run.epochs {
            epoch_log.push(e)?;
        }
        epoch_log.finish()?;
        println!(
            "best validation cosine {:.6} (trial {}, epoch {})",
            best.score(),
            outcome.best_trial + 1,
            best.run.best_epoch
        );
        model
    } else {
        let mut epoch_log = run.jsonl("train_log.jsonl")?;
        let mut failed = None;
        let (model, tr) = train_with_log(&emb, &s, &base, |e| {
            eprintln!(
                "epoch {}: loss {:.6} validation {:?} ({:.1}s)",
                e.epoch, e.train_loss, e.validation_cosine, e.wall_seconds
            );
            if let Err(err) = epoch_log.push(e) {
                failed.get_or_insert(err);
            }
        })?;
        if let Some(e) = failed {
            return Err(e);
        }
        epoch_log.finish()?;
        match tr.best_validation_cosine {
            Some(v) => println!("best validation cosine {v:.6} (epoch {})", tr.best_epoch),
            None => println!("no validation words; kept epoch {}", tr.best_epoch),
        }
        model
    };
    let path = run.path("checkpoint.json");
    save_checkpoint(&model, &path)?;
    run.note(&format!("checkpoint written to {}", path.display()));
    Ok(())
}

pub fn cmd_score(cfg: &ExperimentConfig) -> Result<()> {
    let mut run = RunDir::create(cfg, "score")?;
    let emb = load_dataset(cfg)?;
    run.write_fingerprint(&emb)?;
    let ckpt = cfg.checkpoint.as_deref().context("--checkpoint is required")?;
    let model = load_checkpoint(ckpt)?;
    let gold = match &cfg.gold {
        Some(p) => read_gold(p)?,
        None => Vec::new(),
    };
    let s = resolve_split(cfg, &emb, &gold)?;
    let scores = change_scores(&model, &emb, &s.test)?;
    for &(w, t) in &scores.zero_norm {
        run.note(&format!(
            "zero-norm prediction for {} at {}; scored 0",
            emb.word(w),
            emb.labels()[t]
        ));
    }
    let ranking = Ranking::ascending(
        model.config().variant.name(),
        &format!("i={}", model.config().split_index),
        scores.words.iter().zip(&scores.scores).map(|(&w, &v)| (emb.word(w), v)),
    )?;
    write_ranking(&run.path("ranking.tsv"), &ranking)?;
    if !gold.is_empty() {
        let rep = evaluate(&ranking, &gold, &cfg.k_list()?)?;
        println!("{}", rep.to_json_line());
    }
    run.note(&format!("scored {} test words", ranking.len()));
    Ok(())
}

fn write_ranking(path: &Path, ranking: &Ranking) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    ranking.write_tsv(BufWriter::new(file))?;
    Ok(())
}

fn parse_methods(cfg: &ExperimentConfig) -> Result<Vec<Method>> {
    match &cfg.methods {
        None => Ok(Method::all()),
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(|m| m.parse::<Method>().map_err(Into::into))
            .collect(),
    }
}

fn default_i(method: &Method, timesteps: usize) -> usize {
    match method {
        Method::Seq { variant } => default_split_index(*variant, timesteps),
        _ => timesteps - 1,
    }
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ReportRecord<'a> {
    Row {
        method: &'a str,
        i: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        report: Option<&'a EvaluationReport>,
        #[serde(skip_serializing_if = "Option::is_none")]
        skipped: Option<&'a str>,
    },
    Summary {
        method: &'a str,
        summary: &'a semshift::evalrank::SweepSummary,
    },
}

/// Runs `evaluate` (`summarize = false`) or `sweep` (`true`).
pub fn cmd_evaluate(cfg: &ExperimentConfig, summarize: bool) -> Result<()> {
    let command = if summarize { "sweep" } else { "evaluate" };
    let mut run = RunDir::create(cfg, command)?;
    let emb = load_dataset(cfg)?;
    let methods = parse_methods(cfg)?;
    let ks = cfg.k_list()?;
    let t = emb.num_timesteps();

    let (emb, s, gold) = match (&cfg.gold, synthetic_spec(cfg)?) {
        (Some(_), Some(_)) => bail!("give either --gold or a synthetic spec (--c), not both"),
        (None, None) => bail!("a gold set is required: --gold FILE or --c for injected change"),
        (Some(p), None) => {
            let gold = read_gold(p)?;
            let s = resolve_split(cfg, &emb, &gold)?;
            (emb, s, gold)
        }
        (None, Some(spec)) => {
            let s = resolve_split(cfg, &emb, &[])?;
            let injection = inject(&emb, &s.test, &spec)?;
            let file = File::create(run.path("gold.tsv"))?;
            write_records(BufWriter::new(file), emb.labels(), &injection.records)?;
            let gold = injection.gold_words();
            (injection.embeddings, s, gold)
        }
    };
    run.write_fingerprint(&emb)?;
    run.write_json("split.json", &s)?;

    let seq = match cfg.search_trials {
        Some(trials) => SeqSetup::Search {
            space: SearchSpace::default(),
            trials,
        },
        None => SeqSetup::Fixed(model_config(
            &ExperimentConfig {
                split_index: None,
                ..cfg.clone()
            },
            &emb,
        )?),
    };
    let ctx = MethodContext {
        emb: &emb,
        split: &s,
        seq,
    };
    let explicit_i = cfg.i_list()?;
    let sweep_default: Vec<usize> = (1..t).collect();
    fs::create_dir_all(run.path("rankings"))?;
    let mut reports = run.jsonl(if summarize { "sweep.jsonl" } else { "reports.jsonl" })?;

    for method in &methods {
        let i_values = match (&explicit_i, summarize) {
            (Some(v), _) => v.clone(),
            (None, true) => sweep_default.clone(),
            (None, false) => vec![default_i(method, t)],
        };
        let mut rows = Vec::with_capacity(i_values.len());
        for &i in &i_values {
            if let Some(reason) = method.skip_reason(i, t) {
                run.note(&format!("{method} i={i}: skipped ({reason})"));
                rows.push(SweepRow {
                    i,
                    report: None,
                    skipped: Some(reason),
                });
                continue;
            }
            let out = run_method(&ctx, method, i, sweep_seed(cfg.seed(), i))?;
            let report = match &out {
                MethodOutput::Single(r) => evaluate(r, &gold, &ks)?,
                MethodOutput::Repeated(v) => evaluate_repeated(v, &gold, &ks)?,
            };
            let first = &out.rankings()[0];
            write_ranking(&run.path(&format!("rankings/{}_i{i}.tsv", method.name())), first)?;
            let recs: Vec<String> = report.rec_at.iter().map(|(k, v)| format!("Rec@{k}={v:.2}")).collect();
            println!("{:<12} i={:<3} mu_r={:6.2}  {}", method.name(), i, report.mu_r, recs.join(" "));
            rows.push(SweepRow {
                i,
                report: Some(report),
                skipped: None,
            });
        }
        let name = method.name();
        let table = SweepTable::from_rows(&name, rows);
        for row in &table.rows {
            reports.push(&ReportRecord::Row {
                method: &name,
                i: row.i,
                report: row.report.as_ref(),
                skipped: row.skipped.as_deref(),
            })?;
        }
        if summarize {
            if let Some(sm) = &table.summary {
                println!(
                    "{:<12} mean mu_r={:6.2} ± {:.2} over {} values of i",
                    name, sm.mu_r.mean, sm.mu_r.std, sm.mu_r.n
                );
                reports.push(&ReportRecord::Summary {
                    method: &name,
                    summary: sm,
                })?;
            }
        }
    }
    reports.finish()?;
    run.note(&format!("reports written to {}", run.root().display()));
    Ok(())
}
