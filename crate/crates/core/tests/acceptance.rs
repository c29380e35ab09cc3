//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; exits non-zero if any criterion fails.
//!
//! Criteria 2, 3, 4 and 8 train sequence models on a synthetic dataset and
//! take tens of minutes on one core.

use std::process::ExitCode;
use std::time::Instant;

use semshift::baselines::{procrustes, rank_random};
use semshift::embedstore::{split, SplitSpec, TemporalEmbeddings};
use semshift::evalrank::{
    evaluate_repeated, mu_r, rec_at_k, run_method, Method, MethodContext, MethodOutput, Ranking, SeqSetup,
};
use semshift::numerics::{derive_seed, finite_diff_grad, random_orthogonal, Matrix, SeedRng};
use semshift::seqmodel::{
    change_scores, loss, search, train, ModelConfig, SearchSpace, SeqModel, Variant,
};
use semshift::synthgen::{inject, DurationRegime, RegimeKind, SyntheticSpec};

// Tolerances.
const RAND_BAND: (f64, f64) = (49.0, 51.0);
const SEQ_MU_R_MAX: f64 = 35.0;
const JOINT_MU_R_MAX: f64 = 30.0;
const SEEDS_REQUIRED: usize = 2;
const PROCRUSTES_EXACT_MAX: f64 = 1e-6;
const PROCRUSTES_NOISY_MEAN_MAX: f64 = 1e-2;
const PROCRUSTES_NOISE: f64 = 1e-3;
const GRAD_REL_ERR_MAX: f64 = 1e-3;
const GRAD_DENOM_FLOOR: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;
const ADDITIVITY_MAX: f64 = 1e-12;
const BASELINE_MU_R_MAX: f64 = 45.0;

// Synthetic setup.
const WORDS: usize = 2000;
const DIM: usize = 50;
const STEPS: usize = 14;
const NOISE_FRACTION: f64 = 0.05;
const TRAIN_FRAC: f64 = 0.8;
const VAL_FRAC: f64 = 0.25;
const SEARCH_TRIALS: usize = 25;
const SEEDS: [u64; 3] = [0, 1, 2];
const SWEEP_I: [usize; 3] = [3, 7, 11];

struct Verdict {
    id: u32,
    pass: bool,
    detail: String,
}

fn report(id: u32, pass: bool, detail: String) -> Verdict {
    println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    Verdict { id, pass, detail }
}

fn main() -> ExitCode {
    let filter: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u32| filter.as_ref().is_none_or(|f| f.contains(&id));

    let mut verdicts = Vec::new();
    if wanted(1) {
        verdicts.push(rand_calibration());
    }
    if wanted(5) {
        verdicts.push(procrustes_oracle());
    }
    if wanted(6) {
        verdicts.push(gradient_suite());
    }
    if wanted(7) {
        verdicts.push(metric_oracles());
    }
    if [2, 3, 4, 8].into_iter().any(wanted) {
        verdicts.extend(synthetic_criteria(&wanted));
    }

    verdicts.sort_by_key(|v| v.id);
    println!();
    for v in &verdicts {
        println!("criterion {}: {} {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if verdicts.iter().all(|v| v.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn rand_calibration() -> Verdict {
    let words: Vec<String> = (0..500).map(|i| format!("w{i:03}")).collect();
    let mut rng = SeedRng::new(41);
    let gold: Vec<String> = rng.permutation(words.len())[..5].iter().map(|&k| words[k].clone()).collect();
    let rankings: Vec<Ranking> = (0..1000)
        .map(|r| rank_random(&words, derive_seed(41, r)).unwrap())
        .collect();
    let rep = evaluate_repeated(&rankings, &gold, &[5.0]).unwrap();
    let pass = (RAND_BAND.0..=RAND_BAND.1).contains(&rep.mu_r);
    report(
        1,
        pass,
        format!("mean mu_r {:.3} over 1000 rankings of 500 words, 5 gold (band [{}, {}])", rep.mu_r, RAND_BAND.0, RAND_BAND.1),
    )
}

fn procrustes_oracle() -> Verdict {
    let (n, d) = (300, 20);
    let mut rng = SeedRng::new(5);
    let reference = rng.normal_matrix(n, d, 1.0);
    let q = random_orthogonal(d, d, &mut rng);
    let src = reference.matmul_t(&q).unwrap();
    let exact = procrustes(&src, &reference, None).unwrap();
    let exact_max = exact.distances.iter().cloned().fold(0.0, f64::max);

    let scale = PROCRUSTES_NOISE * reference.frobenius_norm() / ((n * d) as f64).sqrt();
    let noise = rng.normal_matrix(n, d, scale);
    let noisy_src = Matrix::from_vec(
        n,
        d,
        src.as_slice().iter().zip(noise.as_slice()).map(|(a, b)| a + b).collect(),
    )
    .unwrap();
    let noisy = procrustes(&noisy_src, &reference, None).unwrap();
    let noisy_mean = noisy.distances.iter().sum::<f64>() / n as f64;
    let pass = exact_max < PROCRUSTES_EXACT_MAX && noisy_mean < PROCRUSTES_NOISY_MEAN_MAX;
    report(
        5,
        pass,
        format!(
            "exact max distance {exact_max:.2e} (< {PROCRUSTES_EXACT_MAX:e}), noisy mean {noisy_mean:.2e} (< {PROCRUSTES_NOISY_MEAN_MAX:e})"
        ),
    )
}

fn random_dataset(words: usize, steps: usize, dim: usize, seed: u64) -> TemporalEmbeddings {
    let mut rng = SeedRng::new(seed);
    let vocab = (0..words).map(|i| format!("w{i:04}")).collect();
    let labels = (0..steps).map(|t| (2000 + t).to_string()).collect();
    let data = (0..words * steps * dim).map(|_| rng.normal()).collect();
    TemporalEmbeddings::from_parts(vocab, labels, dim, data).unwrap()
}

fn gradient_suite() -> Verdict {
    let (t, d) = (3, 2);
    let emb = random_dataset(4, t, d, 5);
    let words = [0, 1, 2, 3];
    let mut worst = 0.0f64;
    let mut bad = 0;
    let mut checked = 0;
    for (variant, i) in [(Variant::Reconstruct, 3), (Variant::Future, 1), (Variant::Joint, 2)] {
        let model = SeqModel::new(ModelConfig::gradient_check(variant, i, t, d)).unwrap();
        let (_, analytic) = model.loss_and_gradient(&emb, &words).unwrap();
        let numeric = finite_diff_grad(
            |p| loss(&model.with_params(p.to_vec()).unwrap().predict(&emb, &words).unwrap()),
            model.params(),
            FD_STEP,
        );
        for (a, n) in analytic.iter().zip(&numeric) {
            checked += 1;
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(GRAD_DENOM_FLOOR);
            worst = worst.max(rel);
            if rel >= GRAD_REL_ERR_MAX {
                bad += 1;
            }
        }
    }
    report(
        6,
        bad == 0,
        format!("{checked} parameters over 3 variants, worst relative error {worst:.2e} (< {GRAD_REL_ERR_MAX:e}), {bad} over"),
    )
}

fn metric_oracles() -> Verdict {
    let mut rng = SeedRng::new(77);
    let ks = [1.0, 5.0, 10.0, 33.3, 50.0, 100.0];
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = 1 + rng.index(1000);
        let words: Vec<String> = (0..n).map(|i| format!("x{i:04}")).collect();
        // coarse scores so that ties occur
        let scores: Vec<f64> = (0..n).map(|_| (rng.unit() * 20.0).floor()).collect();
        let g = 1 + rng.index(n.min(60));
        let gold: Vec<String> = rng.permutation(n)[..g].iter().map(|&k| words[k].clone()).collect();
        let ranking = Ranking::ascending("oracle", "", words.iter().cloned().zip(scores.iter().cloned())).unwrap();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then_with(|| words[a].cmp(&words[b])));
        let pos: Vec<usize> = gold
            .iter()
            .map(|w| order.iter().position(|&k| &words[k] == w).unwrap() + 1)
            .collect();
        let brute_mu = pos.iter().sum::<usize>() as f64 / g as f64 / n as f64 * 100.0;
        if mu_r(&ranking, &gold).unwrap() != brute_mu {
            mismatches += 1;
        }
        for &k in &ks {
            let window = (k * n as f64 / 100.0).ceil() as usize;
            let hits = pos.iter().filter(|&&p| p <= window).count();
            let brute = hits as f64 / g as f64 * 100.0;
            if rec_at_k(&ranking, &gold, k).unwrap() != brute {
                mismatches += 1;
            }
        }
    }

    let labels: Vec<String> = (2000..2014).map(|y| y.to_string()).collect();
    let midpoint_ok = RegimeKind::ALL.iter().all(|&kind| {
        let s = DurationRegime::yearly(kind).schedule(&labels).unwrap();
        s.lambda(7) == 0.5
    });

    let emb = random_dataset(6, STEPS, 3, 9);
    let words: Vec<usize> = (0..6).collect();
    let i = 7;
    let joint = SeqModel::new(ModelConfig::gradient_check(Variant::Joint, i, STEPS, 3)).unwrap();
    let single = |variant: Variant| {
        let shell = SeqModel::new(ModelConfig::gradient_check(variant, i, STEPS, 3)).unwrap();
        let mut params = vec![0.0; shell.num_params()];
        let joint_tensors = joint.tensors();
        for spec in shell.tensors() {
            let src = joint_tensors.iter().find(|s| s.name == spec.name).unwrap();
            let len: usize = spec.shape.iter().product();
            params[spec.offset..spec.offset + len]
                .copy_from_slice(&joint.params()[src.offset..src.offset + len]);
        }
        loss(&shell.with_params(params).unwrap().predict(&emb, &words).unwrap())
    };
    let l_joint = loss(&joint.predict(&emb, &words).unwrap());
    let gap = (l_joint - single(Variant::Reconstruct) - single(Variant::Future)).abs();

    let pass = mismatches == 0 && midpoint_ok && gap <= ADDITIVITY_MAX;
    report(
        7,
        pass,
        format!(
            "100 instances, {mismatches} metric mismatches; midpoint 0.5 for all regimes: {midpoint_ok}; joint loss gap {gap:.1e} (<= {ADDITIVITY_MAX:e})"
        ),
    )
}

/// Desk-scale grid: a subset of the full search grid small enough for one core.
fn desk_space() -> SearchSpace {
    SearchSpace {
        encoder_first: vec![32, 64],
        encoder_second: vec![32, 64],
        decoder_first: vec![32, 64],
        decoder_second: vec![32, 64],
        dropout: vec![0.1, 0.25, 0.5],
        batch_size: vec![32, 64, 128],
        epochs: vec![10, 20],
    }
}

/// Base vector per word plus per-step noise whose norm is 5% of the base norm.
fn drifting_dataset(seed: u64) -> TemporalEmbeddings {
    let mut rng = SeedRng::new(seed);
    let vocab = (0..WORDS).map(|i| format!("w{i:04}")).collect();
    let labels = (0..STEPS).map(|t| (2000 + t).to_string()).collect();
    let mut data = Vec::with_capacity(WORDS * STEPS * DIM);
    for _ in 0..WORDS {
        let base: Vec<f64> = (0..DIM).map(|_| rng.normal()).collect();
        let base_norm = base.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..STEPS {
            let e: Vec<f64> = (0..DIM).map(|_| rng.normal()).collect();
            let s = NOISE_FRACTION * base_norm / e.iter().map(|x| x * x).sum::<f64>().sqrt();
            data.extend(base.iter().zip(&e).map(|(b, x)| b + s * x));
        }
    }
    TemporalEmbeddings::from_parts(vocab, labels, DIM, data).unwrap()
}

struct Setup {
    emb: TemporalEmbeddings,
    split: SplitSpec,
    gold: Vec<String>,
}

fn setup(seed: u64, c: f64) -> Setup {
    let clean = drifting_dataset(seed);
    let split = split::<&str>(&clean, TRAIN_FRAC, VAL_FRAC, seed, &[]).unwrap();
    let injection = inject(&clean, &split.test, &SyntheticSpec::new(c, RegimeKind::Full, seed)).unwrap();
    let gold = injection.gold_words();
    Setup {
        emb: injection.embeddings,
        split,
        gold,
    }
}

/// Split index at which each variant sees the whole sequence.
fn full_index(variant: Variant) -> usize {
    match variant {
        Variant::Reconstruct => STEPS,
        Variant::Future => 1,
        Variant::Joint => STEPS / 2,
    }
}

fn seq_mu_r(model: &SeqModel, s: &Setup) -> f64 {
    let scores = change_scores(model, &s.emb, &s.split.test).unwrap();
    let ranking = Ranking::ascending(
        model.config().variant.name(),
        "",
        scores.words.iter().zip(&scores.scores).map(|(&w, &v)| (s.emb.word(w), v)),
    )
    .unwrap();
    mu_r(&ranking, &s.gold).unwrap()
}

fn searched(s: &Setup, variant: Variant, seed: u64) -> (f64, ModelConfig) {
    let start = Instant::now();
    let base = ModelConfig::small(variant, full_index(variant), STEPS, DIM);
    let (model, outcome) = search(&s.emb, &s.split, &base, &desk_space(), SEARCH_TRIALS, seed, |_| {}).unwrap();
    let mu = seq_mu_r(&model, s);
    let best = outcome.trials[outcome.best_trial].config.clone();
    eprintln!(
        "  seed {seed} {variant}: mu_r {mu:.2} ({:.0}s, best trial {})",
        start.elapsed().as_secs_f64(),
        outcome.best_trial + 1
    );
    (mu, best)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn population_std(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

fn synthetic_criteria(wanted: &dyn Fn(u32) -> bool) -> Vec<Verdict> {
    let mut out = Vec::new();
    let need_seq = wanted(2) || wanted(3) || wanted(4);
    let mut joint_easy = Vec::new();
    let mut seed0_configs: Vec<(Variant, ModelConfig)> = Vec::new();
    let mut seeds_ok = 0;
    let mut lines = Vec::new();
    let mut baseline_worst = (0.0f64, String::new());

    for &seed in &SEEDS {
        let s = setup(seed, 0.0);
        eprintln!("seed {seed}: {} test words, {} gold", s.split.test.len(), s.gold.len());

        if wanted(8) {
            let ctx = MethodContext {
                emb: &s.emb,
                split: &s.split,
                seq: SeqSetup::Fixed(ModelConfig::small(Variant::Joint, 7, STEPS, DIM)),
            };
            for method in [Method::Procr, Method::ProcrStar, Method::GtBeta] {
                let MethodOutput::Single(r) = run_method(&ctx, &method, STEPS - 1, seed).unwrap() else {
                    unreachable!()
                };
                let mu = mu_r(&r, &s.gold).unwrap();
                eprintln!("  seed {seed} {method}: mu_r {mu:.2}");
                if mu > baseline_worst.0 {
                    baseline_worst = (mu, format!("{method} seed {seed}"));
                }
            }
        }

        if need_seq {
            let mut mus = Vec::new();
            for variant in Variant::ALL {
                let (mu, cfg) = searched(&s, variant, seed);
                if seed == SEEDS[0] {
                    seed0_configs.push((variant, cfg));
                }
                mus.push((variant, mu));
            }
            let all_ok = mus.iter().all(|&(_, m)| m <= SEQ_MU_R_MAX);
            let joint = mus.iter().find(|(v, _)| *v == Variant::Joint).unwrap().1;
            joint_easy.push(joint);
            if all_ok && joint <= JOINT_MU_R_MAX {
                seeds_ok += 1;
            }
            lines.push(format!(
                "seed {seed}: {}",
                mus.iter().map(|(v, m)| format!("{v} {m:.1}")).collect::<Vec<_>>().join(", ")
            ));
        }
    }

    if wanted(2) {
        out.push(report(
            2,
            seeds_ok >= SEEDS_REQUIRED,
            format!(
                "{seeds_ok}/3 seeds with every variant <= {SEQ_MU_R_MAX} and joint <= {JOINT_MU_R_MAX} [{}]",
                lines.join("; ")
            ),
        ));
    }

    if wanted(3) {
        let hard: Vec<f64> = SEEDS
            .iter()
            .map(|&seed| searched(&setup(seed, 0.5), Variant::Joint, seed).0)
            .collect();
        let (easy_med, hard_med) = (median(joint_easy.clone()), median(hard.clone()));
        out.push(report(
            3,
            easy_med < hard_med,
            format!("joint median mu_r {easy_med:.2} at c=0.0 vs {hard_med:.2} at c=0.5 (easy {joint_easy:.1?}, hard {hard:.1?})"),
        ));
    }

    if wanted(4) {
        let s = setup(SEEDS[0], 0.0);
        let mut stds = Vec::new();
        for (variant, cfg) in &seed0_configs {
            let mus: Vec<f64> = SWEEP_I
                .iter()
                .map(|&i| {
                    let cfg = ModelConfig {
                        split_index: i,
                        ..cfg.clone()
                    };
                    let (model, _) = train(&s.emb, &s.split, &cfg).unwrap();
                    seq_mu_r(&model, &s)
                })
                .collect();
            eprintln!("  sweep {variant}: {mus:.2?}");
            stds.push((*variant, population_std(&mus), mus));
        }
        let joint_std = stds.iter().find(|(v, ..)| *v == Variant::Joint).unwrap().1;
        let pass = stds.iter().filter(|(v, ..)| *v != Variant::Joint).all(|(_, sd, _)| joint_std < *sd);
        out.push(report(
            4,
            pass,
            format!(
                "std of mu_r over i in {SWEEP_I:?}: {}",
                stds.iter()
                    .map(|(v, sd, mus)| format!("{v} {sd:.2} {mus:.1?}"))
                    .collect::<Vec<_>>()
                    .join("; ")
            ),
        ));
    }

    if wanted(8) {
        out.push(report(
            8,
            baseline_worst.0 < BASELINE_MU_R_MAX,
            format!(
                "worst of procr, procr_star, gt_beta at i={} over 3 seeds: {:.2} ({}) (< {BASELINE_MU_R_MAX})",
                STEPS - 1,
                baseline_worst.0,
                baseline_worst.1
            ),
        ));
    }
    out
}
