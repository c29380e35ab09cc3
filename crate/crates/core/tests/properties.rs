use proptest::prelude::*;

use semshift::baselines::{ols_slope, pearson, procrustes, rank_procr};
use semshift::embedstore::TemporalEmbeddings;
use semshift::evalrank::{evaluate, mu_r, rec_at_k, Ranking};
use semshift::numerics::{random_orthogonal, svd, Matrix, SeedRng};
use semshift::seqmodel::{
    loss, ChangeScores, DecoderKind, LayerUnits, ModelConfig, PredictionSet, Segment, SeqModel,
    Variant,
};
use semshift::synthgen::{DurationRegime, RegimeKind};

fn shuffled_ranking(n: usize, seed: u64) -> Ranking {
    let mut words: Vec<String> = (0..n).map(|k| format!("w{k:04}")).collect();
    SeedRng::new(seed).shuffle(&mut words);
    Ranking::from_order("p", "", words).unwrap()
}

fn gold_subset(n: usize, g: usize, seed: u64) -> Vec<String> {
    let mut rng = SeedRng::new(seed ^ 0xabcd);
    let mut idx = rng.permutation(n);
    idx.truncate(g.clamp(1, n));
    idx.into_iter().map(|k| format!("w{k:04}")).collect()
}

fn random_embeddings(words: usize, steps: usize, dim: usize, seed: u64) -> TemporalEmbeddings {
    let mut rng = SeedRng::new(seed);
    let vocab = (0..words).map(|k| format!("w{k:03}")).collect();
    let labels = (0..steps).map(|t| (2000 + t).to_string()).collect();
    let data = (0..words * steps * dim).map(|_| rng.normal()).collect();
    TemporalEmbeddings::from_parts(vocab, labels, dim, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reversed_ranking_mirrors_mu_r(n in 1usize..300, g in 1usize..30, seed in any::<u64>()) {
        let r = shuffled_ranking(n, seed);
        let gold = gold_subset(n, g, seed);
        let a = mu_r(&r, &gold).unwrap();
        let b = mu_r(&r.reversed(), &gold).unwrap();
        let expect = 100.0 * (n as f64 + 1.0) / n as f64;
        prop_assert!((a + b - expect).abs() < 1e-9);
    }

    #[test]
    fn recall_is_monotone_in_k(n in 1usize..300, g in 1usize..30, seed in any::<u64>(),
                               mut ks in proptest::collection::vec(0.5f64..100.0, 2..6)) {
        let r = shuffled_ranking(n, seed);
        let gold = gold_subset(n, g, seed);
        ks.sort_by(f64::total_cmp);
        let vals: Vec<f64> = ks.iter().map(|&k| rec_at_k(&r, &gold, k).unwrap()).collect();
        prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(vals.iter().all(|v| (0.0..=100.0).contains(v)));
    }

    #[test]
    fn whole_test_set_as_gold(n in 1usize..300, seed in any::<u64>()) {
        let r = shuffled_ranking(n, seed);
        let gold: Vec<String> = r.words().map(String::from).collect();
        let expect = 50.0 * (n as f64 + 1.0) / n as f64;
        prop_assert!((mu_r(&r, &gold).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn report_bounds(n in 1usize..400, g in 1usize..40, seed in any::<u64>()) {
        let r = shuffled_ranking(n, seed);
        let gold = gold_subset(n, g, seed);
        let rep = evaluate(&r, &gold, &[5.0, 10.0, 50.0]).unwrap();
        prop_assert!(rep.mu_r > 0.0 && rep.mu_r <= 100.0);
        prop_assert!(rep.rec_at.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn ranking_is_a_total_order(scores in proptest::collection::vec(-3i32..3, 1..60)) {
        let items: Vec<(String, f64)> = scores
            .iter()
            .enumerate()
            .map(|(k, &s)| (format!("w{:02}", (k * 37) % 61), s as f64))
            .collect();
        let r = Ranking::ascending("m", "", items.clone()).unwrap();
        prop_assert_eq!(r.len(), items.len());
        for w in r.entries().windows(2) {
            prop_assert!(w[0].score < w[1].score || (w[0].score == w[1].score && w[0].word < w[1].word));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn svd_reconstructs(rows in 1usize..9, cols in 1usize..9, seed in any::<u64>()) {
        let m = SeedRng::new(seed).normal_matrix(rows, cols, 1.0);
        let f = svd(&m).unwrap();
        prop_assert!(f.reconstruct().max_abs_diff(&m) < 1e-10);
        prop_assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        let k = rows.min(cols);
        prop_assert!(f.u.t_matmul(&f.u).unwrap().max_abs_diff(&Matrix::identity(k)) < 1e-10);
        prop_assert!(f.v.t_matmul(&f.v).unwrap().max_abs_diff(&Matrix::identity(k)) < 1e-10);
    }

    #[test]
    fn procrustes_beats_random_rotations(n in 5usize..40, d in 1usize..6, seed in any::<u64>()) {
        let mut rng = SeedRng::new(seed);
        let src = rng.normal_matrix(n, d, 1.0);
        let reference = rng.normal_matrix(n, d, 1.0);
        let a = procrustes(&src, &reference, None).unwrap();
        let rt_r = a.rotation.t_matmul(&a.rotation).unwrap();
        prop_assert!(rt_r.max_abs_diff(&Matrix::identity(d)) < 1e-8);
        prop_assert!(a.distances.iter().all(|x| (0.0..=2.0).contains(x)));
        let err = |r: &Matrix| src.matmul(r).unwrap().sub(&reference).unwrap().frobenius_norm();
        let best = err(&a.rotation);
        for _ in 0..100 {
            let q = random_orthogonal(d, d, &mut rng);
            prop_assert!(best <= err(&q) + 1e-9);
        }
    }

    #[test]
    fn procr_invariant_to_joint_rotation(seed in any::<u64>()) {
        let emb = random_embeddings(30, 3, 4, seed);
        let mut rng = SeedRng::new(seed.wrapping_add(1));
        let q = random_orthogonal(4, 4, &mut rng);
        let rotated: Vec<f64> = {
            let mut out = Vec::new();
            for w in 0..emb.num_words() {
                for t in 0..emb.num_timesteps() {
                    let row = Matrix::from_vec(1, 4, emb.vector(w, t).to_vec()).unwrap();
                    out.extend_from_slice(row.matmul(&q).unwrap().as_slice());
                }
            }
            out
        };
        let emb_q = TemporalEmbeddings::from_parts(emb.vocab().to_vec(), emb.labels().to_vec(), 4, rotated).unwrap();
        let test: Vec<usize> = (0..30).collect();
        let a = rank_procr(&emb, 2, &test).unwrap();
        let b = rank_procr(&emb_q, 2, &test).unwrap();
        for (x, y) in a.entries().iter().zip(b.entries()) {
            prop_assert!((x.score - y.score).abs() < 1e-8);
        }
    }

    #[test]
    fn trend_ranking_survives_time_rescaling(seed in any::<u64>(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let mut rng = SeedRng::new(seed);
        let series: Vec<Vec<f64>> = (0..20).map(|_| (0..6).map(|_| rng.unit()).collect()).collect();
        let t: Vec<f64> = (1..=6).map(|x| x as f64).collect();
        let t2: Vec<f64> = t.iter().map(|x| scale * x + shift).collect();
        let order = |f: &dyn Fn(&[f64], &[f64]) -> f64, axis: &[f64]| {
            Ranking::descending("m", "", series.iter().enumerate().map(|(k, s)| (format!("w{k:02}"), f(axis, s).abs())))
                .unwrap()
                .words()
                .map(String::from)
                .collect::<Vec<_>>()
        };
        // pearson is exactly invariant; the slope is rescaled by 1/scale
        let c1 = order(&pearson, &t);
        let c2 = order(&pearson, &t2);
        let close_pearson = series.iter().all(|s| (pearson(&t, s) - pearson(&t2, s)).abs() < 1e-9);
        prop_assert!(close_pearson);
        if c1 != c2 {
            // only near-ties may swap
            let vals: Vec<f64> = series.iter().map(|s| pearson(&t, s).abs()).collect();
            let mut sorted = vals.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assert!(sorted.windows(2).any(|w| w[1] - w[0] < 1e-9));
        }
        let b1 = order(&ols_slope, &t);
        let b2 = order(&ols_slope, &t2);
        let vals: Vec<f64> = series.iter().map(|s| ols_slope(&t, s).abs()).collect();
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert!(b1 == b2 || sorted.windows(2).any(|w| w[1] - w[0] < 1e-9));
    }

    #[test]
    fn decay_schedule_is_monotone(kind_idx in 0usize..4) {
        let kinds = [RegimeKind::Full, RegimeKind::Half, RegimeKind::OneThird, RegimeKind::Quarter];
        let labels: Vec<String> = (2000..2014).map(|y| y.to_string()).collect();
        let s = DurationRegime::yearly(kinds[kind_idx]).schedule(&labels).unwrap();
        let l: Vec<f64> = (0..14).map(|t| s.lambda(t)).collect();
        prop_assert!(l.iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert!(l.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(l[7], 0.5);
    }

    #[test]
    fn joint_covers_every_step(t in 2usize..9, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let i = 1 + ((t - 1) as f64 * frac) as usize;
        let i = i.min(t - 1);
        let emb = random_embeddings(3, t, 2, seed);
        let mut c = ModelConfig::small(Variant::Joint, i, t, 2);
        c.encoder = LayerUnits::new(2, 2);
        c.decoders = vec![LayerUnits::new(2, 2); 2];
        let joint = SeqModel::new(c.clone()).unwrap().predict(&emb, &[0, 1, 2]).unwrap();
        prop_assert_eq!(joint.covered_steps(), (0..t).collect::<Vec<_>>());
        let sum = joint.segments[0].loss() + joint.segments[1].loss();
        prop_assert!((loss(&joint) - sum).abs() <= 1e-12);

        c.variant = Variant::Reconstruct;
        c.decoders.truncate(1);
        let r = SeqModel::new(c.clone()).unwrap().predict(&emb, &[0, 1, 2]).unwrap();
        prop_assert!(r.covered_steps().len() < t);
        let mut full = c.clone();
        full.split_index = t;
        let r = SeqModel::new(full).unwrap().predict(&emb, &[0, 1, 2]).unwrap();
        prop_assert_eq!(r.covered_steps(), (0..t).collect::<Vec<_>>());
        c.variant = Variant::Future;
        let f = SeqModel::new(c).unwrap().predict(&emb, &[0, 1, 2]).unwrap();
        prop_assert_eq!(f.covered_steps() == (1..t).collect::<Vec<_>>(), i == 1);
    }

    #[test]
    fn score_ignores_positive_scaling_of_actuals(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let mut rng = SeedRng::new(seed);
        let pred: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
        let act: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
        let mk = |a: Vec<f64>| PredictionSet {
            words: vec![0, 1],
            dim: 3,
            segments: vec![Segment { kind: DecoderKind::Future, start: 1, end: 3, predicted: pred.clone(), actual: a }],
        };
        let base = ChangeScores::from_predictions(&mk(act.clone()));
        let mut scaled = act.clone();
        scaled[..3].iter_mut().for_each(|v| *v *= scale);
        let other = ChangeScores::from_predictions(&mk(scaled));
        for (a, b) in base.scores.iter().zip(&other.scores) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
