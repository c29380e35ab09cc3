//! Comparison rankers: orthogonal Procrustes alignment and its anchored
//! variants, trend tests on distance series, mean distance, and random order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedstore::TemporalEmbeddings;
use crate::evalrank::{EvalError, Ranking};
use crate::numerics::{cosine, svd, Matrix, NumericsError, SeedRng};

/// Stable-word fractions used when none is given.
pub const DEFAULT_K_PROCR_K: f64 = 0.9;
pub const DEFAULT_K_PROCR_KT: f64 = 0.5;

/// Trend models need at least this many points.
pub const MIN_TREND_LENGTH: usize = 3;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("year index {index} outside 1..{len}")]
    Year { index: usize, len: usize },
    #[error("stable fraction must lie in (0, 1], got {0}")]
    Fraction(f64),
    #[error("anchor list is empty")]
    NoAnchors,
    #[error("trend models need series of length >= {MIN_TREND_LENGTH}, got {0}")]
    SeriesTooShort(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("ranking: {0}")]
    Ranking(String),
}

impl From<EvalError> for BaselineError {
    fn from(e: EvalError) -> Self {
        BaselineError::Ranking(e.to_string())
    }
}

/// `1 − cos`, clamped to `[0, 2]`; a zero vector is at distance 1.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    (1.0 - cosine(a, b).unwrap_or(0.0)).clamp(0.0, 2.0)
}

#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// `d×d`; aligned rows are `w_src · R`.
    pub rotation: Matrix,
    /// Per-word distance between the aligned source row and the reference row.
    pub distances: Vec<f64>,
}

/// Orthogonal `R` minimizing `‖W_src·R − W_ref‖_F`, fitted on `anchors` when given.
pub fn procrustes(
    src: &Matrix,
    reference: &Matrix,
    anchors: Option<&[usize]>,
) -> Result<AlignmentResult, BaselineError> {
    if src.shape() != reference.shape() {
        return Err(BaselineError::Shape(format!(
            "source is {:?}, reference is {:?}",
            src.shape(),
            reference.shape()
        )));
    }
    let cross = match anchors {
        Some([]) => return Err(BaselineError::NoAnchors),
        Some(a) => {
            if let Some(&bad) = a.iter().find(|&&w| w >= src.rows()) {
                return Err(BaselineError::Shape(format!(
                    "anchor {bad} outside {} rows",
                    src.rows()
                )));
            }
            src.select_rows(a).t_matmul(&reference.select_rows(a))?
        }
        None => src.t_matmul(reference)?,
    };
    let f = svd(&cross)?;
    let rotation = f.u.matmul_t(&f.v)?;
    let aligned = src.matmul(&rotation)?;
    let distances = (0..src.rows())
        .map(|w| cosine_distance(aligned.row(w), reference.row(w)))
        .collect();
    Ok(AlignmentResult {
        rotation,
        distances,
    })
}

fn check_year(emb: &TemporalEmbeddings, i: usize) -> Result<(), BaselineError> {
    let len = emb.num_timesteps();
    if i == 0 || i >= len {
        return Err(BaselineError::Year { index: i, len });
    }
    Ok(())
}

fn check_fraction(k: f64) -> Result<(), BaselineError> {
    if !(k > 0.0 && k <= 1.0) {
        return Err(BaselineError::Fraction(k));
    }
    Ok(())
}

/// Full-vocabulary alignment of year `i` onto year 0.
pub fn align_to_first(
    emb: &TemporalEmbeddings,
    i: usize,
    anchors: Option<&[usize]>,
) -> Result<AlignmentResult, BaselineError> {
    procrustes(&emb.timestep_matrix(i), &emb.timestep_matrix(0), anchors)
}

fn rank_by_distance(
    emb: &TemporalEmbeddings,
    method: &str,
    parameters: &str,
    distances: &[f64],
    test: &[usize],
) -> Result<Ranking, BaselineError> {
    Ok(Ranking::descending(
        method,
        parameters,
        test.iter().map(|&w| (emb.word(w), distances[w])),
    )?)
}

/// Test words by descending distance after aligning year `i` onto year 0.
pub fn rank_procr(emb: &TemporalEmbeddings, i: usize, test: &[usize]) -> Result<Ranking, BaselineError> {
    check_year(emb, i)?;
    let a = align_to_first(emb, i, None)?;
    rank_by_distance(emb, "procr", &format!("i={i}"), &a.distances, test)
}

/// A ranking from a two-pass alignment, with the anchor set used.
#[derive(Debug, Clone)]
pub struct AnchoredRanking {
    pub ranking: Ranking,
    pub anchors: Vec<usize>,
    /// Fewer anchors than dimensions: the rotation may overfit them.
    pub underdetermined: bool,
}

/// The `⌈k·|V|⌉` words with the smallest stability score, ties by index.
pub fn stable_words(stability: &[f64], k: f64) -> Vec<usize> {
    let n = stability.len();
    let want = ((k * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| stability[a].total_cmp(&stability[b]).then(a.cmp(&b)));
    order.truncate(want.min(n));
    order.sort_unstable();
    order
}

fn anchored(
    emb: &TemporalEmbeddings,
    i: usize,
    stability: &[f64],
    k: f64,
    method: &str,
    test: &[usize],
) -> Result<AnchoredRanking, BaselineError> {
    let anchors = stable_words(stability, k);
    let a = align_to_first(emb, i, Some(&anchors))?;
    let ranking = rank_by_distance(emb, method, &format!("i={i} k={k}"), &a.distances, test)?;
    Ok(AnchoredRanking {
        underdetermined: anchors.len() < emb.dim(),
        anchors,
        ranking,
    })
}

/// Stability from a first full-vocabulary alignment of `[W_0, W_i]`, then
/// a second alignment on the most stable words.
pub fn rank_procr_k(
    emb: &TemporalEmbeddings,
    i: usize,
    k: f64,
    test: &[usize],
) -> Result<AnchoredRanking, BaselineError> {
    check_year(emb, i)?;
    check_fraction(k)?;
    let first = align_to_first(emb, i, None)?;
    anchored(emb, i, &first.distances, k, "procr_k", test)
}

/// Stability is each word's mean first-pass distance over every year aligned
/// onto year 0; the most stable words anchor the year-`i` alignment.
pub fn rank_procr_kt(
    emb: &TemporalEmbeddings,
    i: usize,
    k: f64,
    test: &[usize],
) -> Result<AnchoredRanking, BaselineError> {
    check_year(emb, i)?;
    check_fraction(k)?;
    let stability = stability_over_time(emb)?;
    anchored(emb, i, &stability, k, "procr_kt", test)
}

/// Mean distance of every word over alignments of years `1..T` onto year 0.
pub fn stability_over_time(emb: &TemporalEmbeddings) -> Result<Vec<f64>, BaselineError> {
    let series = distance_series(emb, emb.num_timesteps() - 1)?;
    Ok(series.means())
}

/// Per-word distances to year 0 for years `1..=i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSeries {
    /// `values[w][t-1]` is word `w`'s distance at year `t`.
    pub values: Vec<Vec<f64>>,
}

impl DistanceSeries {
    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn means(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|s| s.iter().sum::<f64>() / s.len().max(1) as f64)
            .collect()
    }
}

pub fn distance_series(emb: &TemporalEmbeddings, i: usize) -> Result<DistanceSeries, BaselineError> {
    check_year(emb, i)?;
    let mut values = vec![Vec::with_capacity(i); emb.num_words()];
    let reference = emb.timestep_matrix(0);
    for t in 1..=i {
        let a = procrustes(&emb.timestep_matrix(t), &reference, None)?;
        for (w, d) in a.distances.into_iter().enumerate() {
            values[w].push(d);
        }
    }
    Ok(DistanceSeries { values })
}

/// Pearson correlation; zero when either side has no variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Least-squares slope of `ys` on `xs`; zero when `xs` has no variance.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx <= 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn time_axis(len: usize) -> Vec<f64> {
    (1..=len).map(|t| t as f64).collect()
}

fn rank_series<F: Fn(&[f64], &[f64]) -> f64>(
    emb: &TemporalEmbeddings,
    series: &DistanceSeries,
    test: &[usize],
    method: &str,
    stat: F,
) -> Result<Ranking, BaselineError> {
    let len = series.len();
    if len < MIN_TREND_LENGTH {
        return Err(BaselineError::SeriesTooShort(len));
    }
    let t = time_axis(len);
    Ok(Ranking::descending(
        method,
        &format!("i={len}"),
        test.iter().map(|&w| (emb.word(w), stat(&t, &series.values[w]).abs())),
    )?)
}

/// By descending `|r|` between distance and time.
pub fn rank_gt_c(
    emb: &TemporalEmbeddings,
    series: &DistanceSeries,
    test: &[usize],
) -> Result<Ranking, BaselineError> {
    rank_series(emb, series, test, "gt_c", pearson)
}

/// By descending `|slope|` of distance regressed on time.
pub fn rank_gt_beta(
    emb: &TemporalEmbeddings,
    series: &DistanceSeries,
    test: &[usize],
) -> Result<Ranking, BaselineError> {
    rank_series(emb, series, test, "gt_beta", ols_slope)
}

/// By descending mean distance over years `1..=i`.
pub fn rank_procr_star(
    emb: &TemporalEmbeddings,
    series: &DistanceSeries,
    test: &[usize],
) -> Result<Ranking, BaselineError> {
    let means = series.means();
    Ok(Ranking::descending(
        "procr_star",
        &format!("i={}", series.len()),
        test.iter().map(|&w| (emb.word(w), means[w])),
    )?)
}

/// A uniformly random order of `words`.
pub fn rank_random<S: AsRef<str>>(words: &[S], seed: u64) -> Result<Ranking, BaselineError> {
    let mut order: Vec<&str> = words.iter().map(AsRef::as_ref).collect();
    order.sort_unstable();
    SeedRng::new(seed).shuffle(&mut order);
    Ok(Ranking::from_order("rand", &format!("seed={seed}"), order)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random_orthogonal;

    fn orthogonality_error(r: &Matrix) -> f64 {
        r.t_matmul(r).unwrap().max_abs_diff(&Matrix::identity(r.rows()))
    }

    #[test]
    fn identity_alignment() {
        let mut rng = SeedRng::new(1);
        let w = rng.normal_matrix(30, 5, 1.0);
        let a = procrustes(&w, &w, None).unwrap();
        assert!(a.distances.iter().all(|d| *d < 1e-8));
        assert!(orthogonality_error(&a.rotation) < 1e-8);
    }

    #[test]
    fn recovers_a_rotation() {
        let mut rng = SeedRng::new(2);
        let reference = rng.normal_matrix(200, 10, 1.0);
        let q = random_orthogonal(10, 10, &mut rng);
        let src = reference.matmul_t(&q).unwrap();
        let a = procrustes(&src, &reference, None).unwrap();
        assert!(a.distances.iter().all(|d| *d < 1e-6));
        // the fitted rotation undoes q: src·R = ref·qᵀ·R = ref
        assert!(a.rotation.max_abs_diff(&q) < 1e-8);
    }

    #[test]
    fn single_stable_anchor() {
        // three words in 2-d; word 0 keeps its place, 1 and 2 swap directions
        let reference = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let src = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let a = procrustes(&src, &reference, Some(&[0])).unwrap();
        assert!(a.distances[0] < 1e-12);
        assert!(a.distances[1] > 0.1 && a.distances[2] > 0.1);
        assert!(orthogonality_error(&a.rotation) < 1e-8);
    }

    #[test]
    fn mismatched_shapes_and_empty_anchors() {
        let a = Matrix::zeros(3, 2);
        let b = Matrix::zeros(4, 2);
        assert!(procrustes(&a, &b, None).is_err());
        assert!(matches!(procrustes(&a, &a, Some(&[])), Err(BaselineError::NoAnchors)));
    }

    #[test]
    fn rank_deficient_cross_covariance() {
        let src = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]).unwrap();
        let a = procrustes(&src, &src, None).unwrap();
        assert!(orthogonality_error(&a.rotation) < 1e-8);
        assert!(a.distances.iter().all(|d| *d < 1e-8));
    }

    #[test]
    fn trend_statistics() {
        assert!((pearson(&[1., 2., 3.], &[0.1, 0.2, 0.3]) - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1., 2., 3.], &[0.4, 0.4, 0.4]), 0.0);
        assert!((ols_slope(&[1., 2., 3.], &[0.0, 0.1, 0.2]) - 0.1).abs() < 1e-12);
        assert_eq!(ols_slope(&[1., 2., 3.], &[0.2, 0.2, 0.2]), 0.0);
        let up = ols_slope(&[1., 2., 3.], &[0.0, 0.1, 0.2]);
        let down = ols_slope(&[1., 2., 3.], &[0.2, 0.1, 0.0]);
        assert!((up.abs() - down.abs()).abs() < 1e-15);
    }

    #[test]
    fn stable_word_count_uses_ceiling() {
        let s = [0.3, 0.1, 0.2, 0.0];
        assert_eq!(stable_words(&s, 0.5), vec![1, 3]);
        assert_eq!(stable_words(&s, 0.6), vec![1, 2, 3]);
        assert_eq!(stable_words(&s, 1.0), vec![0, 1, 2, 3]);
        assert_eq!(stable_words(&s, 0.01), vec![3]);
    }

    #[test]
    fn random_ranking_is_seeded() {
        let words: Vec<String> = (0..20).map(|k| format!("w{k}")).collect();
        let a = rank_random(&words, 4).unwrap();
        let b = rank_random(&words, 4).unwrap();
        let c = rank_random(&words, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.words().collect::<Vec<_>>(), c.words().collect::<Vec<_>>());
        assert_eq!(a.len(), 20);
    }

    #[test]
    fn distance_helper() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-2.0, 0.0]), 2.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 0.0]), 1.0);
        assert!(cosine_distance(&[1.0, 1.0], &[2.0, 2.0]) < 1e-15);
    }
}
