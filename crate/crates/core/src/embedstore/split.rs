use serde::{Deserialize, Serialize};

use super::{EmbedError, TemporalEmbeddings};
use crate::numerics::SeedRng;

/// Train / validation / test partition of word indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub train_frac: f64,
    pub val_frac_of_train: f64,
}

impl SplitSpec {
    pub fn words<'a>(&self, emb: &'a TemporalEmbeddings, set: &[usize]) -> Vec<&'a str> {
        set.iter().map(|&w| emb.word(w)).collect()
    }
}

/// Partitions the vocabulary.
///
/// Holdout words go straight to the test set. The remaining words are shuffled
/// with `seed`; the first `round(train_frac·n)` are training candidates, of
/// which the first `round(val_frac_of_train·n_train)` become validation words.
/// Every index list is returned sorted.
pub fn split<S: AsRef<str>>(
    emb: &TemporalEmbeddings,
    train_frac: f64,
    val_frac_of_train: f64,
    seed: u64,
    holdout: &[S],
) -> Result<SplitSpec, EmbedError> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(EmbedError::Invalid(format!(
            "train fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    if !(0.0..1.0).contains(&val_frac_of_train) {
        return Err(EmbedError::Invalid(format!(
            "validation fraction must lie in [0, 1), got {val_frac_of_train}"
        )));
    }
    let held = emb.indices_of(holdout)?;
    let mut is_held = vec![false; emb.num_words()];
    for &h in &held {
        is_held[h] = true;
    }
    let mut remaining: Vec<usize> = (0..emb.num_words()).filter(|&w| !is_held[w]).collect();
    SeedRng::new(seed).shuffle(&mut remaining);

    let n_trainval = (train_frac * remaining.len() as f64).round() as usize;
    let n_val = (val_frac_of_train * n_trainval as f64).round() as usize;
    let mut validation = remaining[..n_val].to_vec();
    let mut train = remaining[n_val..n_trainval].to_vec();
    let mut test: Vec<usize> = remaining[n_trainval..].to_vec();
    test.extend(held);
    test.dedup();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    test.dedup();
    Ok(SplitSpec {
        train,
        validation,
        test,
        seed,
        train_frac,
        val_frac_of_train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(n: usize) -> TemporalEmbeddings {
        let words = (0..n).map(|i| format!("w{i:03}")).collect();
        TemporalEmbeddings::from_parts(words, vec!["0".into()], 1, vec![1.0; n]).unwrap()
    }

    #[test]
    fn eighty_twenty_with_quarter_validation() {
        let e = vocab(100);
        let s = split::<&str>(&e, 0.8, 0.25, 1, &[]).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (60, 20, 20));
    }

    #[test]
    fn holdout_forced_into_test() {
        let e = vocab(100);
        let held = ["w003", "w010", "w050", "w077", "w099"];
        for seed in 0..10 {
            let s = split(&e, 0.8, 0.25, seed, &held).unwrap();
            for h in held {
                assert!(s.test.contains(&e.word_index(h).unwrap()));
            }
            assert_eq!(s.train.len() + s.validation.len() + s.test.len(), 100);
        }
    }

    #[test]
    fn deterministic_and_disjoint() {
        let e = vocab(57);
        let a = split::<&str>(&e, 0.7, 0.3, 9, &[]).unwrap();
        let b = split::<&str>(&e, 0.7, 0.3, 9, &[]).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a
            .train
            .iter()
            .chain(&a.validation)
            .chain(&a.test)
            .copied()
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 57);
    }

    #[test]
    fn missing_holdout_words_listed() {
        let e = vocab(10);
        let err = split(&e, 0.8, 0.25, 0, &["w001", "nope", "nada"]).unwrap_err();
        match err {
            EmbedError::MissingWords(m) => assert_eq!(m, vec!["nope", "nada"]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn fractions_validated() {
        let e = vocab(10);
        assert!(split::<&str>(&e, 1.0, 0.25, 0, &[]).is_err());
        assert!(split::<&str>(&e, 0.0, 0.25, 0, &[]).is_err());
        assert!(split::<&str>(&e, 0.5, 1.0, 0, &[]).is_err());
    }
}
