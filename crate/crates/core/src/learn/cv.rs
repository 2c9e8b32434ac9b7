//! Stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{fit_forest, ForestParams};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 10;

/// Split `0..y.len()` into `k` folds. Each class is shuffled with the seed,
/// the class lists are concatenated (class 0 first) and indices are dealt to
/// folds round-robin with one running counter, so fold sizes and per-class
/// fold counts both differ by at most one.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = y.len();
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the sample count {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut counter = 0;
    for class in 0..=1u8 {
        let mut idx: Vec<usize> = (0..n).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[counter % k].push(i);
            counter += 1;
        }
    }
    if counter != n {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub params: ForestParams,
    pub seed: u64,
    /// Out-of-fold predicted label for every sample.
    pub predictions: Vec<u8>,
}

/// Train on each fold's complement and score accuracy on the fold.
pub fn cross_validate(x: &[Vec<f64>], y: &[u8], params: &ForestParams, k: usize, seed: u64) -> Result<CvResult> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let folds = stratified_kfold(y, k, seed)?;
    let per_fold: Vec<(f64, Vec<(usize, u8)>)> = folds
        .par_iter()
        .map(|test| {
            let mut in_test = vec![false; y.len()];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..y.len()).filter(|&i| !in_test[i]).collect();
            let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let model = fit_forest(&xt, &yt, params)?;
            let xs: Vec<Vec<f64>> = test.iter().map(|&i| x[i].clone()).collect();
            let pred = model.predict(&xs)?;
            let correct = test.iter().zip(&pred).filter(|(&i, p)| p.label == y[i]).count();
            Ok((correct as f64 / test.len() as f64, test.iter().zip(&pred).map(|(&i, p)| (i, p.label)).collect()))
        })
        .collect::<Result<_>>()?;
    let mut predictions = vec![0u8; y.len()];
    for (_, fold) in &per_fold {
        for &(i, label) in fold {
            predictions[i] = label;
        }
    }
    let fold_accuracies: Vec<f64> = per_fold.into_iter().map(|(a, _)| a).collect();
    let mean = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(CvResult {
        fold_accuracies,
        mean,
        params: params.clone(),
        seed,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_zeros_four_ones() {
        let y = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
        let folds = stratified_kfold(&y, 2, 3).unwrap();
        for f in &folds {
            let ones = f.iter().filter(|&&i| y[i] == 1).count();
            assert_eq!((f.len() - ones, ones), (3, 2));
        }
    }

    #[test]
    fn leave_one_out_and_errors() {
        let y = [0, 1, 0, 1, 1];
        let folds = stratified_kfold(&y, 5, 0).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
        assert!(stratified_kfold(&y, 6, 0).is_err());
        assert!(stratified_kfold(&y, 1, 0).is_err());
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i + 100 * (i / 20)) as f64, ((i * 17) % 7) as f64]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let params = ForestParams { n_trees: 30, ..Default::default() };
        let r = cross_validate(&x, &y, &params, 5, 1).unwrap();
        assert_eq!(r.fold_accuracies, vec![1.0; 5]);
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.predictions, y);
    }
}
