//! Seeded random hyperparameter search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, CvResult};
use super::forest::{ForestParams, MaxFeatures};
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub n_trees: Vec<usize>,
    /// Inclusive `[lo, hi]`, sampled log-uniformly.
    pub ccp_alpha: [f64; 2],
    pub max_features: Vec<MaxFeatures>,
    pub n_samples: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            n_trees: vec![100, 250, 500, 1000],
            ccp_alpha: [1e-4, 0.1],
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::All],
            n_samples: DEFAULT_SAMPLES,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees.is_empty() || self.max_features.is_empty() || self.n_samples == 0 {
            return Err(Error::Config("search space has an empty range".into()));
        }
        if self.n_trees.contains(&0) {
            return Err(Error::Config("n_trees choices must be positive".into()));
        }
        let [lo, hi] = self.ccp_alpha;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!("ccp_alpha range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Draw `n_samples` combinations with replacement and drop repeats,
    /// keeping first occurrences in draw order.
    pub fn sample(&self, base: &ForestParams, seed: u64) -> Result<Vec<ForestParams>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [lo, hi] = self.ccp_alpha;
        let mut out: Vec<ForestParams> = Vec::new();
        for _ in 0..self.n_samples {
            let n_trees = self.n_trees[rng.random_range(0..self.n_trees.len())];
            let ccp_alpha = if lo == hi { lo } else { (rng.random_range(lo.ln()..=hi.ln())).exp() };
            let max_features = self.max_features[rng.random_range(0..self.max_features.len())];
            let p = ForestParams {
                n_trees,
                ccp_alpha,
                max_features,
                ..base.clone()
            };
            if !out.contains(&p) {
                out.push(p);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub rank: usize,
    pub cv: CvResult,
}

/// Cross-validate every sampled combination and rank by mean accuracy,
/// ties keeping the earlier sample first.
pub fn random_search(x: &[Vec<f64>], y: &[u8], space: &SearchSpace, base: &ForestParams, k: usize, seed: u64) -> Result<Vec<SearchResult>> {
    let candidates = space.sample(base, seed)?;
    let mut results = candidates
        .iter()
        .map(|p| cross_validate(x, y, p, k, seed))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| b.mean.total_cmp(&a.mean));
    Ok(results
        .into_iter()
        .enumerate()
        .map(|(i, cv)| SearchResult { rank: i + 1, cv })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Vec<Vec<f64>>, Vec<u8>) {
        let x = (0..30).map(|i| vec![i as f64, (i % 4) as f64]).collect();
        let y = (0..30).map(|i| u8::from(i >= 15)).collect();
        (x, y)
    }

    #[test]
    fn singleton_space() {
        let space = SearchSpace {
            n_trees: vec![10],
            ccp_alpha: [0.01, 0.01],
            max_features: vec![MaxFeatures::All],
            n_samples: 50,
        };
        let (x, y) = data();
        let r = random_search(&x, &y, &space, &ForestParams::default(), 3, 4).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].cv.params.n_trees, 10);
        assert_eq!(r[0].rank, 1);
    }

    #[test]
    fn deterministic_ranking() {
        let space = SearchSpace {
            n_trees: vec![5, 10],
            n_samples: 6,
            ..Default::default()
        };
        let (x, y) = data();
        let a = random_search(&x, &y, &space, &ForestParams::default(), 3, 8).unwrap();
        let b = random_search(&x, &y, &space, &ForestParams::default(), 3, 8).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].cv.mean >= w[1].cv.mean));
        assert!(a.iter().all(|r| (1e-4..=0.1).contains(&r.cv.params.ccp_alpha)));
    }

    #[test]
    fn empty_space_rejected() {
        let space = SearchSpace { n_trees: vec![], ..Default::default() };
        assert!(space.sample(&ForestParams::default(), 0).is_err());
    }
}
