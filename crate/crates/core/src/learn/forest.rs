//! Random forest of CART trees with Gini impurity and minimal cost-complexity
//! pruning.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

/// Features examined per split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MaxFeaturesRepr", into = "MaxFeaturesRepr")]
pub enum MaxFeatures {
    /// `ceil(sqrt(p))`.
    Sqrt,
    All,
    Count(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MaxFeaturesRepr {
    Count(usize),
    Name(String),
}

impl TryFrom<MaxFeaturesRepr> for MaxFeatures {
    type Error = String;
    fn try_from(r: MaxFeaturesRepr) -> Result<Self, String> {
        match r {
            MaxFeaturesRepr::Count(0) => Err("max_features must be positive".into()),
            MaxFeaturesRepr::Count(n) => Ok(MaxFeatures::Count(n)),
            MaxFeaturesRepr::Name(s) => s.parse(),
        }
    }
}

impl From<MaxFeatures> for MaxFeaturesRepr {
    fn from(m: MaxFeatures) -> Self {
        match m {
            MaxFeatures::Count(n) => MaxFeaturesRepr::Count(n),
            other => MaxFeaturesRepr::Name(other.to_string()),
        }
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "all" => Ok(MaxFeatures::All),
            _ => match s.parse::<usize>() {
                Ok(n) if n > 0 => Ok(MaxFeatures::Count(n)),
                _ => Err(format!("max_features must be \"sqrt\", \"all\" or a positive integer, got {s:?}")),
            },
        }
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::All => f.write_str("all"),
            MaxFeatures::Count(n) => write!(f, "{n}"),
        }
    }
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (p as f64).sqrt().ceil() as usize,
            MaxFeatures::All => p,
            MaxFeatures::Count(n) => n,
        };
        m.clamp(1, p.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub ccp_alpha: f64,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    /// Draw a bootstrap sample per tree; otherwise every tree sees all rows.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 1000,
            ccp_alpha: 0.01,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if !(self.ccp_alpha.is_finite() && self.ccp_alpha >= 0.0) {
            return Err(Error::Config(format!("ccp_alpha must be non-negative, got {}", self.ccp_alpha)));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }
        Ok(())
    }
}

/// Tree node, serialized as nested arrays: a leaf is `[n0, n1]` (class
/// counts), a split is `[feature, threshold, [n0, n1], left, right]`.
/// Samples with `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Leaf([u64; 2]),
    Split(usize, f64, [u64; 2], Box<Node>, Box<Node>),
}

fn gini(c: [u64; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (c[0] as f64 / n, c[1] as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

/// Majority class, ties to class 0.
fn majority(c: [u64; 2]) -> u8 {
    u8::from(c[1] > c[0])
}

impl Node {
    pub fn counts(&self) -> [u64; 2] {
        match self {
            Node::Leaf(c) | Node::Split(_, _, c, _, _) => *c,
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split(_, _, _, l, r) => l.leaves() + r.leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split(_, _, _, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        match self {
            Node::Leaf(c) => majority(*c),
            Node::Split(f, t, _, l, r) => {
                if x[*f] <= *t {
                    l.predict(x)
                } else {
                    r.predict(x)
                }
            }
        }
    }

    /// Node risk `R(t) = n_t / N * gini(t)`.
    pub fn risk(&self, n_total: f64) -> f64 {
        let c = self.counts();
        (c[0] + c[1]) as f64 / n_total * gini(c)
    }

    /// Smallest subtree minimizing `R(T) + alpha * |leaves(T)|`, where `N` is
    /// the sample count at the root.
    pub fn prune(&self, alpha: f64) -> Node {
        let c = self.counts();
        let n_total = (c[0] + c[1]) as f64;
        self.prune_inner(alpha, n_total).0
    }

    fn prune_inner(&self, alpha: f64, n_total: f64) -> (Node, f64) {
        match self {
            Node::Leaf(c) => (Node::Leaf(*c), self.risk(n_total) + alpha),
            Node::Split(f, t, c, l, r) => {
                let (lp, lc) = l.prune_inner(alpha, n_total);
                let (rp, rc) = r.prune_inner(alpha, n_total);
                let as_leaf = self.risk(n_total) + alpha;
                if as_leaf <= lc + rc {
                    (Node::Leaf(*c), as_leaf)
                } else {
                    (Node::Split(*f, *t, *c, Box::new(lp), Box::new(rp)), lc + rc)
                }
            }
        }
    }
}

/// Column-major feature matrix with binary labels.
pub(crate) struct Columns<'a> {
    pub cols: Vec<Vec<f64>>,
    pub y: &'a [u8],
}

impl<'a> Columns<'a> {
    pub fn new(x: &[Vec<f64>], y: &'a [u8]) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::invalid(format!("{n} rows but {} labels", y.len())));
        }
        if n < 2 {
            return Err(Error::invalid("at least two samples are required"));
        }
        let p = x[0].len();
        if p == 0 {
            return Err(Error::invalid("feature matrix has no columns"));
        }
        if let Some(row) = x.iter().position(|r| r.len() != p) {
            return Err(Error::invalid(format!("row {row} has {} features, expected {p}", x[row].len())));
        }
        if let Some(row) = x.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid(format!("row {row} contains a non-finite feature value")));
        }
        if let Some(&bad) = y.iter().find(|&&v| v > 1) {
            return Err(Error::invalid(format!("labels must be 0 or 1, got {bad}")));
        }
        Ok(Self {
            cols: (0..p).map(|j| x.iter().map(|r| r[j]).collect()).collect(),
            y,
        })
    }

    fn counts(&self, samples: &[usize]) -> [u64; 2] {
        let mut c = [0u64; 2];
        for &i in samples {
            c[self.y[i] as usize] += 1;
        }
        c
    }
}

/// Best threshold on one feature as `(weighted child impurity, threshold)`.
/// `None` when the feature is constant over the node.
fn best_threshold(col: &[f64], y: &[u8], samples: &mut [usize], total: [u64; 2]) -> Option<(f64, f64)> {
    samples.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let n = samples.len() as f64;
    let mut left = [0u64; 2];
    let mut best: Option<(f64, f64)> = None;
    for w in 0..samples.len() - 1 {
        left[y[samples[w]] as usize] += 1;
        let (v, next) = (col[samples[w]], col[samples[w + 1]]);
        if v == next {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let nl = (left[0] + left[1]) as f64;
        let score = (nl * gini(left) + (n - nl) * gini(right)) / n;
        if best.is_none_or(|(b, _)| score < b) {
            let mut t = v + (next - v) / 2.0;
            if t >= next {
                t = v;
            }
            best = Some((score, t));
        }
    }
    best
}

/// Grow an unpruned tree over `samples` (row indices, repeats allowed).
///
/// At every node the features are visited in a fresh random order until
/// `max_features` non-constant ones have been scored and a split exists.
pub(crate) fn grow(data: &Columns<'_>, samples: &mut [usize], max_features: usize, min_split: usize, rng: &mut impl Rng) -> Node {
    let counts = data.counts(samples);
    if counts[0] == 0 || counts[1] == 0 || samples.len() < min_split {
        return Node::Leaf(counts);
    }
    let p = data.cols.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut visited = 0;
    for &f in &order {
        if visited >= max_features && best.is_some() {
            break;
        }
        if let Some((score, t)) = best_threshold(&data.cols[f], data.y, samples, counts) {
            visited += 1;
            if best.is_none_or(|(b, _, _)| score < b) {
                best = Some((score, f, t));
            }
        }
    }
    let Some((_, f, t)) = best else {
        return Node::Leaf(counts);
    };
    let col = &data.cols[f];
    samples.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
    let cut = samples.partition_point(|&i| col[i] <= t);
    let (l, r) = samples.split_at_mut(cut);
    let left = grow(data, l, max_features, min_split, rng);
    let right = grow(data, r, max_features, min_split, rng);
    Node::Split(f, t, counts, Box::new(left), Box::new(right))
}

/// RNG for tree `index`: one ChaCha stream per tree under the forest seed.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub version: u32,
    pub params: ForestParams,
    pub classes: [u8; 2],
    pub n_features: usize,
    /// Optional column names, empty or of length `n_features`.
    pub feature_names: Vec<String>,
    pub trees: Vec<Node>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: u8,
    /// Fraction of trees voting for class 0 and 1.
    pub votes: [f64; 2],
}

/// Fit a forest on row-major `x` with labels in `{0, 1}`.
pub fn fit_forest(x: &[Vec<f64>], y: &[u8], params: &ForestParams) -> Result<ForestModel> {
    fit_forest_named(x, y, params, Vec::new())
}

pub fn fit_forest_named(x: &[Vec<f64>], y: &[u8], params: &ForestParams, feature_names: Vec<String>) -> Result<ForestModel> {
    params.validate()?;
    let data = Columns::new(x, y)?;
    let p = data.cols.len();
    if !feature_names.is_empty() && feature_names.len() != p {
        return Err(Error::invalid(format!("{} feature names for {p} columns", feature_names.len())));
    }
    let n = y.len();
    let m = params.max_features.resolve(p);
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let mut samples: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let tree = grow(&data, &mut samples, m, params.min_samples_split, &mut rng);
            if params.ccp_alpha > 0.0 {
                tree.prune(params.ccp_alpha)
            } else {
                tree
            }
        })
        .collect();
    Ok(ForestModel {
        version: MODEL_VERSION,
        params: params.clone(),
        classes: [0, 1],
        n_features: p,
        feature_names,
        trees,
    })
}

impl ForestModel {
    pub fn predict_one(&self, x: &[f64]) -> Prediction {
        let mut votes = [0usize; 2];
        for t in &self.trees {
            votes[t.predict(x) as usize] += 1;
        }
        let n = self.trees.len() as f64;
        Prediction {
            label: u8::from(votes[1] > votes[0]),
            votes: [votes[0] as f64 / n, votes[1] as f64 / n],
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        if let Some(i) = x.iter().position(|r| r.len() != self.n_features) {
            return Err(Error::invalid(format!(
                "row {i} has {} features, model expects {}",
                x[i].len(),
                self.n_features
            )));
        }
        Ok(x.iter().map(|r| self.predict_one(r)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.version != MODEL_VERSION {
            return Err(Error::invalid(format!("unsupported model version {}", m.version)));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![if i % 2 == 0 { -1.0 - i as f64 } else { 1.0 + i as f64 }]).collect();
        let y = (0..n).map(|i| (i % 2) as u8).collect();
        (x, y)
    }

    #[test]
    fn separable_one_split() {
        let (x, y) = separable(100);
        let params = ForestParams {
            n_trees: 25,
            ccp_alpha: 0.0,
            ..Default::default()
        };
        let m = fit_forest(&x, &y, &params).unwrap();
        let pred = m.predict(&x).unwrap();
        assert!(pred.iter().zip(&y).all(|(p, &t)| p.label == t));
        assert_eq!(m.trees.len(), 25);
    }

    #[test]
    fn single_class_predicts_it() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let m = fit_forest(&x, &[0; 10], &ForestParams { n_trees: 5, ..Default::default() }).unwrap();
        assert!(m.predict(&x).unwrap().iter().all(|p| p.label == 0 && p.votes == [1.0, 0.0]));
    }

    #[test]
    fn two_tree_tie_goes_to_class_zero() {
        let m = ForestModel {
            version: MODEL_VERSION,
            params: ForestParams::default(),
            classes: [0, 1],
            n_features: 1,
            feature_names: vec![],
            trees: vec![Node::Leaf([3, 1]), Node::Leaf([0, 2])],
        };
        let p = m.predict_one(&[0.0]);
        assert_eq!((p.label, p.votes), (0, [0.5, 0.5]));
        // A leaf with equal counts also votes 0.
        assert_eq!(Node::Leaf([2, 2]).predict(&[]), 0);
    }

    #[test]
    fn deterministic_and_json_roundtrip() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i * 7 % 13) as f64 * 0.1, (i * 3 % 5) as f64 / 3.0]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i * 7 % 13 > 6)).collect();
        let params = ForestParams { n_trees: 20, seed: 9, ..Default::default() };
        let a = fit_forest(&x, &y, &params).unwrap();
        let b = fit_forest(&x, &y, &params).unwrap();
        assert_eq!(a, b);
        let back = ForestModel::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_forest(&[vec![1.0], vec![f64::NAN]], &[0, 1], &ForestParams::default()).is_err());
        assert!(fit_forest(&[vec![1.0]], &[0], &ForestParams::default()).is_err());
        let m = fit_forest(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[0, 1], &ForestParams { n_trees: 3, ..Default::default() }).unwrap();
        assert!(m.predict(&[vec![1.0]]).is_err());
    }

    #[test]
    fn pruning_collapses_weak_splits() {
        // Root split removes little impurity; a large alpha keeps only the root.
        let tree = Node::Split(0, 0.5, [5, 5], Box::new(Node::Leaf([3, 2])), Box::new(Node::Leaf([2, 3])));
        assert_eq!(tree.prune(0.1), Node::Leaf([5, 5]));
        assert_eq!(tree.prune(0.0), tree);
    }

    #[test]
    fn max_features_parse() {
        assert_eq!("sqrt".parse::<MaxFeatures>().unwrap(), MaxFeatures::Sqrt);
        assert_eq!("4".parse::<MaxFeatures>().unwrap(), MaxFeatures::Count(4));
        assert!("0".parse::<MaxFeatures>().is_err());
        assert_eq!(MaxFeatures::Sqrt.resolve(70), 9);
        let p: ForestParams = toml::from_str("max_features = 3").unwrap();
        assert_eq!(p.max_features, MaxFeatures::Count(3));
        let p: ForestParams = toml::from_str("max_features = \"all\"").unwrap();
        assert_eq!(p.max_features, MaxFeatures::All);
    }
}
