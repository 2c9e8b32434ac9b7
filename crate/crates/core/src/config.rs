//! Run configuration loaded from a TOML file with `[extract]`, `[postproc]`,
//! `[review]` and `[learn]` sections. Missing keys take their defaults and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{ForestParams, MaxFeatures, SearchSpace, TTestMode, DEFAULT_K, DEFAULT_SURVIVAL_THRESHOLD_MONTHS};
use crate::radiomics::{hex_digest, ExtractionConfig};
use crate::segeval::DEFAULT_MIN_DICE;
use crate::segpost::{Connectivity, DEFAULT_THRESHOLD};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocConfig {
    pub connectivity: Connectivity,
    /// Foreground where probability is strictly above this value.
    pub threshold: f32,
}

impl Default for PostprocConfig {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviewConfig {
    pub min_dice: f64,
}

impl Default for ReviewConfig {
    fn default() -> Self {
        Self { min_dice: DEFAULT_MIN_DICE }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub n_trees: usize,
    pub ccp_alpha: f64,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub k: usize,
    pub survival_threshold_months: f64,
    pub ttest: TTestMode,
    pub search: SearchSpace,
}

impl Default for LearnConfig {
    fn default() -> Self {
        let f = ForestParams::default();
        Self {
            n_trees: f.n_trees,
            ccp_alpha: f.ccp_alpha,
            max_features: f.max_features,
            min_samples_split: f.min_samples_split,
            bootstrap: f.bootstrap,
            k: DEFAULT_K,
            survival_threshold_months: DEFAULT_SURVIVAL_THRESHOLD_MONTHS,
            ttest: TTestMode::default(),
            search: SearchSpace::default(),
        }
    }
}

impl LearnConfig {
    pub fn forest_params(&self, seed: u64) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            ccp_alpha: self.ccp_alpha,
            max_features: self.max_features,
            min_samples_split: self.min_samples_split,
            bootstrap: self.bootstrap,
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub extract: ExtractionConfig,
    pub postproc: PostprocConfig,
    pub review: ReviewConfig,
    pub learn: LearnConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.extract.validate()?;
        if !(0.0..1.0).contains(&self.postproc.threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1), got {}", self.postproc.threshold)));
        }
        if !(0.0..=1.0).contains(&self.review.min_dice) {
            return Err(Error::Config(format!("min_dice must lie in [0, 1], got {}", self.review.min_dice)));
        }
        self.learn.forest_params(self.seed).validate()?;
        if self.learn.k < 2 {
            return Err(Error::Config("k must be at least 2".into()));
        }
        self.learn.search.validate()?;
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hex_digest(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.extract.bin_width, 25.0);
        assert_eq!(c.review.min_dice, 0.3);
        assert_eq!(c.learn.n_trees, 1000);
        assert_eq!(c.learn.ccp_alpha, 0.01);
        assert_eq!(c.learn.k, 10);
        assert_eq!(c.postproc.connectivity, Connectivity::TwentySix);
        assert_eq!(c.learn.search.n_samples, 50);
    }

    #[test]
    fn override_single_key() {
        let c = parse_config("[extract]\nbin_width = 50\n").unwrap();
        assert_eq!(c.extract.bin_width, 50.0);
        assert_eq!(c.extract.min_slice_pixels, 5);
        assert_eq!(c.learn, LearnConfig::default());
        assert_ne!(c.hash(), RunConfig::default().hash());
    }

    #[test]
    fn rejects_type_mismatch_and_unknown_keys() {
        assert!(matches!(parse_config("[extract]\nbin_width = \"abc\"\n"), Err(Error::Config(_))));
        assert!(matches!(parse_config("[extract]\nbin_wdth = 10\n"), Err(Error::Config(_))));
        assert!(matches!(parse_config("[postproc]\nconnectivity = 7\n"), Err(Error::Config(_))));
        assert!(parse_config("[learn]\nk = 5\nttest = \"paired\"\n[learn.search]\nn_trees = [10]\n").is_ok());
    }
}
