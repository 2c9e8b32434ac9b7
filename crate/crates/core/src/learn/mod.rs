//! Survival classification: labels, random forest, cross-validation,
//! hyperparameter search and accuracy comparisons.

pub mod cv;
pub mod forest;
pub mod search;
pub mod ttest;

use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, stratified_kfold, CvResult, DEFAULT_K};
pub use forest::{fit_forest, fit_forest_named, ForestModel, ForestParams, MaxFeatures, Node, Prediction};
pub use search::{random_search, SearchResult, SearchSpace};
pub use ttest::{paired_t_test, t_test, welch_t_test, TTestMode, TTestResult};

use crate::error::{Error, Result};
use crate::maskio::FeatureTable;

/// Five years.
pub const DEFAULT_SURVIVAL_THRESHOLD_MONTHS: f64 = 60.0;

/// Label 1 for survival of at least `threshold` months, 0 below.
pub fn dichotomize_survival(months: &[f64], threshold: f64) -> Result<Vec<u8>> {
    months
        .iter()
        .map(|&m| {
            if m.is_nan() || m < 0.0 {
                Err(Error::invalid(format!("survival months must be non-negative, got {m}")))
            } else {
                Ok(u8::from(m >= threshold))
            }
        })
        .collect()
}

/// Column-wise concatenation of tables over the same cases. Rows follow the
/// first table's order.
pub fn join_feature_tables(tables: &[FeatureTable]) -> Result<FeatureTable> {
    let (first, rest) = tables
        .split_first()
        .ok_or_else(|| Error::FeatureTable("no tables to join".into()))?;
    let columns: Vec<String> = tables.iter().flat_map(|t| t.columns().iter().cloned()).collect();
    let mut out = FeatureTable::new(columns)?;
    for t in rest {
        if t.rows().len() != first.rows().len() {
            return Err(Error::FeatureTable(format!(
                "case count mismatch: {} vs {}",
                first.rows().len(),
                t.rows().len()
            )));
        }
    }
    for row in first.rows() {
        let mut values = row.values.clone();
        for t in rest {
            let other = t
                .row(&row.case_id)
                .ok_or_else(|| Error::FeatureTable(format!("case {:?} missing from a joined table", row.case_id)))?;
            values.extend_from_slice(&other.values);
        }
        out.push(row.case_id.clone(), values)?;
    }
    Ok(out)
}

/// Pairwise p-values between named accuracy lists; the diagonal is 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValueMatrix {
    pub labels: Vec<String>,
    pub mode: TTestMode,
    pub p: Vec<Vec<f64>>,
}

impl PValueMatrix {
    pub fn compute(groups: &[(String, Vec<f64>)], mode: TTestMode) -> Result<Self> {
        let n = groups.len();
        let mut p = vec![vec![1.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let r = t_test(&groups[i].1, &groups[j].1, mode)?;
                p[i][j] = r.p;
                p[j][i] = r.p;
            }
        }
        Ok(Self {
            labels: groups.iter().map(|g| g.0.clone()).collect(),
            mode,
            p,
        })
    }

    /// CSV with a leading label column and one column per group.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("group");
        for l in &self.labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for (l, row) in self.labels.iter().zip(&self.p) {
            s.push_str(l);
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}
