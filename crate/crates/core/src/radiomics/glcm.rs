//! Gray level co-occurrence matrix.

use super::matrix::{mean_features, CountMatrix, SliceRoi, DIRECTIONS};
use crate::error::{Error, Result};

pub const NAMES: [&str; 10] = [
    "JointEnergy",
    "JointEntropy",
    "Contrast",
    "Correlation",
    "Idm",
    "Id",
    "SumAverage",
    "DifferenceEntropy",
    "DifferenceVariance",
    "Autocorrelation",
];

/// Symmetric co-occurrence counts for the four in-plane directions at the
/// given pixel distance.
pub fn matrices(slice: &SliceRoi, distance: usize) -> [CountMatrix; 4] {
    let ng = slice.num_levels as usize;
    let d = distance as i64;
    DIRECTIONS.map(|(dx, dy)| {
        let mut m = CountMatrix::zeros(ng, ng);
        for (x, y, i) in slice.pixels() {
            if let Some(j) = slice.at(x + dx * d, y + dy * d) {
                m.add(i as usize, j as usize, 1);
                m.add(j as usize, i as usize, 1);
            }
        }
        m
    })
}

/// Features of one normalized co-occurrence matrix, `None` without pairs.
pub fn matrix_features(m: &CountMatrix) -> Option<[f64; 10]> {
    let total = m.total();
    if total == 0 {
        return None;
    }
    let ng = m.rows;
    let n = total as f64;
    let mut px = vec![0.0; ng + 1];
    let mut py = vec![0.0; ng + 1];
    let mut p_sum = vec![0.0; 2 * ng + 1];
    let mut p_diff = vec![0.0; ng];
    let (mut energy, mut entropy, mut contrast, mut idm, mut id, mut auto) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, j, c) in m.entries() {
        let p = c as f64 / n;
        let (fi, fj) = (i as f64, j as f64);
        let diff = i.abs_diff(j);
        px[i] += p;
        py[j] += p;
        p_sum[i + j] += p;
        p_diff[diff] += p;
        energy += p * p;
        entropy -= p * p.log2();
        contrast += (fi - fj).powi(2) * p;
        idm += p / (1.0 + (fi - fj).powi(2));
        id += p / (1.0 + diff as f64);
        auto += fi * fj * p;
    }
    let mu = |v: &[f64]| v.iter().enumerate().map(|(k, &p)| k as f64 * p).sum::<f64>();
    let (mu_x, mu_y) = (mu(&px), mu(&py));
    let sd = |v: &[f64], m: f64| v.iter().enumerate().map(|(k, &p)| (k as f64 - m).powi(2) * p).sum::<f64>().sqrt();
    let (sd_x, sd_y) = (sd(&px, mu_x), sd(&py, mu_y));
    let correlation = if sd_x * sd_y == 0.0 {
        1.0
    } else {
        (auto - mu_x * mu_y) / (sd_x * sd_y)
    };
    let sum_average = mu(&p_sum);
    let diff_average = mu(&p_diff);
    let diff_entropy = -p_diff.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>();
    let diff_variance = p_diff
        .iter()
        .enumerate()
        .map(|(k, &p)| (k as f64 - diff_average).powi(2) * p)
        .sum::<f64>();
    Some([
        energy,
        entropy,
        contrast,
        correlation,
        idm,
        id,
        sum_average,
        diff_entropy,
        diff_variance,
        auto,
    ])
}

/// Direction-averaged features; directions without pairs are skipped.
pub fn features(slice: &SliceRoi, distance: usize) -> Result<[f64; 10]> {
    let per_dir: Vec<[f64; 10]> = matrices(slice, distance).iter().filter_map(matrix_features).collect();
    mean_features(&per_dir).ok_or_else(|| Error::Degenerate("no co-occurring pixel pairs in slice".into()))
}
