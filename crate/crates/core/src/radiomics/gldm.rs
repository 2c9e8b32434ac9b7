//! Gray level dependence matrix.

use super::matrix::{size_stats, CountMatrix, SliceRoi};
use crate::error::{Error, Result};

pub const NAMES: [&str; 8] = [
    "SmallDependenceEmphasis",
    "LargeDependenceEmphasis",
    "GrayLevelNonUniformity",
    "DependenceNonUniformity",
    "DependenceNonUniformityNormalized",
    "GrayLevelVariance",
    "DependenceVariance",
    "DependenceEntropy",
];

/// `D(i, k)`: pixels of level `i` whose dependence is `k`, where dependence
/// counts the pixel itself plus every in-ROI neighbour within Chebyshev
/// distance `delta` whose bin differs by at most `alpha`.
pub fn matrix(slice: &SliceRoi, delta: usize, alpha: f64) -> CountMatrix {
    let ng = slice.num_levels as usize;
    let d = delta as i64;
    let max_dep = ((2 * delta + 1) * (2 * delta + 1)).max(1);
    let mut m = CountMatrix::zeros(ng, max_dep);
    for (x, y, b) in slice.pixels() {
        let mut dep = 1;
        for dy in -d..=d {
            for dx in -d..=d {
                if dx == 0 && dy == 0 {
                    continue;
                }
                if let Some(v) = slice.at(x + dx, y + dy) {
                    if (f64::from(v) - f64::from(b)).abs() <= alpha {
                        dep += 1;
                    }
                }
            }
        }
        m.add(b as usize, dep, 1);
    }
    m
}

pub fn matrix_features(m: &CountMatrix) -> Option<[f64; 8]> {
    let s = size_stats(m)?;
    Some([
        s.small_emphasis,
        s.large_emphasis,
        s.gray_nonuniformity,
        s.size_nonuniformity,
        s.size_nonuniformity_norm,
        s.gray_variance,
        s.size_variance,
        s.entropy,
    ])
}

pub fn features(slice: &SliceRoi, delta: usize, alpha: f64) -> Result<[f64; 8]> {
    matrix_features(&matrix(slice, delta, alpha)).ok_or(Error::EmptyRoi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_three_by_three() {
        let s = SliceRoi::new(3, 3, vec![1; 9], 1);
        let m = matrix(&s, 1, 0.0);
        assert_eq!((m.get(1, 4), m.get(1, 6), m.get(1, 9), m.total()), (4, 4, 1, 9));
    }

    #[test]
    fn single_pixel() {
        let s = SliceRoi::from_rows(&[&[2]]);
        let m = matrix(&s, 1, 0.0);
        assert_eq!(m.get(2, 1), 1);
        assert_eq!(features(&s, 1, 0.0).unwrap()[1], 1.0);
    }

    #[test]
    fn large_alpha_ignores_bins() {
        let s = SliceRoi::from_rows(&[&[1, 4, 2], &[3, 1, 4]]);
        let strict = matrix(&s, 1, 0.0);
        let loose = matrix(&s, 1, 1e9);
        let uniform = matrix(&SliceRoi::new(3, 2, vec![1; 6], 1), 1, 0.0);
        let dep_hist = |m: &CountMatrix| -> Vec<u64> { (1..=m.cols).map(|k| (1..=m.rows).map(|i| m.get(i, k)).sum()).collect() };
        assert_eq!(dep_hist(&loose), dep_hist(&uniform));
        assert_ne!(dep_hist(&strict), dep_hist(&loose));
    }
}
