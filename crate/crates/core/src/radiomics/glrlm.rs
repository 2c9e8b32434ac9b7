//! Gray level run length matrix.

use super::matrix::{mean_features, size_stats, CountMatrix, SliceRoi, DIRECTIONS};
use crate::error::{Error, Result};

pub const NAMES: [&str; 10] = [
    "ShortRunEmphasis",
    "LongRunEmphasis",
    "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized",
    "RunLengthNonUniformity",
    "RunLengthNonUniformityNormalized",
    "RunPercentage",
    "GrayLevelVariance",
    "RunVariance",
    "RunEntropy",
];

/// Run-length matrices for the four directions. A run is a maximal chain of
/// ROI pixels with equal bins along the direction.
pub fn matrices(slice: &SliceRoi) -> [CountMatrix; 4] {
    let ng = slice.num_levels as usize;
    let max_run = slice.width.max(slice.height).max(1);
    DIRECTIONS.map(|(dx, dy)| {
        let mut m = CountMatrix::zeros(ng, max_run);
        for (x, y, b) in slice.pixels() {
            // Only start runs at pixels whose predecessor does not continue them.
            if slice.at(x - dx, y - dy) == Some(b) {
                continue;
            }
            let mut len = 1;
            while slice.at(x + dx * len, y + dy * len) == Some(b) {
                len += 1;
            }
            m.add(b as usize, len as usize, 1);
        }
        m
    })
}

pub fn matrix_features(m: &CountMatrix, n_pixels: usize) -> Option<[f64; 10]> {
    let s = size_stats(m)?;
    Some([
        s.small_emphasis,
        s.large_emphasis,
        s.gray_nonuniformity,
        s.gray_nonuniformity_norm,
        s.size_nonuniformity,
        s.size_nonuniformity_norm,
        s.total / n_pixels as f64,
        s.gray_variance,
        s.size_variance,
        s.entropy,
    ])
}

pub fn features(slice: &SliceRoi) -> Result<[f64; 10]> {
    let n = slice.pixel_count();
    let per_dir: Vec<[f64; 10]> = matrices(slice).iter().filter_map(|m| matrix_features(m, n)).collect();
    mean_features(&per_dir).ok_or(Error::EmptyRoi)
}
