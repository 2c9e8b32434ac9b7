//! Gray level size zone matrix over 8-connected zones.

use super::matrix::{size_stats, CountMatrix, SliceRoi};
use crate::error::{Error, Result};

pub const NAMES: [&str; 10] = [
    "SmallAreaEmphasis",
    "LargeAreaEmphasis",
    "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized",
    "SizeZoneNonUniformity",
    "SizeZoneNonUniformityNormalized",
    "ZonePercentage",
    "GrayLevelVariance",
    "ZoneVariance",
    "ZoneEntropy",
];

pub fn matrix(slice: &SliceRoi) -> CountMatrix {
    let ng = slice.num_levels as usize;
    let n = slice.pixel_count();
    let mut m = CountMatrix::zeros(ng, n.max(1));
    let mut seen = vec![false; slice.bins.len()];
    let mut stack = Vec::new();
    for (x, y, b) in slice.pixels() {
        let start = x as usize + slice.width * y as usize;
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push((x, y));
        let mut size = 0;
        while let Some((cx, cy)) = stack.pop() {
            size += 1;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if slice.at(nx, ny) == Some(b) {
                        let k = nx as usize + slice.width * ny as usize;
                        if !seen[k] {
                            seen[k] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }
        m.add(b as usize, size, 1);
    }
    m
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
    matrix_features(&matrix(slice), slice.pixel_count()).ok_or(Error::EmptyRoi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_zone_labeling() {
        let s = SliceRoi::from_rows(&[&[1, 1], &[1, 2]]);
        let m = matrix(&s);
        assert_eq!((m.get(1, 3), m.get(2, 1), m.total()), (1, 1, 2));
        assert_eq!(features(&s).unwrap()[6], 0.5);
    }

    #[test]
    fn constant_and_checkerboard() {
        let s = SliceRoi::new(4, 2, vec![1; 8], 1);
        assert_eq!(features(&s).unwrap()[1], 64.0);
        // Diagonal neighbours join under 8-connectivity, so use a stripe pattern
        // where no two equal pixels touch.
        let s = SliceRoi::from_rows(&[&[1, 2, 3, 4]]);
        assert_eq!(features(&s).unwrap()[6], 1.0);
        let checker = SliceRoi::from_rows(&[&[1, 2, 1], &[2, 1, 2], &[1, 2, 1]]);
        let m = matrix(&checker);
        assert_eq!((m.get(1, 5), m.get(2, 4), m.total()), (1, 1, 2));
    }
}
