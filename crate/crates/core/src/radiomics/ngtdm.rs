//! Neighbouring gray tone difference matrix.

use super::matrix::SliceRoi;
use crate::error::{Error, Result};

pub const NAMES: [&str; 5] = ["Coarseness", "Contrast", "Busyness", "Complexity", "Strength"];

/// Coarseness reported when the weighted difference sum vanishes.
pub const COARSENESS_CAP: f64 = 1e6;

/// Per-level pixel counts `n[i-1]` and summed absolute differences `s[i-1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ngtdm {
    pub n: Vec<u64>,
    pub s: Vec<f64>,
}

/// Pixels without any in-ROI neighbour within Chebyshev distance `delta` are
/// left out.
pub fn matrix(slice: &SliceRoi, delta: usize) -> Ngtdm {
    let ng = slice.num_levels as usize;
    let d = delta as i64;
    let mut n = vec![0u64; ng];
    let mut s = vec![0.0f64; ng];
    for (x, y, b) in slice.pixels() {
        let (mut sum, mut count) = (0u64, 0u64);
        for dy in -d..=d {
            for dx in -d..=d {
                if dx == 0 && dy == 0 {
                    continue;
                }
                if let Some(v) = slice.at(x + dx, y + dy) {
                    sum += u64::from(v);
                    count += 1;
                }
            }
        }
        if count == 0 {
            continue;
        }
        let mean = sum as f64 / count as f64;
        n[b as usize - 1] += 1;
        s[b as usize - 1] += (f64::from(b) - mean).abs();
    }
    Ngtdm { n, s }
}

pub fn matrix_features(m: &Ngtdm) -> [f64; 5] {
    let total: u64 = m.n.iter().sum();
    if total == 0 {
        return [COARSENESS_CAP, 0.0, 0.0, 0.0, 0.0];
    }
    let nv = total as f64;
    // Present levels as (level, p, s).
    let levels: Vec<(f64, f64, f64)> = m
        .n
        .iter()
        .zip(&m.s)
        .enumerate()
        .filter(|(_, (&c, _))| c > 0)
        .map(|(k, (&c, &s))| ((k + 1) as f64, c as f64 / nv, s))
        .collect();
    let ngp = levels.len() as f64;
    let ps: f64 = levels.iter().map(|&(_, p, s)| p * s).sum();
    let s_total: f64 = levels.iter().map(|&(_, _, s)| s).sum();

    let coarseness = if ps == 0.0 { COARSENESS_CAP } else { 1.0 / ps };
    let (mut contrast_sum, mut busy_denom, mut complexity, mut strength_num) = (0.0, 0.0, 0.0, 0.0);
    for &(i, pi, si) in &levels {
        for &(j, pj, sj) in &levels {
            contrast_sum += pi * pj * (i - j).powi(2);
            busy_denom += (i * pi - j * pj).abs();
            complexity += (i - j).abs() * (pi * si + pj * sj) / (pi + pj);
            strength_num += (pi + pj) * (i - j).powi(2);
        }
    }
    let contrast = if levels.len() > 1 {
        contrast_sum / (ngp * (ngp - 1.0)) * (s_total / nv)
    } else {
        0.0
    };
    let busyness = if busy_denom == 0.0 { 0.0 } else { ps / busy_denom };
    let strength = if s_total == 0.0 { 0.0 } else { strength_num / s_total };
    [coarseness, contrast, busyness, complexity / nv, strength]
}

pub fn features(slice: &SliceRoi, delta: usize) -> Result<[f64; 5]> {
    if slice.pixel_count() == 0 {
        return Err(Error::EmptyRoi);
    }
    Ok(matrix_features(&matrix(slice, delta)))
}
