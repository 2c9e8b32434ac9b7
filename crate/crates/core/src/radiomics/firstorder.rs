//! Intensity statistics over the ROI voxels.

use crate::error::{Error, Result};

pub const NAMES: [&str; 17] = [
    "Mean",
    "Median",
    "Minimum",
    "Maximum",
    "Range",
    "Percentile10",
    "Percentile90",
    "InterquartileRange",
    "Variance",
    "Skewness",
    "Kurtosis",
    "Energy",
    "RootMeanSquared",
    "MeanAbsoluteDeviation",
    "RobustMeanAbsoluteDeviation",
    "Entropy",
    "Uniformity",
];

/// Percentile of sorted data with linear interpolation at `q * (n - 1)`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_abs_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).abs()).sum::<f64>() / v.len() as f64
}

/// `values` are ROI intensities, `bins` their discretized levels (same order).
pub fn features(values: &[f64], bins: &[u32]) -> Result<[f64; 17]> {
    if values.is_empty() {
        return Err(Error::EmptyRoi);
    }
    debug_assert_eq!(values.len(), bins.len());
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mu = mean(values);
    let (mut m2, mut m3, mut m4, mut energy) = (0.0, 0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mu;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        energy += x * x;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skewness, kurtosis) = if m2 == 0.0 {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    };

    let p10 = percentile(&sorted, 0.10);
    let p90 = percentile(&sorted, 0.90);
    let robust: Vec<f64> = sorted.iter().copied().filter(|&x| x >= p10 && x <= p90).collect();

    let levels = bins.iter().copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0u64; levels + 1];
    for &b in bins {
        hist[b as usize] += 1;
    }
    let (mut entropy, mut uniformity) = (0.0, 0.0);
    for &c in hist.iter().filter(|&&c| c > 0) {
        let p = c as f64 / n;
        entropy -= p * p.log2();
        uniformity += p * p;
    }

    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    Ok([
        mu,
        percentile(&sorted, 0.5),
        min,
        max,
        max - min,
        p10,
        p90,
        percentile(&sorted, 0.75) - percentile(&sorted, 0.25),
        m2,
        skewness,
        kurtosis,
        energy,
        (energy / n).sqrt(),
        mean_abs_dev(values),
        mean_abs_dev(&robust),
        entropy,
        uniformity,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(name: &str) -> usize {
        NAMES.iter().position(|n| *n == name).unwrap()
    }

    #[test]
    fn three_values_hand_computation() {
        let f = features(&[0.0, 25.0, 50.0], &[1, 2, 3]).unwrap();
        assert_eq!(f[idx("Mean")], 25.0);
        assert!((f[idx("Variance")] - 1250.0 / 3.0).abs() < 1e-12);
        assert_eq!(f[idx("Energy")], 3125.0);
        assert!((f[idx("Entropy")] - 3f64.log2()).abs() < 1e-15);
        assert!((f[idx("Uniformity")] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(f[idx("Median")], 25.0);
        assert_eq!(f[idx("Range")], 50.0);
        assert_eq!(f[idx("Percentile10")], 5.0);
        assert_eq!(f[idx("InterquartileRange")], 25.0);
        assert_eq!(f[idx("Skewness")], 0.0);
        assert!((f[idx("Kurtosis")] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn constant_roi() {
        let f = features(&[-40.0; 6], &[1; 6]).unwrap();
        assert_eq!(f[idx("Variance")], 0.0);
        assert_eq!(f[idx("Entropy")], 0.0);
        assert_eq!(f[idx("Uniformity")], 1.0);
        assert_eq!(f[idx("Range")], 0.0);
        assert!(features(&[], &[]).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&s, 0.5), 2.5);
        assert!((percentile(&s, 0.1) - 1.3).abs() < 1e-12);
    }
}
