//! Count matrices shared by the texture families.

/// Pixels of one axial slice after discretization. Bin 0 marks pixels outside
/// the ROI.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceRoi {
    pub width: usize,
    pub height: usize,
    pub bins: Vec<u32>,
    /// Global number of gray levels of the discretized ROI.
    pub num_levels: u32,
}

impl SliceRoi {
    pub fn new(width: usize, height: usize, bins: Vec<u32>, num_levels: u32) -> Self {
        assert_eq!(bins.len(), width * height, "slice size mismatch");
        debug_assert!(bins.iter().all(|&b| b <= num_levels));
        Self {
            width,
            height,
            bins,
            num_levels,
        }
    }

    /// Convenience constructor from rows; levels default to the maximum bin.
    pub fn from_rows(rows: &[&[u32]]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let bins: Vec<u32> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let levels = bins.iter().copied().max().unwrap_or(0).max(1);
        Self::new(width, height, bins, levels)
    }

    #[inline]
    pub fn at(&self, x: i64, y: i64) -> Option<u32> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        match self.bins[x as usize + self.width * y as usize] {
            0 => None,
            b => Some(b),
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.bins.iter().filter(|&&b| b != 0).count()
    }

    /// `(x, y, bin)` of every ROI pixel in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = (i64, i64, u32)> + '_ {
        self.bins
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(move |(i, &b)| ((i % self.width) as i64, (i / self.width) as i64, b))
    }
}

/// In-plane directions 0°, 45°, 90° and 135° as unit `(dx, dy)` steps.
pub const DIRECTIONS: [(i64, i64); 4] = [(1, 0), (1, -1), (0, 1), (1, 1)];

/// Dense matrix of counts indexed by gray level `i ∈ 1..=rows` and a second
/// 1-based index `j ∈ 1..=cols`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u64>,
}

impl CountMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[(i - 1) * self.cols + (j - 1)]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, n: u64) {
        self.data[(i - 1) * self.cols + (j - 1)] += n;
    }

    pub fn total(&self) -> u64 {
        self.data.iter().sum()
    }

    /// Non-zero entries as `(i, j, count)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(move |(k, &c)| (k / self.cols + 1, k % self.cols + 1, c))
    }
}

/// Features shared by run-length, size-zone and dependence matrices, where
/// the second index is a run length, zone size or dependence count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct SizeStats {
    pub small_emphasis: f64,
    pub large_emphasis: f64,
    pub gray_nonuniformity: f64,
    pub gray_nonuniformity_norm: f64,
    pub size_nonuniformity: f64,
    pub size_nonuniformity_norm: f64,
    pub gray_variance: f64,
    pub size_variance: f64,
    pub entropy: f64,
    pub total: f64,
}

pub(crate) fn size_stats(m: &CountMatrix) -> Option<SizeStats> {
    let total = m.total();
    if total == 0 {
        return None;
    }
    let n = total as f64;
    let mut row_sums = vec![0u64; m.rows];
    let mut col_sums = vec![0u64; m.cols];
    let (mut small, mut large, mut mu_i, mut mu_j, mut entropy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, j, c) in m.entries() {
        row_sums[i - 1] += c;
        col_sums[j - 1] += c;
        let c = c as f64;
        let jf = j as f64;
        small += c / (jf * jf);
        large += c * jf * jf;
        let p = c / n;
        mu_i += p * i as f64;
        mu_j += p * jf;
        entropy -= p * p.log2();
    }
    let (mut var_i, mut var_j) = (0.0, 0.0);
    for (i, j, c) in m.entries() {
        let p = c as f64 / n;
        var_i += p * (i as f64 - mu_i).powi(2);
        var_j += p * (j as f64 - mu_j).powi(2);
    }
    let sq_sum = |v: &[u64]| v.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>();
    let gln = sq_sum(&row_sums) / n;
    let sn = sq_sum(&col_sums) / n;
    Some(SizeStats {
        small_emphasis: small / n,
        large_emphasis: large / n,
        gray_nonuniformity: gln,
        gray_nonuniformity_norm: gln / n,
        size_nonuniformity: sn,
        size_nonuniformity_norm: sn / n,
        gray_variance: var_i,
        size_variance: var_j,
        entropy,
        total: n,
    })
}

/// Element-wise mean of equally sized feature arrays, summed pairwise so the
/// result depends only on the order of `items`.
pub(crate) fn mean_features<const N: usize>(items: &[[f64; N]]) -> Option<[f64; N]> {
    fn pairwise<const N: usize>(items: &[[f64; N]]) -> [f64; N] {
        match items.len() {
            1 => items[0],
            n => {
                let (a, b) = items.split_at(n / 2);
                let (a, b) = (pairwise(a), pairwise(b));
                std::array::from_fn(|k| a[k] + b[k])
            }
        }
    }
    if items.is_empty() {
        return None;
    }
    let k = items.len() as f64;
    Some(pairwise(items).map(|v| v / k))
}
