//! Voxel grids with physical geometry.
//!
//! Three grid flavours share the same layout: [`Volume3D`] for CT intensities
//! in HU, [`LabelMask`] for binary contours and [`ProbabilityMap`] for model
//! confidences. Voxels are stored x-fastest, so the linear index of `(x, y, z)`
//! is `x + nx * (y + ny * z)`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-6;
const GEOMETRY_MATCH_TOL: f64 = 1e-6;

/// Spacing, origin and axis directions of a voxel grid, all in mm.
///
/// `direction[a]` is the unit vector along which index axis `a` advances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelGeometry {
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub direction: [[f64; 3]; 3],
}

impl Default for VoxelGeometry {
    fn default() -> Self {
        Self::with_spacing([1.0, 1.0, 1.0])
    }
}

impl VoxelGeometry {
    pub fn new(spacing: [f64; 3], origin: [f64; 3], direction: [[f64; 3]; 3]) -> Result<Self> {
        let g = Self {
            spacing,
            origin,
            direction,
        };
        g.validate()?;
        Ok(g)
    }

    /// Axis-aligned geometry at the origin.
    pub fn with_spacing(spacing: [f64; 3]) -> Self {
        Self {
            spacing,
            origin: [0.0; 3],
            direction: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be positive, got {:?}",
                self.spacing
            )));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite origin".into()));
        }
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = (0..3).map(|k| self.direction[a][k] * self.direction[b][k]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                if !((dot - expect).abs() <= ORTHONORMAL_TOL) {
                    return Err(Error::InvalidGeometry(format!(
                        "direction matrix is not orthonormal (axes {a},{b}: {dot})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Physical volume of one voxel in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Physical position of a (possibly fractional) continuous index.
    pub fn index_to_physical(&self, idx: [f64; 3]) -> [f64; 3] {
        let mut p = self.origin;
        for a in 0..3 {
            for k in 0..3 {
                p[k] += idx[a] * self.spacing[a] * self.direction[a][k];
            }
        }
        p
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= GEOMETRY_MATCH_TOL * (1.0 + a.abs().max(b.abs()));
        (0..3).all(|a| {
            close(self.spacing[a], other.spacing[a])
                && close(self.origin[a], other.origin[a])
                && (0..3).all(|k| close(self.direction[a][k], other.direction[a][k]))
        })
    }
}

/// Dense 3D array with geometry. The typed wrappers below add value invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    dims: [usize; 3],
    geometry: VoxelGeometry,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn new(dims: [usize; 3], geometry: VoxelGeometry, data: Vec<T>) -> Result<Self> {
        geometry.validate()?;
        let n = dims.iter().product::<usize>();
        if data.len() != n {
            return Err(Error::invalid(format!(
                "value count {} does not match dims {:?} ({n})",
                data.len(),
                dims
            )));
        }
        Ok(Self {
            dims,
            geometry,
            data,
        })
    }

    pub fn filled(dims: [usize; 3], geometry: VoxelGeometry, value: T) -> Result<Self> {
        Self::new(dims, geometry, vec![value; dims.iter().product()])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn geometry(&self) -> &VoxelGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn linear_index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.linear_index(x, y, z)]
    }

    /// Same dims and (approximately) the same geometry.
    pub fn same_space<U: Copy>(&self, other: &Grid<U>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                left: self.dims,
                right: other.dims,
            });
        }
        if !self.geometry.approx_eq(&other.geometry) {
            return Err(Error::GeometryMismatch);
        }
        Ok(())
    }

    pub(crate) fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            dims: self.dims,
            geometry: self.geometry.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

macro_rules! grid_wrapper {
    ($name:ident, $t:ty) => {
        impl Deref for $name {
            type Target = Grid<$t>;
            fn deref(&self) -> &Grid<$t> {
                &self.0
            }
        }

        impl $name {
            pub fn grid(&self) -> &Grid<$t> {
                &self.0
            }

            pub fn into_grid(self) -> Grid<$t> {
                self.0
            }
        }
    };
}

/// CT intensities in HU.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume3D(Grid<f32>);
grid_wrapper!(Volume3D, f32);

impl Volume3D {
    pub fn new(dims: [usize; 3], geometry: VoxelGeometry, values: Vec<f32>) -> Result<Self> {
        Self::from_grid(Grid::new(dims, geometry, values)?)
    }

    pub fn from_grid(grid: Grid<f32>) -> Result<Self> {
        if let Some(i) = grid.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite intensity at voxel {i}")));
        }
        Ok(Self(grid))
    }

    pub fn values(&self) -> &[f32] {
        &self.0.data
    }
}

/// Binary mask, labels in {0, 1}.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMask(Grid<u8>);
grid_wrapper!(LabelMask, u8);

impl LabelMask {
    pub fn new(dims: [usize; 3], geometry: VoxelGeometry, labels: Vec<u8>) -> Result<Self> {
        Self::from_grid(Grid::new(dims, geometry, labels)?)
    }

    pub fn from_grid(grid: Grid<u8>) -> Result<Self> {
        if let Some(i) = grid.data.iter().position(|&v| v > 1) {
            return Err(Error::Validation(format!(
                "mask value {} at voxel {i} is not 0 or 1",
                grid.data[i]
            )));
        }
        Ok(Self(grid))
    }

    pub fn empty_like<T: Copy>(grid: &Grid<T>) -> Self {
        Self(Grid {
            dims: grid.dims,
            geometry: grid.geometry.clone(),
            data: vec![0; grid.data.len()],
        })
    }

    /// Builds a mask from a predicate over linear indices.
    pub fn from_fn<T: Copy>(like: &Grid<T>, f: impl Fn(usize) -> bool) -> Self {
        Self(Grid {
            dims: like.dims,
            geometry: like.geometry.clone(),
            data: (0..like.data.len()).map(|i| u8::from(f(i))).collect(),
        })
    }

    pub fn labels(&self) -> &[u8] {
        &self.0.data
    }

    pub fn is_foreground(&self, idx: usize) -> bool {
        self.0.data[idx] != 0
    }

    pub fn count(&self) -> usize {
        self.0.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_blank(&self) -> bool {
        self.0.data.iter().all(|&v| v == 0)
    }

    /// Physical foreground volume in mm³.
    pub fn physical_volume(&self) -> f64 {
        self.count() as f64 * self.geometry().voxel_volume()
    }

    pub fn foreground_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.data.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| i)
    }
}

/// Per-voxel lesion probability in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap(Grid<f32>);
grid_wrapper!(ProbabilityMap, f32);

impl ProbabilityMap {
    pub fn new(dims: [usize; 3], geometry: VoxelGeometry, probs: Vec<f32>) -> Result<Self> {
        Self::from_grid(Grid::new(dims, geometry, probs)?)
    }

    pub fn from_grid(grid: Grid<f32>) -> Result<Self> {
        if let Some(i) = grid.data.iter().position(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Validation(format!(
                "probability {} at voxel {i} outside [0, 1]",
                grid.data[i]
            )));
        }
        Ok(Self(grid))
    }

    pub fn probs(&self) -> &[f32] {
        &self.0.data
    }
}

impl From<&LabelMask> for ProbabilityMap {
    fn from(mask: &LabelMask) -> Self {
        Self(mask.0.map(f32::from))
    }
}

/// Gray-level bins of the ROI voxels.
///
/// `bins` covers the whole grid; voxels outside the ROI hold 0, ROI voxels
/// hold a bin in `1..=num_levels`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedRoi {
    pub dims: [usize; 3],
    pub bins: Vec<u32>,
    pub bin_width: f64,
    pub roi_min: f64,
    pub num_levels: u32,
}

impl DiscretizedRoi {
    /// `(index triple, bin)` for every ROI voxel, in linear order.
    pub fn voxels(&self) -> impl Iterator<Item = ([usize; 3], u32)> + '_ {
        let [nx, ny, _] = self.dims;
        self.bins
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(move |(i, &b)| ([i % nx, (i / nx) % ny, i / (nx * ny)], b))
    }

    /// Bin map of axial slice `z`, row-major with x fastest.
    pub fn slice(&self, z: usize) -> &[u32] {
        let n = self.dims[0] * self.dims[1];
        &self.bins[z * n..(z + 1) * n]
    }
}

/// Fixed-bin-width discretization: `bin(x) = floor((x - roi_min) / W) + 1`.
pub fn discretize(vol: &Volume3D, mask: &LabelMask, bin_width: f64) -> Result<DiscretizedRoi> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::invalid(format!("bin width must be positive, got {bin_width}")));
    }
    vol.same_space(mask)?;
    let roi_min = mask
        .foreground_indices()
        .map(|i| f64::from(vol.values()[i]))
        .fold(f64::INFINITY, f64::min);
    if !roi_min.is_finite() {
        return Err(Error::EmptyRoi);
    }
    let mut num_levels = 0u32;
    let bins = vol
        .values()
        .iter()
        .zip(mask.labels())
        .map(|(&x, &m)| {
            if m == 0 {
                return 0;
            }
            let b = ((f64::from(x) - roi_min) / bin_width).floor() as u32 + 1;
            num_levels = num_levels.max(b);
            b
        })
        .collect();
    Ok(DiscretizedRoi {
        dims: vol.dims(),
        bins,
        bin_width,
        roi_min,
        num_levels,
    })
}

/// Tight bounding box of the mask foreground grown by `margin` voxels and
/// clamped to the grid. Returns the cropped pair with the origin moved so that
/// every voxel keeps its physical position.
pub fn crop_to_bbox(vol: &Volume3D, mask: &LabelMask, margin: usize) -> Result<(Volume3D, LabelMask)> {
    vol.same_space(mask)?;
    let (lo, hi) = bounding_box(mask).ok_or(Error::EmptyRoi)?;
    let dims = vol.dims();
    let lo: [usize; 3] = std::array::from_fn(|a| lo[a].saturating_sub(margin));
    let hi: [usize; 3] = std::array::from_fn(|a| (hi[a] + margin).min(dims[a] - 1));
    let out_dims: [usize; 3] = std::array::from_fn(|a| hi[a] - lo[a] + 1);

    let mut values = Vec::with_capacity(out_dims.iter().product());
    let mut labels = Vec::with_capacity(values.capacity());
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            let start = vol.linear_index(lo[0], y, z);
            let end = start + out_dims[0];
            values.extend_from_slice(&vol.values()[start..end]);
            labels.extend_from_slice(&mask.labels()[start..end]);
        }
    }
    let mut geometry = vol.geometry().clone();
    geometry.origin = vol.geometry().index_to_physical(lo.map(|v| v as f64));
    Ok((
        Volume3D::new(out_dims, geometry.clone(), values)?,
        LabelMask::new(out_dims, geometry, labels)?,
    ))
}

/// Inclusive `(lo, hi)` index bounds of the foreground, `None` when empty.
pub fn bounding_box(mask: &LabelMask) -> Option<([usize; 3], [usize; 3])> {
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for i in mask.foreground_indices() {
        let c = mask.coords(i);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
        any = true;
    }
    any.then_some((lo, hi))
}

fn check_target_spacing(target: [f64; 2]) -> Result<()> {
    if target.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::invalid(format!("target spacing must be positive, got {target:?}")));
    }
    Ok(())
}

/// Output size along one axis: `round(n * old / new)`, at least 1.
fn resampled_len(n: usize, old: f64, new: f64) -> usize {
    ((n as f64 * old / new).round() as usize).max(1)
}

/// Continuous input index sampled by output index `i`. Grid corners stay aligned.
#[inline]
fn source_coordinate(i: usize, old: f64, new: f64) -> f64 {
    (i as f64 + 0.5) * new / old - 0.5
}

struct InplanePlan {
    out_dims: [usize; 3],
    geometry: VoxelGeometry,
}

fn plan_inplane<T: Copy>(grid: &Grid<T>, target: [f64; 2]) -> Result<InplanePlan> {
    check_target_spacing(target)?;
    if grid.is_empty() {
        return Err(Error::invalid("cannot resample an empty grid"));
    }
    let g = grid.geometry();
    let dims = grid.dims();
    let out_dims = [
        resampled_len(dims[0], g.spacing[0], target[0]),
        resampled_len(dims[1], g.spacing[1], target[1]),
        dims[2],
    ];
    let mut geometry = g.clone();
    geometry.spacing = [target[0], target[1], g.spacing[2]];
    // The first output voxel centre sits half an output voxel inside the old corner.
    geometry.origin = g.index_to_physical([
        source_coordinate(0, g.spacing[0], target[0]),
        source_coordinate(0, g.spacing[1], target[1]),
        0.0,
    ]);
    Ok(InplanePlan { out_dims, geometry })
}

fn is_same_spacing(g: &VoxelGeometry, target: [f64; 2]) -> bool {
    g.spacing[0] == target[0] && g.spacing[1] == target[1]
}

/// Cubic B-spline resampling of every axial slice to a new in-plane spacing.
/// The z axis is left untouched.
pub fn resample_image_inplane(vol: &Volume3D, target_xy_spacing: [f64; 2]) -> Result<Volume3D> {
    let plan = plan_inplane(vol.grid(), target_xy_spacing)?;
    if is_same_spacing(vol.geometry(), target_xy_spacing) {
        return Ok(vol.clone());
    }
    let [nx, ny, nz] = vol.dims();
    let [ox, oy, _] = plan.out_dims;
    let g = vol.geometry();
    let xs: Vec<f64> = (0..ox).map(|i| source_coordinate(i, g.spacing[0], target_xy_spacing[0])).collect();
    let ys: Vec<f64> = (0..oy).map(|j| source_coordinate(j, g.spacing[1], target_xy_spacing[1])).collect();

    let mut out = Vec::with_capacity(ox * oy * nz);
    let mut coeffs = vec![0.0f64; nx * ny];
    let mut column = vec![0.0f64; ny];
    let mut rows_x = vec![0.0f64; ox * ny];
    for z in 0..nz {
        let slice = &vol.values()[z * nx * ny..(z + 1) * nx * ny];
        for (c, &v) in coeffs.iter_mut().zip(slice) {
            *c = f64::from(v);
        }
        for row in coeffs.chunks_mut(nx) {
            bspline::prefilter(row);
        }
        for x in 0..nx {
            for y in 0..ny {
                column[y] = coeffs[x + nx * y];
            }
            bspline::prefilter(&mut column);
            for y in 0..ny {
                coeffs[x + nx * y] = column[y];
            }
        }
        // Evaluate along x for every input row, then along y.
        for y in 0..ny {
            let row = &coeffs[y * nx..(y + 1) * nx];
            for (i, &u) in xs.iter().enumerate() {
                rows_x[i + ox * y] = bspline::evaluate(row, u, 1);
            }
        }
        for &v in &ys {
            for i in 0..ox {
                let value = bspline::evaluate(&rows_x[i..], v, ox);
                out.push(value as f32);
            }
        }
    }
    Volume3D::new(plan.out_dims, plan.geometry, out)
}

/// Nearest-neighbour in-plane resampling of a mask, on the same output grid
/// as [`resample_image_inplane`].
pub fn resample_mask_inplane(mask: &LabelMask, target_xy_spacing: [f64; 2]) -> Result<LabelMask> {
    let plan = plan_inplane(mask.grid(), target_xy_spacing)?;
    if is_same_spacing(mask.geometry(), target_xy_spacing) {
        return Ok(mask.clone());
    }
    let [nx, ny, nz] = mask.dims();
    let [ox, oy, _] = plan.out_dims;
    let g = mask.geometry();
    let nearest = |i: usize, n: usize, old: f64, new: f64| -> usize {
        let u = source_coordinate(i, old, new);
        ((u + 0.5).floor().max(0.0) as usize).min(n - 1)
    };
    let xs: Vec<usize> = (0..ox).map(|i| nearest(i, nx, g.spacing[0], target_xy_spacing[0])).collect();
    let ys: Vec<usize> = (0..oy).map(|j| nearest(j, ny, g.spacing[1], target_xy_spacing[1])).collect();
    let mut out = Vec::with_capacity(ox * oy * nz);
    for z in 0..nz {
        for &y in &ys {
            for &x in &xs {
                out.push(mask.get(x, y, z));
            }
        }
    }
    LabelMask::new(plan.out_dims, plan.geometry, out)
}

pub(crate) mod bspline {
    //! Cubic B-spline interpolation with whole-sample mirror boundaries.

    const POLE: f64 = -0.267_949_192_431_122_7; // sqrt(3) - 2
    const GAIN: f64 = 6.0;

    /// Mirror index into `0..n` with period `2n - 2`.
    #[inline]
    pub fn mirror(k: i64, n: usize) -> usize {
        if n == 1 {
            return 0;
        }
        let period = 2 * n as i64 - 2;
        let mut k = k.rem_euclid(period);
        if k >= n as i64 {
            k = period - k;
        }
        k as usize
    }

    /// In-place conversion of samples to interpolation coefficients.
    pub fn prefilter(s: &mut [f64]) {
        let n = s.len();
        if n < 2 {
            return;
        }
        let z = POLE;
        for v in s.iter_mut() {
            *v *= GAIN;
        }
        // Exact causal initialization for the mirror extension.
        let zn = z.powi(n as i32 - 1);
        let z2n = zn * zn;
        let mut sum = s[0] + zn * s[n - 1];
        let mut zk = z;
        let mut z2k = zn * zn / z;
        for v in s.iter().take(n - 1).skip(1) {
            sum += (zk + z2k) * v;
            zk *= z;
            z2k /= z;
        }
        s[0] = sum / (1.0 - z2n);
        for k in 1..n {
            s[k] += z * s[k - 1];
        }
        s[n - 1] = (z / (z * z - 1.0)) * (s[n - 1] + z * s[n - 2]);
        for k in (0..n - 1).rev() {
            s[k] = z * (s[k + 1] - s[k]);
        }
    }

    #[inline]
    pub fn basis(t: f64) -> f64 {
        let t = t.abs();
        if t < 1.0 {
            2.0 / 3.0 - t * t + 0.5 * t * t * t
        } else if t < 2.0 {
            let u = 2.0 - t;
            u * u * u / 6.0
        } else {
            0.0
        }
    }

    /// Spline value at continuous position `u` of coefficients laid out with `stride`.
    /// The logical length is `(c.len() - 1) / stride + 1`.
    #[inline]
    pub fn evaluate(c: &[f64], u: f64, stride: usize) -> f64 {
        let n = (c.len() - 1) / stride + 1;
        let base = u.floor() as i64;
        let mut acc = 0.0;
        for k in base - 1..=base + 2 {
            let w = basis(u - k as f64);
            if w != 0.0 {
                acc += w * c[mirror(k, n) * stride];
            }
        }
        acc
    }
}
