//! 3D shape descriptors of the ROI mask.
//!
//! Surface area comes from a marching-cubes mesh of the binary mask with
//! vertices on edge midpoints. The per-configuration polygons are derived at
//! start-up by tracing the iso-contour across the six faces of the cube
//! instead of a hand-written triangle table; each polygon is fanned around
//! its centroid. Ambiguous faces separate the foreground corners.

use std::sync::OnceLock;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::volgrid::LabelMask;

pub const NAMES: [&str; 10] = [
    "VoxelVolume",
    "SurfaceArea",
    "Sphericity",
    "SurfaceVolumeRatio",
    "Maximum3DDiameter",
    "MajorAxisLength",
    "MinorAxisLength",
    "LeastAxisLength",
    "Elongation",
    "Flatness",
];

/// Cube corner `k` sits at `(k & 1, (k >> 1) & 1, (k >> 2) & 1)`.
fn corner(k: usize) -> [f64; 3] {
    [(k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64]
}

type Edge = (u8, u8);

/// Corner cycles of the six cube faces.
fn faces() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(6);
    for axis in 0..3 {
        let (u, w) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for side in 0..2 {
            out.push([(0, 0), (1, 0), (1, 1), (0, 1)].map(|(a, b)| (side << axis) | (a << u) | (b << w)));
        }
    }
    out
}

fn edge(a: usize, b: usize) -> Edge {
    (a.min(b) as u8, a.max(b) as u8)
}

/// Closed polygons (as edge lists) of the iso-surface inside one cube.
fn polygons(config: u8) -> Vec<Vec<Edge>> {
    let inside = |k: usize| config >> k & 1 == 1;
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for f in faces() {
        let crossings: Vec<usize> = (0..4).filter(|&i| inside(f[i]) != inside(f[(i + 1) % 4])).collect();
        let e = |i: usize| edge(f[i % 4], f[(i + 1) % 4]);
        match crossings.len() {
            2 => segments.push((e(crossings[0]), e(crossings[1]))),
            4 => {
                // Cut off each foreground corner k: edges k-1 and k.
                for k in (0..4).filter(|&k| inside(f[k])) {
                    segments.push((e(k + 3), e(k)));
                }
            }
            _ => {}
        }
    }
    let mut used = vec![false; segments.len()];
    let mut loops = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut cur) = segments[start];
        let mut poly = vec![first];
        while cur != first {
            poly.push(cur);
            let next = (0..segments.len())
                .find(|&s| !used[s] && (segments[s].0 == cur || segments[s].1 == cur))
                .expect("iso-contour segments form closed loops");
            used[next] = true;
            cur = if segments[next].0 == cur { segments[next].1 } else { segments[next].0 };
        }
        loops.push(poly);
    }
    loops
}

fn polygon_table() -> &'static Vec<Vec<Vec<Edge>>> {
    static TABLE: OnceLock<Vec<Vec<Vec<Edge>>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..=255u8).map(polygons).collect())
}

fn cross_norm(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

/// Mesh area contributed by one cube configuration at the given spacing.
fn config_area(config: u8, spacing: [f64; 3]) -> f64 {
    let mut area = 0.0;
    for poly in &polygon_table()[config as usize] {
        let pts: Vec<[f64; 3]> = poly
            .iter()
            .map(|&(a, b)| {
                let (ca, cb) = (corner(a as usize), corner(b as usize));
                std::array::from_fn(|k| 0.5 * (ca[k] + cb[k]) * spacing[k])
            })
            .collect();
        let mut c = [0.0; 3];
        for p in &pts {
            for k in 0..3 {
                c[k] += p[k] / pts.len() as f64;
            }
        }
        for i in 0..pts.len() {
            let (p, q) = (pts[i], pts[(i + 1) % pts.len()]);
            area += 0.5 * cross_norm(std::array::from_fn(|k| p[k] - c[k]), std::array::from_fn(|k| q[k] - c[k]));
        }
    }
    area
}

/// Histogram of cube configurations over the zero-padded mask.
fn config_histogram(mask: &LabelMask) -> [u64; 256] {
    let [nx, ny, nz] = mask.dims().map(|d| d as i64);
    let at = |x: i64, y: i64, z: i64| -> u8 {
        if x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz {
            0
        } else {
            mask.get(x as usize, y as usize, z as usize)
        }
    };
    let mut hist = [0u64; 256];
    for z in -1..nz {
        for y in -1..ny {
            for x in -1..nx {
                let mut c = 0u8;
                for k in 0..8 {
                    c |= at(x + (k & 1), y + ((k >> 1) & 1), z + ((k >> 2) & 1)) << k;
                }
                hist[c as usize] += 1;
            }
        }
    }
    hist
}

/// Marching-cubes surface area of the mask in mm².
pub fn mesh_surface_area(mask: &LabelMask) -> f64 {
    let spacing = mask.geometry().spacing;
    let hist = config_histogram(mask);
    (1..255).filter(|&c| hist[c] > 0).map(|c| hist[c] as f64 * config_area(c as u8, spacing)).sum()
}

/// Area of voxel faces between foreground and background (or the grid edge).
pub fn exposed_face_area(mask: &LabelMask) -> f64 {
    let [sx, sy, sz] = mask.geometry().spacing;
    let face = [sy * sz, sx * sz, sx * sy];
    let [nx, ny, nz] = mask.dims();
    let mut area = 0.0;
    for idx in mask.foreground_indices() {
        let [x, y, z] = mask.coords(idx);
        let neighbours = [
            (0, x.checked_sub(1).map(|xx| mask.get(xx, y, z))),
            (0, (x + 1 < nx).then(|| mask.get(x + 1, y, z))),
            (1, y.checked_sub(1).map(|yy| mask.get(x, yy, z))),
            (1, (y + 1 < ny).then(|| mask.get(x, y + 1, z))),
            (2, z.checked_sub(1).map(|zz| mask.get(x, y, zz))),
            (2, (z + 1 < nz).then(|| mask.get(x, y, z + 1))),
        ];
        for (axis, v) in neighbours {
            if v.unwrap_or(0) == 0 {
                area += face[axis];
            }
        }
    }
    area
}

/// Index triples of the first and last foreground voxel of every x-row.
/// Every vertex of the convex hull is among them.
fn row_extremes(mask: &LabelMask) -> Vec<[i64; 3]> {
    let [nx, ny, nz] = mask.dims();
    let mut out = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            let start = mask.linear_index(0, y, z);
            let row = &mask.labels()[start..start + nx];
            if let (Some(first), Some(last)) = (row.iter().position(|&v| v != 0), row.iter().rposition(|&v| v != 0)) {
                out.push([first as i64, y as i64, z as i64]);
                if last != first {
                    out.push([last as i64, y as i64, z as i64]);
                }
            }
        }
    }
    out
}

/// Largest distance between two voxel centres of the mask surface, in mm.
/// Distances are taken from integer index offsets, so they do not depend on
/// where the mask sits in the grid.
pub fn maximum_diameter(mask: &LabelMask) -> f64 {
    let g = mask.geometry();
    let axes: [[f64; 3]; 3] = std::array::from_fn(|a| g.direction[a].map(|v| v * g.spacing[a]));
    let pts = row_extremes(mask);
    let mut best = 0.0f64;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            let d: [f64; 3] = std::array::from_fn(|a| (q[a] - p[a]) as f64);
            let v: [f64; 3] = std::array::from_fn(|k| (0..3).map(|a| axes[a][k] * d[a]).sum());
            best = best.max(v.iter().map(|x| x * x).sum());
        }
    }
    best.sqrt()
}

/// Eigenvalues (descending, clamped at 0) of the population covariance of
/// physical voxel-centre coordinates.
///
/// Moments are accumulated exactly on integer indices, so a translated mask
/// gives bitwise-identical results; spacing and direction are applied after.
pub fn principal_moments(mask: &LabelMask) -> [f64; 3] {
    let n = mask.count() as i128;
    let mut s1 = [0i128; 3];
    let mut s2 = [[0i128; 3]; 3];
    for i in mask.foreground_indices() {
        let c = mask.coords(i).map(|v| v as i128);
        for a in 0..3 {
            s1[a] += c[a];
            for b in 0..3 {
                s2[a][b] += c[a] * c[b];
            }
        }
    }
    let g = mask.geometry();
    // Index-space covariance scaled by spacing, then rotated.
    let cov_idx = Matrix3::from_fn(|a, b| {
        let num = n * s2[a][b] - s1[a] * s1[b];
        num as f64 / (n * n) as f64 * g.spacing[a] * g.spacing[b]
    });
    let d = Matrix3::from_fn(|r, c| g.direction[c][r]);
    let cov = d * cov_idx * d.transpose();
    let eig = SymmetricEigen::new(cov);
    let mut l: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    [l[0], l[1], l[2]]
}

/// All ten shape features. `degenerate` is set when the mask has no spread
/// (a single voxel), in which case elongation and flatness are reported as 0.
pub fn features(mask: &LabelMask) -> Result<([f64; 10], bool)> {
    let n = mask.count();
    if n == 0 {
        return Err(Error::EmptyRoi);
    }
    let volume = n as f64 * mask.geometry().voxel_volume();
    let area = mesh_surface_area(mask);
    let sphericity = (36.0 * std::f64::consts::PI * volume * volume).cbrt() / area;
    let [l1, l2, l3] = principal_moments(mask);
    let degenerate = l1 == 0.0;
    let (elongation, flatness) = if degenerate { (0.0, 0.0) } else { ((l2 / l1).sqrt(), (l3 / l1).sqrt()) };
    Ok((
        [
            volume,
            area,
            sphericity,
            area / volume,
            maximum_diameter(mask),
            4.0 * l1.sqrt(),
            4.0 * l2.sqrt(),
            4.0 * l3.sqrt(),
            elongation,
            flatness,
        ],
        degenerate,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volgrid::VoxelGeometry;

    fn block(dims: [usize; 3], lo: [usize; 3], hi: [usize; 3], spacing: [f64; 3]) -> LabelMask {
        let g = VoxelGeometry::with_spacing(spacing);
        let probe = LabelMask::new(dims, g, vec![0; dims.iter().product()]).unwrap();
        LabelMask::from_fn(probe.grid(), |i| {
            let c = probe.coords(i);
            (0..3).all(|a| c[a] >= lo[a] && c[a] < hi[a])
        })
    }

    #[test]
    fn every_configuration_closes() {
        for c in 0..=255u8 {
            let polys = polygons(c);
            if c == 0 || c == 255 {
                assert!(polys.is_empty());
            } else {
                assert!(!polys.is_empty(), "config {c}");
                assert!(polys.iter().all(|p| p.len() >= 3));
            }
        }
    }

    #[test]
    fn complementary_configurations_have_equal_area() {
        // Ambiguous faces are resolved towards the foreground, so only
        // configurations without them are symmetric under complement.
        let ambiguous = |c: u8| {
            faces().iter().any(|f| (0..4).filter(|&i| (c >> f[i] & 1) != (c >> f[(i + 1) % 4] & 1)).count() == 4)
        };
        for c in (1..255u8).filter(|&c| !ambiguous(c)) {
            let a = config_area(c, [1.0; 3]);
            let b = config_area(!c, [1.0; 3]);
            assert!((a - b).abs() < 1e-12, "config {c}: {a} vs {b}");
        }
    }

    #[test]
    fn single_voxel() {
        let m = block([3, 3, 3], [1, 1, 1], [2, 2, 2], [1.0; 3]);
        let (f, degenerate) = features(&m).unwrap();
        assert_eq!(f[0], 1.0);
        // Octahedron of eight equilateral triangles with side sqrt(1/2).
        assert!((f[1] - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(f[4], 0.0);
        assert!(degenerate);
        assert_eq!(exposed_face_area(&m), 6.0);
    }

    #[test]
    fn solid_cube() {
        let m = block([12, 12, 12], [1, 1, 1], [11, 11, 11], [1.0; 3]);
        let (f, _) = features(&m).unwrap();
        assert_eq!(f[0], 1000.0);
        assert_eq!(exposed_face_area(&m), 600.0);
        // Flat 9x9 faces, bevelled edges and corners of the half-voxel mesh.
        let expected = 6.0 * 81.0 + 12.0 * 9.0 * 0.5f64.sqrt() + 8.0 * 3f64.sqrt() / 8.0;
        assert!((f[1] - expected).abs() < 1e-9, "{} vs {expected}", f[1]);
        assert!((f[4] - (3.0 * 81.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn translation_invariance() {
        let a = block([10, 9, 8], [1, 2, 1], [5, 6, 4], [0.7, 0.8, 2.0]);
        let b = block([10, 9, 8], [4, 3, 3], [8, 7, 6], [0.7, 0.8, 2.0]);
        assert_eq!(features(&a).unwrap(), features(&b).unwrap());
    }

    #[test]
    fn diameter_matches_all_pairs() {
        let g = VoxelGeometry::with_spacing([0.6, 0.9, 1.7]);
        let probe = LabelMask::new([9, 8, 7], g, vec![0; 504]).unwrap();
        let m = LabelMask::from_fn(probe.grid(), |i| {
            let [x, y, z] = probe.coords(i);
            (x * 7 + y * 3 + z * 5) % 4 == 0 || (x + y + z) % 5 == 1
        });
        let pts: Vec<[f64; 3]> = m
            .foreground_indices()
            .map(|i| m.geometry().index_to_physical(m.coords(i).map(|c| c as f64)))
            .collect();
        let mut best = 0.0f64;
        for p in &pts {
            for q in &pts {
                best = best.max((0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>());
            }
        }
        assert!((maximum_diameter(&m) - best.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn axis_lengths_of_a_bar() {
        let m = block([12, 3, 3], [1, 1, 1], [11, 2, 2], [1.0; 3]);
        let (f, degenerate) = features(&m).unwrap();
        assert!(!degenerate);
        // Ten collinear points at unit steps: variance (n² - 1) / 12.
        assert!((f[5] - 4.0 * (99.0f64 / 12.0).sqrt()).abs() < 1e-9);
        assert!(f[6].abs() < 1e-6 && f[8].abs() < 1e-6);
    }
}
