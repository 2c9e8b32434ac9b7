//! Brute-force reference implementations used by the oracle tests.
//!
//! Everything here is written for clarity over speed and shares no code with
//! the library beyond the plain data types.
#![allow(dead_code)]

use lungrad_core::radiomics::SliceRoi;
use lungrad_core::{LabelMask, VoxelGeometry};
use rand::Rng;

pub fn random_mask(rng: &mut impl Rng, dims: [usize; 3], density: f64) -> LabelMask {
    let n = dims.iter().product();
    let labels = (0..n).map(|_| u8::from(rng.random_bool(density))).collect();
    LabelMask::new(dims, VoxelGeometry::default(), labels).unwrap()
}

pub fn dice(a: &LabelMask, b: &LabelMask) -> f64 {
    let [nx, ny, nz] = a.dims();
    let (mut inter, mut sa, mut sb) = (0u64, 0u64, 0u64);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let (va, vb) = (a.get(x, y, z) != 0, b.get(x, y, z) != 0);
                inter += u64::from(va && vb);
                sa += u64::from(va);
                sb += u64::from(vb);
            }
        }
    }
    if sa + sb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (sa + sb) as f64
    }
}

/// Breadth-first flood fill; labels start at 1 in raster order of the first
/// voxel reached.
pub fn bfs_components(mask: &LabelMask, connectivity: u32) -> Vec<u32> {
    let [nx, ny, nz] = mask.dims();
    let mut labels = vec![0u32; nx * ny * nz];
    let mut next = 0;
    let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
    for start in 0..labels.len() {
        if mask.labels()[start] == 0 || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            let (x, y, z) = (v % nx, (v / nx) % ny, v / (nx * ny));
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let manhattan = dx.abs() + dy.abs() + dz.abs();
                        let ok = match connectivity {
                            6 => manhattan == 1,
                            18 => manhattan == 1 || manhattan == 2,
                            _ => manhattan > 0,
                        };
                        if !ok {
                            continue;
                        }
                        let (qx, qy, qz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if qx < 0 || qy < 0 || qz < 0 || qx >= nx as i64 || qy >= ny as i64 || qz >= nz as i64 {
                            continue;
                        }
                        let q = idx(qx as usize, qy as usize, qz as usize);
                        if mask.labels()[q] != 0 && labels[q] == 0 {
                            labels[q] = next;
                            queue.push_back(q);
                        }
                    }
                }
            }
        }
    }
    labels
}

/// True when both label fields induce the same partition of the voxels.
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    use std::collections::HashMap;
    if a.len() != b.len() {
        return false;
    }
    let mut ab = HashMap::new();
    let mut ba = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        if (x == 0) != (y == 0) {
            return false;
        }
        if *ab.entry(x).or_insert(y) != y || *ba.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

pub fn component_count(labels: &[u32]) -> usize {
    labels.iter().copied().max().unwrap_or(0) as usize
}

// ---------------------------------------------------------------------------
// Texture matrices. Dense `Vec<Vec<u64>>` indexed from zero: `m[i-1][j-1]`.

pub fn random_slice(rng: &mut impl Rng, w: usize, h: usize, levels: u32, p_outside: f64) -> SliceRoi {
    let bins = (0..w * h)
        .map(|_| if rng.random_bool(p_outside) { 0 } else { rng.random_range(1..=levels) })
        .collect();
    SliceRoi::new(w, h, bins, levels)
}

fn roi_pixels(s: &SliceRoi) -> Vec<(i64, i64, u32)> {
    let mut out = Vec::new();
    for y in 0..s.height {
        for x in 0..s.width {
            let b = s.bins[x + s.width * y];
            if b > 0 {
                out.push((x as i64, y as i64, b));
            }
        }
    }
    out
}

fn level_at(s: &SliceRoi, x: i64, y: i64) -> u32 {
    if x < 0 || y < 0 || x >= s.width as i64 || y >= s.height as i64 {
        0
    } else {
        s.bins[x as usize + s.width * y as usize]
    }
}

pub const DIRS: [(i64, i64); 4] = [(1, 0), (1, -1), (0, 1), (1, 1)];

/// Symmetric co-occurrence by enumerating every ordered pixel pair.
pub fn glcm(s: &SliceRoi, dir: (i64, i64), d: i64) -> Vec<Vec<u64>> {
    let ng = s.num_levels as usize;
    let mut m = vec![vec![0u64; ng]; ng];
    let px = roi_pixels(s);
    for &(x1, y1, a) in &px {
        for &(x2, y2, b) in &px {
            let (ddx, ddy) = (x2 - x1, y2 - y1);
            if (ddx, ddy) == (dir.0 * d, dir.1 * d) || (ddx, ddy) == (-dir.0 * d, -dir.1 * d) {
                m[a as usize - 1][b as usize - 1] += 1;
            }
        }
    }
    m
}

/// Runs found by testing every start point and every length.
pub fn glrlm(s: &SliceRoi, dir: (i64, i64)) -> Vec<Vec<u64>> {
    let ng = s.num_levels as usize;
    let max_run = s.width.max(s.height);
    let mut m = vec![vec![0u64; max_run]; ng];
    for (x, y, b) in roi_pixels(s) {
        for len in 1..=max_run as i64 {
            let inside = (0..len).all(|k| level_at(s, x + dir.0 * k, y + dir.1 * k) == b);
            let before = level_at(s, x - dir.0, y - dir.1) == b;
            let after = level_at(s, x + dir.0 * len, y + dir.1 * len) == b;
            if inside && !before && !after {
                m[b as usize - 1][len as usize - 1] += 1;
            }
        }
    }
    m
}

/// Zones by iterated minimum-label propagation over 8-neighbours.
pub fn glszm(s: &SliceRoi) -> Vec<Vec<u64>> {
    let ng = s.num_levels as usize;
    let n = s.bins.iter().filter(|&&b| b > 0).count().max(1);
    let (w, h) = (s.width as i64, s.height as i64);
    let mut label: Vec<usize> = (0..s.bins.len()).collect();
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                let b = level_at(s, x, y);
                if b == 0 {
                    continue;
                }
                let k = (x + w * y) as usize;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if level_at(s, x + dx, y + dy) == b {
                            let q = (x + dx + w * (y + dy)) as usize;
                            if label[q] < label[k] {
                                label[k] = label[q];
                                changed = true;
                            }
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut sizes = std::collections::BTreeMap::<usize, (u32, usize)>::new();
    for (k, &b) in s.bins.iter().enumerate() {
        if b > 0 {
            sizes.entry(label[k]).or_insert((b, 0)).1 += 1;
        }
    }
    let mut m = vec![vec![0u64; n]; ng];
    for (b, size) in sizes.into_values() {
        m[b as usize - 1][size - 1] += 1;
    }
    m
}

fn neighbours(s: &SliceRoi, x: i64, y: i64, delta: i64) -> Vec<u32> {
    let mut out = Vec::new();
    for (qx, qy, b) in roi_pixels(s) {
        let cheb = (qx - x).abs().max((qy - y).abs());
        if cheb >= 1 && cheb <= delta {
            out.push(b);
        }
    }
    out
}

pub fn gldm(s: &SliceRoi, delta: i64, alpha: f64) -> Vec<Vec<u64>> {
    let ng = s.num_levels as usize;
    let side = (2 * delta + 1) as usize;
    let mut m = vec![vec![0u64; side * side]; ng];
    for (x, y, b) in roi_pixels(s) {
        let dep = 1 + neighbours(s, x, y, delta)
            .into_iter()
            .filter(|&v| (v as f64 - b as f64).abs() <= alpha)
            .count();
        m[b as usize - 1][dep - 1] += 1;
    }
    m
}

/// `(n_i, s_i)` per level.
pub fn ngtdm(s: &SliceRoi, delta: i64) -> (Vec<u64>, Vec<f64>) {
    let ng = s.num_levels as usize;
    let (mut n, mut sums) = (vec![0u64; ng], vec![0.0; ng]);
    for (x, y, b) in roi_pixels(s) {
        let nb = neighbours(s, x, y, delta);
        if nb.is_empty() {
            continue;
        }
        let mean = nb.iter().map(|&v| v as f64).sum::<f64>() / nb.len() as f64;
        n[b as usize - 1] += 1;
        sums[b as usize - 1] += (b as f64 - mean).abs();
    }
    (n, sums)
}

pub fn dense(m: &lungrad_core::radiomics::matrix::CountMatrix) -> Vec<Vec<u64>> {
    (1..=m.rows).map(|i| (1..=m.cols).map(|j| m.get(i, j)).collect()).collect()
}

// ---------------------------------------------------------------------------
// Texture features straight from the textbook definitions.

fn normalized(m: &[Vec<u64>]) -> Option<Vec<Vec<f64>>> {
    let total: u64 = m.iter().flatten().sum();
    (total > 0).then(|| m.iter().map(|r| r.iter().map(|&c| c as f64 / total as f64).collect()).collect())
}

pub fn glcm_features(m: &[Vec<u64>]) -> Option<[f64; 10]> {
    let p = normalized(m)?;
    let ng = p.len();
    let lv = |k: usize| (k + 1) as f64;
    let px: Vec<f64> = (0..ng).map(|i| (0..ng).map(|j| p[i][j]).sum()).collect();
    let py: Vec<f64> = (0..ng).map(|j| (0..ng).map(|i| p[i][j]).sum()).collect();
    let mux: f64 = (0..ng).map(|i| lv(i) * px[i]).sum();
    let muy: f64 = (0..ng).map(|j| lv(j) * py[j]).sum();
    let sx = (0..ng).map(|i| (lv(i) - mux).powi(2) * px[i]).sum::<f64>().sqrt();
    let sy = (0..ng).map(|j| (lv(j) - muy).powi(2) * py[j]).sum::<f64>().sqrt();
    let mut f = [0.0; 10];
    let mut psum = vec![0.0; 2 * ng + 2];
    let mut pdiff = vec![0.0; ng];
    for i in 0..ng {
        for j in 0..ng {
            let v = p[i][j];
            let (a, b) = (lv(i), lv(j));
            f[0] += v * v;
            if v > 0.0 {
                f[1] -= v * v.log2();
            }
            f[2] += (a - b).powi(2) * v;
            f[4] += v / (1.0 + (a - b).powi(2));
            f[5] += v / (1.0 + (a - b).abs());
            f[9] += a * b * v;
            psum[i + j + 2] += v;
            pdiff[i.abs_diff(j)] += v;
        }
    }
    f[3] = if sx * sy == 0.0 { 1.0 } else { (f[9] - mux * muy) / (sx * sy) };
    f[6] = psum.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    f[7] = -pdiff.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>();
    let mud: f64 = pdiff.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    f[8] = pdiff.iter().enumerate().map(|(k, &v)| (k as f64 - mud).powi(2) * v).sum();
    Some(f)
}

/// Emphasis, non-uniformity, variance and entropy terms shared by run
/// length, size zone and dependence matrices, in the order
/// `[small, large, gln, glnn, sn, snn, count, gvar, svar, entropy]`.
fn size_family(m: &[Vec<u64>]) -> Option<[f64; 10]> {
    let total: u64 = m.iter().flatten().sum();
    if total == 0 {
        return None;
    }
    let n = total as f64;
    let p = normalized(m)?;
    let (ng, nj) = (p.len(), p[0].len());
    let lv = |k: usize| (k + 1) as f64;
    let mut f = [0.0; 10];
    let rows: Vec<f64> = m.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let cols: Vec<f64> = (0..nj).map(|j| m.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    let (mut mui, mut muj) = (0.0, 0.0);
    for i in 0..ng {
        for j in 0..nj {
            f[0] += p[i][j] / lv(j).powi(2);
            f[1] += p[i][j] * lv(j).powi(2);
            mui += p[i][j] * lv(i);
            muj += p[i][j] * lv(j);
            if p[i][j] > 0.0 {
                f[9] -= p[i][j] * p[i][j].log2();
            }
        }
    }
    for i in 0..ng {
        for j in 0..nj {
            f[7] += p[i][j] * (lv(i) - mui).powi(2);
            f[8] += p[i][j] * (lv(j) - muj).powi(2);
        }
    }
    f[2] = rows.iter().map(|r| r * r).sum::<f64>() / n;
    f[3] = f[2] / n;
    f[4] = cols.iter().map(|c| c * c).sum::<f64>() / n;
    f[5] = f[4] / n;
    f[6] = n;
    Some(f)
}

pub fn glrlm_features(m: &[Vec<u64>], n_pixels: usize) -> Option<[f64; 10]> {
    let mut f = size_family(m)?;
    f[6] /= n_pixels as f64;
    Some(f)
}

pub fn glszm_features(m: &[Vec<u64>], n_pixels: usize) -> Option<[f64; 10]> {
    glrlm_features(m, n_pixels)
}

pub fn gldm_features(m: &[Vec<u64>]) -> Option<[f64; 8]> {
    let f = size_family(m)?;
    Some([f[0], f[1], f[2], f[4], f[5], f[7], f[8], f[9]])
}

pub fn ngtdm_features(n: &[u64], s: &[f64]) -> [f64; 5] {
    let nv: u64 = n.iter().sum();
    if nv == 0 {
        return [1e6, 0.0, 0.0, 0.0, 0.0];
    }
    let nv = nv as f64;
    let present: Vec<usize> = (0..n.len()).filter(|&k| n[k] > 0).collect();
    let p = |k: usize| n[k] as f64 / nv;
    let lv = |k: usize| (k + 1) as f64;
    let ngp = present.len() as f64;
    let sum_s: f64 = present.iter().map(|&k| s[k]).sum();
    let sum_ps: f64 = present.iter().map(|&k| p(k) * s[k]).sum();
    let coarseness = if sum_ps == 0.0 { 1e6 } else { 1.0 / sum_ps };
    let (mut c, mut busy, mut cx, mut st) = (0.0, 0.0, 0.0, 0.0);
    for &i in &present {
        for &j in &present {
            c += p(i) * p(j) * (lv(i) - lv(j)).powi(2);
            busy += (lv(i) * p(i) - lv(j) * p(j)).abs();
            cx += (lv(i) - lv(j)).abs() * (p(i) * s[i] + p(j) * s[j]) / (p(i) + p(j));
            st += (p(i) + p(j)) * (lv(i) - lv(j)).powi(2);
        }
    }
    let contrast = if present.len() > 1 { c / (ngp * (ngp - 1.0)) * sum_s / nv } else { 0.0 };
    let busyness = if busy == 0.0 { 0.0 } else { sum_ps / busy };
    let strength = if sum_s == 0.0 { 0.0 } else { st / sum_s };
    [coarseness, contrast, busyness, cx / nv, strength]
}

pub fn mean<const N: usize>(items: &[[f64; N]]) -> Option<[f64; N]> {
    if items.is_empty() {
        return None;
    }
    let mut acc = [0.0; N];
    for it in items {
        for k in 0..N {
            acc[k] += it[k];
        }
    }
    Some(acc.map(|v| v / items.len() as f64))
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol || x == y)
}

/// Compare every texture matrix and feature of one slice with the oracle.
/// Returns a description of the first mismatch.
pub fn check_slice(s: &SliceRoi, tol: f64) -> Result<(), String> {
    use lungrad_core::radiomics::{glcm as g, gldm as d, glrlm as r, glszm as z, ngtdm as t};
    let n_px = s.pixel_count();
    let lib = g::matrices(s, 1);
    let mut per_dir = Vec::new();
    for (k, dir) in DIRS.iter().enumerate() {
        let o = glcm(s, *dir, 1);
        if dense(&lib[k]) != o {
            return Err(format!("GLCM matrix, direction {k}"));
        }
        if let Some(f) = glcm_features(&o) {
            per_dir.push(f);
        }
    }
    match (g::features(s, 1), mean(&per_dir)) {
        (Ok(a), Some(b)) if close(&a, &b, tol) => {}
        (Err(_), None) => {}
        (a, b) => return Err(format!("GLCM features {a:?} vs {b:?}")),
    }

    let lib = r::matrices(s);
    let mut per_dir = Vec::new();
    for (k, dir) in DIRS.iter().enumerate() {
        let o = glrlm(s, *dir);
        if dense(&lib[k]) != o {
            return Err(format!("GLRLM matrix, direction {k}"));
        }
        per_dir.extend(glrlm_features(&o, n_px));
    }
    match (r::features(s), mean(&per_dir)) {
        (Ok(a), Some(b)) if close(&a, &b, tol) => {}
        (Err(_), None) => {}
        (a, b) => return Err(format!("GLRLM features {a:?} vs {b:?}")),
    }

    let o = glszm(s);
    if dense(&z::matrix(s)) != o {
        return Err("GLSZM matrix".into());
    }
    match (z::features(s), glszm_features(&o, n_px)) {
        (Ok(a), Some(b)) if close(&a, &b, tol) => {}
        (Err(_), None) => {}
        (a, b) => return Err(format!("GLSZM features {a:?} vs {b:?}")),
    }

    let o = gldm(s, 1, 0.0);
    if dense(&d::matrix(s, 1, 0.0)) != o {
        return Err("GLDM matrix".into());
    }
    match (d::features(s, 1, 0.0), gldm_features(&o)) {
        (Ok(a), Some(b)) if close(&a, &b, tol) => {}
        (Err(_), None) => {}
        (a, b) => return Err(format!("GLDM features {a:?} vs {b:?}")),
    }

    let (on, os) = ngtdm(s, 1);
    let lm = t::matrix(s, 1);
    if lm.n != on || !close(&lm.s, &os, 1e-12) {
        return Err("NGTDM matrix".into());
    }
    if n_px > 0 {
        let a = t::features(s, 1).map_err(|e| e.to_string())?;
        let b = ngtdm_features(&on, &os);
        if !close(&a, &b, tol) {
            return Err(format!("NGTDM features {a:?} vs {b:?}"));
        }
    }
    Ok(())
}
