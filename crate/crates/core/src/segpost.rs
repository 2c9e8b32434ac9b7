//! Segmentation post-processing: ensembling, binarization and 3D
//! connected-component proposals ranked by volume.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volgrid::{Grid, LabelMask, ProbabilityMap, VoxelGeometry};

pub const DEFAULT_THRESHOLD: f32 = 0.5;

/// Voxel neighbourhood used for component labeling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Connectivity {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl Connectivity {
    /// Maximum number of non-zero coordinates in a neighbour offset.
    fn max_axes(self) -> i32 {
        match self {
            Self::Six => 1,
            Self::Eighteen => 2,
            Self::TwentySix => 3,
        }
    }

    pub fn value(self) -> u32 {
        match self {
            Self::Six => 6,
            Self::Eighteen => 18,
            Self::TwentySix => 26,
        }
    }

    /// All neighbour offsets `(dx, dy, dz)` of this connectivity.
    pub fn offsets(self) -> Vec<[i32; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let n = (dx != 0) as i32 + (dy != 0) as i32 + (dz != 0) as i32;
                    if n >= 1 && n <= self.max_axes() {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

impl TryFrom<u32> for Connectivity {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        match v {
            6 => Ok(Self::Six),
            18 => Ok(Self::Eighteen),
            26 => Ok(Self::TwentySix),
            other => Err(Error::invalid(format!("connectivity must be 6, 18 or 26, got {other}"))),
        }
    }
}

impl From<Connectivity> for u32 {
    fn from(c: Connectivity) -> u32 {
        c.value()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: u32,
    pub voxel_count: usize,
    pub volume_mm3: f64,
    pub first_voxel: usize,
}

/// Labeled components, `components[k].id == k + 1`, largest first.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentSet {
    pub dims: [usize; 3],
    pub geometry: VoxelGeometry,
    pub label_field: Vec<u32>,
    pub components: Vec<Component>,
}

impl ComponentSet {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Mask of a single component id.
    pub fn component_mask(&self, id: u32) -> LabelMask {
        let data = self.label_field.iter().map(|&l| u8::from(l == id)).collect();
        LabelMask::new(self.dims, self.geometry.clone(), data).expect("label field matches dims")
    }
}

/// Voxelwise arithmetic mean of probability maps.
pub fn ensemble_average(maps: &[ProbabilityMap]) -> Result<ProbabilityMap> {
    let first = maps.first().ok_or_else(|| Error::invalid("ensemble needs at least one map"))?;
    for m in &maps[1..] {
        first.same_space(m.grid())?;
    }
    if maps.len() == 1 {
        return Ok(first.clone());
    }
    let k = maps.len() as f64;
    // Per-voxel values are summed in sorted order so the mean does not depend
    // on the order of the input maps.
    let mut scratch = Vec::with_capacity(maps.len());
    let probs = (0..first.len())
        .map(|i| {
            scratch.clear();
            scratch.extend(maps.iter().map(|m| m.probs()[i]));
            scratch.sort_by(f32::total_cmp);
            let s: f64 = scratch.iter().map(|&p| f64::from(p)).sum();
            ((s / k) as f32).clamp(0.0, 1.0)
        })
        .collect();
    ProbabilityMap::new(first.dims(), first.geometry().clone(), probs)
}

/// Foreground iff `p > threshold`.
pub fn binarize(prob: &ProbabilityMap, threshold: f32) -> Result<LabelMask> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(LabelMask::from_fn(prob.grid(), |i| prob.probs()[i] > threshold))
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        match ra.cmp(&rb) {
            Ordering::Less => self.parent[rb as usize] = ra,
            Ordering::Greater => self.parent[ra as usize] = rb,
            Ordering::Equal => {}
        }
    }
}

/// Two-pass union-find labeling. Component ids are assigned in ranked order:
/// volume descending, ties by ascending first-voxel linear index.
pub fn connected_components(mask: &LabelMask, connectivity: Connectivity) -> ComponentSet {
    let [nx, ny, nz] = mask.dims();
    let backward: Vec<[i32; 3]> = connectivity
        .offsets()
        .into_iter()
        .filter(|&[dx, dy, dz]| dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0))))
        .collect();

    let mut provisional = vec![0u32; mask.len()];
    let mut uf = UnionFind { parent: vec![0] };
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let idx = mask.linear_index(x, y, z);
                if !mask.is_foreground(idx) {
                    continue;
                }
                let mut label = 0u32;
                for &[dx, dy, dz] in &backward {
                    let (qx, qy, qz) = (x as i64 + dx as i64, y as i64 + dy as i64, z as i64 + dz as i64);
                    if qx < 0 || qy < 0 || qz < 0 || qx >= nx as i64 || qy >= ny as i64 {
                        continue;
                    }
                    let q = mask.linear_index(qx as usize, qy as usize, qz as usize);
                    let ql = provisional[q];
                    if ql == 0 {
                        continue;
                    }
                    if label == 0 {
                        label = ql;
                    } else if label != ql {
                        uf.union(label, ql);
                    }
                }
                if label == 0 {
                    label = uf.parent.len() as u32;
                    uf.parent.push(label);
                }
                provisional[idx] = label;
            }
        }
    }

    // Resolve roots; roots are met in order of their first voxel.
    let mut root_slot = vec![u32::MAX; uf.parent.len()];
    let mut stats: Vec<(usize, usize)> = Vec::new(); // (count, first_voxel)
    for (idx, l) in provisional.iter_mut().enumerate() {
        if *l == 0 {
            continue;
        }
        let root = uf.find(*l) as usize;
        if root_slot[root] == u32::MAX {
            root_slot[root] = stats.len() as u32;
            stats.push((0, idx));
        }
        let slot = root_slot[root];
        stats[slot as usize].0 += 1;
        *l = slot + 1;
    }

    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| stats[b].0.cmp(&stats[a].0).then(stats[a].1.cmp(&stats[b].1)));
    let mut rank_of = vec![0u32; stats.len()];
    for (rank, &slot) in order.iter().enumerate() {
        rank_of[slot] = rank as u32 + 1;
    }
    for l in provisional.iter_mut().filter(|l| **l != 0) {
        *l = rank_of[*l as usize - 1];
    }
    let voxel_volume = mask.geometry().voxel_volume();
    let components = order
        .iter()
        .enumerate()
        .map(|(rank, &slot)| Component {
            id: rank as u32 + 1,
            voxel_count: stats[slot].0,
            volume_mm3: stats[slot].0 as f64 * voxel_volume,
            first_voxel: stats[slot].1,
        })
        .collect();

    ComponentSet {
        dims: mask.dims(),
        geometry: mask.geometry().clone(),
        label_field: provisional,
        components,
    }
}

/// One mask per component, largest first.
pub fn rank_by_volume(cs: &ComponentSet) -> Vec<LabelMask> {
    cs.components.iter().map(|c| cs.component_mask(c.id)).collect()
}

/// Keeps only the top-ranked component.
pub fn largest_component(mask: &LabelMask, connectivity: Connectivity) -> LabelMask {
    let cs = connected_components(mask, connectivity);
    match cs.components.first() {
        Some(c) => cs.component_mask(c.id),
        None => LabelMask::empty_like(mask.grid()),
    }
}

/// Label field as a grid, convenient for writing to disk.
pub fn label_grid(cs: &ComponentSet) -> Result<Grid<i16>> {
    let data = cs
        .label_field
        .iter()
        .map(|&l| i16::try_from(l).map_err(|_| Error::invalid("more than 32767 components")))
        .collect::<Result<Vec<_>>>()?;
    Grid::new(cs.dims, cs.geometry.clone(), data)
}
