//! Hand-crafted radiomic features.
//!
//! Shape is computed on the 3D mask and first-order statistics over the whole
//! ROI. The five texture families are computed per axial slice and averaged
//! over every slice with enough ROI pixels. All families share one gray-level
//! discretization of the 3D ROI.

pub mod firstorder;
pub mod glcm;
pub mod gldm;
pub mod glrlm;
pub mod glszm;
pub mod matrix;
pub mod ngtdm;
pub mod shape;

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::volgrid::{self, LabelMask, Volume3D};
pub use matrix::SliceRoi;

/// Voxels kept around the ROI before resampling. The B-spline prefilter has
/// unbounded support, so this is wide enough for its weights to decay below
/// 1e-4 and keeps the result independent of where the lesion sits.
const CROP_MARGIN: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Fixed bin width in HU.
    pub bin_width: f64,
    /// In-plane target spacing `[x, y]` in mm.
    pub target_spacing_xy: [f64; 2],
    pub min_slice_pixels: usize,
    pub glcm_distance: usize,
    /// Chebyshev neighbourhood radius for NGTDM and GLDM.
    pub delta: usize,
    /// GLDM gray-level tolerance.
    pub alpha: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            bin_width: 25.0,
            target_spacing_xy: [1.0, 1.0],
            min_slice_pixels: 5,
            glcm_distance: 1,
            delta: 1,
            alpha: 0.0,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.bin_width) {
            return Err(Error::Config(format!("bin_width must be positive, got {}", self.bin_width)));
        }
        if !self.target_spacing_xy.iter().all(|&s| positive(s)) {
            return Err(Error::Config("target_spacing_xy must be positive".into()));
        }
        if self.min_slice_pixels == 0 || self.glcm_distance == 0 || self.delta == 0 {
            return Err(Error::Config(
                "min_slice_pixels, glcm_distance and delta must be positive".into(),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hex_digest(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    FirstOrder,
    Shape,
    Glcm,
    Glrlm,
    Glszm,
    Ngtdm,
    Gldm,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::FirstOrder,
        Family::Shape,
        Family::Glcm,
        Family::Glrlm,
        Family::Glszm,
        Family::Ngtdm,
        Family::Gldm,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            Family::FirstOrder => "firstorder",
            Family::Shape => "shape",
            Family::Glcm => "glcm",
            Family::Glrlm => "glrlm",
            Family::Glszm => "glszm",
            Family::Ngtdm => "ngtdm",
            Family::Gldm => "gldm",
        }
    }

    pub fn names(self) -> &'static [&'static str] {
        match self {
            Family::FirstOrder => &firstorder::NAMES,
            Family::Shape => &shape::NAMES,
            Family::Glcm => &glcm::NAMES,
            Family::Glrlm => &glrlm::NAMES,
            Family::Glszm => &glszm::NAMES,
            Family::Ngtdm => &ngtdm::NAMES,
            Family::Gldm => &gldm::NAMES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub family: Family,
    pub formula: &'static str,
}

/// Formula ids, aligned with the per-family name lists.
fn formula(family: Family, idx: usize) -> &'static str {
    const FO: [&str; 17] = [
        "sum(x)/N",
        "P50",
        "min(x)",
        "max(x)",
        "max-min",
        "P10",
        "P90",
        "P75-P25",
        "sum((x-mean)^2)/N",
        "m3/m2^1.5",
        "m4/m2^2",
        "sum(x^2)",
        "sqrt(sum(x^2)/N)",
        "sum|x-mean|/N",
        "MAD over P10<=x<=P90",
        "-sum p(i) log2 p(i)",
        "sum p(i)^2",
    ];
    const SHAPE: [&str; 10] = [
        "N*sx*sy*sz",
        "marching-cubes mesh area",
        "(36 pi V^2)^(1/3)/A",
        "A/V",
        "max distance between surface voxel centres",
        "4 sqrt(l1)",
        "4 sqrt(l2)",
        "4 sqrt(l3)",
        "sqrt(l2/l1)",
        "sqrt(l3/l1)",
    ];
    const GLCM: [&str; 10] = [
        "sum p^2",
        "-sum p log2 p",
        "sum (i-j)^2 p",
        "(sum ij p - mux muy)/(sx sy)",
        "sum p/(1+(i-j)^2)",
        "sum p/(1+|i-j|)",
        "sum k p_x+y(k)",
        "-sum p_x-y log2 p_x-y",
        "sum (k-mu)^2 p_x-y(k)",
        "sum ij p",
    ];
    const SIZE: [&str; 10] = [
        "sum M/j^2/N",
        "sum M j^2/N",
        "sum_i (sum_j M)^2/N",
        "sum_i (sum_j M)^2/N^2",
        "sum_j (sum_i M)^2/N",
        "sum_j (sum_i M)^2/N^2",
        "N/Np",
        "sum p (i-mu_i)^2",
        "sum p (j-mu_j)^2",
        "-sum p log2 p",
    ];
    const NGTDM: [&str; 5] = [
        "1/sum p s",
        "[sum p p (i-j)^2/(Ngp(Ngp-1))] sum s/N",
        "sum p s/sum |ip - jp|",
        "sum |i-j|(p s + p s)/(p+p)/N",
        "sum (p+p)(i-j)^2/sum s",
    ];
    const GLDM: [&str; 8] = [
        "sum D/k^2/N",
        "sum D k^2/N",
        "sum_i (sum_k D)^2/N",
        "sum_k (sum_i D)^2/N",
        "sum_k (sum_i D)^2/N^2",
        "sum p (i-mu_i)^2",
        "sum p (k-mu_k)^2",
        "-sum p log2 p",
    ];
    match family {
        Family::FirstOrder => FO[idx],
        Family::Shape => SHAPE[idx],
        Family::Glcm => GLCM[idx],
        Family::Glrlm | Family::Glszm => SIZE[idx],
        Family::Ngtdm => NGTDM[idx],
        Family::Gldm => GLDM[idx],
    }
}

/// The 70 features in output order.
pub fn catalog() -> &'static [CatalogEntry] {
    static CATALOG: OnceLock<Vec<CatalogEntry>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        Family::ALL
            .iter()
            .flat_map(|&family| {
                family.names().iter().enumerate().map(move |(i, n)| CatalogEntry {
                    name: format!("{}_{}", family.prefix(), n),
                    family,
                    formula: formula(family, i),
                })
            })
            .collect()
    })
}

pub fn feature_names() -> Vec<String> {
    catalog().iter().map(|e| e.name.clone()).collect()
}

/// Catalog reference as CSV with columns `name,family,formula`.
pub fn catalog_csv() -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["name", "family", "formula"]).expect("in-memory write");
    for e in catalog() {
        w.write_record([e.name.as_str(), e.family.prefix(), e.formula]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii catalog")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Values in catalog order.
    pub values: Vec<f64>,
    pub config_hash: String,
    pub n_slices_used: usize,
    /// Catalog names whose value is a fixed fallback or NaN.
    pub degenerate: Vec<String>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        catalog().iter().position(|e| e.name == name).map(|i| self.values[i])
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        catalog().iter().map(|e| e.name.as_str()).zip(self.values.iter().copied())
    }
}

fn flag(family: Family, names: &[&str], out: &mut Vec<String>) {
    out.extend(names.iter().map(|n| format!("{}_{}", family.prefix(), n)));
}

struct SliceFeatures {
    glcm: Option<[f64; 10]>,
    glrlm: [f64; 10],
    glszm: [f64; 10],
    ngtdm: [f64; 5],
    gldm: [f64; 8],
}

fn slice_features(slice: &SliceRoi, cfg: &ExtractionConfig) -> Result<SliceFeatures> {
    Ok(SliceFeatures {
        glcm: glcm::features(slice, cfg.glcm_distance).ok(),
        glrlm: glrlm::features(slice)?,
        glszm: glszm::features(slice)?,
        ngtdm: ngtdm::features(slice, cfg.delta)?,
        gldm: gldm::features(slice, cfg.delta, cfg.alpha)?,
    })
}

/// Full pipeline: crop, in-plane resampling, discretization, then every
/// feature family.
pub fn extract_all(vol: &Volume3D, mask: &LabelMask, cfg: &ExtractionConfig) -> Result<FeatureVector> {
    cfg.validate()?;
    vol.same_space(mask)?;
    if mask.is_blank() {
        return Err(Error::EmptyRoi);
    }
    let (vol, mask) = volgrid::crop_to_bbox(vol, mask, CROP_MARGIN)?;
    let vol = volgrid::resample_image_inplane(&vol, cfg.target_spacing_xy)?;
    let mask = volgrid::resample_mask_inplane(&mask, cfg.target_spacing_xy)?;
    if mask.is_blank() {
        return Err(Error::EmptyRoi);
    }
    let roi = volgrid::discretize(&vol, &mask, cfg.bin_width)?;

    let mut values = Vec::with_capacity(catalog().len());
    let mut degenerate = Vec::new();

    let roi_values: Vec<f64> = mask.foreground_indices().map(|i| f64::from(vol.values()[i])).collect();
    let roi_bins: Vec<u32> = mask.foreground_indices().map(|i| roi.bins[i]).collect();
    values.extend(firstorder::features(&roi_values, &roi_bins)?);

    let (shape_values, shape_degenerate) = shape::features(&mask)?;
    values.extend(shape_values);
    if shape_degenerate {
        flag(Family::Shape, &["Elongation", "Flatness"], &mut degenerate);
    }

    let [nx, ny, nz] = roi.dims;
    let per_slice: Vec<SliceFeatures> = (0..nz)
        .into_par_iter()
        .map(|z| SliceRoi::new(nx, ny, roi.slice(z).to_vec(), roi.num_levels))
        .filter(|s| s.pixel_count() >= cfg.min_slice_pixels)
        .map(|s| slice_features(&s, cfg))
        .collect::<Result<_>>()?;

    let glcm_rows: Vec<[f64; 10]> = per_slice.iter().filter_map(|s| s.glcm).collect();
    let glrlm_rows: Vec<[f64; 10]> = per_slice.iter().map(|s| s.glrlm).collect();
    let glszm_rows: Vec<[f64; 10]> = per_slice.iter().map(|s| s.glszm).collect();
    let ngtdm_rows: Vec<[f64; 5]> = per_slice.iter().map(|s| s.ngtdm).collect();
    let gldm_rows: Vec<[f64; 8]> = per_slice.iter().map(|s| s.gldm).collect();

    let mut push_family = |family: Family, mean: Option<Vec<f64>>, values: &mut Vec<f64>| match mean {
        Some(m) => values.extend(m),
        None => {
            values.extend(std::iter::repeat_n(f64::NAN, family.names().len()));
            flag(family, family.names(), &mut degenerate);
        }
    };
    push_family(Family::Glcm, matrix::mean_features(&glcm_rows).map(Vec::from), &mut values);
    push_family(Family::Glrlm, matrix::mean_features(&glrlm_rows).map(Vec::from), &mut values);
    push_family(Family::Glszm, matrix::mean_features(&glszm_rows).map(Vec::from), &mut values);
    push_family(Family::Ngtdm, matrix::mean_features(&ngtdm_rows).map(Vec::from), &mut values);
    push_family(Family::Gldm, matrix::mean_features(&gldm_rows).map(Vec::from), &mut values);
    if per_slice.is_empty() {
        log::warn!("no axial slice has {} ROI pixels; texture features are NaN", cfg.min_slice_pixels);
    }
    debug_assert_eq!(values.len(), catalog().len());

    Ok(FeatureVector {
        values,
        config_hash: cfg.hash(),
        n_slices_used: per_slice.len(),
        degenerate,
    })
}
