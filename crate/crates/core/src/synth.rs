//! Seeded synthetic cohorts: ellipsoid lesions in a noisy background, model
//! probability maps with a calibrated overlap against the reference, and
//! survival times linked to lesion volume.
//!
//! Predictions are the reference ellipsoid translated along x. The shift is
//! found by bisection so the binarized map reaches the requested DICE; a
//! translated ellipsoid stays a single component, so ranking and review see
//! exactly one candidate.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maskio::{self, CaseEntry, CohortManifest, NrrdEncoding, PredInput, PredKind};
use crate::segeval;
use crate::segpost::{self, Connectivity};
use crate::volgrid::{Grid, LabelMask, ProbabilityMap, Volume3D, VoxelGeometry};

/// Achieved DICE must land within this distance of the target.
pub const DICE_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextureMode {
    /// Constant lesion and background intensity.
    Uniform,
    /// Gaussian noise on lesion and background.
    #[default]
    Noisy,
    /// Noisy, with a brighter core inside half the radius.
    Shelled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurvivalModel {
    /// Months at a 1 cm³ lesion; `None` centres the classes on the volume range.
    pub base: Option<f64>,
    /// Months lost per unit of `ln(volume / cm³)`.
    pub slope: f64,
    pub noise_sd: f64,
    pub threshold_months: f64,
}

impl Default for SurvivalModel {
    fn default() -> Self {
        Self {
            base: None,
            slope: 15.0,
            noise_sd: 4.0,
            threshold_months: 60.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    /// Fixed grid size; `None` fits the grid around each lesion.
    pub dims: Option<[usize; 3]>,
    pub spacing: [f64; 3],
    /// Lesion volume envelope in cm³.
    pub volume_range_cm3: [f64; 2],
    pub background_hu: f64,
    pub lesion_hu: f64,
    pub noise_sd: f64,
    pub texture: TextureMode,
    /// Targets for ordinary cases.
    pub target_dice: [f64; 2],
    /// Targets for cases built to fail review.
    pub low_dice: [f64; 2],
    pub fraction_below_03: f64,
    /// Probability maps written per case (averaged by the ensemble step).
    pub n_models: usize,
    pub survival: SurvivalModel,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: None,
            spacing: [1.0, 1.0, 1.0],
            volume_range_cm3: [0.2, 511.9],
            background_hu: -800.0,
            lesion_hu: 30.0,
            noise_sd: 20.0,
            texture: TextureMode::Noisy,
            target_dice: [0.55, 0.95],
            low_dice: [0.1, 0.2],
            fraction_below_03: 0.1,
            n_models: 2,
            survival: SurvivalModel::default(),
        }
    }
}

impl PhantomSpec {
    /// Parse a TOML phantom description; absent keys take their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: PhantomSpec = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.volume_range_cm3;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid(format!("volume range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")));
        }
        for (name, [a, b]) in [("target_dice", self.target_dice), ("low_dice", self.low_dice)] {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
                return Err(Error::invalid(format!("{name} must be a sub-range of [0, 1], got [{a}, {b}]")));
            }
        }
        if !(0.0..=1.0).contains(&self.fraction_below_03) {
            return Err(Error::invalid("fraction_below_03 must lie in [0, 1]"));
        }
        if self.n_models == 0 {
            return Err(Error::invalid("n_models must be at least 1"));
        }
        VoxelGeometry::with_spacing(self.spacing).validate()
    }

    /// Volume sampling bounds, pulled inside the envelope so rasterized
    /// volumes stay within it.
    fn sampling_bounds(&self) -> (f64, f64) {
        let [lo, hi] = self.volume_range_cm3;
        let (a, b) = (lo * 1.15, hi / 1.15);
        if a < b {
            (a, b)
        } else {
            let m = (lo * hi).sqrt();
            (m, m)
        }
    }

    fn survival_base(&self) -> f64 {
        self.survival.base.unwrap_or_else(|| {
            let (a, b) = self.sampling_bounds();
            self.survival.threshold_months + self.survival.slope * 0.5 * (a.ln() + b.ln())
        })
    }
}

/// One generated case held in memory.
#[derive(Clone, Debug)]
pub struct PhantomCase {
    pub image: Volume3D,
    pub reference: LabelMask,
    /// One map per model; their average binarizes to the calibrated mask.
    pub predictions: Vec<ProbabilityMap>,
    pub survival_months: f64,
    pub truth: CaseTruth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseTruth {
    pub case_id: String,
    pub target_dice: f64,
    pub achieved_dice: f64,
    pub below_review_threshold: bool,
    pub volume_cm3: f64,
    pub survival_months: f64,
    pub shift_mm: f64,
}

#[derive(Clone, Copy, Debug)]
struct Ellipsoid {
    centre: [f64; 3],
    axes: [f64; 3],
}

impl Ellipsoid {
    /// Normalized radius; at most 1 inside.
    fn radius(&self, p: [f64; 3]) -> f64 {
        (0..3).map(|k| ((p[k] - self.centre[k]) / self.axes[k]).powi(2)).sum::<f64>().sqrt()
    }

    fn shifted(&self, dx: f64) -> Self {
        let mut e = *self;
        e.centre[0] += dx;
        e
    }
}

fn voxel_centres(dims: [usize; 3], spacing: [f64; 3]) -> impl Iterator<Item = [f64; 3]> {
    let [nx, ny, nz] = dims;
    (0..nx * ny * nz).map(move |i| {
        let c = [i % nx, (i / nx) % ny, i / (nx * ny)];
        std::array::from_fn(|k| c[k] as f64 * spacing[k])
    })
}

fn rasterize(dims: [usize; 3], g: &VoxelGeometry, e: &Ellipsoid) -> Result<LabelMask> {
    let labels = voxel_centres(dims, g.spacing).map(|p| u8::from(e.radius(p) <= 1.0)).collect();
    LabelMask::new(dims, g.clone(), labels)
}

/// Piecewise probability that stays above 0.5 exactly inside the ellipsoid.
fn probability(r: f64) -> f64 {
    const STEEPNESS: f64 = 4.0;
    if r <= 1.0 {
        0.51 + 0.49 * ((1.0 - r) * STEEPNESS).tanh()
    } else {
        0.49 * (1.0 - ((r - 1.0) * STEEPNESS).tanh())
    }
}

/// Case RNG: one ChaCha stream per case index under the cohort seed.
pub fn case_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Generate one case with the given DICE target.
pub fn gen_case(spec: &PhantomSpec, case_id: &str, target_dice: f64, rng: &mut impl Rng) -> Result<PhantomCase> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&target_dice) {
        return Err(Error::invalid(format!("target dice must lie in [0, 1], got {target_dice}")));
    }
    let (vlo, vhi) = spec.sampling_bounds();
    let volume_cm3 = if vlo < vhi { rng.random_range(vlo.ln()..vhi.ln()).exp() } else { vlo };
    let ratios = [1.0, rng.random_range(0.75..1.0), rng.random_range(0.75..1.0)];
    let a = (3.0 * volume_cm3 * 1000.0 / (4.0 * PI * ratios[1] * ratios[2])).cbrt();
    let axes = ratios.map(|r| r * a);
    let spacing = spec.spacing;

    // Room for the lesion, the full translation along x and a border.
    let pad = 3.0;
    let extent = [4.0 * axes[0], 2.0 * axes[1], 2.0 * axes[2]];
    let needed: [usize; 3] = std::array::from_fn(|k| (extent[k] / spacing[k]).ceil() as usize + 2 * pad as usize + 3);
    let dims = match spec.dims {
        Some(d) => {
            if (0..3).any(|k| d[k] < needed[k]) {
                return Err(Error::invalid(format!(
                    "lesion of {volume_cm3:.2} cm³ does not fit in grid {d:?}, needs {needed:?}"
                )));
            }
            d
        }
        None => needed,
    };
    let centre: [f64; 3] = std::array::from_fn(|k| (pad + rng.random_range(0.0..1.0)) * spacing[k] + axes[k]);
    let lesion = Ellipsoid { centre, axes };
    let g = VoxelGeometry::with_spacing(spacing);
    let reference = rasterize(dims, &g, &lesion)?;
    if reference.is_blank() {
        return Err(Error::invalid("lesion rasterized to an empty mask; use a finer spacing"));
    }
    if segpost::connected_components(&reference, Connectivity::TwentySix).len() != 1 {
        return Err(Error::invalid("lesion rasterized to several components"));
    }

    // Bisection on the shift; DICE falls from 1 at no shift to 0 past 2a.
    let dice_at = |s: f64| -> Result<f64> { segeval::dice(&rasterize(dims, &g, &lesion.shifted(s))?, &reference) };
    let (mut lo, mut hi) = (0.0, 2.0 * axes[0] + spacing[0]);
    let mut best = (0.0, 1.0);
    for _ in 0..48 {
        if (best.1 - target_dice).abs() < 1e-3 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let d = dice_at(mid)?;
        if (d - target_dice).abs() < (best.1 - target_dice).abs() {
            best = (mid, d);
        }
        if d > target_dice {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (shift, achieved) = best;
    if (achieved - target_dice).abs() > DICE_TOLERANCE {
        return Err(Error::invalid(format!(
            "could not reach dice {target_dice:.3} (best {achieved:.3}); lesion too small for this spacing"
        )));
    }
    let pred_shape = lesion.shifted(shift);

    // Intensities are whole HU so that shifts by whole HU stay exact.
    let normal = Normal::new(0.0, spec.noise_sd.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let values: Vec<f32> = voxel_centres(dims, spacing)
        .map(|p| {
            let r = lesion.radius(p);
            let base = if r <= 1.0 {
                spec.lesion_hu + if spec.texture == TextureMode::Shelled && r < 0.5 { 60.0 } else { 0.0 }
            } else {
                spec.background_hu
            };
            let noise = if spec.texture == TextureMode::Uniform { 0.0 } else { normal.sample(rng) };
            (base + noise).round() as f32
        })
        .collect();
    let image = Volume3D::new(dims, g.clone(), values)?;

    // Model maps p ± d with |d| <= 0.005 keep every model on the same side
    // of 0.5 as their mean.
    let phases: Vec<f64> = (0..spec.n_models).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let predictions = (0..spec.n_models)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let last_odd = spec.n_models % 2 == 1 && m + 1 == spec.n_models;
            let probs = voxel_centres(dims, spacing)
                .map(|p| {
                    let base = probability(pred_shape.radius(p));
                    let wobble = if last_odd { 0.0 } else { 0.005 * (p[0] * 0.7 + p[1] * 0.3 + phases[m - m % 2]).sin() };
                    (base + sign * wobble).clamp(0.0, 1.0) as f32
                })
                .collect();
            ProbabilityMap::new(dims, g.clone(), probs)
        })
        .collect::<Result<Vec<_>>>()?;

    let s = &spec.survival;
    let noise = Normal::new(0.0, s.noise_sd.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?.sample(rng);
    let survival_months = (spec.survival_base() - s.slope * volume_cm3.ln() + noise).max(0.0);

    Ok(PhantomCase {
        truth: CaseTruth {
            case_id: case_id.to_string(),
            target_dice,
            achieved_dice: achieved,
            below_review_threshold: achieved < segeval::DEFAULT_MIN_DICE,
            volume_cm3: reference.physical_volume() / 1000.0,
            survival_months,
            shift_mm: shift,
        },
        image,
        reference,
        predictions,
        survival_months,
    })
}

/// Case ids and DICE targets for a cohort: exactly
/// `round(fraction_below_03 * n)` cases draw from the low range.
pub fn cohort_plan(n: usize, spec: &PhantomSpec, seed: u64) -> Vec<(String, f64)> {
    let mut rng = case_rng(seed, usize::MAX);
    let n_low = (spec.fraction_below_03 * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut low = vec![false; n];
    for &i in &order[..n_low] {
        low[i] = true;
    }
    (0..n)
        .map(|i| {
            let [a, b] = if low[i] { spec.low_dice } else { spec.target_dice };
            let t = if a < b { rng.random_range(a..=b) } else { a };
            (format!("case_{i:03}"), t)
        })
        .collect()
}

/// Generate `n` cases in memory, in parallel, each from its own RNG stream.
pub fn gen_cohort_in_memory(n: usize, spec: &PhantomSpec, seed: u64) -> Result<Vec<PhantomCase>> {
    if n == 0 {
        return Err(Error::invalid("cohort size must be at least 1"));
    }
    spec.validate()?;
    cohort_plan(n, spec, seed)
        .into_par_iter()
        .enumerate()
        .map(|(i, (id, target))| gen_case(spec, &id, target, &mut case_rng(seed, i)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct GeneratedCohort {
    pub manifest: CohortManifest,
    pub manifest_path: PathBuf,
    pub truth: Vec<CaseTruth>,
}

/// Generate a cohort and write images, masks, probability maps, the manifest
/// (`manifest.json`) and the construction record (`truth.json`) to `dir`.
pub fn gen_cohort(n: usize, spec: &PhantomSpec, seed: u64, dir: impl AsRef<Path>) -> Result<GeneratedCohort> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cases = gen_cohort_in_memory(n, spec, seed)?;
    let entries = cases
        .par_iter()
        .map(|c| write_case(c, dir))
        .collect::<Result<Vec<_>>>()?;
    let manifest = CohortManifest { cases: entries };
    let manifest_path = dir.join("manifest.json");
    maskio::write_manifest(&manifest, &manifest_path)?;
    let truth: Vec<CaseTruth> = cases.into_iter().map(|c| c.truth).collect();
    let truth_path = dir.join("truth.json");
    let mut text = serde_json::to_string_pretty(&truth)?;
    text.push('\n');
    std::fs::write(&truth_path, text).map_err(|e| Error::io(&truth_path, e))?;
    Ok(GeneratedCohort {
        manifest,
        manifest_path,
        truth,
    })
}

fn write_case(c: &PhantomCase, dir: &Path) -> Result<CaseEntry> {
    let id = &c.truth.case_id;
    let image_name = format!("{id}_image.nrrd");
    let hu: Vec<i16> = c.image.values().iter().map(|&v| v as i16).collect();
    let hu = Grid::new(c.image.dims(), c.image.geometry().clone(), hu)?;
    maskio::write_nrrd(&hu, dir.join(&image_name), NrrdEncoding::Gzip)?;
    let ref_name = format!("{id}_ref.nrrd");
    maskio::write_nrrd(&c.reference, dir.join(&ref_name), NrrdEncoding::Gzip)?;
    let mut pred = Vec::new();
    for (m, p) in c.predictions.iter().enumerate() {
        let name = format!("model{}", m + 1);
        let file = format!("{id}_{name}_prob.nrrd");
        maskio::write_nrrd(p, dir.join(&file), NrrdEncoding::Gzip)?;
        pred.push(PredInput {
            name,
            kind: PredKind::Prob,
            path: PathBuf::from(file),
        });
    }
    Ok(CaseEntry {
        case_id: id.clone(),
        image: PathBuf::from(image_name),
        ref_mask: PathBuf::from(ref_name),
        pred,
        survival_months: Some(c.survival_months),
    })
}
