//! Python bindings: grids, post-processing, evaluation, feature extraction,
//! the forest and the statistical tests.

use std::collections::BTreeMap;

use lungrad_core::learn::{self, ForestModel, ForestParams, MaxFeatures};
use lungrad_core::maskio::{self, NrrdEncoding};
use lungrad_core::radiomics::{self, ExtractionConfig};
use lungrad_core::segpost::{self, Connectivity};
use lungrad_core::{segeval, synth, Error};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::MissingFile { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn geometry(spacing: [f64; 3]) -> PyResult<lungrad_core::VoxelGeometry> {
    lungrad_core::VoxelGeometry::new(spacing, [0.0; 3], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).map_err(py_err)
}

fn encoding(gzip: bool) -> NrrdEncoding {
    if gzip {
        NrrdEncoding::Gzip
    } else {
        NrrdEncoding::Raw
    }
}

fn connectivity(c: u32) -> PyResult<Connectivity> {
    Connectivity::try_from(c).map_err(py_err)
}

/// CT intensities on a 3-D grid, x fastest.
#[pyclass(name = "Volume", module = "lungrad", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyVolume(lungrad_core::Volume3D);

#[pymethods]
impl PyVolume {
    #[new]
    #[pyo3(signature = (dims, values, spacing = [1.0, 1.0, 1.0]))]
    fn new(dims: [usize; 3], values: Vec<f32>, spacing: [f64; 3]) -> PyResult<Self> {
        lungrad_core::Volume3D::new(dims, geometry(spacing)?, values).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        maskio::read_volume(path).map(Self).map_err(py_err)
    }

    #[pyo3(signature = (path, gzip = true))]
    fn write(&self, path: &str, gzip: bool) -> PyResult<()> {
        maskio::write_nrrd(&self.0, path, encoding(gzip)).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> [usize; 3] {
        self.0.dims()
    }

    #[getter]
    fn spacing(&self) -> [f64; 3] {
        self.0.geometry().spacing
    }

    fn values(&self) -> Vec<f32> {
        self.0.values().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Volume(dims={:?}, spacing={:?})", self.0.dims(), self.0.geometry().spacing)
    }
}

/// Binary segmentation mask.
#[pyclass(name = "Mask", module = "lungrad", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyMask(lungrad_core::LabelMask);

#[pymethods]
impl PyMask {
    #[new]
    #[pyo3(signature = (dims, labels, spacing = [1.0, 1.0, 1.0]))]
    fn new(dims: [usize; 3], labels: Vec<u8>, spacing: [f64; 3]) -> PyResult<Self> {
        lungrad_core::LabelMask::new(dims, geometry(spacing)?, labels).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        maskio::read_mask(path).map(Self).map_err(py_err)
    }

    #[pyo3(signature = (path, gzip = true))]
    fn write(&self, path: &str, gzip: bool) -> PyResult<()> {
        maskio::write_nrrd(&self.0, path, encoding(gzip)).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> [usize; 3] {
        self.0.dims()
    }

    fn count(&self) -> usize {
        self.0.count()
    }

    /// Foreground volume in mm³.
    fn volume_mm3(&self) -> f64 {
        self.0.physical_volume()
    }

    /// Labels as `bytes`, x fastest.
    fn labels(&self) -> Vec<u8> {
        self.0.labels().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Mask(dims={:?}, count={})", self.0.dims(), self.0.count())
    }
}

/// Voxelwise foreground probabilities in [0, 1].
#[pyclass(name = "ProbabilityMap", module = "lungrad", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyProbabilityMap(lungrad_core::ProbabilityMap);

#[pymethods]
impl PyProbabilityMap {
    #[new]
    #[pyo3(signature = (dims, probs, spacing = [1.0, 1.0, 1.0]))]
    fn new(dims: [usize; 3], probs: Vec<f32>, spacing: [f64; 3]) -> PyResult<Self> {
        lungrad_core::ProbabilityMap::new(dims, geometry(spacing)?, probs).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        maskio::read_probability(path).map(Self).map_err(py_err)
    }

    #[pyo3(signature = (threshold = segpost::DEFAULT_THRESHOLD))]
    fn binarize(&self, threshold: f32) -> PyResult<PyMask> {
        segpost::binarize(&self.0, threshold).map(PyMask).map_err(py_err)
    }

    fn probs(&self) -> Vec<f32> {
        self.0.probs().to_vec()
    }
}

#[pyfunction]
fn dice(pred: &PyMask, reference: &PyMask) -> PyResult<f64> {
    segeval::dice(&pred.0, &reference.0).map_err(py_err)
}

#[pyfunction]
fn ensemble_average(maps: Vec<PyProbabilityMap>) -> PyResult<PyProbabilityMap> {
    let maps: Vec<_> = maps.into_iter().map(|m| m.0).collect();
    segpost::ensemble_average(&maps).map(PyProbabilityMap).map_err(py_err)
}

/// Connected components as masks ordered by decreasing volume.
#[pyfunction]
#[pyo3(signature = (mask, connectivity = 26))]
fn ranked_components(mask: &PyMask, connectivity: u32) -> PyResult<Vec<PyMask>> {
    let cs = segpost::connected_components(&mask.0, self::connectivity(connectivity)?);
    Ok(segpost::rank_by_volume(&cs).into_iter().map(PyMask).collect())
}

#[pyfunction]
#[pyo3(signature = (mask, connectivity = 26))]
fn largest_component(mask: &PyMask, connectivity: u32) -> PyResult<PyMask> {
    Ok(PyMask(segpost::largest_component(&mask.0, self::connectivity(connectivity)?)))
}

/// Reviewer simulation over ranked candidates: `(accepted, rank, dice)`,
/// where `rank` and `dice` describe the best candidate if there is one.
#[pyfunction]
#[pyo3(signature = (candidates, reference, min_dice = segeval::DEFAULT_MIN_DICE))]
fn simulate_review(candidates: Vec<PyMask>, reference: &PyMask, min_dice: f64) -> PyResult<(bool, Option<usize>, Option<f64>)> {
    let c: Vec<_> = candidates.into_iter().map(|m| m.0).collect();
    let o = segeval::simulate_review(&c, &reference.0, min_dice).map_err(py_err)?;
    let sel = o.selected_component.as_ref();
    Ok((o.accepted(), sel.map(|s| s.rank), sel.map(|s| s.dice)))
}

#[pyfunction]
fn feature_names() -> Vec<String> {
    radiomics::feature_names()
}

/// All radiomic features as a `{name: value}` dict. Families without
/// enough pixels come back as NaN.
#[pyfunction]
#[pyo3(signature = (volume, mask, bin_width = 25.0, min_slice_pixels = 5))]
fn extract_features(volume: &PyVolume, mask: &PyMask, bin_width: f64, min_slice_pixels: usize) -> PyResult<BTreeMap<String, f64>> {
    let cfg = ExtractionConfig {
        bin_width,
        min_slice_pixels,
        ..ExtractionConfig::default()
    };
    let fv = radiomics::extract_all(&volume.0, &mask.0, &cfg).map_err(py_err)?;
    Ok(fv.named().map(|(n, v)| (n.to_string(), v)).collect())
}

fn max_features(s: &str) -> PyResult<MaxFeatures> {
    match s {
        "sqrt" => Ok(MaxFeatures::Sqrt),
        "all" => Ok(MaxFeatures::All),
        n => n
            .parse()
            .map(MaxFeatures::Count)
            .map_err(|_| PyValueError::new_err(format!("max_features must be 'sqrt', 'all' or an integer, got {n:?}"))),
    }
}

fn forest_params(n_trees: usize, ccp_alpha: f64, max_feat: &str, seed: u64) -> PyResult<ForestParams> {
    Ok(ForestParams {
        n_trees,
        ccp_alpha,
        max_features: max_features(max_feat)?,
        seed,
        ..ForestParams::default()
    })
}

/// Random forest of pruned CART trees for binary labels.
#[pyclass(name = "Forest", module = "lungrad", frozen)]
pub struct PyForest(ForestModel);

#[pymethods]
impl PyForest {
    #[staticmethod]
    #[pyo3(signature = (x, y, n_trees = 1000, ccp_alpha = 0.01, max_features = "sqrt", seed = 0))]
    fn fit(py: Python<'_>, x: Vec<Vec<f64>>, y: Vec<u8>, n_trees: usize, ccp_alpha: f64, max_features: &str, seed: u64) -> PyResult<Self> {
        let p = forest_params(n_trees, ccp_alpha, max_features, seed)?;
        py.detach(|| learn::fit_forest(&x, &y, &p)).map(Self).map_err(py_err)
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<u32>> {
        Ok(self.0.predict(&x).map_err(py_err)?.into_iter().map(|p| u32::from(p.label)).collect())
    }

    /// Fraction of trees voting for class 1, per row.
    fn predict_proba(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        Ok(self.0.predict(&x).map_err(py_err)?.into_iter().map(|p| p.votes[1]).collect())
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        ForestModel::from_json(s).map(Self).map_err(py_err)
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.0.trees.len()
    }
}

/// Stratified k-fold accuracy: `(fold_accuracies, mean)`.
#[pyfunction]
#[pyo3(signature = (x, y, k = 10, n_trees = 1000, ccp_alpha = 0.01, max_features = "sqrt", seed = 0))]
#[allow(clippy::too_many_arguments)]
fn cross_validate(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    k: usize,
    n_trees: usize,
    ccp_alpha: f64,
    max_features: &str,
    seed: u64,
) -> PyResult<(Vec<f64>, f64)> {
    let p = forest_params(n_trees, ccp_alpha, max_features, seed)?;
    let cv = py.detach(|| learn::cross_validate(&x, &y, &p, k, seed)).map_err(py_err)?;
    Ok((cv.fold_accuracies, cv.mean))
}

/// Welch's unequal-variance t-test: `(t, dof, p)`.
#[pyfunction]
fn welch_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let r = learn::welch_t_test(&a, &b).map_err(py_err)?;
    Ok((r.t, r.dof, r.p))
}

/// Paired t-test on matched samples: `(t, dof, p)`.
#[pyfunction]
fn paired_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let r = learn::paired_t_test(&a, &b).map_err(py_err)?;
    Ok((r.t, r.dof, r.p))
}

/// Write a synthetic phantom cohort to `out_dir`; returns the manifest path.
#[pyfunction]
#[pyo3(signature = (n, out_dir, seed = 0, volume_max_cm3 = None))]
fn generate_phantoms(py: Python<'_>, n: usize, out_dir: &str, seed: u64, volume_max_cm3: Option<f64>) -> PyResult<String> {
    let mut spec = synth::PhantomSpec::default();
    if let Some(v) = volume_max_cm3 {
        spec.volume_range_cm3[1] = v;
    }
    let cohort = py.detach(|| synth::gen_cohort(n, &spec, seed, out_dir)).map_err(py_err)?;
    Ok(cohort.manifest_path.to_string_lossy().into_owned())
}

#[pymodule]
fn lungrad(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVolume>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyProbabilityMap>()?;
    m.add_class::<PyForest>()?;
    m.add_function(wrap_pyfunction!(dice, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_average, m)?)?;
    m.add_function(wrap_pyfunction!(ranked_components, m)?)?;
    m.add_function(wrap_pyfunction!(largest_component, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_review, m)?)?;
    m.add_function(wrap_pyfunction!(feature_names, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(generate_phantoms, m)?)?;
    Ok(())
}
