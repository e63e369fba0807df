//! Python bindings for `hmrf`. Images and label fields cross the boundary as
//! flat row-major lists plus dimensions.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use hmrf::edge::CannyParams;
use hmrf::{EdgeMode, EdgeRule, Schedule};

fn to_py(err: hmrf::Error) -> PyErr {
    match err {
        hmrf::Error::Io { .. } => PyOSError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_schedule(s: &str) -> PyResult<Schedule> {
    match s {
        "sequential" => Ok(Schedule::Sequential),
        "synchronous" => Ok(Schedule::Synchronous),
        _ => Err(PyValueError::new_err(format!(
            "schedule must be 'sequential' or 'synchronous', got {s:?}"
        ))),
    }
}

fn edge_rule(literal: bool) -> EdgeRule {
    if literal {
        EdgeRule::OneSided
    } else {
        EdgeRule::Symmetric
    }
}

#[pyclass(name = "GrayImage", module = "hmrf_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGrayImage(hmrf::GrayImage);

#[pymethods]
impl PyGrayImage {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f64>) -> PyResult<Self> {
        hmrf::GrayImage::new(width, height, data).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        hmrf::load_image(path).map(Self).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("GrayImage({}x{})", self.0.width(), self.0.height())
    }
}

#[pyclass(name = "LabelField", module = "hmrf_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyLabelField(hmrf::LabelField);

#[pymethods]
impl PyLabelField {
    #[new]
    fn new(width: usize, height: usize, labels: Vec<usize>, k: usize) -> PyResult<Self> {
        hmrf::LabelField::new(width, height, labels, k).map(Self).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.0.data().to_vec()
    }

    /// Number of 4-connected equal-label regions.
    fn count_components(&self) -> usize {
        self.0.count_components()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        hmrf::save_label_image(&self.0, path).map_err(to_py)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("LabelField({}x{}, k={})", self.0.width(), self.0.height(), self.0.k())
    }
}

#[pyclass(name = "ClassParams", module = "hmrf_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyClassParams(hmrf::ClassParams);

#[pymethods]
impl PyClassParams {
    #[new]
    fn new(mu: Vec<f64>, sigma: Vec<f64>) -> PyResult<Self> {
        hmrf::ClassParams::new(mu, sigma).map(Self).map_err(to_py)
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.0.mus().to_vec()
    }

    #[getter]
    fn sigma(&self) -> Vec<f64> {
        self.0.sigmas().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("ClassParams(mu={:?}, sigma={:?})", self.0.mus(), self.0.sigmas())
    }
}

#[pyclass(name = "EdgeMap", module = "hmrf_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyEdgeMap(hmrf::EdgeMap);

#[pymethods]
impl PyEdgeMap {
    #[new]
    fn new(width: usize, height: usize, mask: Vec<bool>) -> PyResult<Self> {
        hmrf::EdgeMap::new(width, height, mask).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf, width: usize, height: usize) -> PyResult<Self> {
        hmrf::load_edge_map(path, width, height).map(Self).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn mask(&self) -> Vec<bool> {
        self.0.mask().to_vec()
    }

    fn count(&self) -> usize {
        self.0.count()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(to_py)
    }
}

type Energy = (f64, f64, f64);

fn energy_tuple(e: &hmrf::EnergyBreakdown) -> Energy {
    (e.likelihood, e.prior, e.total)
}

#[pyfunction]
fn load_image(path: PathBuf) -> PyResult<PyGrayImage> {
    PyGrayImage::load(path)
}

#[pyfunction]
fn load_edge_map(path: PathBuf, width: usize, height: usize) -> PyResult<PyEdgeMap> {
    PyEdgeMap::load(path, width, height)
}

#[pyfunction]
fn mirror_expand(img: &PyGrayImage) -> PyGrayImage {
    PyGrayImage(hmrf::mirror_expand(&img.0))
}

#[pyfunction]
fn mirror_shrink(img: &PyGrayImage) -> PyResult<PyGrayImage> {
    hmrf::mirror_shrink(&img.0).map(PyGrayImage).map_err(to_py)
}

/// Kernel weights as a list of rows.
#[pyfunction]
fn gaussian_kernel(sigma: f64) -> PyResult<Vec<Vec<f64>>> {
    let k = hmrf::gaussian_kernel(sigma).map_err(to_py)?;
    Ok(k.weights().chunks(k.size()).map(<[f64]>::to_vec).collect())
}

#[pyfunction]
fn gaussian_blur(img: &PyGrayImage, sigma: f64) -> PyResult<PyGrayImage> {
    hmrf::gaussian_blur(&img.0, sigma).map(PyGrayImage).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (img, sigma=1.0, low=0.1, high=0.3))]
fn canny_edges(img: &PyGrayImage, sigma: f64, low: f64, high: f64) -> PyResult<PyEdgeMap> {
    hmrf::canny_edges(&img.0, sigma, low, high).map(PyEdgeMap).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (img, k, max_iters=100, seed=0))]
fn kmeans_init(img: &PyGrayImage, k: usize, max_iters: usize, seed: u64) -> PyResult<(PyLabelField, PyClassParams)> {
    let (l, p) = hmrf::kmeans_init(&img.0, k, max_iters, seed).map_err(to_py)?;
    Ok((PyLabelField(l), PyClassParams(p)))
}

#[pyfunction]
fn likelihood_energy_pixel(y: f64, label: usize, params: &PyClassParams) -> PyResult<f64> {
    if label >= params.0.k() {
        return Err(PyValueError::new_err(format!("label {label} >= k = {}", params.0.k())));
    }
    Ok(hmrf::likelihood_energy_pixel(y, label, &params.0))
}

#[pyfunction]
fn clique_potential(a: usize, b: usize) -> f64 {
    hmrf::clique_potential(a, b)
}

#[pyfunction]
#[pyo3(signature = (labels, edges=None))]
fn prior_energy(labels: &PyLabelField, edges: Option<&PyEdgeMap>) -> PyResult<f64> {
    hmrf::prior_energy(&labels.0, edges.map(|e| &e.0)).map_err(to_py)
}

/// Returns `(likelihood, prior, total)`.
#[pyfunction]
#[pyo3(signature = (img, labels, params, edges=None))]
fn total_posterior_energy(
    img: &PyGrayImage,
    labels: &PyLabelField,
    params: &PyClassParams,
    edges: Option<&PyEdgeMap>,
) -> PyResult<Energy> {
    hmrf::total_posterior_energy(&img.0, &labels.0, &params.0, edges.map(|e| &e.0))
        .map(|e| energy_tuple(&e))
        .map_err(to_py)
}

#[pyfunction]
fn ml_labels(img: &PyGrayImage, params: &PyClassParams) -> PyResult<PyLabelField> {
    hmrf::ml_labels(&img.0, &params.0).map(PyLabelField).map_err(to_py)
}

/// Returns the final labels and `(likelihood, prior, total)` per sweep.
#[pyfunction]
#[pyo3(signature = (img, labels, params, edges=None, max_iters=10, energy_tol=1e-6, schedule="sequential", edge_literal=false))]
#[allow(clippy::too_many_arguments)]
fn icm_map(
    img: &PyGrayImage,
    labels: &PyLabelField,
    params: &PyClassParams,
    edges: Option<&PyEdgeMap>,
    max_iters: usize,
    energy_tol: f64,
    schedule: &str,
    edge_literal: bool,
) -> PyResult<(PyLabelField, Vec<Energy>)> {
    let cfg = hmrf::IcmConfig {
        max_iters,
        energy_tol,
        schedule: parse_schedule(schedule)?,
        edge_rule: edge_rule(edge_literal),
    };
    let (out, hist) =
        hmrf::icm_map(&img.0, &labels.0, &params.0, edges.map(|e| &e.0), &cfg).map_err(to_py)?;
    Ok((PyLabelField(out), hist.iter().map(energy_tuple).collect()))
}

#[pyfunction]
fn gaussian_pdf(z: f64, mu: f64, sigma: f64) -> f64 {
    hmrf::gaussian_pdf(z, mu, sigma)
}

#[pyfunction]
#[pyo3(signature = (labels, index, label, edges=None, edge_literal=false))]
fn neighborhood_label_prior(
    labels: &PyLabelField,
    index: usize,
    label: usize,
    edges: Option<&PyEdgeMap>,
    edge_literal: bool,
) -> PyResult<f64> {
    if index >= labels.0.len() || label >= labels.0.k() {
        return Err(PyValueError::new_err("pixel index or label out of range"));
    }
    Ok(hmrf::neighborhood_label_prior(
        &labels.0,
        index,
        label,
        edges.map(|e| &e.0),
        edge_rule(edge_literal),
    ))
}

/// Posterior rows, one list of `k` probabilities per pixel.
#[pyfunction]
#[pyo3(signature = (img, labels, params, edges=None, edge_literal=false))]
fn class_posterior(
    img: &PyGrayImage,
    labels: &PyLabelField,
    params: &PyClassParams,
    edges: Option<&PyEdgeMap>,
    edge_literal: bool,
) -> PyResult<Vec<Vec<f64>>> {
    let post = hmrf::class_posterior(&img.0, &labels.0, &params.0, edges.map(|e| &e.0), edge_rule(edge_literal))
        .map_err(to_py)?;
    Ok(post.rows().map(<[f64]>::to_vec).collect())
}

#[pyfunction]
fn update_parameters(img: &PyGrayImage, posterior: Vec<Vec<f64>>, previous: &PyClassParams) -> PyResult<PyClassParams> {
    let k = previous.0.k();
    if posterior.iter().any(|row| row.len() != k) {
        return Err(PyValueError::new_err(format!("every posterior row must have {k} entries")));
    }
    let field = hmrf::PosteriorField::new(img.0.width(), img.0.height(), k, posterior.concat()).map_err(to_py)?;
    hmrf::update_parameters(&img.0, &field, &previous.0)
        .map(PyClassParams)
        .map_err(to_py)
}

type TraceRow = (usize, f64, f64, f64);

fn trace_rows(trace: &hmrf::EnergyTrace) -> Vec<TraceRow> {
    trace
        .entries
        .iter()
        .map(|e| (e.iter, e.total, e.likelihood, e.prior))
        .collect()
}

/// Returns `(labels, params, trace)` with trace rows `(iter, total, likelihood, prior)`.
#[pyfunction]
#[pyo3(signature = (img, labels, params, edges=None, em_iters=10, map_iters=10, energy_tol=1e-6, schedule="sequential", edge_literal=false))]
#[allow(clippy::too_many_arguments)]
fn hmrf_em(
    img: &PyGrayImage,
    labels: &PyLabelField,
    params: &PyClassParams,
    edges: Option<&PyEdgeMap>,
    em_iters: usize,
    map_iters: usize,
    energy_tol: f64,
    schedule: &str,
    edge_literal: bool,
) -> PyResult<(PyLabelField, PyClassParams, Vec<TraceRow>)> {
    let cfg = hmrf::EmConfig {
        em_iters,
        icm: hmrf::IcmConfig {
            max_iters: map_iters,
            energy_tol,
            schedule: parse_schedule(schedule)?,
            edge_rule: edge_rule(edge_literal),
        },
        record_trace: true,
    };
    let out = hmrf::hmrf_em(&img.0, &labels.0, &params.0, edges.map(|e| &e.0), &cfg).map_err(to_py)?;
    Ok((PyLabelField(out.labels), PyClassParams(out.params), trace_rows(&out.trace)))
}

#[allow(clippy::too_many_arguments)]
fn segment_config(
    k: usize,
    em_iters: usize,
    map_iters: usize,
    blur_sigma: f64,
    edge: &str,
    canny_sigma: f64,
    canny_low: f64,
    canny_high: f64,
    schedule: &str,
    edge_literal: bool,
    seed: u64,
) -> PyResult<hmrf::SegmentConfig> {
    Ok(hmrf::SegmentConfig {
        k,
        em_iters,
        map_iters,
        blur_sigma,
        edges: edge.parse::<EdgeMode>().map_err(to_py)?,
        canny: CannyParams {
            sigma: canny_sigma,
            low: canny_low,
            high: canny_high,
        },
        schedule: parse_schedule(schedule)?,
        edge_literal,
        seed,
        ..Default::default()
    })
}

/// Segmentation results of [`segment`].
#[pyclass(name = "Segmentation", module = "hmrf_py", frozen)]
pub struct PySegmentation {
    #[pyo3(get)]
    blurred: PyGrayImage,
    #[pyo3(get)]
    edges: Option<PyEdgeMap>,
    #[pyo3(get)]
    init_labels: PyLabelField,
    #[pyo3(get)]
    init_params: PyClassParams,
    #[pyo3(get)]
    labels: PyLabelField,
    #[pyo3(get)]
    params: PyClassParams,
    #[pyo3(get)]
    trace: Vec<TraceRow>,
    #[pyo3(get)]
    elapsed_ms: f64,
}

impl From<hmrf::Segmentation> for PySegmentation {
    fn from(s: hmrf::Segmentation) -> Self {
        PySegmentation {
            trace: trace_rows(&s.trace),
            blurred: PyGrayImage(s.blurred),
            edges: s.edges.map(PyEdgeMap),
            init_labels: PyLabelField(s.init_labels),
            init_params: PyClassParams(s.init_params),
            labels: PyLabelField(s.labels),
            params: PyClassParams(s.params),
            elapsed_ms: s.elapsed_ms,
        }
    }
}

/// Blur, edge detection, k-means and HMRF-EM on an in-memory image.
#[pyfunction]
#[pyo3(signature = (img, k=2, em_iters=10, map_iters=10, blur_sigma=3.0, edge="canny", canny_sigma=1.0, canny_low=0.1, canny_high=0.3, schedule="sequential", edge_literal=false, seed=0))]
#[allow(clippy::too_many_arguments)]
fn segment(
    py: Python<'_>,
    img: &PyGrayImage,
    k: usize,
    em_iters: usize,
    map_iters: usize,
    blur_sigma: f64,
    edge: &str,
    canny_sigma: f64,
    canny_low: f64,
    canny_high: f64,
    schedule: &str,
    edge_literal: bool,
    seed: u64,
) -> PyResult<PySegmentation> {
    let cfg = segment_config(
        k, em_iters, map_iters, blur_sigma, edge, canny_sigma, canny_low, canny_high, schedule, edge_literal, seed,
    )?;
    let image = img.0.clone();
    py.detach(move || hmrf::segment(&image, &cfg, &mut std::io::sink()))
        .map(PySegmentation::from)
        .map_err(to_py)
}

/// File-to-file pipeline, same outputs as the `hmrf-seg` command.
#[pyfunction]
#[pyo3(signature = (input, out_dir, k=2, em_iters=10, map_iters=10, blur_sigma=3.0, edge="canny", canny_sigma=1.0, canny_low=0.1, canny_high=0.3, schedule="sequential", edge_literal=false, seed=0))]
#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    py: Python<'_>,
    input: PathBuf,
    out_dir: PathBuf,
    k: usize,
    em_iters: usize,
    map_iters: usize,
    blur_sigma: f64,
    edge: &str,
    canny_sigma: f64,
    canny_low: f64,
    canny_high: f64,
    schedule: &str,
    edge_literal: bool,
    seed: u64,
) -> PyResult<PySegmentation> {
    let cfg = hmrf::PipelineConfig {
        input,
        out_dir,
        segment: segment_config(
            k, em_iters, map_iters, blur_sigma, edge, canny_sigma, canny_low, canny_high, schedule, edge_literal,
            seed,
        )?,
    };
    py.detach(move || hmrf::run_pipeline(&cfg, &mut std::io::sink()))
        .map(PySegmentation::from)
        .map_err(to_py)
}

#[pymodule]
fn hmrf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrayImage>()?;
    m.add_class::<PyLabelField>()?;
    m.add_class::<PyClassParams>()?;
    m.add_class::<PyEdgeMap>()?;
    m.add_class::<PySegmentation>()?;
    m.add("SIGMA_FLOOR", hmrf::SIGMA_FLOOR)?;
    m.add_function(wrap_pyfunction!(load_image, m)?)?;
    m.add_function(wrap_pyfunction!(load_edge_map, m)?)?;
    m.add_function(wrap_pyfunction!(mirror_expand, m)?)?;
    m.add_function(wrap_pyfunction!(mirror_shrink, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_blur, m)?)?;
    m.add_function(wrap_pyfunction!(canny_edges, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans_init, m)?)?;
    m.add_function(wrap_pyfunction!(likelihood_energy_pixel, m)?)?;
    m.add_function(wrap_pyfunction!(clique_potential, m)?)?;
    m.add_function(wrap_pyfunction!(prior_energy, m)?)?;
    m.add_function(wrap_pyfunction!(total_posterior_energy, m)?)?;
    m.add_function(wrap_pyfunction!(ml_labels, m)?)?;
    m.add_function(wrap_pyfunction!(icm_map, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(neighborhood_label_prior, m)?)?;
    m.add_function(wrap_pyfunction!(class_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(update_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(hmrf_em, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_names() {
        assert_eq!(parse_schedule("sequential").unwrap(), Schedule::Sequential);
        assert_eq!(parse_schedule("synchronous").unwrap(), Schedule::Synchronous);
    }

    #[test]
    fn literal_flag() {
        assert_eq!(edge_rule(false), EdgeRule::Symmetric);
        assert_eq!(edge_rule(true), EdgeRule::OneSided);
    }
}
