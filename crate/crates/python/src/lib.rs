#![allow(clippy::neg_cmp_op_on_partial_ord)]

use busnlos::detection::{detect_buses as detect, BusBoundary3D};
use busnlos::exclusion::is_blocked as exclusion_verdict;
use busnlos::pointcloud::{euclidean_cluster as cluster, Point3, PointCloud};
use busnlos::simkit::{run_scenario, synth_bus_cloud as scan_box, synth_epoch, BoxPose};
use busnlos::skygeom::{project_boundary as project, AzEl};
use busnlos::solver::{run_methods, snr_elevation_weight, Epoch};
use nalgebra::Vector3;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Xyz = (f64, f64, f64);

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_point(p: Xyz) -> Point3 {
    Point3::new(p.0, p.1, p.2)
}

fn to_tuple(p: &Point3) -> Xyz {
    (p.x, p.y, p.z)
}

fn to_cloud(points: Vec<Xyz>) -> PointCloud {
    PointCloud::new(points.into_iter().map(to_point).collect())
}

/// Pipeline parameters, with defaults for everything not given.
#[pyclass(name = "RunConfig", module = "busnlos", from_py_object)]
#[derive(Clone, Default)]
struct PyRunConfig {
    inner: busnlos::RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        busnlos::RunConfig::from_json(text).map(|inner| Self { inner }).map_err(value_error)
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("serializable config")
    }

    #[getter]
    fn s_threshold(&self) -> f64 {
        self.inner.s_threshold
    }

    #[getter]
    fn snr_threshold(&self) -> f64 {
        self.inner.snr_threshold
    }

    #[getter]
    fn ele_thres(&self) -> f64 {
        self.inner.ele_thres
    }

    #[getter]
    fn theta_thres(&self) -> f64 {
        self.inner.theta_thres
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig(s_threshold={}, snr_threshold={}, ele_thres={}, theta_thres={})",
            self.inner.s_threshold, self.inner.snr_threshold, self.inner.ele_thres, self.inner.theta_thres
        )
    }
}

fn config_or_default(config: Option<PyRunConfig>) -> busnlos::RunConfig {
    config.map(|c| c.inner).unwrap_or_default()
}

/// Occluding top edge of a bus in the sensor frame.
#[pyclass(name = "Boundary", module = "busnlos", from_py_object)]
#[derive(Clone)]
struct PyBoundary {
    inner: BusBoundary3D,
}

#[pymethods]
impl PyBoundary {
    #[new]
    fn new(e: Xyz, f: Xyz) -> Self {
        Self {
            inner: BusBoundary3D { e: to_point(e), f: to_point(f) },
        }
    }

    #[getter]
    fn e(&self) -> Xyz {
        to_tuple(&self.inner.e)
    }

    #[getter]
    fn f(&self) -> Xyz {
        to_tuple(&self.inner.f)
    }

    fn __repr__(&self) -> String {
        format!("Boundary(e={:?}, f={:?})", self.e(), self.f())
    }
}

/// Boundary endpoints as azimuth/elevation pairs, degrees.
#[pyclass(name = "SkyBoundary", module = "busnlos", from_py_object)]
#[derive(Clone)]
struct PySkyBoundary {
    inner: busnlos::SkyBoundary,
}

#[pymethods]
impl PySkyBoundary {
    #[getter]
    fn e(&self) -> (f64, f64) {
        (self.inner.az_e, self.inner.el_e)
    }

    #[getter]
    fn f(&self) -> (f64, f64) {
        (self.inner.az_f, self.inner.el_f)
    }

    fn __repr__(&self) -> String {
        format!("SkyBoundary(e={:?}, f={:?})", self.e(), self.f())
    }
}

/// Result of testing one satellite against one boundary.
#[pyclass(name = "Decision", module = "busnlos", get_all)]
struct PyDecision {
    excluded: bool,
    reason: String,
    delta_s: f64,
    theta1: f64,
    theta2: f64,
}

#[pymethods]
impl PyDecision {
    fn __repr__(&self) -> String {
        format!("Decision(excluded={}, reason={:?}, delta_s={})", self.excluded, self.reason, self.delta_s)
    }
}

/// Simulation scenario; see `Scenario.from_json`.
#[pyclass(name = "Scenario", module = "busnlos")]
struct PyScenario {
    inner: busnlos::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        busnlos::Scenario::from_json(text).map(|inner| Self { inner }).map_err(value_error)
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("serializable scenario")
    }

    /// One synthetic epoch as JSON.
    fn epoch(&self, index: usize) -> PyResult<String> {
        let e = synth_epoch(&self.inner, index).map_err(value_error)?;
        Ok(serde_json::to_string(&e).expect("serializable epoch"))
    }

    /// Runs `epochs` epochs through every method and returns the report as JSON.
    #[pyo3(signature = (epochs, config=None))]
    fn run(&self, py: Python<'_>, epochs: usize, config: Option<PyRunConfig>) -> PyResult<String> {
        let cfg = config_or_default(config);
        let run = py
            .detach(|| run_scenario(&self.inner, epochs, &cfg))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(serde_json::to_string_pretty(&run.report).expect("serializable report"))
    }
}

/// Euclidean clusters as lists of point indices, largest first.
#[pyfunction]
#[pyo3(signature = (points, r_search=0.5, min_size=30, max_size=50_000))]
fn euclidean_cluster(py: Python<'_>, points: Vec<Xyz>, r_search: f64, min_size: usize, max_size: usize) -> PyResult<Vec<Vec<usize>>> {
    let cloud = to_cloud(points);
    let clusters = py.detach(|| cluster(&cloud, r_search, min_size, max_size)).map_err(value_error)?;
    Ok(clusters.into_iter().map(|c| c.point_ids).collect())
}

/// Boundaries of every bus found in a cloud scanned from the origin.
#[pyfunction]
#[pyo3(signature = (points, config=None))]
fn detect_buses(py: Python<'_>, points: Vec<Xyz>, config: Option<PyRunConfig>) -> PyResult<Vec<PyBoundary>> {
    let cfg = config_or_default(config).detection();
    let cloud = to_cloud(points);
    let found = py
        .detach(|| detect(&cloud, &cfg, &Point3::ORIGIN))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(found.into_iter().map(|inner| PyBoundary { inner }).collect())
}

#[pyfunction]
#[pyo3(signature = (boundary, antenna=(0.0, 0.0, 0.0), heading_deg=0.0))]
fn project_boundary(boundary: &PyBoundary, antenna: Xyz, heading_deg: f64) -> PyResult<PySkyBoundary> {
    project(&boundary.inner, &to_point(antenna), heading_deg)
        .map(|inner| PySkyBoundary { inner })
        .map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (azimuth, elevation, snr, boundary, config=None))]
fn is_blocked(azimuth: f64, elevation: f64, snr: f64, boundary: &PySkyBoundary, config: Option<PyRunConfig>) -> PyDecision {
    let cfg = config_or_default(config).exclusion();
    let d = exclusion_verdict("", &AzEl::new(azimuth, elevation), snr, &boundary.inner, &cfg);
    let reason = serde_json::to_value(d.reason)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    PyDecision {
        excluded: d.verdict == busnlos::Verdict::Excluded,
        reason,
        delta_s: d.delta_s,
        theta1: d.theta1,
        theta2: d.theta2,
    }
}

/// Variance factor of a measurement; the least-squares weight is its inverse.
#[pyfunction]
#[pyo3(signature = (elevation, snr, config=None))]
fn weight_factor(elevation: f64, snr: f64, config: Option<PyRunConfig>) -> PyResult<f64> {
    snr_elevation_weight(elevation, snr, &config_or_default(config).weights()).map_err(value_error)
}

/// Solves one epoch (JSON) with all four methods and returns the result as JSON.
#[pyfunction]
#[pyo3(signature = (epoch_json, boundaries=Vec::new(), config=None))]
fn solve_epoch(py: Python<'_>, epoch_json: &str, boundaries: Vec<PySkyBoundary>, config: Option<PyRunConfig>) -> PyResult<String> {
    let epoch: Epoch = serde_json::from_str(epoch_json).map_err(value_error)?;
    epoch.validate().map_err(value_error)?;
    let cfg = config_or_default(config);
    let sky: Vec<busnlos::SkyBoundary> = boundaries.into_iter().map(|b| b.inner).collect();
    let initial = cfg.initial_position_ecef.unwrap_or_else(Vector3::zeros);
    let result = py.detach(|| run_methods(&epoch, &sky, &cfg.solver(), &initial));
    Ok(serde_json::to_string_pretty(&result).expect("serializable result"))
}

/// Ray-traced scan of a box seen from the origin.
#[pyfunction]
#[pyo3(signature = (center, yaw_deg, dims=(12.8, 2.5, 4.4), angular_res=0.25, fov=(-30.0, 10.0)))]
fn synth_bus_cloud(center: Xyz, yaw_deg: f64, dims: Xyz, angular_res: f64, fov: (f64, f64)) -> PyResult<Vec<Xyz>> {
    if !(angular_res > 0.0) || !(dims.0 > 0.0 && dims.1 > 0.0 && dims.2 > 0.0) {
        return Err(PyValueError::new_err("angular_res and dims must be positive"));
    }
    let pose = BoxPose {
        center: to_point(center),
        yaw_deg,
        dims: [dims.0, dims.1, dims.2],
    };
    Ok(scan_box(&pose, &Point3::ORIGIN, fov, angular_res).points.iter().map(to_tuple).collect())
}

#[pymodule]
#[pyo3(name = "busnlos")]
fn busnlos_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyBoundary>()?;
    m.add_class::<PySkyBoundary>()?;
    m.add_class::<PyDecision>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(euclidean_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(detect_buses, m)?)?;
    m.add_function(wrap_pyfunction!(project_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(is_blocked, m)?)?;
    m.add_function(wrap_pyfunction!(weight_factor, m)?)?;
    m.add_function(wrap_pyfunction!(solve_epoch, m)?)?;
    m.add_function(wrap_pyfunction!(synth_bus_cloud, m)?)?;
    Ok(())
}
