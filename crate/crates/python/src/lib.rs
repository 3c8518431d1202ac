//! Python bindings: configuration, simulation runs and seed batches, plus
//! the kernel, posterior and codebook primitives for analysis scripts.

use std::path::PathBuf;

use bkcucb_core::baselines::PolicyKind;
use bkcucb_core::bandit::posterior as kernel_posterior;
use bkcucb_core::config::{presets as builtin_presets, ConfigBuilder, RunConfig};
use bkcucb_core::engine;
use bkcucb_core::kernels::{KernelKind, KernelParams};
use bkcucb_core::phy::{Codebook as CoreCodebook, CodebookNode};
use bkcucb_core::scenario::Context as CoreContext;
use bkcucb_core::Error;
use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Config { .. }
        | Error::InvalidNode(_)
        | Error::Dimension(_)
        | Error::ZeroAntennas
        | Error::EmptyCandidates
        | Error::TraceParse { .. }
        | Error::TraceValidation(_)
        | Error::DegenerateGeometry { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Converts through JSON so nested results arrive as plain dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = value.py().import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn kernel_kind(name: &str) -> PyResult<KernelKind> {
    match name {
        "association" => Ok(KernelKind::Association),
        "beam_tracking" => Ok(KernelKind::BeamTracking),
        _ => Err(PyValueError::new_err(format!(
            "unknown kernel `{name}`; expected association or beam_tracking"
        ))),
    }
}

fn kernel_params(params: Option<&Bound<'_, PyDict>>) -> PyResult<KernelParams> {
    let params: KernelParams = match params {
        Some(d) => from_py(d.as_any())?,
        None => KernelParams::default(),
    };
    params.validate().map_err(to_py_err)?;
    Ok(params)
}

/// A validated run configuration.
///
/// ```python
/// cfg = Config(preset="fig_ert", overrides=["scenario.periods=200"])
/// ```
#[pyclass(name = "Config", module = "bkcucb")]
#[derive(Clone)]
struct Config {
    inner: RunConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (preset=None, json=None, overrides=Vec::new()))]
    fn new(preset: Option<&str>, json: Option<&str>, overrides: Vec<String>) -> PyResult<Self> {
        let mut builder = ConfigBuilder::new();
        if let Some(name) = preset {
            builder = builder.preset(name).map_err(to_py_err)?;
        }
        if let Some(text) = json {
            builder = builder.json(text).map_err(to_py_err)?;
        }
        for assignment in &overrides {
            builder = builder.set(assignment).map_err(to_py_err)?;
        }
        Ok(Self {
            inner: builder.build().map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let inner = ConfigBuilder::new()
            .file(path)
            .and_then(ConfigBuilder::build)
            .map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// A copy with dotted-path overrides applied.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        let mut builder = ConfigBuilder::new().json(&self.to_json()).map_err(to_py_err)?;
        for assignment in &overrides {
            builder = builder.set(assignment).map_err(to_py_err)?;
        }
        Ok(Self {
            inner: builder.build().map_err(to_py_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_pretty()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    /// `(label, Config)` for every batch member.
    fn members(&self) -> PyResult<Vec<(String, Config)>> {
        let members = self.inner.members().map_err(to_py_err)?;
        Ok(members.into_iter().map(|(label, inner)| (label, Config { inner })).collect())
    }

    #[getter]
    fn preset(&self) -> Option<String> {
        self.inner.preset.clone()
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds.clone()
    }

    #[getter]
    fn policy(&self) -> String {
        self.inner.policy.kind.to_string()
    }

    #[getter]
    fn periods(&self) -> u64 {
        self.inner.scenario.periods
    }

    fn __eq__(&self, other: &Config) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(policy={}, periods={}, seeds={:?}, digest={}…)",
            self.inner.policy.kind,
            self.inner.scenario.periods,
            self.inner.seeds,
            &self.inner.digest()[..12]
        )
    }
}

/// A single seeded run advanced one period at a time.
#[pyclass(name = "Simulation", module = "bkcucb", unsendable)]
struct Simulation {
    inner: engine::Simulation,
}

#[pymethods]
impl Simulation {
    #[new]
    fn new(config: &Config, seed: u64) -> PyResult<Self> {
        let inner = engine::Simulation::new(config.inner.clone(), seed).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Advances one period; returns `{"metrics": {...}, "records": [...]}`.
    fn step(&mut self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let outcome = self.inner.step().map_err(to_py_err)?;
        let out = PyDict::new(py);
        out.set_item("metrics", to_py(py, &outcome.metrics)?)?;
        out.set_item("records", to_py(py, &outcome.records)?)?;
        Ok(out.into_any().unbind())
    }

    #[getter]
    fn period(&self) -> u64 {
        self.inner.period()
    }

    #[getter]
    fn vehicles(&self) -> usize {
        self.inner.world().vehicles.len()
    }
}

/// Runs one seed to completion; returns `{"summary", "periods", "log"}`.
#[pyfunction]
#[pyo3(signature = (config, seed, keep_log=false))]
fn run(py: Python<'_>, config: &Config, seed: u64, keep_log: bool) -> PyResult<Py<PyAny>> {
    let inner = config.inner.clone();
    let output = py
        .detach(move || engine::Simulation::new(inner, seed)?.run(keep_log))
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("summary", to_py(py, &output.summary)?)?;
    out.set_item("periods", to_py(py, &output.periods)?)?;
    out.set_item("log", to_py(py, &output.log)?)?;
    Ok(out.into_any().unbind())
}

/// Runs every member over every seed; returns the aggregate as a dict.
#[pyfunction]
#[pyo3(signature = (config, out_dir=None))]
fn run_batch(py: Python<'_>, config: &Config, out_dir: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let inner = config.inner.clone();
    let output = py
        .detach(move || engine::run_batch(&inner, out_dir.as_deref()))
        .map_err(to_py_err)?;
    to_py(py, &output.aggregate)
}

/// Names and descriptions of the built-in presets.
#[pyfunction]
fn presets() -> Vec<(&'static str, &'static str)> {
    builtin_presets().into_iter().map(|p| (p.name, p.description)).collect()
}

#[pyfunction]
fn policies() -> Vec<&'static str> {
    PolicyKind::ALL.iter().map(|p| p.as_str()).collect()
}

/// Context of one vehicle-BS link.
#[pyclass(name = "Context", module = "bkcucb", get_all, set_all)]
#[derive(Clone)]
struct Context {
    bs_id: usize,
    angle: f64,
    distance: f64,
    doppler: f64,
    load: u32,
    beam_bias: f64,
}

impl From<&Context> for CoreContext {
    fn from(c: &Context) -> Self {
        CoreContext {
            bs_id: c.bs_id,
            angle: c.angle,
            distance: c.distance,
            doppler: c.doppler,
            load: c.load,
            beam_bias: c.beam_bias,
        }
    }
}

#[pymethods]
impl Context {
    #[new]
    #[pyo3(signature = (bs_id, angle, distance, doppler=0.0, load=1, beam_bias=0.0))]
    fn new(bs_id: usize, angle: f64, distance: f64, doppler: f64, load: u32, beam_bias: f64) -> Self {
        Self {
            bs_id,
            angle,
            distance,
            doppler,
            load,
            beam_bias,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Context(bs_id={}, angle={}, distance={}, doppler={}, load={}, beam_bias={})",
            self.bs_id, self.angle, self.distance, self.doppler, self.load, self.beam_bias
        )
    }
}

/// Kernel similarity of two contexts; `params` overrides fields of the
/// default kernel parameters.
#[pyfunction]
#[pyo3(signature = (a, b, kind="association", params=None))]
fn kernel(a: &Context, b: &Context, kind: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<f64> {
    let params = kernel_params(params)?;
    Ok(params.eval(kernel_kind(kind)?, &a.into(), &b.into()))
}

/// Posterior `(mean, deviation)` of the reward at `query`.
#[pyfunction]
#[pyo3(signature = (query, contexts, rewards, kind="beam_tracking", params=None))]
fn posterior(
    query: &Context,
    contexts: Vec<Context>,
    rewards: Vec<f64>,
    kind: &str,
    params: Option<&Bound<'_, PyDict>>,
) -> PyResult<(f64, f64)> {
    if contexts.len() != rewards.len() {
        return Err(PyValueError::new_err(format!(
            "{} contexts but {} rewards",
            contexts.len(),
            rewards.len()
        )));
    }
    let params = kernel_params(params)?;
    let contexts: Vec<CoreContext> = contexts.iter().map(CoreContext::from).collect();
    let p = kernel_posterior(&query.into(), &contexts, &rewards, &params, kernel_kind(kind)?).map_err(to_py_err)?;
    Ok((p.mean, p.deviation))
}

/// Hierarchical beam codebook of a uniform linear array; nodes are
/// `(layer, index)` pairs.
#[pyclass(name = "Codebook", module = "bkcucb")]
struct Codebook {
    inner: CoreCodebook,
}

impl Codebook {
    fn node(&self, layer: u32, index: u32) -> PyResult<CodebookNode> {
        self.inner.node(layer, index).map_err(to_py_err)
    }
}

#[pymethods]
impl Codebook {
    #[new]
    fn new(antennas: usize) -> PyResult<Self> {
        Ok(Self {
            inner: CoreCodebook::new(antennas).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn antennas(&self) -> usize {
        self.inner.antennas()
    }

    #[getter]
    fn max_layer(&self) -> u32 {
        self.inner.max_layer()
    }

    fn beam(&self, layer: u32, index: u32) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.beam(self.node(layer, index)?).iter().copied().collect())
    }

    /// Steering angle at the center of the node's sector, radians.
    fn psi(&self, layer: u32, index: u32) -> PyResult<f64> {
        Ok(self.node(layer, index)?.psi())
    }

    /// The node of `layer` whose sector contains `psi`.
    fn snap(&self, psi: f64, layer: u32) -> (u32, u32) {
        let n = self.inner.snap(psi, layer);
        (n.layer(), n.index())
    }

    fn leaves(&self) -> Vec<(u32, u32)> {
        self.inner.leaves().map(|n| (n.layer(), n.index())).collect()
    }

    fn __repr__(&self) -> String {
        format!("Codebook(antennas={}, max_layer={})", self.inner.antennas(), self.inner.max_layer())
    }
}

#[pymodule]
fn bkcucb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Config>()?;
    m.add_class::<Simulation>()?;
    m.add_class::<Context>()?;
    m.add_class::<Codebook>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_batch, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(policies, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(posterior, m)?)?;
    Ok(())
}
