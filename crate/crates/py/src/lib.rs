//! Python bindings for `qbattery`.
//!
//! Matrices cross the boundary as nested lists of `complex`; runs come
//! back as lists of plain dicts.

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use qbattery::linalg::CMatrix;
use qbattery::lindblad::{NoiseAxis, NoiseChannel};
use qbattery::protocol::{
    self, SummaryStats, SweepAxis, Trajectory, CALIBRATED_OMEGA, DEFAULT_NOISE_GRID, DEFAULT_SIZE_GRID,
};
use qbattery::validate::{run_suite, SuiteOptions};
use qbattery::{metrics, Battery, DensityMatrix, Error, ProtocolConfig, SpinChainParams};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Config { .. } | Error::Domain(_) | Error::DimensionMismatch { .. } => {
            PyValueError::new_err(err.to_string())
        }
        Error::Io(_) => PyOSError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    CMatrix::from_shape_vec((n, n), flat).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn density(rows: Vec<Vec<Complex64>>) -> PyResult<DensityMatrix> {
    DensityMatrix::new(from_rows(rows)?).map_err(to_py)
}

fn parse_axis(axis: &str) -> PyResult<NoiseAxis> {
    axis.parse().map_err(to_py)
}

/// Heisenberg XYZ chain parameters; give exactly one of `j` and `lam`.
#[pyclass(name = "SpinChain", module = "qbattery", frozen, from_py_object)]
#[derive(Clone)]
struct PySpinChain {
    inner: SpinChainParams,
}

#[pymethods]
impl PySpinChain {
    #[new]
    #[pyo3(signature = (n, gamma, *, h = 1.0, j = None, lam = None, jz = 0.0))]
    fn new(n: usize, gamma: f64, h: f64, j: Option<f64>, lam: Option<f64>, jz: f64) -> PyResult<Self> {
        let inner = match (j, lam) {
            (Some(j), None) => SpinChainParams::new(n, h, j, gamma, jz),
            (None, Some(lam)) => SpinChainParams::from_lambda(n, h, lam, gamma, jz),
            _ => return Err(PyValueError::new_err("give exactly one of `j` and `lam`")),
        }
        .map_err(to_py)?;
        Ok(PySpinChain { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n_sites()
    }
    #[getter]
    fn h(&self) -> f64 {
        self.inner.field_h()
    }
    #[getter]
    fn j(&self) -> f64 {
        self.inner.coupling_j()
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }
    #[getter]
    fn jz(&self) -> f64 {
        self.inner.coupling_jz()
    }

    /// Raw battery Hamiltonian.
    fn hamiltonian(&self) -> Vec<Vec<Complex64>> {
        to_rows(qbattery::build_h0_raw(&self.inner).entries())
    }

    /// Battery Hamiltonian shifted and scaled to the spectrum `[0, 1]`.
    fn normalized_hamiltonian(&self) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(to_rows(Battery::new(&self.inner).map_err(to_py)?.h0.entries()))
    }

    /// Ascending eigenvalues of the raw Hamiltonian.
    fn spectrum(&self) -> PyResult<Vec<f64>> {
        Ok(Battery::new(&self.inner).map_err(to_py)?.raw_spectrum.eigenvalues)
    }

    fn ground_state(&self) -> PyResult<Vec<Vec<Complex64>>> {
        let (rho, _) = Battery::new(&self.inner).map_err(to_py)?.ground_state();
        Ok(to_rows(rho.entries()))
    }

    fn top_state(&self) -> PyResult<Vec<Vec<Complex64>>> {
        let (rho, _) = Battery::new(&self.inner).map_err(to_py)?.top_state();
        Ok(to_rows(rho.entries()))
    }

    /// Normalized energy and ergotropy of `rho`.
    fn energy_and_ergotropy(&self, rho: Vec<Vec<Complex64>>) -> PyResult<(f64, f64)> {
        let battery = Battery::new(&self.inner).map_err(to_py)?;
        let rho = density(rho)?;
        let e = metrics::energy(&rho, &battery.h0).map_err(to_py)?;
        let w = metrics::ergotropy(&rho, &battery.h0, &battery.spectrum).map_err(to_py)?;
        Ok((e, w))
    }

    fn __repr__(&self) -> String {
        format!(
            "SpinChain(n={}, gamma={}, h={}, j={}, jz={})",
            self.inner.n_sites(),
            self.inner.gamma(),
            self.inner.field_h(),
            self.inner.coupling_j(),
            self.inner.coupling_jz()
        )
    }
}

/// A charging or discharging run description.
#[pyclass(name = "Config", module = "qbattery", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ProtocolConfig,
}

#[pymethods]
impl PyConfig {
    /// Reference charging setup on `n` sites with the calibrated drive.
    #[staticmethod]
    fn reference_charging(n: usize) -> PyResult<Self> {
        Ok(PyConfig {
            inner: ProtocolConfig::reference_charging(n).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n, axis = "z", strength = 0.0))]
    fn reference_discharging(n: usize, axis: &str, strength: f64) -> PyResult<Self> {
        let noise = NoiseChannel::new(parse_axis(axis)?, strength).map_err(to_py)?;
        Ok(PyConfig {
            inner: ProtocolConfig::reference_discharging(n, noise).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyConfig {
            inner: qbattery::config::parse_config(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyConfig {
            inner: qbattery::config::load_config(&path).map_err(to_py)?,
        })
    }

    fn to_toml(&self) -> String {
        qbattery::config::to_toml(&self.inner)
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.to_string()
    }
    #[getter]
    fn chain(&self) -> PySpinChain {
        PySpinChain {
            inner: self.inner.chain,
        }
    }
    #[setter]
    fn set_chain(&mut self, chain: PySpinChain) {
        self.inner.chain = chain.inner;
    }
    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega
    }
    #[setter]
    fn set_omega(&mut self, omega: f64) {
        self.inner.omega = omega;
    }
    #[getter]
    fn gamma_plus(&self) -> f64 {
        self.inner.gamma_plus
    }
    #[setter]
    fn set_gamma_plus(&mut self, v: f64) {
        self.inner.gamma_plus = v;
    }
    #[getter]
    fn gamma_minus(&self) -> f64 {
        self.inner.gamma_minus
    }
    #[setter]
    fn set_gamma_minus(&mut self, v: f64) {
        self.inner.gamma_minus = v;
    }
    #[getter]
    fn t_max(&self) -> f64 {
        self.inner.t_max
    }
    #[setter]
    fn set_t_max(&mut self, v: f64) {
        self.inner.t_max = v;
    }
    #[getter]
    fn output_stride(&self) -> usize {
        self.inner.output_stride
    }
    #[setter]
    fn set_output_stride(&mut self, v: usize) {
        self.inner.output_stride = v;
    }

    /// `[(axis, strength), ...]`
    #[getter]
    fn noise(&self) -> Vec<(String, f64)> {
        self.inner
            .noise
            .iter()
            .map(|c| (c.axis.to_string(), c.strength))
            .collect()
    }
    #[setter]
    fn set_noise(&mut self, channels: Vec<(String, f64)>) -> PyResult<()> {
        self.inner.noise = channels
            .iter()
            .map(|(axis, s)| NoiseChannel::new(parse_axis(axis)?, *s).map_err(to_py))
            .collect::<PyResult<_>>()?;
        Ok(())
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(mode={}, n={}, omega={}, t_max={}, noise={:?})",
            self.inner.mode,
            self.inner.chain.n_sites(),
            self.inner.omega,
            self.inner.t_max,
            self.noise()
        )
    }
}

fn summary_dict<'py>(py: Python<'py>, s: &SummaryStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("ratio_max", s.ratio_max)?;
    d.set_item("t_ratio_max", s.t_ratio_max)?;
    d.set_item("e_plateau", s.e_plateau)?;
    d.set_item("w_plateau", s.w_plateau)?;
    d.set_item("p_peak", s.p_peak)?;
    d.set_item("t_p_peak", s.t_p_peak)?;
    d.set_item("plateau_drift", s.plateau_drift)?;
    d.set_item("plateau_stable", s.plateau_stable())?;
    Ok(d)
}

fn trajectory_dict<'py>(py: Python<'py>, traj: &Trajectory) -> PyResult<Bound<'py, PyDict>> {
    let records = PyList::empty(py);
    for r in &traj.records {
        let d = PyDict::new(py);
        d.set_item("t", r.t)?;
        d.set_item("energy", r.energy)?;
        d.set_item("ergotropy", r.ergotropy)?;
        d.set_item("power_b", r.power_b)?;
        d.set_item("power_w", r.power_w)?;
        d.set_item("purity", r.purity)?;
        d.set_item("coherence_l1", r.coherence_l1)?;
        d.set_item("trace_distance", r.trace_distance)?;
        d.set_item("ratio_w_over_e", r.ratio_w_over_e)?;
        d.set_item("discharge_ratio", r.discharge_ratio)?;
        records.append(d)?;
    }
    let health = PyDict::new(py);
    health.set_item("max_trace_error", traj.health.max_trace_error)?;
    health.set_item("max_hermiticity", traj.health.max_hermiticity)?;
    health.set_item("min_eigenvalue", traj.health.min_eigenvalue)?;

    let out = PyDict::new(py);
    out.set_item("records", records)?;
    out.set_item(
        "summary",
        summary_dict(py, &protocol::summarize(&traj.records).map_err(to_py)?)?,
    )?;
    out.set_item("health", health)?;
    out.set_item("warnings", traj.warnings.clone())?;
    out.set_item("final_state", to_rows(traj.final_state.entries()))?;
    Ok(out)
}

/// Run `config` in its own mode; returns `records`, `summary`, `health`,
/// `warnings` and `final_state`.
#[pyfunction]
fn run<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let traj = py.detach(move || protocol::run(&cfg)).map_err(to_py)?;
    trajectory_dict(py, &traj)
}

#[pyfunction]
fn run_charging<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let traj = py.detach(move || protocol::run_charging(&cfg)).map_err(to_py)?;
    trajectory_dict(py, &traj)
}

#[pyfunction]
fn run_discharging<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let traj = py.detach(move || protocol::run_discharging(&cfg)).map_err(to_py)?;
    trajectory_dict(py, &traj)
}

/// One run per value along `axis` (`"chain_size"` or `"noise_strength"`).
/// Failed runs carry an `error` string instead of a `summary`.
#[pyfunction]
#[pyo3(signature = (config, axis, values = None))]
fn sweep<'py>(
    py: Python<'py>,
    config: &PyConfig,
    axis: &str,
    values: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyList>> {
    let axis: SweepAxis = axis.parse().map_err(to_py)?;
    let values = values.unwrap_or_else(|| match axis {
        SweepAxis::ChainSize => DEFAULT_SIZE_GRID.to_vec(),
        SweepAxis::NoiseStrength => DEFAULT_NOISE_GRID.to_vec(),
    });
    let cfg = config.inner.clone();
    let entries = py.detach(move || protocol::sweep(&cfg, axis, &values)).map_err(to_py)?;
    let out = PyList::empty(py);
    for e in &entries {
        let d = PyDict::new(py);
        d.set_item("value", e.value)?;
        match &e.outcome {
            Ok((stats, _)) => d.set_item("summary", summary_dict(py, stats)?)?,
            Err(err) => d.set_item("error", err.to_string())?,
        }
        out.append(d)?;
    }
    Ok(out)
}

/// Drive strength at which the charging run reaches `target` as its ratio maximum.
#[pyfunction]
#[pyo3(signature = (config, target, lo = 0.05, hi = 0.99, tol = 1e-4))]
fn calibrate_omega(py: Python<'_>, config: &PyConfig, target: f64, lo: f64, hi: f64, tol: f64) -> PyResult<f64> {
    let cfg = config.inner.clone();
    py.detach(move || protocol::calibrate_omega(&cfg, target, lo, hi, tol))
        .map_err(to_py)
}

/// Charging Hamiltonian `(omega/2) Σ σ_x` on `n` sites.
#[pyfunction]
fn charging_hamiltonian(n: usize, omega: f64) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(to_rows(qbattery::build_hc(n, omega).map_err(to_py)?.entries()))
}

#[pyfunction]
fn purity(rho: Vec<Vec<Complex64>>) -> PyResult<f64> {
    Ok(metrics::purity(&density(rho)?))
}

#[pyfunction]
fn coherence_l1(rho: Vec<Vec<Complex64>>) -> PyResult<f64> {
    Ok(metrics::coherence_l1(&density(rho)?))
}

#[pyfunction]
fn trace_distance(rho: Vec<Vec<Complex64>>, sigma: Vec<Vec<Complex64>>) -> PyResult<f64> {
    metrics::trace_distance(&density(rho)?, &density(sigma)?).map_err(to_py)
}

/// Built-in invariant suite; one dict per check.
#[pyfunction]
#[pyo3(signature = (seed = 7))]
fn validate<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyList>> {
    let outcomes = py.detach(move || {
        run_suite(&SuiteOptions {
            seed,
            inject_fault: false,
        })
    });
    let out = PyList::empty(py);
    for o in &outcomes {
        let d = PyDict::new(py);
        d.set_item("name", o.name)?;
        d.set_item("passed", o.passed)?;
        d.set_item("worst", o.worst)?;
        d.set_item("tolerance", o.tolerance)?;
        d.set_item("detail", &o.detail)?;
        out.append(d)?;
    }
    Ok(out)
}

#[pymodule]
#[pyo3(name = "qbattery")]
fn qbattery_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("CALIBRATED_OMEGA", CALIBRATED_OMEGA)?;
    m.add("DEFAULT_NOISE_GRID", DEFAULT_NOISE_GRID.to_vec())?;
    m.add("DEFAULT_SIZE_GRID", DEFAULT_SIZE_GRID.to_vec())?;
    m.add_class::<PySpinChain>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_charging, m)?)?;
    m.add_function(wrap_pyfunction!(run_discharging, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_omega, m)?)?;
    m.add_function(wrap_pyfunction!(charging_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(purity, m)?)?;
    m.add_function(wrap_pyfunction!(coherence_l1, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
