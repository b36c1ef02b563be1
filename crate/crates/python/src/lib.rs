//! Python bindings: `import mechscale`.

use mechscale::fit::{fit_dataset, fit_integration_settings, Dataset, FitSpec};
use mechscale::io::{normalize_axis, parse_dataset as parse_dataset_text, NormalizeMode};
use mechscale::laws;
use mechscale::ssa::{run_ensemble as ensemble, SsaSettings};
use mechscale::{presets, Contribution, IntegrationSettings, Rates, SystemConfig};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(mechscale, MechscaleError, PyValueError, "Raised for invalid input or numerical failure.");

fn err(e: mechscale::Error) -> PyErr {
    MechscaleError::new_err(format!("{}: {e}", e.kind()))
}

#[pyclass(name = "Rates", module = "mechscale", skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyRates {
    inner: Rates,
}

#[pymethods]
impl PyRates {
    #[new]
    #[pyo3(signature = (k1=0.0, k2=0.0, k3=0.0, k4=0.0, k5=0.0, k6=0.0, k7=0.0))]
    fn new(k1: f64, k2: f64, k3: f64, k4: f64, k5: f64, k6: f64, k7: f64) -> PyResult<Self> {
        let inner = Rates::new([k1, k2, k3, k4, k5, k6, k7]).map_err(err)?;
        Ok(Self { inner })
    }

    #[pyo3(name = "to_list")]
    fn as_list(&self) -> Vec<f64> {
        self.inner.to_array().to_vec()
    }

    #[getter]
    fn k1(&self) -> f64 {
        self.inner.k1
    }
    #[getter]
    fn k2(&self) -> f64 {
        self.inner.k2
    }
    #[getter]
    fn k3(&self) -> f64 {
        self.inner.k3
    }
    #[getter]
    fn k4(&self) -> f64 {
        self.inner.k4
    }
    #[getter]
    fn k5(&self) -> f64 {
        self.inner.k5
    }
    #[getter]
    fn k6(&self) -> f64 {
        self.inner.k6
    }
    #[getter]
    fn k7(&self) -> f64 {
        self.inner.k7
    }

    fn __repr__(&self) -> String {
        let k = self.inner.to_array();
        format!("Rates(k1={}, k2={}, k3={}, k4={}, k5={}, k6={}, k7={})", k[0], k[1], k[2], k[3], k[4], k[5], k[6])
    }

    fn __eq__(&self, other: PyRef<'_, PyRates>) -> bool {
        self.inner == other.inner
    }
}

#[pyclass(name = "FixedPoint", module = "mechscale", get_all)]
struct PyFixedPoint {
    s_star: f64,
    g_star: f64,
    f_star: f64,
    stability: String,
    residual: f64,
}

impl From<mechscale::FixedPoint> for PyFixedPoint {
    fn from(fp: mechscale::FixedPoint) -> Self {
        let stability = match fp.stability {
            mechscale::Stability::Stable => "stable",
            mechscale::Stability::Unstable => "unstable",
            mechscale::Stability::Marginal => "marginal",
        };
        Self { s_star: fp.s_star, g_star: fp.g_star, f_star: fp.f_star, stability: stability.into(), residual: fp.residual }
    }
}

#[pymethods]
impl PyFixedPoint {
    fn __repr__(&self) -> String {
        format!(
            "FixedPoint(s_star={}, g_star={}, f_star={}, stability='{}')",
            self.s_star, self.g_star, self.f_star, self.stability
        )
    }
}

fn contribution(c_s: f64, c_g: f64) -> PyResult<Contribution> {
    Contribution::new(c_s, c_g).map_err(err)
}

/// Steady state reached from `(n, 0, 0)`.
#[pyfunction]
fn steady_state(py: Python<'_>, rates: PyRef<'_, PyRates>, n: f64) -> PyResult<PyFixedPoint> {
    let cfg = SystemConfig::new(rates.inner, Contribution::default(), n).map_err(err)?;
    let fp = py.detach(|| mechscale::integrate_to_steady(&cfg, &IntegrationSettings::default())).map_err(err)?;
    Ok(fp.into())
}

/// Rows of `{n, s, g, f, x, speedup}`; `speedup` is None when `c_s = 0`.
#[pyfunction]
#[pyo3(signature = (rates, n_values, c_s=1.0, c_g=0.0))]
fn sweep<'py>(
    py: Python<'py>,
    rates: PyRef<'_, PyRates>,
    n_values: Vec<f64>,
    c_s: f64,
    c_g: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let c = contribution(c_s, c_g)?;
    let r = rates.inner;
    let result = py.detach(|| mechscale::sweep(&r, &c, &n_values, &IntegrationSettings::default())).map_err(err)?;
    result
        .rows
        .iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("n", row.n)?;
            d.set_item("s", row.s_star)?;
            d.set_item("g", row.g_star)?;
            d.set_item("f", row.f_star)?;
            d.set_item("x", row.throughput)?;
            d.set_item("speedup", row.speedup)?;
            Ok(d)
        })
        .collect()
}

/// `(n_c, x_max)` for an interior throughput maximum over `n_values`, else None.
#[pyfunction]
#[pyo3(signature = (rates, n_values, c_s=1.0, c_g=0.0))]
fn critical_n(
    py: Python<'_>,
    rates: PyRef<'_, PyRates>,
    n_values: Vec<f64>,
    c_s: f64,
    c_g: f64,
) -> PyResult<Option<(f64, f64)>> {
    let c = contribution(c_s, c_g)?;
    let r = rates.inner;
    let result = py.detach(|| mechscale::sweep(&r, &c, &n_values, &IntegrationSettings::default())).map_err(err)?;
    Ok(mechscale::find_critical_n(&result))
}

#[pyfunction]
fn amdahl_speedup(sigma: f64, n: f64) -> PyResult<f64> {
    Ok(laws::amdahl_speedup(&laws::AmdahlParams::new(sigma).map_err(err)?, n))
}

#[pyfunction]
fn gustafson_speedup(sigma: f64, n: f64) -> PyResult<f64> {
    Ok(laws::gustafson_speedup(&laws::GustafsonParams::new(sigma).map_err(err)?, n))
}

#[pyfunction]
fn usl_speedup(sigma: f64, kappa: f64, n: f64) -> PyResult<f64> {
    laws::usl_speedup(&laws::UslParams::new(sigma, kappa).map_err(err)?, n).map_err(err)
}

#[pyfunction]
fn swarm_performance(a: f64, b: f64, c: f64, n: f64) -> PyResult<f64> {
    Ok(laws::swarm_performance(&laws::SwarmParams::new(a, b, c).map_err(err)?, n))
}

#[pyfunction]
fn usl_approx_speedup(k2: f64, k4: f64, n: f64) -> f64 {
    laws::usl_approx_speedup(k2, k4, n)
}

#[pyfunction]
fn fp_ideal_concurrency(k1: f64, k4: f64, n: f64) -> PyResult<PyFixedPoint> {
    laws::fp_ideal_concurrency(k1, k4, n).map(Into::into).map_err(err)
}

#[pyfunction]
fn fp_amdahl(k1: f64, k2: f64, k4: f64, n: f64) -> PyResult<PyFixedPoint> {
    laws::fp_amdahl(k1, k2, k4, n).map(Into::into).map_err(err)
}

#[pyfunction]
fn fp_diminishing(k1: f64, k4: f64, n: f64) -> PyResult<PyFixedPoint> {
    laws::fp_diminishing(k1, k4, n).map(Into::into).map_err(err)
}

#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    presets::ALL.iter().map(|p| p.name).collect()
}

/// `(rates, c_s, c_g)` for a named preset.
#[pyfunction]
fn preset(name: &str) -> PyResult<(PyRates, f64, f64)> {
    let p = presets::by_name(name).map_err(err)?;
    Ok((PyRates { inner: p.rates }, p.contribution.c_s, p.contribution.c_g))
}

/// Ensemble statistics as `{times, mean, variance, runs}`; `mean` and
/// `variance` hold one `[s, g, f]` triple per sample time.
#[pyfunction]
#[pyo3(signature = (rates, n, runs, t_end, seed=0, record_interval=None))]
fn run_ensemble<'py>(
    py: Python<'py>,
    rates: PyRef<'_, PyRates>,
    n: u64,
    runs: usize,
    t_end: f64,
    seed: u64,
    record_interval: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let settings = SsaSettings { t_end, seed, record_interval: record_interval.unwrap_or(t_end / 100.0) };
    let r = rates.inner;
    let stats = py.detach(|| ensemble(n, &r, &settings, runs)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("times", stats.times)?;
    d.set_item("mean", stats.mean)?;
    d.set_item("variance", stats.variance)?;
    d.set_item("runs", stats.runs)?;
    Ok(d)
}

/// Parses `n,x` CSV text into sorted `(n, x)` pairs.
#[pyfunction]
fn parse_dataset(text: &str) -> PyResult<Vec<(f64, f64)>> {
    Ok(parse_dataset_text(text).map_err(err)?.points().to_vec())
}

/// Fits rates (and `c_s` unless pinned) to `(n, x)` points.
///
/// `fixed` maps parameter names (`k1`..`k7`, `c_s`) to pinned values.
#[pyfunction]
#[pyo3(signature = (points, fixed=None, pin_cs_first=false, c_g=0.0, seed=0, generations=300, population=None, normalize="none"))]
#[allow(clippy::too_many_arguments)]
fn fit<'py>(
    py: Python<'py>,
    points: Vec<(f64, f64)>,
    fixed: Option<std::collections::HashMap<String, f64>>,
    pin_cs_first: bool,
    c_g: f64,
    seed: u64,
    generations: usize,
    population: Option<usize>,
    normalize: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let mode: NormalizeMode = normalize.parse().map_err(err)?;
    let data = normalize_axis(&Dataset::new(points, "").map_err(err)?, mode).map_err(err)?;
    let mut spec = FitSpec { c_g, pin_cs_first, ..FitSpec::default() }.with_seed(seed);
    spec.de.max_generations = generations;
    spec.de.population = population;
    let mut fixed: Vec<_> = fixed.unwrap_or_default().into_iter().collect();
    fixed.sort_by(|a, b| a.0.cmp(&b.0));
    for (name, value) in fixed {
        spec = spec.fix(&name, value).map_err(err)?;
    }
    let result = py.detach(|| fit_dataset(&data, &spec, &fit_integration_settings())).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("rates", PyRates { inner: result.rates })?;
    d.set_item("c_s", result.contribution.c_s)?;
    d.set_item("c_g", result.contribution.c_g)?;
    d.set_item("mse", result.mse)?;
    d.set_item("generations_used", result.generations_used)?;
    d.set_item("converged", result.converged)?;
    d.set_item("objective_evaluations", result.objective_evaluations)?;
    d.set_item("history", result.history)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "mechscale")]
fn mechscale_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MechscaleError", m.py().get_type::<MechscaleError>())?;
    m.add_class::<PyRates>()?;
    m.add_class::<PyFixedPoint>()?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(critical_n, m)?)?;
    m.add_function(wrap_pyfunction!(amdahl_speedup, m)?)?;
    m.add_function(wrap_pyfunction!(gustafson_speedup, m)?)?;
    m.add_function(wrap_pyfunction!(usl_speedup, m)?)?;
    m.add_function(wrap_pyfunction!(swarm_performance, m)?)?;
    m.add_function(wrap_pyfunction!(usl_approx_speedup, m)?)?;
    m.add_function(wrap_pyfunction!(fp_ideal_concurrency, m)?)?;
    m.add_function(wrap_pyfunction!(fp_amdahl, m)?)?;
    m.add_function(wrap_pyfunction!(fp_diminishing, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(parse_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    Ok(())
}
