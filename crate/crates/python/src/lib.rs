//! Python bindings for `compound_ld`.

use std::path::PathBuf;

use compound_ld::config::parse_config;
use compound_ld::counting::{CountingModel, InterArrival, ZLaw};
use compound_ld::dual::{DualVector, ExtendedReal, PrimalVector};
use compound_ld::montecarlo::{self, HalfSpaceEvent, Method, Seeds};
use compound_ld::runner::run_experiment;
use compound_ld::special;
use compound_ld::summand::SummandModel;
use compound_ld::variational::{self, OptimizerSettings, RateQuery};
use compound_ld::Error;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(format!("[{}] {e}", e.module()))
}

fn ext(v: ExtendedReal) -> f64 {
    v.to_f64()
}

/// Law of the summands `X_i`.
#[pyclass(name = "Summand", module = "compound_ld_py", frozen)]
#[derive(Clone)]
pub struct PySummand {
    pub inner: SummandModel,
}

#[pymethods]
impl PySummand {
    #[staticmethod]
    fn finite_support(atoms: Vec<Vec<f64>>, probs: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: SummandModel::finite_support(atoms, probs).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn gaussian(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: SummandModel::gaussian(mean, cov).map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (p = 0.5))]
    fn rademacher(p: f64) -> PyResult<Self> {
        Ok(Self {
            inner: SummandModel::rademacher(p).map_err(py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn cgf(&self, theta: Vec<f64>) -> PyResult<f64> {
        let t = DualVector::new(theta).map_err(py_err)?;
        self.inner.cgf(&t).map_err(py_err)
    }

    fn mean(&self) -> Vec<f64> {
        self.inner.mean().into_vec()
    }

    fn covariance(&self) -> Vec<Vec<f64>> {
        self.inner.covariance().rows()
    }

    /// Cramér rate `Λ_X*(x)`.
    fn rate(&self, x: Vec<f64>) -> PyResult<f64> {
        let x = PrimalVector::new(x).map_err(py_err)?;
        variational::summand_rate(&self.inner, &x)
            .map(ext)
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Summand({:?})", self.inner)
    }
}

/// Counting process family `N_n`.
#[pyclass(name = "Counting", module = "compound_ld_py", frozen)]
#[derive(Clone)]
pub struct PyCounting {
    pub inner: CountingModel,
}

#[pymethods]
impl PyCounting {
    #[staticmethod]
    fn poisson(rate: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CountingModel::poisson(rate).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn fractional_poisson(nu: f64, lam: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CountingModel::fractional_poisson(nu, lam).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn bernoulli_constant(p: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CountingModel::bernoulli_constant(p).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn bernoulli_runs(lam: f64, c: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CountingModel::bernoulli_runs(lam, c).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn iid_sum(values: Vec<u64>, probs: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: CountingModel::iid_sum(ZLaw::Finite { values, probs }).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn renewal_exponential(rate: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CountingModel::renewal_exponential(rate).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn renewal_gamma(shape: f64, rate: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CountingModel::renewal(InterArrival::Gamma { shape, rate }).map_err(py_err)?,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind_name()
    }

    /// Limit cumulant `Λ_N(η)`.
    fn cgf(&self, eta: f64) -> PyResult<f64> {
        self.inner.cgf_n_limit(eta).map_err(py_err)
    }

    /// `(Λ_N'(0), Λ_N''(0), Λ_N(−∞))`.
    fn derivatives(&self) -> PyResult<(f64, f64, f64)> {
        let d = self.inner.derivs_at_zero().map_err(py_err)?;
        Ok((d.d1, d.d2, ext(d.lambda_at_minus_inf)))
    }

    /// `Λ_N*(y)`.
    fn rate(&self, y: f64) -> PyResult<f64> {
        self.inner.rate_n(y).map(ext).map_err(py_err)
    }

    fn mean(&self, n: u64) -> PyResult<f64> {
        Ok(self.inner.mean_n(n).map_err(py_err)?.value)
    }

    fn __repr__(&self) -> String {
        format!("Counting({:?})", self.inner)
    }
}

fn query(x: Vec<f64>, y: f64) -> PyResult<RateQuery> {
    RateQuery::new(x, y).map_err(py_err)
}

/// Large deviation rate `I(x, y)`, explicit or by the variational formula.
#[pyfunction]
#[pyo3(signature = (summand, counting, x, y, variational = false))]
pub fn rate_ld(
    summand: &PySummand,
    counting: &PyCounting,
    x: Vec<f64>,
    y: f64,
    variational: bool,
) -> PyResult<f64> {
    let q = query(x, y)?;
    let r = if variational {
        variational::rate_ld_variational(
            &summand.inner,
            &counting.inner,
            &q,
            &OptimizerSettings::default(),
        )
    } else {
        variational::rate_ld_explicit(&summand.inner, &counting.inner, &q)
    };
    r.map(ext).map_err(py_err)
}

/// Moderate deviation rate for centred summands.
#[pyfunction]
pub fn rate_md_summands(
    summand: &PySummand,
    counting: &PyCounting,
    x: Vec<f64>,
    y: f64,
) -> PyResult<f64> {
    variational::rate_md_centered_summands(&summand.inner, &counting.inner, &query(x, y)?)
        .map(ext)
        .map_err(py_err)
}

/// Moderate deviation rate for the centred sum.
#[pyfunction]
pub fn rate_md_sum(
    summand: &PySummand,
    counting: &PyCounting,
    x: Vec<f64>,
    y: f64,
) -> PyResult<f64> {
    variational::rate_md_centered_sum(&summand.inner, &counting.inner, &query(x, y)?)
        .map(ext)
        .map_err(py_err)
}

#[pyfunction]
pub fn mittag_leffler(nu: f64, beta: f64, x: f64) -> PyResult<f64> {
    special::mittag_leffler(special::MittagLefflerParams::new(nu, beta, x).map_err(py_err)?)
        .map_err(py_err)
}

#[pyfunction]
pub fn log_mittag_leffler(nu: f64, beta: f64, x: f64) -> PyResult<f64> {
    special::log_mittag_leffler(nu, beta, x).map_err(py_err)
}

fn event(
    summand: &PySummand,
    mode: &str,
    level: f64,
    direction: Option<Vec<f64>>,
) -> PyResult<HalfSpaceEvent> {
    match mode {
        "count" => HalfSpaceEvent::count(level, summand.inner.dim()).map_err(py_err),
        "sum" => {
            let v = direction.unwrap_or_else(|| vec![1.0; summand.inner.dim()]);
            HalfSpaceEvent::sum(DualVector::new(v).map_err(py_err)?, level).map_err(py_err)
        }
        other => Err(PyValueError::new_err(format!(
            "mode must be \"count\" or \"sum\", got {other:?}"
        ))),
    }
}

fn method(name: &str) -> PyResult<Method> {
    match name {
        "plain" => Ok(Method::Plain),
        "tilted" => Ok(Method::Tilted),
        other => Err(PyValueError::new_err(format!(
            "method must be \"plain\" or \"tilted\", got {other:?}"
        ))),
    }
}

/// Estimates `P((S/n, N/n) ∈ event)`; returns `(p_hat, std_err)`.
#[pyfunction]
#[pyo3(signature = (summand, counting, n, mode, level, seed, direction = None, reps = 10_000, method_name = "tilted", workers = 1))]
#[allow(clippy::too_many_arguments)]
pub fn estimate_event_prob(
    py: Python<'_>,
    summand: &PySummand,
    counting: &PyCounting,
    n: u64,
    mode: &str,
    level: f64,
    seed: u64,
    direction: Option<Vec<f64>>,
    reps: usize,
    method_name: &str,
    workers: usize,
) -> PyResult<(f64, f64)> {
    let ev = event(summand, mode, level, direction)?;
    let m = method(method_name)?;
    let (mx, mn) = (&summand.inner, &counting.inner);
    let e = py
        .allow_threads(|| {
            montecarlo::estimate_event_prob(
                mx,
                mn,
                n,
                &ev,
                reps,
                m,
                Seeds::from_master(seed),
                workers,
            )
        })
        .map_err(py_err)?;
    Ok((e.p_hat, e.std_err))
}

/// Exact event probability by enumeration (finite-support summands, bounded counts).
#[pyfunction]
#[pyo3(signature = (summand, counting, n, mode, level, direction = None))]
pub fn enumerate_exact(
    summand: &PySummand,
    counting: &PyCounting,
    n: u64,
    mode: &str,
    level: f64,
    direction: Option<Vec<f64>>,
) -> PyResult<f64> {
    let ev = event(summand, mode, level, direction)?;
    montecarlo::enumerate_exact(&summand.inner, &counting.inner, n, &ev).map_err(py_err)
}

/// Decay-rate scan; returns a dict with `slope`, `rate_infimum` and `rows`.
#[pyfunction]
#[pyo3(signature = (summand, counting, mode, level, ns, seed, direction = None, reps = 10_000, method_name = "tilted", workers = 1))]
#[allow(clippy::too_many_arguments)]
pub fn decay_rate_scan<'py>(
    py: Python<'py>,
    summand: &PySummand,
    counting: &PyCounting,
    mode: &str,
    level: f64,
    ns: Vec<u64>,
    seed: u64,
    direction: Option<Vec<f64>>,
    reps: usize,
    method_name: &str,
    workers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let ev = event(summand, mode, level, direction)?;
    let m = method(method_name)?;
    let (mx, mn) = (&summand.inner, &counting.inner);
    let d = py
        .allow_threads(|| {
            montecarlo::decay_rate_scan(
                mx,
                mn,
                &ev,
                &ns,
                reps,
                m,
                Seeds::from_master(seed),
                workers,
            )
        })
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("slope", d.slope)?;
    out.set_item("slope_std_err", d.slope_std_err)?;
    out.set_item("rate_infimum", ext(d.rate_infimum))?;
    let rows: Vec<(u64, f64, f64, f64)> = d
        .rows
        .iter()
        .map(|r| (r.n, r.p_hat, r.std_err, r.neg_log_rate))
        .collect();
    out.set_item("rows", rows)?;
    Ok(out)
}

/// Parses and runs a TOML experiment config; returns `(pass, files)`.
#[pyfunction]
#[pyo3(signature = (text, out_dir, workers = 1))]
pub fn run_config(
    py: Python<'_>,
    text: &str,
    out_dir: PathBuf,
    workers: usize,
) -> PyResult<(bool, Vec<String>)> {
    let cfg = parse_config(text).map_err(py_err)?;
    let outcome = py
        .allow_threads(|| run_experiment(&cfg, &out_dir, workers))
        .map_err(py_err)?;
    Ok((
        outcome.pass,
        outcome
            .files
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
    ))
}

#[pymodule]
fn compound_ld_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySummand>()?;
    m.add_class::<PyCounting>()?;
    m.add_function(wrap_pyfunction!(rate_ld, m)?)?;
    m.add_function(wrap_pyfunction!(rate_md_summands, m)?)?;
    m.add_function(wrap_pyfunction!(rate_md_sum, m)?)?;
    m.add_function(wrap_pyfunction!(mittag_leffler, m)?)?;
    m.add_function(wrap_pyfunction!(log_mittag_leffler, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_event_prob, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_exact, m)?)?;
    m.add_function(wrap_pyfunction!(decay_rate_scan, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
