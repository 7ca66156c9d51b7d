//! Python bindings for `lpcopula`.
//!
//! Shapes are plain floats; pass `float("inf")` for the independence copula.
//! Samples and point sets travel as lists of rows.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use ::lpcopula::copula::{self, Shape};
use ::lpcopula::energy::{self, PairSampling, SwapOptions};
use ::lpcopula::{
    inference, sampler, specfun, CopulaParams, Error, RngStream, SampleBatch, VariantTag,
};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn shape(p: f64) -> Shape {
    if p == f64::INFINITY {
        Shape::Infinite
    } else {
        Shape::Finite(p)
    }
}

fn variant(name: &str) -> PyResult<VariantTag> {
    name.parse().map_err(to_py)
}

fn flatten(rows: &[Vec<f64>]) -> PyResult<(usize, Vec<f64>)> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok((dim, rows.concat()))
}

fn positive_batch(rows: &[Vec<f64>]) -> PyResult<SampleBatch> {
    let (n, _) = flatten(rows)?;
    SampleBatch::from_rows(
        CopulaParams::new(n, n as f64),
        VariantTag::Positive,
        0,
        rows,
    )
    .map_err(to_py)
}

#[pyfunction]
fn log_gamma(x: f64) -> PyResult<f64> {
    specfun::log_gamma(x).map_err(to_py)
}

#[pyfunction]
fn digamma(x: f64) -> PyResult<f64> {
    specfun::digamma(x).map_err(to_py)
}

#[pyfunction]
fn beta_cdf(x: f64, a: f64, b: f64) -> PyResult<f64> {
    specfun::beta_cdf(x, a, b).map_err(to_py)
}

#[pyfunction]
fn copula_exists(n: usize, p: f64) -> PyResult<bool> {
    copula::copula_exists(n, shape(p)).map_err(to_py)
}

/// Density at `x`; the dimension is `len(x)`.
#[pyfunction]
#[pyo3(signature = (x, p, variant = "positive"))]
fn density(x: Vec<f64>, p: f64, variant: &str) -> PyResult<f64> {
    let params = CopulaParams::new(x.len(), shape(p));
    copula::density_variant(&params, &x, self::variant(variant)?).map_err(to_py)
}

#[pyfunction]
fn radial_pdf(n: usize, p: f64, r: f64) -> PyResult<f64> {
    let law = copula::radial_law(&CopulaParams::new(n, shape(p))).map_err(to_py)?;
    law.pdf(r).map_err(to_py)
}

#[pyfunction]
fn radial_cdf(n: usize, p: f64, r: f64) -> PyResult<f64> {
    let law = copula::radial_law(&CopulaParams::new(n, shape(p))).map_err(to_py)?;
    Ok(law.cdf(r))
}

#[pyfunction]
fn rho(p: f64) -> PyResult<f64> {
    copula::rho(p).map_err(to_py)
}

/// `m` draws as a list of rows.
#[pyfunction]
#[pyo3(signature = (n, p, m, variant = "positive", seed = 0))]
fn sample(
    py: Python<'_>,
    n: usize,
    p: f64,
    m: usize,
    variant: &str,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let params = CopulaParams::new(n, shape(p));
    let tag = self::variant(variant)?;
    let batch = py
        .detach(|| sampler::sample_copula(&mut RngStream::new(seed), &params, m, tag))
        .map_err(to_py)?;
    Ok(batch.iter_rows().map(<[f64]>::to_vec).collect())
}

#[pyfunction]
fn p_star(rows: Vec<Vec<f64>>) -> PyResult<f64> {
    inference::p_star(&positive_batch(&rows)?).map_err(to_py)
}

#[pyfunction]
fn log_likelihood(rows: Vec<Vec<f64>>, p: f64) -> PyResult<f64> {
    inference::log_likelihood(&positive_batch(&rows)?, p).map_err(to_py)
}

#[pyclass(name = "FitResult", get_all, frozen)]
struct PyFitResult {
    n: usize,
    m: usize,
    p_hat: f64,
    /// `"MLE"` or `"P_STAR"`.
    method: String,
    loglik: f64,
    iterations: usize,
    hit_p_max: bool,
}

#[pymethods]
impl PyFitResult {
    fn __repr__(&self) -> String {
        format!(
            "FitResult(p_hat={}, method={}, m={})",
            self.p_hat, self.method, self.m
        )
    }
}

/// Estimates `p` from positive-variant observations.
#[pyfunction]
#[pyo3(signature = (rows, p_max = inference::DEFAULT_P_MAX))]
fn fit(py: Python<'_>, rows: Vec<Vec<f64>>, p_max: f64) -> PyResult<PyFitResult> {
    let batch = positive_batch(&rows)?;
    let r = py.detach(|| inference::fit(&batch, p_max)).map_err(to_py)?;
    let method = match r.method {
        inference::FitMethod::Mle => "MLE",
        inference::FitMethod::PStar => "P_STAR",
    };
    Ok(PyFitResult {
        n: r.n,
        m: r.m,
        p_hat: r.p_hat,
        method: method.to_string(),
        loglik: r.loglik,
        iterations: r.iterations,
        hit_p_max: r.hit_p_max,
    })
}

/// `S_β` U-statistic of a point set; returns `(value, standard_error)`.
#[pyfunction]
fn s_beta(py: Python<'_>, points: Vec<Vec<f64>>, beta: f64) -> PyResult<(f64, f64)> {
    let (dim, flat) = flatten(&points)?;
    let est = py
        .detach(|| energy::s_beta_empirical(&flat, dim, beta, PairSampling::All))
        .map_err(to_py)?;
    Ok((est.value, est.std_error))
}

#[pyclass(name = "SwapResult", get_all, frozen)]
struct PySwapResult {
    /// 0-based permutation: point `i` sits at `((i + 0.5)/m, (sigma[i] + 0.5)/m)`.
    sigma: Vec<usize>,
    objective: f64,
    sweeps_used: usize,
    locally_optimal: bool,
}

#[pymethods]
impl PySwapResult {
    fn __repr__(&self) -> String {
        format!(
            "SwapResult(m={}, objective={}, sweeps_used={})",
            self.sigma.len(),
            self.objective,
            self.sweeps_used
        )
    }
}

#[pyfunction]
#[pyo3(signature = (m, beta, seed = 0, max_sweeps = 1000, restarts = 1))]
fn swap_optimize(
    py: Python<'_>,
    m: usize,
    beta: f64,
    seed: u64,
    max_sweeps: usize,
    restarts: usize,
) -> PyResult<PySwapResult> {
    let opts = SwapOptions {
        max_sweeps,
        restarts,
    };
    let r = py
        .detach(|| energy::swap_optimize(&mut RngStream::new(seed), m, beta, opts))
        .map_err(to_py)?;
    Ok(PySwapResult {
        sigma: r.coupling.sigma().to_vec(),
        objective: r.objective,
        sweeps_used: r.sweeps_used,
        locally_optimal: r.locally_optimal,
    })
}

#[pyclass(name = "ConjectureReport", get_all, frozen)]
struct PyConjectureReport {
    beta: f64,
    p: f64,
    m: usize,
    heuristic_value: f64,
    copula_value_mc: f64,
    copula_value_se: f64,
    mc_samples: usize,
    support_inside_fraction: f64,
    sweeps_used: usize,
    locally_optimal: bool,
}

#[pyfunction]
#[pyo3(signature = (beta, m = 1000, mc_samples = 100_000, seed = 0))]
fn conjecture_report(
    py: Python<'_>,
    beta: f64,
    m: usize,
    mc_samples: usize,
    seed: u64,
) -> PyResult<PyConjectureReport> {
    let r = py
        .detach(|| energy::conjecture_report(&mut RngStream::new(seed), beta, m, mc_samples))
        .map_err(to_py)?;
    Ok(PyConjectureReport {
        beta: r.beta,
        p: r.p,
        m: r.m,
        heuristic_value: r.heuristic_value,
        copula_value_mc: r.copula_value_mc,
        copula_value_se: r.copula_value_se,
        mc_samples: r.mc_samples,
        support_inside_fraction: r.support_inside_fraction,
        sweeps_used: r.sweeps_used,
        locally_optimal: r.locally_optimal,
    })
}

#[pymodule]
fn lpcopula(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PySwapResult>()?;
    m.add_class::<PyConjectureReport>()?;
    m.add_function(wrap_pyfunction!(log_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(digamma, m)?)?;
    m.add_function(wrap_pyfunction!(beta_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(copula_exists, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(radial_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(radial_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(p_star, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(s_beta, m)?)?;
    m.add_function(wrap_pyfunction!(swap_optimize, m)?)?;
    m.add_function(wrap_pyfunction!(conjecture_report, m)?)?;
    Ok(())
}
