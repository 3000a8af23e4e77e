//! Python bindings. Structured results cross the boundary as plain dicts.

use std::path::PathBuf;

use mixlasso::harness::config::ExperimentConfig;
use mixlasso::harness::runner;
use mixlasso::harness::trial::{self, TrialContext, TrialDraw};
use mixlasso::lasso::{self, Method, SolverOptions};
use mixlasso::linalg::Matrix;
use mixlasso::theory::{self, ConcentrationConfig, ProblemSize, TheoremParams};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: mixlasso::error::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Matrix::new(n, p, rows.concat()).map_err(err)
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect()).collect()
}

/// Experiment configuration; `Config()` is the reference setup.
#[pyclass(name = "Config", module = "mixlasso_py", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (overrides = Vec::new()))]
    fn new(overrides: Vec<String>) -> PyResult<Self> {
        let inner = ExperimentConfig::reference().with_overrides(&overrides).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::from_toml(text).map_err(err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_overrides(&overrides).map_err(err)?,
        })
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        let m = &self.inner.mixture;
        format!(
            "Config(n={}, p={}, k={}, s_star={}, trials={}, master_seed={})",
            m.n, m.p, m.k, m.s_star, self.inner.experiment.trials, self.inner.experiment.master_seed
        )
    }
}

#[pyclass(name = "LassoSolution", module = "mixlasso_py", get_all)]
struct PySolution {
    beta_hat: Vec<f64>,
    lambda_: f64,
    iterations: usize,
    objective: f64,
    duality_gap: f64,
    kkt_infinity: f64,
}

#[pymethods]
impl PySolution {
    fn support(&self) -> Vec<usize> {
        (0..self.beta_hat.len()).filter(|&j| self.beta_hat[j] != 0.0).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "LassoSolution(lambda={}, nnz={}, objective={}, gap={:e})",
            self.lambda_,
            self.support().len(),
            self.objective,
            self.duality_gap
        )
    }
}

/// Solves `min ½‖y − Xβ‖² + λ‖β‖₁` for `x` given as a list of rows.
#[pyfunction]
#[pyo3(signature = (x, y, lam, method = "fista", tol = 1e-9, max_iter = 50_000))]
fn solve_lasso(x: Vec<Vec<f64>>, y: Vec<f64>, lam: f64, method: &str, tol: f64, max_iter: usize) -> PyResult<PySolution> {
    let method = match method {
        "fista" => Method::Fista,
        "homotopy" => Method::Homotopy,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let opts = SolverOptions {
        tol,
        max_iter,
        method,
        ..SolverOptions::default()
    };
    let sol = lasso::solve(&matrix(x)?, &y, lam, &opts).map_err(err)?;
    Ok(solution(sol))
}

fn solution(sol: lasso::LassoSolution) -> PySolution {
    PySolution {
        beta_hat: sol.beta_hat,
        lambda_: sol.lambda,
        iterations: sol.iterations,
        objective: sol.objective,
        duality_gap: sol.duality_gap,
        kkt_infinity: sol.kkt_infinity,
    }
}

#[pyfunction]
#[pyo3(signature = (sigma, p, alpha = 1.0))]
fn default_lambda(sigma: f64, p: f64, alpha: f64) -> PyResult<f64> {
    lasso::default_lambda(sigma, alpha, p).map_err(err)
}

/// Theorem constants for a problem size under the config's parameters.
#[pyfunction]
#[pyo3(signature = (n, p, s, s_star, sigma_frak, config = None))]
fn constants(
    py: Python<'_>,
    n: usize,
    p: usize,
    s: usize,
    s_star: usize,
    sigma_frak: f64,
    config: Option<&PyConfig>,
) -> PyResult<Py<PyAny>> {
    let prm = match config {
        Some(c) => c.inner.theorem_params().map_err(err)?,
        None => TheoremParams::reference(),
    };
    let sz = ProblemSize { n, p, s, s_star, sigma_frak };
    to_py(py, &theory::compute_constants(&sz, &prm).map_err(err)?)
}

#[pyfunction]
fn theorem_rhs(s_star: usize, r_star: f64, lam: f64, delta: f64, center_energy: f64, signal_energy: f64) -> f64 {
    theory::theorem_rhs(s_star, r_star, lam, delta, center_energy, signal_energy)
}

/// One seeded draw: design, ground truth and proxy.
#[pyclass(name = "Trial", module = "mixlasso_py")]
struct PyTrial {
    ctx: TrialContext,
    draw: TrialDraw,
    #[pyo3(get)]
    index: u64,
    #[pyo3(get)]
    seed: u64,
}

#[pymethods]
impl PyTrial {
    #[new]
    #[pyo3(signature = (config, index = 0))]
    fn new(config: &PyConfig, index: u64) -> PyResult<Self> {
        let ctx = TrialContext::new(&config.inner).map_err(err)?;
        let seed = ctx.trial_seed(index);
        let draw = trial::draw_trial(&ctx, seed).map_err(err)?;
        Ok(Self { ctx, draw, index, seed })
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        rows_of(&self.draw.design.x)
    }

    #[getter]
    fn centers(&self) -> Vec<Vec<f64>> {
        rows_of(&self.draw.centers.centers)
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.draw.truth.y.clone()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.draw.truth.beta.clone()
    }

    #[getter]
    fn beta_star(&self) -> Vec<f64> {
        self.draw.proxy.beta_star.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.draw.design.labels.clone()
    }

    #[getter]
    fn active_set(&self) -> Vec<usize> {
        self.draw.design.active_set.clone()
    }

    fn lambda_(&self) -> PyResult<f64> {
        trial::trial_lambda(&self.ctx, &self.draw).map_err(err)
    }

    /// Solves with the config's solver settings, at the trial's `λ` by default.
    #[pyo3(signature = (lam = None))]
    fn solve(&self, lam: Option<f64>) -> PyResult<PySolution> {
        let lambda = match lam {
            Some(l) => l,
            None => self.lambda_()?,
        };
        let opts = self.ctx.config.solver_options();
        let sol = lasso::solve(&self.draw.design.x, &self.draw.truth.y, lambda, &opts).map_err(err)?;
        Ok(solution(sol))
    }

    /// Assumption and event checks at the trial's `λ`.
    fn verify(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let lambda = self.lambda_()?;
        let (assumptions, events) = trial::verify_draw(&self.ctx, &self.draw, lambda);
        to_py(
            py,
            &serde_json::json!({ "lambda": lambda, "assumptions": assumptions, "events": events }),
        )
    }

    /// Full per-trial evaluation, as stored in `trials.jsonl`.
    fn evaluate(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &trial::evaluate(&self.ctx, &self.draw).map_err(err)?)
    }
}

/// Runs the Monte Carlo experiment into `out` and returns the summary.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &PyConfig, out: PathBuf) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let summary = py.detach(|| runner::run_experiment(&cfg, &out)).map_err(err)?;
    to_py(py, &summary)
}

/// Rebuilds the summary of an experiment directory from its records.
#[pyfunction]
fn report(py: Python<'_>, dir: PathBuf) -> PyResult<Py<PyAny>> {
    to_py(py, &runner::report(&dir).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (trials = 10_000, chi_samples = 1_000_000, seed = 0))]
fn concentration_suite(py: Python<'_>, trials: usize, chi_samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let cfg = ConcentrationConfig {
        trials,
        chi_samples,
        ..ConcentrationConfig::default()
    };
    let prm = TheoremParams::reference();
    let rep = py.detach(|| theory::concentration_suite(&cfg, &prm, seed)).map_err(err)?;
    to_py(py, &rep)
}

#[pymodule]
fn mixlasso_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyTrial>()?;
    m.add_function(wrap_pyfunction!(solve_lasso, m)?)?;
    m.add_function(wrap_pyfunction!(default_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(constants, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(concentration_suite, m)?)?;
    Ok(())
}
