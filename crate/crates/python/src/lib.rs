//! Python bindings: the main types and operations of `mlpsel` exposed
//! as the `mlpsel_py` extension module.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use mlpsel::bound;
use mlpsel::mlp;
use mlpsel::optimize;
use mlpsel::runner;
use mlpsel::selection;
use mlpsel::simulation;

fn to_py(e: mlpsel::Error) -> PyErr {
    match &e {
        mlpsel::Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Network shape: `d` inputs, `k` tanh hidden units, one linear output.
#[pyclass(name = "Architecture", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyArchitecture {
    inner: mlp::Architecture,
}

#[pymethods]
impl PyArchitecture {
    #[new]
    fn new(d: usize, k: usize) -> PyResult<Self> {
        Ok(PyArchitecture {
            inner: mlp::Architecture::new(d, k).map_err(to_py)?,
        })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    /// Number of free parameters, `k*(d+2) + 1`.
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn __repr__(&self) -> String {
        format!("Architecture(d={}, k={})", self.inner.d, self.inner.k)
    }
}

/// Flat parameter vector `[beta, a_1..a_k, b_1..b_k, w_11..w_kd]`.
#[pyclass(name = "ParamVector", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyParamVector {
    inner: mlp::ParamVector,
}

#[pymethods]
impl PyParamVector {
    #[new]
    fn new(arch: &PyArchitecture, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyParamVector {
            inner: mlp::ParamVector::from_vec(arch.inner, values).map_err(to_py)?,
        })
    }

    /// Builds a vector from the intercept, output weights, biases, and
    /// per-unit input weight rows.
    #[staticmethod]
    fn from_parts(beta: f64, a: Vec<f64>, b: Vec<f64>, w: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyParamVector {
            inner: mlp::ParamVector::from_parts(beta, &a, &b, &w).map_err(to_py)?,
        })
    }

    /// The generating parameter vector of the simulation model.
    #[staticmethod]
    fn true_theta() -> Self {
        PyParamVector {
            inner: simulation::true_theta(),
        }
    }

    #[getter]
    fn arch(&self) -> PyArchitecture {
        PyArchitecture {
            inner: self.inner.arch(),
        }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    /// Network output at one input point.
    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&x).map_err(to_py)
    }

    /// Empirical mean squared error over a dataset.
    fn mse(&self, data: &PyDataset) -> PyResult<f64> {
        self.inner.mse(&data.inner).map_err(to_py)
    }

    /// Gradient of the empirical MSE, in layout order.
    fn mse_gradient(&self, data: &PyDataset) -> PyResult<Vec<f64>> {
        Ok(self.inner.mse_gradient(&data.inner).map_err(to_py)?.to_vec())
    }

    fn __repr__(&self) -> String {
        let a = self.inner.arch();
        format!("ParamVector(d={}, k={}, dim={})", a.d, a.k, a.param_dim())
    }
}

/// Regression sample: input rows and one target per row.
#[pyclass(name = "Dataset", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: mlp::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> PyResult<Self> {
        Ok(PyDataset {
            inner: mlp::Dataset::from_rows(&rows, targets).map_err(to_py)?,
        })
    }

    /// Reads a dataset CSV (header row, input columns, target column).
    #[staticmethod]
    fn read_csv(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: runner::read_dataset_csv(&path).map_err(to_py)?,
        })
    }

    /// Writes the dataset as CSV, losslessly.
    fn write_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        runner::write_dataset_csv(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.inner.n()).map(|i| self.inner.row(i).to_vec()).collect()
    }

    fn targets(&self) -> Vec<f64> {
        self.inner.targets().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, d={})", self.inner.n(), self.inner.d())
    }
}

/// Settings for the multi-restart BFGS fit.
#[pyclass(name = "FitConfig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFitConfig {
    inner: optimize::FitConfig,
}

#[pymethods]
impl PyFitConfig {
    #[new]
    #[pyo3(signature = (
        restarts = 10,
        max_iterations = 500,
        gradient_tolerance = 1e-6,
        init_half_width = 1.0,
        box_bound = 100.0,
        rng_seed = 0,
    ))]
    fn new(
        restarts: usize,
        max_iterations: usize,
        gradient_tolerance: f64,
        init_half_width: f64,
        box_bound: f64,
        rng_seed: u64,
    ) -> PyResult<Self> {
        let inner = optimize::FitConfig {
            restarts,
            max_iterations,
            gradient_tolerance,
            init_half_width,
            box_bound,
            rng_seed,
        };
        inner.validate().map_err(to_py)?;
        Ok(PyFitConfig { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "FitConfig(restarts={}, max_iterations={}, rng_seed={})",
            self.inner.restarts, self.inner.max_iterations, self.inner.rng_seed
        )
    }
}

/// Best-restart outcome of `fit`.
#[pyclass(name = "FitOutcome", frozen)]
struct PyFitOutcome {
    #[pyo3(get)]
    mse_hat: f64,
    #[pyo3(get)]
    restart_index: usize,
    #[pyo3(get)]
    iterations_used: usize,
    #[pyo3(get)]
    converged: bool,
    theta: mlp::ParamVector,
}

#[pymethods]
impl PyFitOutcome {
    #[getter]
    fn theta_hat(&self) -> PyParamVector {
        PyParamVector {
            inner: self.theta.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "FitOutcome(mse_hat={:.6}, converged={})",
            self.mse_hat, self.converged
        )
    }
}

/// One candidate width's score sheet in a selection run.
#[pyclass(name = "CandidateScore", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCandidateScore {
    #[pyo3(get)]
    k: usize,
    #[pyo3(get)]
    param_dim: usize,
    #[pyo3(get)]
    mse_hat: f64,
    #[pyo3(get)]
    penalty: f64,
    #[pyo3(get)]
    criterion: f64,
    #[pyo3(get)]
    chosen: bool,
}

#[pymethods]
impl PyCandidateScore {
    fn __repr__(&self) -> String {
        format!(
            "CandidateScore(k={}, mse_hat={:.6}, criterion={:.6}, chosen={})",
            self.k, self.mse_hat, self.criterion, self.chosen
        )
    }
}

/// Outcome of a selection run.
#[pyclass(name = "SelectionOutcome", frozen)]
struct PySelectionOutcome {
    #[pyo3(get)]
    chosen_k: usize,
    #[pyo3(get)]
    criterion: String,
    scores_inner: Vec<PyCandidateScore>,
}

#[pymethods]
impl PySelectionOutcome {
    fn scores(&self) -> Vec<PyCandidateScore> {
        self.scores_inner.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "SelectionOutcome(criterion={}, chosen_k={})",
            self.criterion, self.chosen_k
        )
    }
}

/// Summary of a bound-verification run.
#[pyclass(name = "BoundSummary", frozen)]
struct PyBoundSummary {
    #[pyo3(get)]
    violations: usize,
    #[pyo3(get)]
    total: usize,
    #[pyo3(get)]
    skipped_degenerate: usize,
    #[pyo3(get)]
    max_ratio: Option<f64>,
    #[pyo3(get)]
    elementary_check_failures: usize,
}

#[pymethods]
impl PyBoundSummary {
    fn summary_line(&self) -> String {
        format!("violations: {} / {}", self.violations, self.total)
    }

    fn __repr__(&self) -> String {
        format!(
            "BoundSummary(violations={}, total={}, skipped={})",
            self.violations, self.total, self.skipped_degenerate
        )
    }
}

/// Selection-frequency table from a replication study.
#[pyclass(name = "StudyTable", frozen)]
struct PyStudyTable {
    inner: simulation::SelectionTable,
}

#[pymethods]
impl PyStudyTable {
    /// `(criterion label, counts over k = 1..k_max)` pairs.
    fn rows(&self) -> Vec<(String, Vec<usize>)> {
        self.inner
            .rows
            .iter()
            .map(|r| (r.spec.to_string(), r.counts.clone()))
            .collect()
    }

    fn to_markdown(&self) -> String {
        self.inner.to_markdown()
    }

    fn __repr__(&self) -> String {
        format!(
            "StudyTable(n={}, reps={}, criteria={})",
            self.inner.n,
            self.inner.reps,
            self.inner.rows.len()
        )
    }
}

/// The generating regression surface of the simulation model.
#[pyfunction]
fn true_regression(x: f64, y: f64) -> f64 {
    simulation::true_regression(x, y)
}

/// Noise variance of the simulation model, exactly 1/3.
#[pyfunction]
fn noise_variance() -> f64 {
    simulation::noise_variance()
}

/// Draws `n` points from the simulation model, deterministically per
/// seed.
#[pyfunction]
#[pyo3(signature = (n, seed = 0))]
fn gen_true_data(n: usize, seed: u64) -> PyResult<PyDataset> {
    Ok(PyDataset {
        inner: simulation::gen_true_data(n, seed).map_err(to_py)?,
    })
}

/// Least-squares fit by multi-restart BFGS.
#[pyfunction]
#[pyo3(signature = (arch, data, config = None))]
fn fit(arch: &PyArchitecture, data: &PyDataset, config: Option<&PyFitConfig>) -> PyResult<PyFitOutcome> {
    let fit_config = config.map_or_else(optimize::FitConfig::default, |c| c.inner.clone());
    let result = optimize::fit(arch.inner, &data.inner, &fit_config).map_err(to_py)?;
    Ok(PyFitOutcome {
        mse_hat: result.mse_hat,
        restart_index: result.restart_index,
        iterations_used: result.iterations_used,
        converged: result.converged,
        theta: result.theta_hat,
    })
}

fn parse_spec(criterion: &str, sigma2: Option<f64>) -> PyResult<selection::PenaltySpec> {
    selection::PenaltySpec::parse(criterion, sigma2).map_err(to_py)
}

/// Penalty term for a criterion such as `"BIC:known"` or `"SP:log"`.
#[pyfunction]
#[pyo3(signature = (criterion, n, param_dim, mse_hat = None, sigma2 = None))]
fn penalty(
    criterion: &str,
    n: usize,
    param_dim: usize,
    mse_hat: Option<f64>,
    sigma2: Option<f64>,
) -> PyResult<f64> {
    parse_spec(criterion, sigma2)?.penalty(n, param_dim, mse_hat).map_err(to_py)
}

/// Criterion value: fitted MSE (or its log) plus the penalty.
#[pyfunction]
#[pyo3(signature = (criterion, n, param_dim, mse_hat, sigma2 = None))]
fn criterion_value(
    criterion: &str,
    n: usize,
    param_dim: usize,
    mse_hat: f64,
    sigma2: Option<f64>,
) -> PyResult<f64> {
    parse_spec(criterion, sigma2)?
        .criterion_value(n, param_dim, mse_hat)
        .map_err(to_py)
}

/// Fits widths `1..=k_max` and selects one by the given criterion.
#[pyfunction]
#[pyo3(signature = (criterion, data, k_max, config = None, sigma2 = None))]
fn select(
    criterion: &str,
    data: &PyDataset,
    k_max: usize,
    config: Option<&PyFitConfig>,
    sigma2: Option<f64>,
) -> PyResult<PySelectionOutcome> {
    let spec = parse_spec(criterion, sigma2)?;
    let fit_config = config.map_or_else(optimize::FitConfig::default, |c| c.inner.clone());
    let result = selection::select(spec, &data.inner, k_max, &fit_config).map_err(to_py)?;
    Ok(PySelectionOutcome {
        chosen_k: result.chosen_k,
        criterion: spec.to_string(),
        scores_inner: result
            .scores
            .iter()
            .map(|s| PyCandidateScore {
                k: s.k,
                param_dim: s.param_dim,
                mse_hat: s.mse_hat,
                penalty: s.penalty,
                criterion: s.criterion,
                chosen: s.chosen,
            })
            .collect(),
    })
}

/// Per-point contrast `(y - f_theta(x))² - (y - f_theta0(x))²`.
#[pyfunction]
fn delta_sq(theta: &PyParamVector, theta0: &PyParamVector, x: Vec<f64>, y: f64) -> PyResult<f64> {
    bound::delta_sq(&theta.inner, &theta0.inner, &x, y).map_err(to_py)
}

/// Monte-Carlo estimate of the contrast norm `‖e^{-lam·Δ²} - 1‖₂`.
#[pyfunction]
#[pyo3(signature = (theta, theta0, lam, mc_samples = 100_000, seed = 0))]
fn norm_estimate(
    theta: &PyParamVector,
    theta0: &PyParamVector,
    lam: f64,
    mc_samples: usize,
    seed: u64,
) -> PyResult<f64> {
    bound::norm_estimate(&theta.inner, &theta0.inner, lam, mc_samples, seed).map_err(to_py)
}

/// Scaled in-sample improvement `n·(E_n(theta0) - E_n(theta))`.
#[pyfunction]
fn overfit_statistic(data: &PyDataset, theta0: &PyParamVector, theta: &PyParamVector) -> PyResult<f64> {
    bound::overfit_statistic(&data.inner, &theta0.inner, &theta.inner).map_err(to_py)
}

/// Bound statistic `(1/2lam)·(Σd)²/Σ(d)₋²` over the rows of `data`.
#[pyfunction]
fn bound_statistic(
    data: &PyDataset,
    theta: &PyParamVector,
    theta0: &PyParamVector,
    lam: f64,
    norm: f64,
) -> PyResult<f64> {
    bound::bound_statistic(&data.inner, &theta.inner, &theta0.inner, lam, norm).map_err(to_py)
}

/// Checks `overfit ≤ bound` over random candidates plus the fitted one
/// on a fresh simulated dataset.
#[pyfunction]
#[pyo3(signature = (n = 500, lam = 0.5, draws = 200, norm_samples = 100_000, seed = 0, force_theta0 = false))]
fn verify_inequality(
    n: usize,
    lam: f64,
    draws: usize,
    norm_samples: usize,
    seed: u64,
    force_theta0: bool,
) -> PyResult<PyBoundSummary> {
    let config = bound::BoundConfig {
        lambda: lam,
        norm_mc_samples: norm_samples,
        theta_draws: draws,
        rng_seed: seed,
        force_theta0,
    };
    let report = bound::verify_inequality(
        &config,
        simulation::true_architecture(),
        &simulation::true_theta(),
        n,
    )
    .map_err(to_py)?;
    Ok(PyBoundSummary {
        violations: report.violation_count,
        total: report.records.len(),
        skipped_degenerate: report.skipped_degenerate,
        max_ratio: report.max_ratio,
        elementary_check_failures: report.elementary_check_failures,
    })
}

/// Runs the replication study and returns the selection-frequency
/// table. `criteria` are `FAMILY:regime` strings.
#[pyfunction]
#[pyo3(signature = (n, reps, k_max, criteria, seed = 0, sigma2 = None, restarts = 10))]
fn run_study(
    n: usize,
    reps: usize,
    k_max: usize,
    criteria: Vec<String>,
    seed: u64,
    sigma2: Option<f64>,
    restarts: usize,
) -> PyResult<PyStudyTable> {
    let specs = criteria
        .iter()
        .map(|c| parse_spec(c, sigma2))
        .collect::<PyResult<Vec<_>>>()?;
    let config = simulation::SimConfig {
        n,
        reps,
        k_max,
        criteria: specs,
        fit: optimize::FitConfig {
            restarts,
            ..optimize::FitConfig::default()
        },
        rng_seed: seed,
    };
    Ok(PyStudyTable {
        inner: simulation::run_study(&config).map_err(to_py)?,
    })
}

#[pymodule]
fn mlpsel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArchitecture>()?;
    m.add_class::<PyParamVector>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFitConfig>()?;
    m.add_class::<PyFitOutcome>()?;
    m.add_class::<PyCandidateScore>()?;
    m.add_class::<PySelectionOutcome>()?;
    m.add_class::<PyBoundSummary>()?;
    m.add_class::<PyStudyTable>()?;
    m.add_function(wrap_pyfunction!(true_regression, m)?)?;
    m.add_function(wrap_pyfunction!(noise_variance, m)?)?;
    m.add_function(wrap_pyfunction!(gen_true_data, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(penalty, m)?)?;
    m.add_function(wrap_pyfunction!(criterion_value, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(delta_sq, m)?)?;
    m.add_function(wrap_pyfunction!(norm_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(overfit_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(bound_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(verify_inequality, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
