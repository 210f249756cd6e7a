//! Python bindings for `deconf`.
//!
//! Matrices cross the boundary as lists of rows.

use deconf::confound::{self, BlockSigns, Convention, ScenarioParams, ScenarioSpec};
use deconf::evaluation::{self, CvOptions, MethodSpec};
use deconf::solvers::{self, LassoOptions, LassoPath};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: deconf::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n == 0 || p == 0 {
        return Err(PyValueError::new_err("matrix must be non-empty"));
    }
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn lasso_options(n_lambda: usize, lambdas: Option<Vec<f64>>) -> LassoOptions {
    LassoOptions { n_lambda, lambdas, ..LassoOptions::default() }
}

fn method_spec(method: &str, k: Option<usize>) -> PyResult<MethodSpec> {
    match (method, k) {
        ("lasso", _) => Ok(MethodSpec::Lasso),
        ("plmm", _) => Ok(MethodSpec::Plmm),
        ("pc_lasso", Some(k)) => Ok(MethodSpec::PcLasso { k }),
        ("pc_lasso", None) => Err(PyValueError::new_err("pc_lasso needs k")),
        (other, _) => Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    }
}

/// Solved confounding scenario.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: ScenarioParams,
}

#[pymethods]
impl PyScenario {
    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }
    #[getter]
    fn r(&self) -> f64 {
        self.inner.r
    }
    #[getter]
    fn g(&self) -> f64 {
        self.inner.g
    }
    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }
    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }
    #[getter]
    fn var_psi(&self) -> f64 {
        self.inner.var_psi
    }
    #[getter]
    fn gamma(&self) -> Vec<f64> {
        self.inner.gamma.iter().copied().collect()
    }
    #[getter]
    fn tau(&self) -> Vec<f64> {
        self.inner.tau.iter().copied().collect()
    }
    #[getter]
    fn convention(&self) -> &'static str {
        self.inner.spec.convention.name()
    }

    fn __repr__(&self) -> String {
        let s = &self.inner.spec;
        format!(
            "Scenario(p={}, q={}, bnr={}, rho={:.4}, r={:.4}, b={:.4})",
            s.p, s.q, s.bnr, self.inner.rho, self.inner.r, self.inner.b
        )
    }
}

#[pyfunction]
#[pyo3(signature = (p=600, q=10, n=300, s=8, snr=1.5, bnr=0.0, convention="standardized", alternating_signs=false))]
#[allow(clippy::too_many_arguments)]
fn solve_scenario(
    p: usize,
    q: usize,
    n: usize,
    s: usize,
    snr: f64,
    bnr: f64,
    convention: &str,
    alternating_signs: bool,
) -> PyResult<PyScenario> {
    let convention: Convention = convention.parse().map_err(err)?;
    let block_signs = if alternating_signs { BlockSigns::Alternating } else { BlockSigns::Strict };
    let spec = ScenarioSpec { p, q, n, s, snr, bnr, convention, block_signs, ..ScenarioSpec::default() };
    confound::solve_scenario(&spec).map(|inner| PyScenario { inner }).map_err(err)
}

/// Generated data with its ground truth.
#[pyclass(name = "Dataset", frozen, get_all)]
struct PyDataset {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    beta: Vec<f64>,
    support: Vec<usize>,
    tau: Vec<f64>,
}

#[pyfunction]
#[pyo3(signature = (scenario, n, s, seed, sigma_e=1.0))]
fn generate(scenario: &PyScenario, n: usize, s: usize, seed: u64, sigma_e: f64) -> PyResult<PyDataset> {
    let data = confound::generate_dataset(&scenario.inner, n, s, sigma_e, seed).map_err(err)?;
    let truth = data.truth.expect("generated data carries truth");
    Ok(PyDataset {
        x: rows(&data.x),
        y: data.y.iter().copied().collect(),
        beta: truth.beta.iter().copied().collect(),
        support: truth.support,
        tau: truth.tau.map(|t| t.iter().copied().collect()).unwrap_or_default(),
    })
}

/// Regularization path.
#[pyclass(name = "Path", frozen)]
struct PyPath {
    inner: LassoPath,
}

#[pymethods]
impl PyPath {
    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.name()
    }
    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.inner.lambdas.clone()
    }
    #[getter]
    fn intercepts(&self) -> Vec<f64> {
        self.inner.intercepts.clone()
    }
    #[getter]
    fn model_sizes(&self) -> Vec<usize> {
        self.inner.model_sizes.clone()
    }

    /// Penalized coefficients at lambda index `l`.
    fn coef(&self, l: usize) -> PyResult<Vec<f64>> {
        if l >= self.inner.len() {
            return Err(PyValueError::new_err(format!("lambda index {l} out of range")));
        }
        Ok(self.inner.coef(l).iter().copied().collect())
    }

    fn active_set(&self, l: usize) -> PyResult<Vec<usize>> {
        if l >= self.inner.len() {
            return Err(PyValueError::new_err(format!("lambda index {l} out of range")));
        }
        Ok(self.inner.active_set(l))
    }

    /// Precision curve for model sizes 1..=limit against the true support.
    #[pyo3(signature = (support, limit=50))]
    fn precision_curve(&self, support: Vec<usize>, limit: usize) -> PyResult<Vec<f64>> {
        Ok(evaluation::precision_curve(&self.inner, &support).map_err(err)?.filled(limit))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
#[pyo3(signature = (x, y, n_lambda=100, lambdas=None))]
fn lasso_path(x: Vec<Vec<f64>>, y: Vec<f64>, n_lambda: usize, lambdas: Option<Vec<f64>>) -> PyResult<PyPath> {
    let x = matrix(x)?;
    let y = DVector::from_vec(y);
    let inner = solvers::lasso_path(&x, &y, &lasso_options(n_lambda, lambdas)).map_err(err)?;
    Ok(PyPath { inner })
}

#[pyfunction]
#[pyo3(signature = (x, y, k, n_lambda=100, lambdas=None))]
fn pc_lasso_path(x: Vec<Vec<f64>>, y: Vec<f64>, k: usize, n_lambda: usize, lambdas: Option<Vec<f64>>) -> PyResult<PyPath> {
    let x = matrix(x)?;
    let y = DVector::from_vec(y);
    let inner = solvers::pc_lasso_path(&x, &y, k, &lasso_options(n_lambda, lambdas)).map_err(err)?;
    Ok(PyPath { inner })
}

#[pyfunction]
#[pyo3(signature = (x, y, n_lambda=100, lambdas=None))]
fn plmm_path(x: Vec<Vec<f64>>, y: Vec<f64>, n_lambda: usize, lambdas: Option<Vec<f64>>) -> PyResult<PyPath> {
    let x = matrix(x)?;
    let y = DVector::from_vec(y);
    let inner = solvers::plmm_path(&x, &y, &lasso_options(n_lambda, lambdas)).map_err(err)?;
    Ok(PyPath { inner })
}

/// Cross-validated fit.
#[pyclass(name = "CvFit", frozen)]
struct PyCvFit {
    inner: evaluation::CvFit,
}

#[pymethods]
impl PyCvFit {
    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.inner.cv.lambdas.clone()
    }
    #[getter]
    fn cve(&self) -> Vec<f64> {
        self.inner.cv.cve.clone()
    }
    #[getter]
    fn lambda_min(&self) -> f64 {
        self.inner.lambda_min()
    }
    #[getter]
    fn lambda_min_index(&self) -> usize {
        self.inner.cv.lambda_min_index
    }
    #[getter]
    fn fold_assignment(&self) -> Vec<usize> {
        self.inner.cv.fold_assignment.clone()
    }
    #[getter]
    fn null_cve(&self) -> f64 {
        self.inner.cv.null_cve
    }
    #[getter]
    fn model_size(&self) -> usize {
        self.inner.model_size()
    }
    #[getter]
    fn prediction_error(&self) -> f64 {
        self.inner.prediction_error()
    }
    #[getter]
    fn coefs(&self) -> Vec<f64> {
        self.inner.selected_coefs().iter().copied().collect()
    }
    #[getter]
    fn path(&self) -> PyPath {
        PyPath { inner: self.inner.fit.path.clone() }
    }
}

#[pyfunction]
#[pyo3(signature = (x, y, method="lasso", k=None, n_folds=10, seed=0, n_lambda=100))]
#[allow(clippy::too_many_arguments)]
fn cross_validate(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    method: &str,
    k: Option<usize>,
    n_folds: usize,
    seed: u64,
    n_lambda: usize,
) -> PyResult<PyCvFit> {
    let spec = method_spec(method, k)?;
    let x = matrix(x)?;
    let y = DVector::from_vec(y);
    let opts = CvOptions { n_folds, seed, lasso: lasso_options(n_lambda, None), ..CvOptions::default() };
    let inner = py.detach(|| evaluation::cross_validate(spec, &x, &y, &opts)).map_err(err)?;
    Ok(PyCvFit { inner })
}

/// Unit-width step area under a filled precision curve.
#[pyfunction]
fn pauc(curve: Vec<f64>) -> f64 {
    evaluation::pauc_values(&curve)
}

/// `(||b_hat - b||^2, ||b_hat - b||_1)`.
#[pyfunction]
fn estimation_errors(beta_hat: Vec<f64>, beta: Vec<f64>) -> PyResult<(f64, f64)> {
    evaluation::estimation_errors(&DVector::from_vec(beta_hat), &DVector::from_vec(beta)).map_err(err)
}

#[pyfunction]
fn kinship(x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&solvers::estimate_kinship(&matrix(x)?).map_err(err)?))
}

/// Null-model variance components `(eta, sigma_s2, sigma_e2)`.
#[pyfunction]
fn variance_components(y: Vec<f64>, kinship: Vec<Vec<f64>>) -> PyResult<(f64, f64, f64)> {
    let vc = solvers::fit_null_variance_components(&DVector::from_vec(y), &matrix(kinship)?).map_err(err)?;
    Ok((vc.eta, vc.sigma_s2, vc.sigma_e2))
}

#[pymodule]
fn deconf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyPath>()?;
    m.add_class::<PyCvFit>()?;
    m.add_function(wrap_pyfunction!(solve_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(lasso_path, m)?)?;
    m.add_function(wrap_pyfunction!(pc_lasso_path, m)?)?;
    m.add_function(wrap_pyfunction!(plmm_path, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(pauc, m)?)?;
    m.add_function(wrap_pyfunction!(estimation_errors, m)?)?;
    m.add_function(wrap_pyfunction!(kinship, m)?)?;
    m.add_function(wrap_pyfunction!(variance_components, m)?)?;
    Ok(())
}
