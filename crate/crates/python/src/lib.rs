//! Python bindings for `calib-core`.
//!
//! Distributions, models and procedures are opaque handles; seeds are plain
//! integers and every random operation takes one, so results are
//! reproducible from Python. Long simulations release the GIL.

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use calib_core::calib::{self, CalibrationReport, HarnessOptions, ReportValues};
use calib_core::dist::{Belief, GaussianVector, ScalarDistribution};
use calib_core::error::CalibError;
use calib_core::gof::{self, GofResult};
use calib_core::procedures::{
    AbcConfig, Bayes, ContaminatedGaussianModel, DataAgnostic, Fractional, GKParams,
    GaussianLocationModel, GkAbc, GkModel, LaplaceStudentT, LinearSystemModel, MirrorBayes,
    Richardson, StudentTLocationModel,
};
use calib_core::report::{self, ReportFormat, ReportRow};
use calib_core::rng::RngStream;
use calib_core::testfn::{pushforward_cdf, TestFunction};
use calib_core::types::{
    DataGeneratingModel, Dataset, LearningProcedure, ParamPoint, PosteriorOutput,
};
use calib_core::vignettes::{self, Vignette, VignetteConfig};

create_exception!(
    calib_py,
    CalibrationError,
    PyException,
    "Simulation failure, e.g. too many failed replicates."
);

fn to_py(e: CalibError) -> PyErr {
    match e.root() {
        CalibError::InvalidParameter(_)
        | CalibError::ProbabilityOutOfRange(_)
        | CalibError::DimensionMismatch { .. }
        | CalibError::IndexOutOfRange { .. }
        | CalibError::NotPositiveDefinite
        | CalibError::NoClosedFormPushforward(_)
        | CalibError::EmptyInput(_)
        | CalibError::InsufficientData { .. }
        | CalibError::SingularMatrix => PyValueError::new_err(e.to_string()),
        _ => CalibrationError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for calib_core::error::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err(
            "matrix must be a non-empty list of equal-length rows",
        ));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn points(values: Vec<Vec<f64>>) -> PyResult<Vec<ParamPoint>> {
    values
        .into_iter()
        .map(|v| ParamPoint::new(v).py_err())
        .collect()
}

/// One-dimensional distribution.
#[pyclass(
    name = "ScalarDistribution",
    module = "calib_py",
    frozen,
    from_py_object
)]
#[derive(Clone)]
struct PyScalar(ScalarDistribution);

#[pymethods]
impl PyScalar {
    #[staticmethod]
    fn normal(mean: f64, var: f64) -> PyResult<Self> {
        ScalarDistribution::normal(mean, var).py_err().map(PyScalar)
    }

    #[staticmethod]
    fn standard_normal() -> Self {
        PyScalar(ScalarDistribution::standard_normal())
    }

    #[staticmethod]
    fn student_t(loc: f64, scale: f64, dof: f64) -> PyResult<Self> {
        ScalarDistribution::student_t(loc, scale, dof)
            .py_err()
            .map(PyScalar)
    }

    #[staticmethod]
    fn uniform(lo: f64, hi: f64) -> PyResult<Self> {
        ScalarDistribution::uniform(lo, hi).py_err().map(PyScalar)
    }

    #[staticmethod]
    fn log_normal(log_mean: f64, log_sd: f64) -> PyResult<Self> {
        ScalarDistribution::log_normal(log_mean, log_sd)
            .py_err()
            .map(PyScalar)
    }

    /// `(1 - weight) N(first) + weight N(second)`, each given as `(mean, var)`.
    #[staticmethod]
    fn normal_mixture(weight: f64, first: (f64, f64), second: (f64, f64)) -> PyResult<Self> {
        ScalarDistribution::normal_mixture(weight, first, second)
            .py_err()
            .map(PyScalar)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }

    fn pdf(&self, x: f64) -> f64 {
        self.0.pdf(x)
    }

    fn quantile(&self, p: f64) -> PyResult<f64> {
        self.0.quantile(p).py_err()
    }

    fn mean(&self) -> Option<f64> {
        self.0.mean()
    }

    fn variance(&self) -> Option<f64> {
        self.0.variance()
    }

    fn support(&self) -> (f64, f64) {
        self.0.support()
    }

    #[pyo3(signature = (n, seed = 0))]
    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| self.0.sample(&mut rng)).collect()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Multivariate normal with a positive definite covariance.
#[pyclass(name = "GaussianVector", module = "calib_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyGaussian(GaussianVector);

#[pymethods]
impl PyGaussian {
    #[new]
    fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Self> {
        GaussianVector::new(DVector::from_vec(mean), matrix(cov)?)
            .py_err()
            .map(PyGaussian)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.0.mean().iter().copied().collect()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.0.cov())
    }

    fn marginal(&self, i: usize) -> PyResult<PyScalar> {
        self.0.marginal(i).py_err().map(PyScalar)
    }

    #[pyo3(signature = (n, seed = 0))]
    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| self.0.sample(&mut rng).into_vec()).collect()
    }
}

#[derive(FromPyObject)]
enum PriorArg {
    Scalar(PyScalar),
    Gaussian(PyGaussian),
}

impl PriorArg {
    fn belief(self) -> Belief {
        match self {
            PriorArg::Scalar(s) => Belief::Scalar(s.0),
            PriorArg::Gaussian(g) => Belief::Gaussian(g.0),
        }
    }
}

/// Scalar summary `f(θ)` used by the calibration tests.
#[pyclass(name = "TestFunction", module = "calib_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyTestFunction(TestFunction);

#[pymethods]
impl PyTestFunction {
    #[staticmethod]
    fn identity() -> Self {
        PyTestFunction(TestFunction::Identity)
    }

    #[staticmethod]
    fn coordinate(index: usize) -> Self {
        PyTestFunction(TestFunction::Coordinate(index))
    }

    /// Value of a function-valued parameter at grid index `index`.
    #[staticmethod]
    fn evaluation(index: usize) -> Self {
        PyTestFunction(TestFunction::Evaluation(index))
    }

    #[staticmethod]
    fn sigmoid_product(center: Vec<f64>, sharpness: f64) -> PyResult<Self> {
        TestFunction::sigmoid_product(center, sharpness)
            .py_err()
            .map(PyTestFunction)
    }

    fn __call__(&self, theta: Vec<f64>) -> PyResult<f64> {
        self.0.apply(&ParamPoint::new(theta).py_err()?).py_err()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Data-generating model `θ ↦ P_θ`.
#[pyclass(name = "Model", module = "calib_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyModel(Arc<dyn DataGeneratingModel>);

#[pymethods]
impl PyModel {
    /// `n_obs` iid draws from `N(θ, obs_var)`.
    #[staticmethod]
    #[pyo3(signature = (obs_var = 1.0, n_obs = 1))]
    fn gaussian_location(obs_var: f64, n_obs: usize) -> PyResult<Self> {
        Ok(PyModel(Arc::new(
            GaussianLocationModel::new(obs_var, n_obs).py_err()?,
        )))
    }

    /// Gaussian location data where each point is replaced, with probability
    /// `contamination`, by a draw from `N(outlier_mean, obs_var)`.
    #[staticmethod]
    #[pyo3(signature = (contamination, outlier_mean = 5.0, obs_var = 1.0, n_obs = 1))]
    fn contaminated_gaussian(
        contamination: f64,
        outlier_mean: f64,
        obs_var: f64,
        n_obs: usize,
    ) -> PyResult<Self> {
        let m =
            ContaminatedGaussianModel::new(contamination, outlier_mean, obs_var, n_obs).py_err()?;
        Ok(PyModel(Arc::new(m)))
    }

    #[staticmethod]
    #[pyo3(signature = (dof, n_obs = 5))]
    fn student_t_location(dof: f64, n_obs: usize) -> PyResult<Self> {
        Ok(PyModel(Arc::new(
            StudentTLocationModel::new(dof, n_obs).py_err()?,
        )))
    }

    #[staticmethod]
    #[pyo3(signature = (n_obs = 20, b = 1.0, g = 2.0, k = 0.5))]
    fn g_and_k(n_obs: usize, b: f64, g: f64, k: f64) -> PyResult<Self> {
        let params = GKParams::new(b, g, k).py_err()?;
        Ok(PyModel(Arc::new(GkModel { params, n_obs })))
    }

    /// Noise-free `y = A θ`.
    #[staticmethod]
    fn linear_system(matrix_rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyModel(Arc::new(LinearSystemModel {
            matrix: matrix(matrix_rows)?,
        })))
    }

    #[pyo3(signature = (theta, seed = 0))]
    fn sample(&self, theta: Vec<f64>, seed: u64) -> PyResult<Vec<f64>> {
        let theta = ParamPoint::new(theta).py_err()?;
        let mut rng = RngStream::new(seed, 0);
        Ok(self.0.sample(&theta, &mut rng).py_err()?.into_vec())
    }
}

/// Output of a learning procedure: a closed-form law or an ensemble.
#[pyclass(name = "Posterior", module = "calib_py", frozen)]
struct PyPosterior(PosteriorOutput);

#[pymethods]
impl PyPosterior {
    #[getter]
    fn is_empirical(&self) -> bool {
        matches!(self.0, PosteriorOutput::Empirical(_))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Closed-form scalar law, if any.
    fn scalar(&self) -> Option<PyScalar> {
        self.0
            .as_analytic()
            .and_then(Belief::as_scalar)
            .cloned()
            .map(PyScalar)
    }

    /// Closed-form multivariate normal law, if any.
    fn gaussian(&self) -> Option<PyGaussian> {
        match self.0.as_analytic() {
            Some(Belief::Gaussian(g)) => Some(PyGaussian(g.clone())),
            _ => None,
        }
    }

    /// Ensemble members, if the output is empirical.
    fn ensemble(&self) -> Option<Vec<Vec<f64>>> {
        match &self.0 {
            PosteriorOutput::Empirical(s) => Some(s.iter().map(|p| p.to_vec()).collect()),
            PosteriorOutput::Analytic(_) => None,
        }
    }

    /// CDF of the pushforward of this output through `f`, evaluated at `t`.
    fn pushforward_cdf(&self, f: &PyTestFunction, t: f64) -> PyResult<f64> {
        pushforward_cdf(&self.0, &f.0, t).py_err()
    }

    #[pyo3(signature = (n, seed = 0))]
    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = RngStream::new(seed, 0);
        (0..n)
            .map(|_| self.0.sample_one(&mut rng).into_vec())
            .collect()
    }
}

/// Learning procedure `(μ0, y) ↦ μ(μ0, y)`.
#[pyclass(name = "Procedure", module = "calib_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyProcedure(Arc<dyn LearningProcedure>);

#[pymethods]
impl PyProcedure {
    /// Conjugate posterior for a Gaussian location model.
    #[staticmethod]
    #[pyo3(signature = (obs_var = 1.0))]
    fn bayes(obs_var: f64) -> Self {
        PyProcedure(Arc::new(Bayes { obs_var }))
    }

    /// Conjugate posterior given the negated data.
    #[staticmethod]
    #[pyo3(signature = (obs_var = 1.0))]
    fn mirror_bayes(obs_var: f64) -> Self {
        PyProcedure(Arc::new(MirrorBayes { obs_var }))
    }

    /// Posterior with the likelihood raised to `power`.
    #[staticmethod]
    #[pyo3(signature = (power, obs_var = 1.0))]
    fn fractional(power: f64, obs_var: f64) -> PyResult<Self> {
        if !(0.0..=1.0).contains(&power) {
            return Err(PyValueError::new_err(format!(
                "fractional power {power} is outside [0, 1]"
            )));
        }
        Ok(PyProcedure(Arc::new(Fractional { obs_var, power })))
    }

    /// Returns the prior unchanged.
    #[staticmethod]
    fn data_agnostic() -> Self {
        PyProcedure(Arc::new(DataAgnostic))
    }

    /// Gaussian approximation at the mode of a Student-t location posterior.
    #[staticmethod]
    fn laplace_student_t(dof: f64) -> Self {
        PyProcedure(Arc::new(LaplaceStudentT { dof }))
    }

    /// `iterations` Richardson steps on `A θ = y`, pushed forward exactly.
    #[staticmethod]
    fn richardson(matrix_rows: Vec<Vec<f64>>, step: f64, iterations: usize) -> PyResult<Self> {
        let r = Richardson::new(matrix(matrix_rows)?, step, iterations).py_err()?;
        Ok(PyProcedure(Arc::new(r)))
    }

    /// Rejection ABC on quartile summaries of g-and-k data.
    #[staticmethod]
    #[pyo3(signature = (tolerance, ensemble_size = 99, max_proposals = 100_000_000, noisy = false, n_obs = 20))]
    fn gk_abc(
        tolerance: f64,
        ensemble_size: usize,
        max_proposals: u64,
        noisy: bool,
        n_obs: usize,
    ) -> PyResult<Self> {
        let config = AbcConfig::new(tolerance, ensemble_size, max_proposals, noisy).py_err()?;
        Ok(PyProcedure(Arc::new(GkAbc {
            params: GKParams::default(),
            n_obs,
            config,
        })))
    }

    #[pyo3(signature = (prior, data, seed = 0))]
    fn infer(
        &self,
        py: Python<'_>,
        prior: PriorArg,
        data: Vec<f64>,
        seed: u64,
    ) -> PyResult<PyPosterior> {
        let belief = prior.belief();
        let data = Dataset::new(data).py_err()?;
        let procedure = self.0.clone();
        py.detach(move || {
            let mut rng = RngStream::new(seed, 0);
            procedure.infer(&belief, &data, &mut rng)
        })
        .py_err()
        .map(PyPosterior)
    }
}

/// Goodness-of-fit result.
#[pyclass(name = "GofResult", module = "calib_py", frozen, get_all)]
struct PyGof {
    test_name: String,
    statistic: f64,
    p_value: f64,
    sample_size: usize,
}

impl From<GofResult> for PyGof {
    fn from(g: GofResult) -> Self {
        PyGof {
            test_name: g.test_name,
            statistic: g.statistic,
            p_value: g.p_value,
            sample_size: g.sample_size,
        }
    }
}

#[pymethods]
impl PyGof {
    fn __repr__(&self) -> String {
        format!(
            "GofResult(test_name={:?}, statistic={}, p_value={}, sample_size={})",
            self.test_name, self.statistic, self.p_value, self.sample_size
        )
    }
}

/// Outcome of a strong, strong-rank or weak calibration test.
#[pyclass(name = "CalibrationReport", module = "calib_py", frozen)]
struct PyReport(CalibrationReport);

#[pymethods]
impl PyReport {
    #[getter]
    fn mode(&self) -> &'static str {
        self.0.mode.as_str()
    }

    #[getter]
    fn test_name(&self) -> &str {
        &self.0.gof.test_name
    }

    #[getter]
    fn statistic(&self) -> f64 {
        self.0.gof.statistic
    }

    #[getter]
    fn p_value(&self) -> f64 {
        self.0.gof.p_value
    }

    #[getter]
    fn n_replicates(&self) -> usize {
        self.0.n_replicates
    }

    #[getter]
    fn failed_replicates(&self) -> Vec<u64> {
        self.0.failed_replicates.clone()
    }

    #[getter]
    fn histogram(&self) -> Vec<usize> {
        self.0.histogram.clone()
    }

    #[getter]
    fn bin_edges(&self) -> Vec<f64> {
        self.0.bin_edges.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    /// Probability integral transforms, for KS-based tests.
    #[getter]
    fn pits(&self) -> Option<Vec<f64>> {
        match &self.0.values {
            ReportValues::Pit(v) => Some(v.clone()),
            _ => None,
        }
    }

    /// Ranks, for the rank test.
    #[getter]
    fn ranks(&self) -> Option<Vec<usize>> {
        match &self.0.values {
            ReportValues::Ranks(v) => Some(v.clone()),
            _ => None,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "CalibrationReport(mode={:?}, statistic={}, p_value={}, n_replicates={})",
            self.mode(),
            self.statistic(),
            self.p_value(),
            self.0.n_replicates
        )
    }
}

struct Setup {
    procedure: Arc<dyn LearningProcedure>,
    prior: Belief,
    model: Arc<dyn DataGeneratingModel>,
    f: TestFunction,
    rng: RngStream,
    opts: HarnessOptions,
}

fn setup(
    procedure: &PyProcedure,
    prior: PriorArg,
    model: &PyModel,
    test_function: Option<PyTestFunction>,
    seed: u64,
    bins: usize,
    max_failure_fraction: f64,
) -> Setup {
    Setup {
        procedure: procedure.0.clone(),
        prior: prior.belief(),
        model: model.0.clone(),
        f: test_function.map_or(TestFunction::Identity, |f| f.0),
        rng: RngStream::new(seed, 0),
        opts: HarnessOptions {
            bins,
            max_failure_fraction,
        },
    }
}

/// KS test that `F_{f#μ(μ0, y)}(f(θ))` is uniform over `n` replicates.
#[pyfunction]
#[pyo3(signature = (procedure, prior, model, n, seed = 0, test_function = None, bins = 20, max_failure_fraction = 0.001))]
#[allow(clippy::too_many_arguments)]
fn strong_test(
    py: Python<'_>,
    procedure: &PyProcedure,
    prior: PriorArg,
    model: &PyModel,
    n: usize,
    seed: u64,
    test_function: Option<PyTestFunction>,
    bins: usize,
    max_failure_fraction: f64,
) -> PyResult<PyReport> {
    let s = setup(
        procedure,
        prior,
        model,
        test_function,
        seed,
        bins,
        max_failure_fraction,
    );
    py.detach(move || {
        calib::strong_test(&*s.procedure, &s.prior, &*s.model, &s.f, n, &s.rng, &s.opts)
    })
    .py_err()
    .map(PyReport)
}

/// KS test that `F_{f#μ0}(f(ϑ))` is uniform for one output draw `ϑ` per
/// replicate.
#[pyfunction]
#[pyo3(signature = (procedure, prior, model, n, seed = 0, test_function = None, bins = 20, max_failure_fraction = 0.001))]
#[allow(clippy::too_many_arguments)]
fn weak_test(
    py: Python<'_>,
    procedure: &PyProcedure,
    prior: PriorArg,
    model: &PyModel,
    n: usize,
    seed: u64,
    test_function: Option<PyTestFunction>,
    bins: usize,
    max_failure_fraction: f64,
) -> PyResult<PyReport> {
    let s = setup(
        procedure,
        prior,
        model,
        test_function,
        seed,
        bins,
        max_failure_fraction,
    );
    py.detach(move || {
        calib::weak_test(&*s.procedure, &s.prior, &*s.model, &s.f, n, &s.rng, &s.opts)
    })
    .py_err()
    .map(PyReport)
}

/// Rank of `f(θ)` within an ensemble of `ensemble_size` output draws,
/// tested for uniformity after pooling into `rank_bins` groups.
#[pyfunction]
#[pyo3(signature = (procedure, prior, model, n, ensemble_size = 99, rank_bins = 20, seed = 0, test_function = None, max_failure_fraction = 0.001))]
#[allow(clippy::too_many_arguments)]
fn strong_rank_test(
    py: Python<'_>,
    procedure: &PyProcedure,
    prior: PriorArg,
    model: &PyModel,
    n: usize,
    ensemble_size: usize,
    rank_bins: usize,
    seed: u64,
    test_function: Option<PyTestFunction>,
    max_failure_fraction: f64,
) -> PyResult<PyReport> {
    let s = setup(
        procedure,
        prior,
        model,
        test_function,
        seed,
        rank_bins,
        max_failure_fraction,
    );
    py.detach(move || {
        calib::strong_rank_test(
            &*s.procedure,
            &s.prior,
            &*s.model,
            &s.f,
            n,
            ensemble_size,
            rank_bins,
            &s.rng,
            &s.opts,
        )
    })
    .py_err()
    .map(PyReport)
}

/// Strong tests for several test functions on shared replicates.
#[pyfunction]
#[pyo3(signature = (procedure, prior, model, test_functions, n, seed = 0, bonferroni = false, bins = 20, max_failure_fraction = 0.001))]
#[allow(clippy::too_many_arguments)]
fn strong_test_multi(
    py: Python<'_>,
    procedure: &PyProcedure,
    prior: PriorArg,
    model: &PyModel,
    test_functions: Vec<PyTestFunction>,
    n: usize,
    seed: u64,
    bonferroni: bool,
    bins: usize,
    max_failure_fraction: f64,
) -> PyResult<Vec<PyReport>> {
    let s = setup(
        procedure,
        prior,
        model,
        None,
        seed,
        bins,
        max_failure_fraction,
    );
    let fs: Vec<TestFunction> = test_functions.into_iter().map(|f| f.0).collect();
    let reports = py
        .detach(move || {
            calib::strong_test_multi(
                &*s.procedure,
                &s.prior,
                &*s.model,
                &fs,
                n,
                &s.rng,
                &s.opts,
                bonferroni,
            )
        })
        .py_err()?;
    Ok(reports.into_iter().map(PyReport).collect())
}

#[pyfunction]
fn ks_statistic(values: Vec<f64>) -> PyResult<f64> {
    gof::ks_statistic(&values).py_err()
}

#[pyfunction]
fn ks_p_value(statistic: f64, n: usize) -> f64 {
    gof::ks_p_value(statistic, n)
}

/// One-sample KS test against `U(0, 1)`.
#[pyfunction]
fn ks_uniform_test(values: Vec<f64>) -> PyResult<PyGof> {
    gof::ks_uniform_test(&values).py_err().map(Into::into)
}

/// Two-sided test on the sum of squared normal scores of PIT values.
#[pyfunction]
fn chi2_pit_test(pits: Vec<f64>) -> PyResult<PyGof> {
    gof::chi2_pit_test(&pits).py_err().map(Into::into)
}

/// Returns the pooled rank counts and the χ² uniformity test.
#[pyfunction]
fn rank_uniformity_test(
    ranks: Vec<usize>,
    ensemble_size: usize,
    bins: usize,
) -> PyResult<(Vec<usize>, PyGof)> {
    let (hist, g) = gof::rank_uniformity_test(&ranks, ensemble_size, bins).py_err()?;
    Ok((hist.counts, g.into()))
}

/// Kernel two-sample permutation test; `bandwidth = 0` selects the median
/// heuristic.
#[pyfunction]
#[pyo3(signature = (x, y, bandwidth = 0.0, n_perm = 999, seed = 0))]
fn mmd_permutation_test(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    bandwidth: f64,
    n_perm: usize,
    seed: u64,
) -> PyResult<PyGof> {
    let (x, y) = (points(x)?, points(y)?);
    py.detach(move || {
        let mut rng = RngStream::new(seed, 0);
        gof::mmd_permutation_test(&x, &y, bandwidth, n_perm, &mut rng)
    })
    .py_err()
    .map(Into::into)
}

/// One line of a vignette report.
#[pyclass(name = "ReportRow", module = "calib_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyRow(ReportRow);

#[pymethods]
impl PyRow {
    #[getter]
    fn vignette(&self) -> &str {
        &self.0.vignette
    }

    #[getter]
    fn param_name(&self) -> &str {
        &self.0.param_name
    }

    #[getter]
    fn param_value(&self) -> f64 {
        self.0.param_value
    }

    #[getter]
    fn mode(&self) -> &str {
        &self.0.mode
    }

    #[getter]
    fn statistic(&self) -> f64 {
        self.0.statistic
    }

    #[getter]
    fn p_value(&self) -> f64 {
        self.0.p_value
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[getter]
    fn wall_ms(&self) -> u64 {
        self.0.wall_ms
    }

    /// `(bin_edges, counts)` when the row carries a histogram.
    #[getter]
    fn histogram(&self) -> Option<(Vec<f64>, Vec<usize>)> {
        self.0
            .histogram
            .as_ref()
            .map(|h| (h.edges.clone(), h.counts.clone()))
    }

    fn __repr__(&self) -> String {
        format!(
            "ReportRow({} {}={} {} statistic={} p_value={})",
            self.0.vignette,
            self.0.param_name,
            self.0.param_value,
            self.0.mode,
            self.0.statistic,
            self.0.p_value
        )
    }
}

/// Runs one vignette; unspecified sweeps use the command-line defaults.
#[pyfunction]
#[pyo3(signature = (
    name, n = None, seed = 1, n_strong = None, nu_range = None, n_obs_range = None,
    eps_range = None, t_set = None, contam_range = None, split_sizes = None,
    abc_budget = None, full_scale = false
))]
#[allow(clippy::too_many_arguments)]
fn run_vignette(
    py: Python<'_>,
    name: &str,
    n: Option<usize>,
    seed: u64,
    n_strong: Option<usize>,
    nu_range: Option<Vec<f64>>,
    n_obs_range: Option<Vec<usize>>,
    eps_range: Option<Vec<f64>>,
    t_set: Option<Vec<f64>>,
    contam_range: Option<Vec<f64>>,
    split_sizes: Option<Vec<usize>>,
    abc_budget: Option<u64>,
    full_scale: bool,
) -> PyResult<Vec<PyRow>> {
    let vignette: Vignette = name.parse().py_err()?;
    let mut cfg = VignetteConfig::new(vignette);
    if full_scale {
        cfg = cfg.full_scale();
    }
    cfg.seed = seed;
    if let Some(v) = n {
        cfg.n = v;
    }
    if let Some(v) = n_strong {
        cfg.n_strong = v;
    }
    if let Some(v) = nu_range {
        cfg.nu_range = v;
    }
    if let Some(v) = n_obs_range {
        cfg.n_obs_range = v;
    }
    if let Some(v) = eps_range {
        cfg.eps_range = v;
    }
    if let Some(v) = t_set {
        cfg.t_set = v;
    }
    if let Some(v) = contam_range {
        cfg.contam_range = v;
    }
    if let Some(v) = split_sizes {
        cfg.split_sizes = v;
    }
    if let Some(v) = abc_budget {
        cfg.abc_budget = v;
    }
    let rows = py.detach(move || vignettes::run_vignette(&cfg)).py_err()?;
    Ok(rows.into_iter().map(PyRow).collect())
}

/// Writes rows as CSV or JSON plus the `<path>.hist.csv` sidecar.
#[pyfunction]
#[pyo3(signature = (rows, path, format = "csv"))]
fn write_report(rows: Vec<PyRow>, path: PathBuf, format: &str) -> PyResult<()> {
    let format: ReportFormat = format.parse().py_err()?;
    let rows: Vec<ReportRow> = rows.into_iter().map(|r| r.0).collect();
    report::emit_report(&rows, &path, format).py_err()
}

/// Reads a report written by `write_report` or the command-line tool,
/// attaching histograms from the sidecar when present.
#[pyfunction]
#[pyo3(signature = (path, format = "csv"))]
fn read_report(path: PathBuf, format: &str) -> PyResult<Vec<PyRow>> {
    let format: ReportFormat = format.parse().py_err()?;
    Ok(report::read_report(&path, format)
        .py_err()?
        .into_iter()
        .map(PyRow)
        .collect())
}

#[pymodule]
pub fn calib_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CalibrationError", m.py().get_type::<CalibrationError>())?;
    m.add_class::<PyScalar>()?;
    m.add_class::<PyGaussian>()?;
    m.add_class::<PyTestFunction>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyProcedure>()?;
    m.add_class::<PyPosterior>()?;
    m.add_class::<PyGof>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyRow>()?;
    m.add_function(wrap_pyfunction!(strong_test, m)?)?;
    m.add_function(wrap_pyfunction!(weak_test, m)?)?;
    m.add_function(wrap_pyfunction!(strong_rank_test, m)?)?;
    m.add_function(wrap_pyfunction!(strong_test_multi, m)?)?;
    m.add_function(wrap_pyfunction!(ks_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(ks_p_value, m)?)?;
    m.add_function(wrap_pyfunction!(ks_uniform_test, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_pit_test, m)?)?;
    m.add_function(wrap_pyfunction!(rank_uniformity_test, m)?)?;
    m.add_function(wrap_pyfunction!(mmd_permutation_test, m)?)?;
    m.add_function(wrap_pyfunction!(run_vignette, m)?)?;
    m.add_function(wrap_pyfunction!(write_report, m)?)?;
    m.add_function(wrap_pyfunction!(read_report, m)?)?;
    Ok(())
}
