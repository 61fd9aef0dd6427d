//! Python bindings: `import distbh`.

use distbh_core::datagen::AlternativeModel;
use distbh_core::estimators::{self, Estimator, SpacingConfig, StoreyConfig};
use distbh_core::harness::{self, ExperimentConfig, MethodResult};
use distbh_core::oracle;
use distbh_core::protocol::{self, codec, CenterState, DeliveryOrder, InProcessTransport, NodeState, Transport};
use distbh_core::testing;
use distbh_core::{Error, PValueBatch};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        Error::Numeric(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn estimator_from(name: &str, param: Option<f64>) -> PyResult<Estimator> {
    Ok(match name {
        "storey" => Estimator::Storey(StoreyConfig::new(param.unwrap_or(0.5)).map_err(to_py)?),
        "spacing" => Estimator::Spacing(SpacingConfig::new(param.unwrap_or(0.5)).map_err(to_py)?),
        other => return Err(PyValueError::new_err(format!("unknown estimator `{other}`"))),
    })
}

#[pyclass(name = "BhResult", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyBhResult {
    k_hat: usize,
    threshold: f64,
    rejected: Vec<usize>,
}

#[pymethods]
impl PyBhResult {
    fn __repr__(&self) -> String {
        format!("BhResult(k_hat={}, threshold={})", self.k_hat, self.threshold)
    }
}

impl From<testing::BhResult> for PyBhResult {
    fn from(r: testing::BhResult) -> Self {
        Self {
            k_hat: r.k_hat,
            threshold: r.threshold,
            rejected: r.rejected,
        }
    }
}

#[pyclass(name = "NodeReport", frozen, get_all, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyNodeReport {
    node_id: u32,
    m: u64,
    r0_hat: f64,
}

#[pymethods]
impl PyNodeReport {
    #[new]
    fn new(node_id: u32, m: u64, r0_hat: f64) -> Self {
        Self { node_id, m, r0_hat }
    }

    fn encode<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &codec::encode_report(&self.inner()))
    }

    #[staticmethod]
    fn decode(frame: &[u8]) -> PyResult<Self> {
        let r = codec::decode_report(frame).map_err(to_py)?;
        Ok(Self::new(r.node_id, r.m, r.r0_hat))
    }

    fn __repr__(&self) -> String {
        format!("NodeReport(node_id={}, m={}, r0_hat={})", self.node_id, self.m, self.r0_hat)
    }
}

impl PyNodeReport {
    fn inner(&self) -> protocol::NodeReport {
        protocol::NodeReport {
            node_id: self.node_id,
            m: self.m,
            r0_hat: self.r0_hat,
        }
    }
}

#[pyclass(name = "CenterBroadcast", frozen, get_all, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyCenterBroadcast {
    round_id: u32,
    beta_star: f64,
}

#[pymethods]
impl PyCenterBroadcast {
    #[new]
    fn new(round_id: u32, beta_star: f64) -> Self {
        Self { round_id, beta_star }
    }

    fn rejects_nothing(&self) -> bool {
        self.inner().rejects_nothing()
    }

    fn encode<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &codec::encode_broadcast(&self.inner()))
    }

    #[staticmethod]
    fn decode(frame: &[u8]) -> PyResult<Self> {
        let b = codec::decode_broadcast(frame).map_err(to_py)?;
        Ok(Self::new(b.round_id, b.beta_star))
    }

    fn __repr__(&self) -> String {
        format!("CenterBroadcast(round_id={}, beta_star={})", self.round_id, self.beta_star)
    }
}

impl PyCenterBroadcast {
    fn inner(&self) -> protocol::CenterBroadcast {
        protocol::CenterBroadcast {
            round_id: self.round_id,
            beta_star: self.beta_star,
        }
    }
}

/// Result of one distributed round.
#[pyclass(name = "RoundResult", frozen, get_all, skip_from_py_object)]
struct PyRoundResult {
    beta_star: f64,
    r0_hat: Vec<f64>,
    alpha_i: Vec<f64>,
    rejected: Vec<Vec<usize>>,
    messages: u64,
    bytes: u64,
}

#[pyclass(name = "MethodResult", frozen, get_all, skip_from_py_object)]
struct PyMethodResult {
    experiment: u8,
    method: String,
    grid_param: String,
    grid_value: f64,
    fdr: f64,
    fdr_se: f64,
    power: f64,
    power_se: f64,
    mean_rejections: f64,
    trials: usize,
    seed: u64,
}

#[pymethods]
impl PyMethodResult {
    fn __repr__(&self) -> String {
        format!(
            "MethodResult({} {}={} fdr={:.4} power={:.4})",
            self.method, self.grid_param, self.grid_value, self.fdr, self.power
        )
    }
}

impl From<&MethodResult> for PyMethodResult {
    fn from(r: &MethodResult) -> Self {
        Self {
            experiment: r.experiment,
            method: r.method.name().to_string(),
            grid_param: r.grid_param.to_string(),
            grid_value: r.grid_value,
            fdr: r.fdr,
            fdr_se: r.fdr_se,
            power: r.power,
            power_se: r.power_se,
            mean_rejections: r.mean_rejections,
            trials: r.trials,
            seed: r.seed,
        }
    }
}

#[pyfunction]
fn bh_procedure(pvalues: Vec<f64>, alpha: f64) -> PyResult<PyBhResult> {
    testing::bh_procedure(&pvalues, alpha).map(Into::into).map_err(to_py)
}

#[pyfunction]
fn bonferroni(pvalues: Vec<f64>, alpha: f64) -> PyResult<Vec<usize>> {
    testing::bonferroni(&pvalues, alpha).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (pvalues, lam = 0.5))]
fn storey_estimate(pvalues: Vec<f64>, lam: f64) -> PyResult<f64> {
    let cfg = StoreyConfig::new(lam).map_err(to_py)?;
    estimators::storey_estimate(&pvalues, &cfg).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (pvalues, l = 0.5))]
fn spacing_estimate(pvalues: Vec<f64>, l: f64) -> PyResult<f64> {
    let cfg = SpacingConfig::new(l).map_err(to_py)?;
    estimators::spacing_estimate(&pvalues, &cfg).map_err(to_py)
}

#[pyfunction]
fn beta(alpha: f64, r0: f64) -> PyResult<f64> {
    oracle::beta(alpha, r0).map_err(to_py)
}

#[pyfunction]
fn calibrate(beta_star: f64, r0_hat: f64) -> PyResult<f64> {
    protocol::calibrate(&protocol::CenterBroadcast { round_id: 0, beta_star }, r0_hat).map_err(to_py)
}

#[pyfunction]
fn aggregate(reports: Vec<PyRef<'_, PyNodeReport>>, alpha: f64) -> PyResult<PyCenterBroadcast> {
    let reports: Vec<protocol::NodeReport> = reports.iter().map(|r| r.inner()).collect();
    let b = protocol::aggregate(&reports, alpha, 1).map_err(to_py)?;
    Ok(PyCenterBroadcast::new(b.round_id, b.beta_star))
}

fn alternative(mu_base: f64, half_width: f64, symmetric: bool) -> PyResult<AlternativeModel> {
    AlternativeModel::new(mu_base, half_width, symmetric).map_err(to_py)
}

/// CDF at `t` of two-sided p-values whose statistics have mean drawn uniformly
/// from `[mu_base - half_width, mu_base + half_width]` (and its mirror when
/// `symmetric`).
#[pyfunction]
#[pyo3(signature = (t, mu_base, half_width = 0.5, symmetric = true))]
fn alt_cdf(t: f64, mu_base: f64, half_width: f64, symmetric: bool) -> PyResult<f64> {
    oracle::alt_cdf(&alternative(mu_base, half_width, symmetric)?, t).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (alpha, r0, mu_base, half_width = 0.5, symmetric = true))]
fn tau_star(alpha: f64, r0: f64, mu_base: f64, half_width: f64, symmetric: bool) -> PyResult<f64> {
    oracle::tau_star(alpha, r0, &alternative(mu_base, half_width, symmetric)?).map_err(to_py)
}

/// Runs one protocol round over the given per-node p-value lists.
#[pyfunction]
#[pyo3(signature = (batches, alpha, estimator = "storey", param = None))]
fn distributed_round(
    py: Python<'_>,
    batches: Vec<Vec<f64>>,
    alpha: f64,
    estimator: &str,
    param: Option<f64>,
) -> PyResult<PyRoundResult> {
    let est = estimator_from(estimator, param)?;
    let mut nodes = batches
        .into_iter()
        .enumerate()
        .map(|(i, p)| NodeState::new(i as u32 + 1, PValueBatch::all_null(p)?, est))
        .collect::<Result<Vec<_>, Error>>()
        .map_err(to_py)?;
    let mut center = CenterState::new(nodes.len(), alpha).map_err(to_py)?;
    let mut transport = InProcessTransport::new(DeliveryOrder::Fifo);
    let results = py
        .detach(|| protocol::run_round(&mut nodes, &mut center, &mut transport))
        .map_err(to_py)?;
    let r0_hat: Vec<f64> = nodes.iter().map(|n| n.r0_hat().unwrap_or(1.0)).collect();
    let reports: Vec<protocol::NodeReport> = nodes
        .iter()
        .zip(&r0_hat)
        .map(|(n, &r)| protocol::NodeReport {
            node_id: n.node_id(),
            m: n.batch().len() as u64,
            r0_hat: r,
        })
        .collect();
    let stats = transport.stats();
    Ok(PyRoundResult {
        beta_star: protocol::aggregate(&reports, alpha, 1).map_err(to_py)?.beta_star,
        r0_hat,
        alpha_i: nodes.iter().map(|n| n.alpha_i().unwrap_or(0.0)).collect(),
        rejected: results.into_iter().map(|r| r.rejected).collect(),
        messages: stats.messages(),
        bytes: stats.bytes(),
    })
}

/// Runs an experiment preset. `settings` overrides use the config-file keys,
/// e.g. `{"trials": "20", "n_grid": "100,1000"}`.
#[pyfunction]
#[pyo3(signature = (experiment, settings = None))]
fn run_experiment(
    py: Python<'_>,
    experiment: u8,
    settings: Option<std::collections::BTreeMap<String, String>>,
) -> PyResult<Vec<PyMethodResult>> {
    let mut cfg = ExperimentConfig::preset(experiment).map_err(to_py)?;
    if let Some(s) = settings {
        cfg.apply_settings(&s).map_err(to_py)?;
    }
    let rows = py.detach(|| harness::run_experiment(&cfg)).map_err(to_py)?;
    Ok(rows.iter().map(Into::into).collect())
}

/// Same as `run_experiment` but returns the CSV text.
#[pyfunction]
#[pyo3(signature = (experiment, settings = None))]
fn experiment_csv(
    py: Python<'_>,
    experiment: u8,
    settings: Option<std::collections::BTreeMap<String, String>>,
) -> PyResult<String> {
    let mut cfg = ExperimentConfig::preset(experiment).map_err(to_py)?;
    if let Some(s) = settings {
        cfg.apply_settings(&s).map_err(to_py)?;
    }
    let rows = py.detach(|| harness::run_experiment(&cfg)).map_err(to_py)?;
    harness::render_csv(&rows).map_err(to_py)
}

#[pymodule]
fn distbh(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBhResult>()?;
    m.add_class::<PyNodeReport>()?;
    m.add_class::<PyCenterBroadcast>()?;
    m.add_class::<PyRoundResult>()?;
    m.add_class::<PyMethodResult>()?;
    m.add_function(wrap_pyfunction!(bh_procedure, m)?)?;
    m.add_function(wrap_pyfunction!(bonferroni, m)?)?;
    m.add_function(wrap_pyfunction!(storey_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(spacing_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(beta, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(alt_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(tau_star, m)?)?;
    m.add_function(wrap_pyfunction!(distributed_round, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(experiment_csv, m)?)?;
    m.add("REPORT_FRAME_LEN", codec::REPORT_FRAME_LEN)?;
    m.add("BROADCAST_FRAME_LEN", codec::BROADCAST_FRAME_LEN)?;
    Ok(())
}
