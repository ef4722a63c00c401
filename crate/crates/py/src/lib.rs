//! Python bindings: chain and emission models, the three decoders, score
//! synthesis, calibration and switch-detection scoring. Matrices cross the
//! boundary as lists of rows.

use aad_hmm::experiment::{EmissionSpec, SimulationSettings};
use aad_hmm::{self as core, Decoder, LogEmissionSeries, ScoreSeries};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn value_error(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn log_emissions(rows: &[Vec<f64>]) -> PyResult<LogEmissionSeries> {
    LogEmissionSeries::from_rows(rows).map_err(value_error)
}

fn to_rows(flat: &[f64], n: usize) -> Vec<Vec<f64>> {
    flat.chunks(n).map(<[f64]>::to_vec).collect()
}

fn parse_mode(mode: &str) -> PyResult<Decoder> {
    mode.parse::<Decoder>()
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Symmetric attention-switch chain with a shared switch probability.
#[pyclass(name = "TransitionModel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTransitionModel(core::TransitionModel);

#[pymethods]
impl PyTransitionModel {
    #[new]
    fn new(n_states: usize, p_switch: f64) -> PyResult<Self> {
        core::TransitionModel::new(n_states, p_switch)
            .map(Self)
            .map_err(value_error)
    }

    /// Per-window switch probability from a per-second rate.
    #[staticmethod]
    fn from_rate(n_states: usize, rate_per_second: f64, window_length: f64) -> PyResult<Self> {
        core::TransitionModel::from_rate(n_states, rate_per_second, window_length)
            .map(Self)
            .map_err(value_error)
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.0.n_states()
    }

    #[getter]
    fn p_switch(&self) -> f64 {
        self.0.p_switch()
    }

    fn log_transition(&self, from_state: usize, to_state: usize) -> PyResult<f64> {
        self.0.log_transition(from_state, to_state).map_err(value_error)
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        self.0.matrix()
    }

    fn __repr__(&self) -> String {
        format!(
            "TransitionModel(n_states={}, p_switch={})",
            self.0.n_states(),
            self.0.p_switch()
        )
    }
}

/// Two-Gaussian model of Fisher-transformed correlation scores.
#[pyclass(name = "EmissionModel", frozen, from_py_object)]
#[derive(Clone)]
struct PyEmissionModel(core::EmissionModel);

#[pymethods]
impl PyEmissionModel {
    #[new]
    fn new(mu_attended: f64, mu_unattended: f64, sigma: f64) -> PyResult<Self> {
        core::EmissionModel::new(mu_attended, mu_unattended, sigma)
            .map(Self)
            .map_err(value_error)
    }

    #[staticmethod]
    fn from_d_prime(d_prime: f64) -> PyResult<Self> {
        core::EmissionModel::from_d_prime(d_prime)
            .map(Self)
            .map_err(value_error)
    }

    #[getter]
    fn mu_attended(&self) -> f64 {
        self.0.mu_attended()
    }

    #[getter]
    fn mu_unattended(&self) -> f64 {
        self.0.mu_unattended()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma()
    }

    #[getter]
    fn d_prime(&self) -> f64 {
        self.0.d_prime()
    }

    fn log_emission(&self, scores: Vec<f64>, state: usize) -> PyResult<f64> {
        self.0.log_emission(&scores, state).map_err(value_error)
    }

    /// ln b_j(t) for a list of score rows.
    #[pyo3(signature = (scores, window_length = 1.0))]
    fn log_emission_series(&self, scores: Vec<Vec<f64>>, window_length: f64) -> PyResult<Vec<Vec<f64>>> {
        let series = ScoreSeries::from_rows(&scores, window_length).map_err(value_error)?;
        let lb = self.0.log_emission_series(&series).map_err(value_error)?;
        Ok(to_rows(lb.as_flat(), lb.n_states()))
    }

    fn __repr__(&self) -> String {
        format!(
            "EmissionModel(mu_attended={}, mu_unattended={}, sigma={})",
            self.0.mu_attended(),
            self.0.mu_unattended(),
            self.0.sigma()
        )
    }
}

/// Causal posteriors, one row per window.
#[pyfunction]
fn forward(transition: &PyTransitionModel, log_b: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let post = core::forward(&transition.0, &log_emissions(&log_b)?).map_err(value_error)?;
    Ok(to_rows(post.as_flat(), post.n_states()))
}

/// Non-causal posteriors, one row per window.
#[pyfunction]
fn forward_backward(transition: &PyTransitionModel, log_b: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let post = core::forward_backward(&transition.0, &log_emissions(&log_b)?).map_err(value_error)?;
    Ok(to_rows(post.as_flat(), post.n_states()))
}

/// Most probable path and its joint log-probability.
#[pyfunction]
fn viterbi(transition: &PyTransitionModel, log_b: Vec<Vec<f64>>) -> PyResult<(Vec<usize>, f64)> {
    let path = core::viterbi(&transition.0, &log_emissions(&log_b)?).map_err(value_error)?;
    Ok((path.states, path.log_joint))
}

#[pyfunction]
fn log_sum_exp(values: Vec<f64>) -> PyResult<f64> {
    core::log_sum_exp(&values).map_err(value_error)
}

#[pyfunction]
fn fisher_transform(x: f64) -> PyResult<f64> {
    core::fisher_transform(x).map_err(value_error)
}

#[pyfunction]
fn calibrate_dprime(target_accuracy: f64, n_states: usize) -> PyResult<PyEmissionModel> {
    core::calibrate_dprime(target_accuracy, n_states)
        .map(PyEmissionModel)
        .map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (scores, attended, window_length = 1.0))]
fn estimate_emission(scores: Vec<Vec<f64>>, attended: Vec<usize>, window_length: f64) -> PyResult<PyEmissionModel> {
    let series = ScoreSeries::from_rows(&scores, window_length).map_err(value_error)?;
    core::estimate_emission(&series, &attended)
        .map(PyEmissionModel)
        .map_err(value_error)
}

/// Synthetic trial: returns `(scores, true_states)`. Without `emission` the
/// scores are calibrated to `target_accuracy` per window.
#[pyfunction]
#[pyo3(signature = (
    n_states = 2,
    trial_length = 600.0,
    window_length = 1.0,
    switch_interval = 300.0,
    emission = None,
    target_accuracy = 0.582,
    alpha_shift = 0.0,
    seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    n_states: usize,
    trial_length: f64,
    window_length: f64,
    switch_interval: f64,
    emission: Option<PyEmissionModel>,
    target_accuracy: f64,
    alpha_shift: f64,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let settings = SimulationSettings {
        n_states,
        trial_length,
        window_length,
        switch_interval,
        emission: match emission {
            Some(m) => EmissionSpec::Model(m.0),
            None => EmissionSpec::TargetAccuracy { target_accuracy },
        },
        alpha_shift,
        seed,
    };
    let config = settings.resolve().map_err(value_error)?;
    let truth = core::generate_trajectory(&config).map_err(value_error)?;
    let scores = core::sample_scores(&truth, &config).map_err(value_error)?;
    Ok((to_rows(scores.as_flat(), n_states), truth.states))
}

/// Steady-state accuracy and switch detections as a dict.
#[pyfunction]
#[pyo3(signature = (decisions, truth, window_length = 1.0, mode = "non-causal"))]
fn evaluate<'py>(
    py: Python<'py>,
    decisions: Vec<usize>,
    truth: Vec<usize>,
    window_length: f64,
    mode: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let truth = core::AttentionTrajectory::new(truth, window_length).map_err(value_error)?;
    let report = core::detect_switches(&decisions, &truth, parse_mode(mode)?).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("mode", report.mode.to_string())?;
    out.set_item("accuracy", report.accuracy)?;
    out.set_item("correct_windows", report.correct_windows)?;
    out.set_item("scored_windows", report.scored_windows)?;
    out.set_item("mean_abs_detection_time", report.mean_abs_detection_time)?;
    let switches = PyList::empty(py);
    for d in &report.switch_detections {
        let item = PyDict::new(py);
        item.set_item("true_time", d.true_time)?;
        item.set_item("detected_time", d.detected_time)?;
        item.set_item("delay", d.delay)?;
        item.set_item("missed", d.missed)?;
        item.set_item("to_state", d.to_state)?;
        switches.append(item)?;
    }
    out.set_item("switch_detections", switches)?;
    Ok(out)
}

#[pymodule]
fn aad_hmm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTransitionModel>()?;
    m.add_class::<PyEmissionModel>()?;
    m.add_function(wrap_pyfunction!(forward, m)?)?;
    m.add_function(wrap_pyfunction!(forward_backward, m)?)?;
    m.add_function(wrap_pyfunction!(viterbi, m)?)?;
    m.add_function(wrap_pyfunction!(log_sum_exp, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_transform, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_dprime, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_emission, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
