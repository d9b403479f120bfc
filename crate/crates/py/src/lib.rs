//! Python bindings for the simulator and planner.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use conav_core::belief::{update_belief as core_update, Belief, Reach, SensorModel, Signal, ZoneLayout};
use conav_core::dynamics::{ControlBounds, RobotControl, RobotState};
use conav_core::geom::Vec2;
use conav_core::harness::{self, EpisodeConfig, Method, TrialReport};
use conav_core::safety::{safe_control as core_safe_control, safety_value, SafetyParams};
use conav_core::world::{self, maps};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Scenario", module = "conav", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: world::Scenario,
}

#[pymethods]
impl PyScenario {
    /// Built-in map by name: basic, intersection or hallway.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        maps::load(name).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        world::Scenario::parse(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        world::Scenario::load(path)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn map_id(&self) -> &str {
        &self.inner.map_id
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn robot_start(&self) -> (f64, f64, f64) {
        let s = self.inner.robot_start;
        (s.x, s.y, s.theta)
    }

    #[getter]
    fn human_start(&self) -> (f64, f64) {
        let p = self.inner.human_start.position;
        (p.x, p.y)
    }

    #[getter]
    fn comm_vocab(&self) -> Vec<String> {
        self.inner.comm_vocab.iter().map(|s| s.to_string()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?})", self.inner.map_id)
    }
}

#[pyclass(name = "Report", module = "conav", frozen, get_all)]
struct PyReport {
    scenario: String,
    method: String,
    seed: u64,
    f_priority: Option<f64>,
    outcome: String,
    r_cost_to_goal: f64,
    h_cost_to_goal: f64,
    rns: Option<f64>,
    hns: Option<f64>,
    pi: usize,
    pc: f64,
    steps: usize,
    fallback_cycles: usize,
    sensor_queries: usize,
    safety_violations: usize,
}

impl From<&TrialReport> for PyReport {
    fn from(r: &TrialReport) -> Self {
        Self {
            scenario: r.scenario.clone(),
            method: r.method.to_string(),
            seed: r.seed,
            f_priority: r.f_priority,
            outcome: r.outcome.to_string(),
            r_cost_to_goal: r.r_cost_to_goal,
            h_cost_to_goal: r.h_cost_to_goal,
            rns: r.rns,
            hns: r.hns,
            pi: r.pi,
            pc: r.pc,
            steps: r.steps,
            fallback_cycles: r.fallback_cycles,
            sensor_queries: r.sensor_queries,
            safety_violations: r.safety_violations,
        }
    }
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!(
            "Report({} {} seed={} outcome={} pi={} pc={})",
            self.scenario, self.method, self.seed, self.outcome, self.pi, self.pc
        )
    }
}

#[pyclass(name = "Episode", module = "conav", frozen)]
struct PyEpisode {
    inner: harness::Episode,
}

#[pymethods]
impl PyEpisode {
    #[getter]
    fn report(&self) -> PyReport {
        PyReport::from(&self.inner.report)
    }

    fn log_text(&self) -> String {
        self.inner.log_text()
    }

    /// Executed robot states `(x, y, theta)`, one per step.
    fn robot_path(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .steps
            .iter()
            .map(|s| (s.robot.x, s.robot.y, s.robot.theta))
            .collect()
    }

    /// Executed human positions, one per step.
    fn human_path(&self) -> Vec<(f64, f64)> {
        self.inner
            .steps
            .iter()
            .map(|s| (s.human.position.x, s.human.position.y))
            .collect()
    }

    /// Signal sent in each planning cycle.
    fn signals(&self) -> Vec<String> {
        self.inner.cycles.iter().map(|c| c.signal.to_string()).collect()
    }
}

fn method(baseline: bool) -> Method {
    if baseline {
        Method::Baseline
    } else {
        Method::Full
    }
}

fn check_priority(f: Option<f64>) -> PyResult<()> {
    match f {
        Some(f) if !(0.0..=1.0).contains(&f) => Err(PyValueError::new_err("f_priority must lie in [0, 1]")),
        _ => Ok(()),
    }
}

#[pyfunction]
#[pyo3(signature = (scenario, seed, baseline = false, f_priority = None))]
fn run_episode(
    py: Python<'_>,
    scenario: &PyScenario,
    seed: u64,
    baseline: bool,
    f_priority: Option<f64>,
) -> PyResult<PyEpisode> {
    check_priority(f_priority)?;
    let s = scenario.inner.clone();
    let inner =
        py.detach(move || harness::run_episode(&s, method(baseline), seed, f_priority, &EpisodeConfig::default()));
    Ok(PyEpisode { inner })
}

/// Run every (scenario, method, F, seed) combination in parallel.
#[pyfunction]
#[pyo3(signature = (scenarios, seeds, f_values = None, include_baseline = true))]
fn run_batch(
    py: Python<'_>,
    scenarios: Vec<PyRef<'_, PyScenario>>,
    seeds: Vec<u64>,
    f_values: Option<Vec<f64>>,
    include_baseline: bool,
) -> PyResult<Vec<PyReport>> {
    let sweep: Vec<Option<f64>> = match f_values {
        Some(v) => {
            for f in &v {
                check_priority(Some(*f))?;
            }
            v.into_iter().map(Some).collect()
        }
        None => vec![None],
    };
    let maps: Vec<world::Scenario> = scenarios.iter().map(|s| s.inner.clone()).collect();
    let methods: &[Method] = if include_baseline {
        &[Method::Full, Method::Baseline]
    } else {
        &[Method::Full]
    };
    let trials = harness::trial_grid(&maps, methods, &seeds, &sweep);
    let reports = py.detach(move || harness::run_batch(&trials, &EpisodeConfig::default()));
    Ok(reports.iter().map(PyReport::from).collect())
}

/// Closest control to `nominal` that keeps the barrier condition against `tube_point`.
#[pyfunction]
#[pyo3(signature = (state, nominal, tube_point, epsilon_tube = 0.15, r_h = 0.5, r_r = 0.5, v_max = 1.0, omega_max = 1.5))]
#[allow(clippy::too_many_arguments)]
fn safe_control(
    state: (f64, f64, f64),
    nominal: (f64, f64),
    tube_point: (f64, f64),
    epsilon_tube: f64,
    r_h: f64,
    r_r: f64,
    v_max: f64,
    omega_max: f64,
) -> PyResult<(f64, f64)> {
    let params = SafetyParams::new(epsilon_tube, r_h, r_r);
    params.validate().map_err(value_err)?;
    let s = RobotState::new(state.0, state.1, state.2);
    let a = core_safe_control(
        &s,
        RobotControl::new(nominal.0, nominal.1),
        Vec2::new(tube_point.0, tube_point.1),
        &params,
        &ControlBounds::new(v_max, omega_max),
    )
    .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((a.v, a.omega))
}

/// Barrier value `|p - h|^2 - R^2` of a robot state against a human position.
#[pyfunction]
#[pyo3(signature = (state, human, epsilon_tube = 0.15, r_h = 0.5, r_r = 0.5))]
fn barrier(state: (f64, f64, f64), human: (f64, f64), epsilon_tube: f64, r_h: f64, r_r: f64) -> f64 {
    let s = RobotState::new(state.0, state.1, state.2);
    safety_value(
        &s,
        Vec2::new(human.0, human.1),
        &SafetyParams::new(epsilon_tube, r_h, r_r),
    )
}

/// One belief update over the square zone layout. `reach` holds one bitmask row per
/// zone; the default lets every zone reach every other.
#[pyfunction]
#[pyo3(signature = (prior, signal, vocab, delta = 3.0, reach = None))]
fn update_belief(prior: u64, signal: &str, vocab: Vec<String>, delta: f64, reach: Option<Vec<u64>>) -> PyResult<u64> {
    let layout = ZoneLayout::square(delta);
    let n = layout.len();
    if n > 64 || (n < 64 && prior >> n != 0) {
        return Err(PyValueError::new_err(format!("prior has bits beyond {n} zones")));
    }
    let reach = match reach {
        Some(rows) if rows.len() == n => Reach { rows },
        Some(rows) => {
            return Err(PyValueError::new_err(format!(
                "reach needs {n} rows, got {}",
                rows.len()
            )))
        }
        None => Reach::complete(n),
    };
    let model = SensorModel::perfect(vocab.iter().map(|s| Signal::new(s)).collect());
    let omega = model.obs(&Signal::new(signal)).map_err(value_err)?;
    Ok(core_update(&Belief::from_bits(prior, n), &omega, &layout, &model, &reach).bits)
}

/// Run the oracle suites; returns `(name, passed, detail)` per suite.
#[pyfunction]
#[pyo3(signature = (seed = 1))]
fn verify(py: Python<'_>, seed: u64) -> Vec<(String, bool, String)> {
    py.detach(move || conav_core::verify::run_all(seed))
        .into_iter()
        .map(|r| (r.name.to_string(), r.passed, r.detail))
        .collect()
}

#[pymodule]
fn conav(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyEpisode>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(run_batch, m)?)?;
    m.add_function(wrap_pyfunction!(safe_control, m)?)?;
    m.add_function(wrap_pyfunction!(barrier, m)?)?;
    m.add_function(wrap_pyfunction!(update_belief, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("MAPS", maps::NAMES.to_vec())?;
    Ok(())
}
