//! Python bindings for `fairdispatch_core`.

use std::collections::HashMap;

use fairdispatch_core::allocation::{self, Algorithm, AssignmentGraph, Candidate, GraphTask};
use fairdispatch_core::data::{self, CapacityMode, DatasetConfig, SynthParams};
use fairdispatch_core::experiment::{self, ExperimentConfig};
use fairdispatch_core::geo::MetricKind;
use fairdispatch_core::model::{self, GeoPoint, Ledgers, Money, TaskId, TimePeriod, WorkerId};
use fairdispatch_core::nomination::{self, TemporalIndex};
use fairdispatch_core::offers::{self, OfferMode, OfferPolicy};
use fairdispatch_core::online::{self, EventStream};
use fairdispatch_core::pipeline::{self, PipelineConfig, RunOutcome};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn metric(name: &str) -> PyResult<MetricKind> {
    match name {
        "haversine" => Ok(MetricKind::Haversine),
        "planar" => Ok(MetricKind::Planar),
        _ => Err(err(format!("unknown metric {name:?}"))),
    }
}

fn period(begin: i64, end: i64) -> PyResult<TimePeriod> {
    TimePeriod::new(begin, end).map_err(err)
}

fn point(lat: f64, lon: f64) -> PyResult<GeoPoint> {
    GeoPoint::new(lat, lon).map_err(err)
}

/// A two-step delivery job. Times are Unix seconds, reward is in dollars.
#[pyclass(module = "fairdispatch", from_py_object)]
#[derive(Clone)]
struct Task(model::Task);

#[pymethods]
impl Task {
    #[new]
    #[pyo3(signature = (id, source_period, source, dest_period, dest, reward))]
    fn new(
        id: u64,
        source_period: (i64, i64),
        source: (f64, f64),
        dest_period: (i64, i64),
        dest: (f64, f64),
        reward: f64,
    ) -> PyResult<Self> {
        Ok(Task(model::Task {
            id: TaskId(id),
            source_period: period(source_period.0, source_period.1)?,
            source_loc: point(source.0, source.1)?,
            dest_period: period(dest_period.0, dest_period.1)?,
            dest_loc: point(dest.0, dest.1)?,
            reward: Money::from_dollars(reward).map_err(err)?,
        }))
    }

    #[getter]
    fn id(&self) -> u64 {
        self.0.id.0
    }

    #[getter]
    fn reward(&self) -> f64 {
        self.0.reward.dollars()
    }

    fn __repr__(&self) -> String {
        format!("Task(id={}, reward={})", self.0.id.0, self.0.reward)
    }
}

/// A disk of radius `radius_km` around `center` during `period`.
#[pyclass(module = "fairdispatch", from_py_object)]
#[derive(Clone)]
struct Availability(model::Availability);

#[pymethods]
impl Availability {
    #[new]
    fn new(worker: u64, period: (i64, i64), center: (f64, f64), radius_km: f64) -> PyResult<Self> {
        model::Availability::new(
            WorkerId(worker),
            self::period(period.0, period.1)?,
            point(center.0, center.1)?,
            radius_km,
        )
        .map(Availability)
        .map_err(err)
    }

    #[getter]
    fn worker(&self) -> u64 {
        self.0.worker_id.0
    }

    #[getter]
    fn radius_km(&self) -> f64 {
        self.0.radius_km()
    }
}

#[pyclass(module = "fairdispatch", from_py_object)]
#[derive(Clone)]
struct Worker(model::Worker);

#[pymethods]
impl Worker {
    #[new]
    fn new(id: u64, availabilities: Vec<Availability>, capacity: u32) -> PyResult<Self> {
        model::Worker::new(
            WorkerId(id),
            availabilities.into_iter().map(|a| a.0).collect(),
            capacity,
        )
        .map(Worker)
        .map_err(err)
    }

    #[getter]
    fn id(&self) -> u64 {
        self.0.id.0
    }

    #[getter]
    fn capacity(&self) -> u32 {
        self.0.capacity
    }

    #[getter]
    fn availabilities(&self) -> Vec<Availability> {
        self.0.availabilities().iter().cloned().map(Availability).collect()
    }
}

/// Tasks and workers ready for a run.
#[pyclass(module = "fairdispatch")]
struct Workload(data::Workload);

#[pymethods]
impl Workload {
    #[new]
    fn new(tasks: Vec<Task>, workers: Vec<Worker>) -> Self {
        Workload(data::Workload {
            tasks: tasks.into_iter().map(|t| t.0).collect(),
            workers: workers.into_iter().map(|w| w.0).collect(),
            stats: data::TripStats { mean_km: 0.0, std_km: 0.0 },
        })
    }

    /// Synthetic workload; `capacity=None` derives capacities from the task count.
    #[staticmethod]
    #[pyo3(signature = (tasks=2000, workers=100, seed=0, capacity=None, span_hours=168))]
    fn synth(tasks: usize, workers: usize, seed: u64, capacity: Option<u32>, span_hours: i64) -> PyResult<Self> {
        let params = SynthParams {
            tasks,
            workers,
            seed,
            span: span_hours * 3600,
            ..SynthParams::default()
        };
        data::synth_workload(&params, &dataset(seed, capacity))
            .map(Workload)
            .map_err(err)
    }

    /// Loads the trip and check-in CSV files.
    #[staticmethod]
    #[pyo3(signature = (trips, checkins, seed=0, capacity=None))]
    fn load(trips: &str, checkins: &str, seed: u64, capacity: Option<u32>) -> PyResult<Self> {
        let open = |p: &str| std::fs::File::open(p).map_err(|e| err(format!("{p}: {e}")));
        let (w, _) = data::load_workload(open(trips)?, open(checkins)?, &dataset(seed, capacity)).map_err(err)?;
        Ok(Workload(w))
    }

    #[getter]
    fn tasks(&self) -> Vec<Task> {
        self.0.tasks.iter().cloned().map(Task).collect()
    }

    #[getter]
    fn workers(&self) -> Vec<Worker> {
        self.0.workers.iter().cloned().map(Worker).collect()
    }

    fn __len__(&self) -> usize {
        self.0.tasks.len()
    }
}

fn dataset(seed: u64, capacity: Option<u32>) -> DatasetConfig {
    DatasetConfig {
        seed,
        capacity_mode: capacity.map_or(CapacityMode::Derived, CapacityMode::Fixed),
        ..DatasetConfig::default()
    }
}

#[allow(clippy::too_many_arguments)]
fn config(
    algorithm: &str,
    mode: &str,
    epsilon: f64,
    theta: f64,
    rho: f64,
    base_acceptance: f64,
    seed: u64,
    metric_name: &str,
) -> PyResult<PipelineConfig> {
    let config = PipelineConfig {
        policy: OfferPolicy {
            epsilon,
            theta,
            mode: mode.parse().map_err(err)?,
        },
        algorithm: algorithm.parse().map_err(err)?,
        rho,
        base_acceptance,
        seed,
        metric: metric(metric_name)?,
        ..PipelineConfig::default()
    };
    config.validate().map_err(err)?;
    Ok(config)
}

fn outcome<'py>(py: Python<'py>, o: &RunOutcome) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("report", to_py(py, &o.report)?)?;
    let assigned: HashMap<u64, u64> = o.assignments.assignments.iter().map(|(t, w)| (t.0, w.0)).collect();
    d.set_item("assignments", assigned)?;
    Ok(d)
}

/// Offline pipeline: nominate, offer and allocate once over the whole workload.
#[pyfunction]
#[pyo3(signature = (workload, algorithm="f_aware", mode="multicast", epsilon=0.8, theta=0.4, rho=1.0, base_acceptance=0.9, seed=0, metric="haversine"))]
#[allow(clippy::too_many_arguments)]
fn run_offline<'py>(
    py: Python<'py>,
    workload: &Workload,
    algorithm: &str,
    mode: &str,
    epsilon: f64,
    theta: f64,
    rho: f64,
    base_acceptance: f64,
    seed: u64,
    metric: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(algorithm, mode, epsilon, theta, rho, base_acceptance, seed, metric)?;
    let o = pipeline::run_offline(&workload.0.tasks, &workload.0.workers, &cfg, false).map_err(err)?;
    outcome(py, &o)
}

/// Windowed online run; `window_min=0` processes each arrival immediately.
#[pyfunction]
#[pyo3(signature = (workload, window_min, algorithm="f_aware", mode="multicast", epsilon=0.8, theta=0.4, rho=1.0, base_acceptance=0.9, seed=0, metric="haversine"))]
#[allow(clippy::too_many_arguments)]
fn run_online<'py>(
    py: Python<'py>,
    workload: &Workload,
    window_min: i64,
    algorithm: &str,
    mode: &str,
    epsilon: f64,
    theta: f64,
    rho: f64,
    base_acceptance: f64,
    seed: u64,
    metric: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(algorithm, mode, epsilon, theta, rho, base_acceptance, seed, metric)?;
    let stream = EventStream::from_workload(&workload.0.tasks, &workload.0.workers, 0);
    let o = online::run_online(&stream, &workload.0.workers, &cfg, window_min * 60, false).map_err(err)?;
    outcome(py, &o)
}

/// Sorted nominees of `task` as `(worker, alpha, beta, acceptance_prob)`.
#[pyfunction]
#[pyo3(signature = (task, workers, base_acceptance=0.9, metric="haversine"))]
fn nominees(task: &Task, workers: Vec<Worker>, base_acceptance: f64, metric: &str) -> PyResult<Vec<(u64, f64, f64, f64)>> {
    let workers: Vec<model::Worker> = workers.into_iter().map(|w| w.0).collect();
    let index = TemporalIndex::build(&workers);
    let list = nomination::nominee_list(&task.0, &workers, &index, &self::metric(metric)?, base_acceptance)
        .map_err(err)?;
    Ok(list
        .into_iter()
        .map(|n| (n.worker_id.0, n.alpha, n.beta, n.acceptance_prob))
        .collect())
}

/// Allocates over an explicit graph. `tasks` holds `(task_id, reward_cents,
/// [(worker_id, beta_km), ...])` with candidates in acceptance order;
/// `capacities` maps worker ids to capacities.
#[pyfunction]
#[pyo3(signature = (algorithm, tasks, capacities, seed=0))]
fn allocate(
    algorithm: &str,
    tasks: Vec<(u64, i64, Vec<(u64, f64)>)>,
    capacities: HashMap<u64, u32>,
    seed: u64,
) -> PyResult<HashMap<u64, Option<u64>>> {
    let algorithm: Algorithm = algorithm.parse().map_err(err)?;
    let mut ids: Vec<u64> = capacities.keys().copied().collect();
    ids.sort_unstable();
    let mut ledgers = Ledgers::new(ids.iter().map(|w| (WorkerId(*w), capacities[w])));
    let mut graph = Vec::with_capacity(tasks.len());
    for (id, reward, cands) in tasks {
        let reward = Money::from_cents(reward).map_err(err)?;
        for &(w, _) in &cands {
            ledgers.record_acceptance(WorkerId(w), TaskId(id), reward).map_err(err)?;
        }
        graph.push(GraphTask {
            id: TaskId(id),
            reward,
            alpha: 0.0,
            candidates: cands
                .into_iter()
                .map(|(w, beta)| Candidate { worker: WorkerId(w), beta })
                .collect(),
        });
    }
    let graph = AssignmentGraph::new(graph);
    let result = allocation::allocate(algorithm, &graph, &mut ledgers, seed).map_err(err)?;
    Ok(graph
        .tasks
        .iter()
        .map(|t| (t.id.0, result.assignments.get(&t.id).map(|w| w.0)))
        .collect())
}

/// Runs a TOML experiment config and returns one dict per seed.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let cfg = ExperimentConfig::from_toml(config_toml).map_err(err)?;
    let runs = py.detach(|| experiment::run(&cfg, false)).map_err(err)?;
    runs.iter().map(|r| to_py(py, &experiment::run_json(r))).collect()
}

#[pyfunction]
fn tar(allocated: usize, total: usize) -> PyResult<f64> {
    model::tar(allocated, total).map_err(err)
}

#[pyfunction]
fn ar(allocated: usize, accepted: usize) -> f64 {
    model::ar(allocated, accepted)
}

#[pyfunction]
fn unfairness(lars: Vec<f64>) -> PyResult<f64> {
    model::unfairness(&lars).map_err(err)
}

#[pyfunction]
fn objective(tar: f64, unfairness: f64, rho: f64) -> f64 {
    model::objective(tar, unfairness, rho)
}

#[pyfunction]
#[pyo3(signature = (alpha, beta, base=0.9))]
fn acceptance_probability(alpha: f64, beta: f64, base: f64) -> PyResult<f64> {
    nomination::acceptance_probability(alpha, beta, base).map_err(err)
}

#[pyfunction]
fn response_probability(k: usize, probs: Vec<f64>) -> PyResult<f64> {
    offers::response_probability(k, &probs).map_err(err)
}

#[pyfunction]
fn expected_ar_lower_bound(k: usize, probs: Vec<f64>) -> PyResult<f64> {
    offers::expected_ar_lower_bound(k, &probs).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (probs, epsilon=0.8, theta=0.4, mode="multicast"))]
fn select_k(probs: Vec<f64>, epsilon: f64, theta: f64, mode: &str) -> PyResult<usize> {
    let mode: OfferMode = mode.parse().map_err(err)?;
    offers::select_k(&probs, &OfferPolicy { epsilon, theta, mode }).map_err(err)
}

#[pymodule]
fn fairdispatch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Task>()?;
    m.add_class::<Availability>()?;
    m.add_class::<Worker>()?;
    m.add_class::<Workload>()?;
    m.add_function(wrap_pyfunction!(run_offline, m)?)?;
    m.add_function(wrap_pyfunction!(run_online, m)?)?;
    m.add_function(wrap_pyfunction!(nominees, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(tar, m)?)?;
    m.add_function(wrap_pyfunction!(ar, m)?)?;
    m.add_function(wrap_pyfunction!(unfairness, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(acceptance_probability, m)?)?;
    m.add_function(wrap_pyfunction!(response_probability, m)?)?;
    m.add_function(wrap_pyfunction!(expected_ar_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(select_k, m)?)?;
    Ok(())
}
