//! Experiment configuration, single runs over seeds, and parameter sweeps.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::Algorithm;
use crate::data::{
    load_workload, synth_workload, CapacityMode, DataError, DatasetConfig, RowError, SynthParams,
    Workload,
};
use crate::geo::MetricKind;
use crate::model::MetricsReport;
use crate::offers::OfferPolicy;
use crate::online::{run_online, EventStream, OnlineError};
use crate::pipeline::{run_offline, PipelineConfig, PipelineError, RunOutcome};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Online(#[from] OnlineError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(
        "mcf on {tasks} tasks exceeds the size guard of {limit}; \
         raise mcf_max_tasks or pick a heuristic allocator"
    )]
    McfTooLarge { tasks: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputPaths {
    pub trips: PathBuf,
    pub checkins: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Epsilon,
    Theta,
    WindowMin,
    Capacity,
    TaskCount,
    RadiusCoefficient,
    Rho,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Theta => "theta",
            SweepAxis::WindowMin => "window_min",
            SweepAxis::Capacity => "capacity",
            SweepAxis::TaskCount => "task_count",
            SweepAxis::RadiusCoefficient => "radius_coefficient",
            SweepAxis::Rho => "rho",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use SweepAxis::*;
        [Epsilon, Theta, WindowMin, Capacity, TaskCount, RadiusCoefficient, Rho]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown sweep axis {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Allocators to compare; empty means the config's allocator.
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: Option<InputPaths>,
    pub synth: Option<SynthParams>,
    pub algorithm: Algorithm,
    pub policy: OfferPolicy,
    pub rho: f64,
    pub base_acceptance: f64,
    /// Online window in minutes, 0 for instant mode; absent runs offline.
    pub window_min: Option<u32>,
    pub dataset: DatasetConfig,
    pub seeds: Vec<u64>,
    pub max_rounds: Option<u32>,
    pub metric: MetricKind,
    pub mcf_max_tasks: usize,
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            input: None,
            synth: None,
            algorithm: p.algorithm,
            policy: p.policy,
            rho: p.rho,
            base_acceptance: p.base_acceptance,
            window_min: None,
            dataset: DatasetConfig::default(),
            seeds: (0..10).collect(),
            max_rounds: None,
            metric: p.metric,
            mcf_max_tasks: 40_000,
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        match (&self.input, &self.synth) {
            (Some(_), Some(_)) => {
                return Err(ExperimentError::Config(
                    "give either input paths or synth params, not both".into(),
                ))
            }
            (None, None) => {
                return Err(ExperimentError::Config(
                    "no input: give input paths or synth params".into(),
                ))
            }
            _ => {}
        }
        if self.seeds.is_empty() {
            return Err(ExperimentError::Config("seed list is empty".into()));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(ExperimentError::Config("sweep has no values".into()));
            }
            if s.axis == SweepAxis::TaskCount && self.synth.is_none() {
                return Err(ExperimentError::Config(
                    "task_count sweeps need synth params".into(),
                ));
            }
        }
        self.dataset.validate()?;
        self.pipeline(0).validate()?;
        Ok(())
    }

    pub fn pipeline(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            policy: self.policy,
            base_acceptance: self.base_acceptance,
            algorithm: self.algorithm,
            rho: self.rho,
            seed,
            max_rounds: self.max_rounds,
            metric: self.metric,
        }
    }

    /// Copy with one sweep axis set to `value`.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self, ExperimentError> {
        let mut c = self.clone();
        let count = |v: f64| -> Result<u64, ExperimentError> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as u64)
            } else {
                Err(ExperimentError::Config(format!(
                    "{} needs a nonnegative integer, got {v}",
                    axis.name()
                )))
            }
        };
        match axis {
            SweepAxis::Epsilon => c.policy.epsilon = value,
            SweepAxis::Theta => c.policy.theta = value,
            SweepAxis::WindowMin => c.window_min = Some(count(value)? as u32),
            SweepAxis::Capacity => c.dataset.capacity_mode = CapacityMode::Fixed(count(value)? as u32),
            SweepAxis::TaskCount => {
                let synth = c.synth.as_mut().ok_or_else(|| {
                    ExperimentError::Config("task_count sweeps need synth params".into())
                })?;
                synth.tasks = count(value)? as usize;
            }
            SweepAxis::RadiusCoefficient => c.dataset.radius_mean_coefficient = value,
            SweepAxis::Rho => c.rho = value,
        }
        Ok(c)
    }

    /// Configuration columns echoed on every result row.
    pub const CONFIG_COLUMNS: [&'static str; 13] = [
        "algo",
        "mode",
        "window_min",
        "offer_mode",
        "epsilon",
        "theta",
        "rho",
        "base_acceptance",
        "delta_t",
        "fixed_delta_t",
        "radius_coefficient",
        "capacity",
        "seed",
    ];

    fn config_values(&self, seed: u64) -> Vec<String> {
        vec![
            self.algorithm.to_string(),
            if self.window_min.is_some() { "online" } else { "offline" }.into(),
            self.window_min.map_or(String::new(), |w| w.to_string()),
            format!("{:?}", self.policy.mode).to_lowercase(),
            self.policy.epsilon.to_string(),
            self.policy.theta.to_string(),
            self.rho.to_string(),
            self.base_acceptance.to_string(),
            self.dataset.delta_t.to_string(),
            self.dataset.fixed_delta_t.to_string(),
            self.dataset.radius_mean_coefficient.to_string(),
            match self.dataset.capacity_mode {
                CapacityMode::Derived => "derived".into(),
                CapacityMode::Fixed(n) => n.to_string(),
            },
            seed.to_string(),
        ]
    }
}

/// Builds the workload for one seed.
pub fn build_workload(
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(Workload, Vec<RowError>), ExperimentError> {
    let dataset = DatasetConfig {
        seed,
        ..config.dataset
    };
    if let Some(synth) = &config.synth {
        let params = SynthParams { seed, ..*synth };
        return Ok((synth_workload(&params, &dataset)?, Vec::new()));
    }
    let paths = config
        .input
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("no input".into()))?;
    let open = |p: &PathBuf| {
        File::open(p).map(BufReader::new).map_err(|source| ExperimentError::Io {
            path: p.clone(),
            source,
        })
    };
    Ok(load_workload(open(&paths.trips)?, open(&paths.checkins)?, &dataset)?)
}

/// Runs the configured pipeline on a prepared workload.
pub fn run_workload(
    config: &ExperimentConfig,
    workload: &Workload,
    seed: u64,
    trace: bool,
) -> Result<RunOutcome, ExperimentError> {
    if config.algorithm == Algorithm::Mcf && workload.tasks.len() > config.mcf_max_tasks {
        return Err(ExperimentError::McfTooLarge {
            tasks: workload.tasks.len(),
            limit: config.mcf_max_tasks,
        });
    }
    let pipeline = config.pipeline(seed);
    Ok(match config.window_min {
        None => run_offline(&workload.tasks, &workload.workers, &pipeline, trace)?,
        Some(w) => {
            let stream = EventStream::from_workload(&workload.tasks, &workload.workers, 0);
            run_online(&stream, &workload.workers, &pipeline, i64::from(w) * 60, trace)?
        }
    })
}

/// One run per seed, in seed-list order.
pub fn run(config: &ExperimentConfig, trace: bool) -> Result<Vec<SeedRun>, ExperimentError> {
    config.validate()?;
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            let (workload, skipped) = build_workload(config, seed)?;
            let outcome = run_workload(config, &workload, seed, trace)?;
            Ok(SeedRun {
                config: config.clone(),
                seed,
                skipped_rows: skipped.len(),
                outcome,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub skipped_rows: usize,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub run: SeedRun,
}

/// Cross product of sweep values, allocators and seeds. Rows come back in
/// that nesting order whatever order the cells finish in.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    config.validate()?;
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("no sweep section".into()))?;
    let algorithms = if spec.algorithms.is_empty() {
        vec![config.algorithm]
    } else {
        spec.algorithms.clone()
    };
    let mut cells = Vec::new();
    for &value in &spec.values {
        for &algorithm in &algorithms {
            let mut cfg = config.with_axis(spec.axis, value)?;
            cfg.algorithm = algorithm;
            cfg.sweep = None;
            cfg.validate()?;
            for &seed in &config.seeds {
                cells.push((value, cfg.clone(), seed));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(value, cfg, seed)| {
            let (workload, skipped) = build_workload(&cfg, seed)?;
            let outcome = run_workload(&cfg, &workload, seed, false)?;
            Ok(SweepRow {
                axis: spec.axis,
                value,
                run: SeedRun {
                    config: cfg,
                    seed,
                    skipped_rows: skipped.len(),
                    outcome,
                },
            })
        })
        .collect()
}

fn header(sweep: bool) -> Vec<&'static str> {
    let mut h = Vec::new();
    if sweep {
        h.extend(["axis", "value"]);
    }
    h.extend(ExperimentConfig::CONFIG_COLUMNS);
    h.extend(MetricsReport::CSV_COLUMNS);
    h
}

fn row(run: &SeedRun) -> Vec<String> {
    let mut r = run.config.config_values(run.seed);
    r.extend(run.outcome.report.csv_values());
    r
}

pub fn write_runs_csv(out: impl Write, runs: &[SeedRun]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(false))?;
    for r in runs {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(out: impl Write, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(true))?;
    for r in rows {
        let mut rec = vec![r.axis.name().to_string(), r.value.to_string()];
        rec.extend(row(&r.run));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Metrics aggregated over seeds.
pub const SUMMARY_METRICS: [&str; 6] = ["tar", "unfairness", "ar", "objective", "avg_k", "avg_wait_rounds"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: String,
    pub value: f64,
    pub algo: Algorithm,
    pub seeds: usize,
    /// `(mean, sample std)` per entry of [`SUMMARY_METRICS`].
    pub stats: Vec<(f64, f64)>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per (value, allocator) cell, in sweep order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut out: Vec<(f64, Algorithm, Vec<&SweepRow>)> = Vec::new();
    for r in rows {
        let algo = r.run.config.algorithm;
        match out.iter_mut().find(|(v, a, _)| *v == r.value && *a == algo) {
            Some((_, _, group)) => group.push(r),
            None => out.push((r.value, algo, vec![r])),
        }
    }
    out.into_iter()
        .map(|(value, algo, group)| SummaryRow {
            axis: group[0].axis.name().to_string(),
            value,
            algo,
            seeds: group.len(),
            stats: SUMMARY_METRICS
                .iter()
                .map(|m| {
                    let xs: Vec<f64> = group
                        .iter()
                        .filter_map(|r| r.run.outcome.report.scalar(m))
                        .collect();
                    mean_std(&xs)
                })
                .collect(),
        })
        .collect()
}

pub fn write_summary_csv(out: impl Write, summary: &[SummaryRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut h = vec!["axis".to_string(), "value".into(), "algo".into(), "seeds".into()];
    for m in SUMMARY_METRICS {
        h.push(format!("{m}_mean"));
        h.push(format!("{m}_std"));
    }
    w.write_record(&h)?;
    for s in summary {
        let mut rec = vec![
            s.axis.clone(),
            s.value.to_string(),
            s.algo.to_string(),
            s.seeds.to_string(),
        ];
        for (m, sd) in &s.stats {
            rec.push(m.to_string());
            rec.push(sd.to_string());
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON view of a run: the echoed configuration next to the report.
pub fn run_json(run: &SeedRun) -> serde_json::Value {
    let cols = ExperimentConfig::CONFIG_COLUMNS;
    let config: serde_json::Map<String, serde_json::Value> = cols
        .iter()
        .zip(run.config.config_values(run.seed))
        .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
        .collect();
    serde_json::json!({
        "config": config,
        "skipped_rows": run.skipped_rows,
        "report": run.outcome.report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            synth: Some(SynthParams {
                tasks: 200,
                workers: 20,
                ..SynthParams::default()
            }),
            seeds: vec![1],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn needs_exactly_one_input() {
        let mut c = small();
        c.synth = None;
        assert!(c.validate().is_err());
        c = small();
        c.input = Some(InputPaths {
            trips: "a".into(),
            checkins: "b".into(),
        });
        assert!(c.validate().is_err());
    }

    #[test]
    fn empty_seed_list_is_an_error() {
        let mut c = small();
        c.seeds.clear();
        assert!(matches!(c.validate(), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::from_toml(
            r#"
            algorithm = "laf"
            seeds = [3, 4]
            window_min = 5
            [synth]
            tasks = 50
            [policy]
            epsilon = 0.9
            theta = 0.2
            mode = "unicast"
            [dataset]
            capacity_mode = { fixed = 8 }
            [sweep]
            axis = "rho"
            values = [0.0, 1.0]
            "#,
        )
        .unwrap();
        assert_eq!(c.algorithm, Algorithm::Laf);
        assert_eq!(c.synth.unwrap().tasks, 50);
        assert_eq!(c.dataset.capacity_mode, CapacityMode::Fixed(8));
        assert_eq!(c.sweep.unwrap().axis, SweepAxis::Rho);
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn mcf_guard() {
        let mut c = small();
        c.algorithm = Algorithm::Mcf;
        c.mcf_max_tasks = 10;
        assert!(matches!(run(&c, false), Err(ExperimentError::McfTooLarge { .. })));
    }

    #[test]
    fn mean_std_small() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
    }
}
