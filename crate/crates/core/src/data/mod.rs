//! Trip and check-in ingestion, the period/radius/capacity adaptation, and
//! synthetic workloads.

mod io;
mod synth;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::haversine_km;
use crate::model::{
    Availability, GeoPoint, ModelError, Money, Task, TaskId, TimePeriod, Timestamp, Worker, WorkerId,
};

pub use io::{
    format_timestamp, parse_timestamp, read_checkins, read_trips, write_checkins, write_trips,
    RowError,
};
pub use synth::{synth_records, synth_workload, BoundingBox, SynthParams};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}")]
    Row(RowError),
    #[error("missing column {0:?}")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("delta_t must be positive, got {0} s")]
    DeltaT(i64),
    #[error("radius coefficient must be positive, got {0}")]
    RadiusCoefficient(f64),
    #[error("trip distances have mean {0} km; cannot sample radii")]
    TripStats(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    /// Normal around tasks per worker.
    Derived,
    Fixed(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Mean period length in seconds.
    pub delta_t: i64,
    /// Use `delta_t` for every record instead of sampling.
    pub fixed_delta_t: bool,
    pub radius_mean_coefficient: f64,
    pub capacity_mode: CapacityMode,
    pub seed: u64,
    pub skip_bad_rows: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            delta_t: 2 * 3600,
            fixed_delta_t: false,
            radius_mean_coefficient: 1.0,
            capacity_mode: CapacityMode::Derived,
            seed: 0,
            skip_bad_rows: false,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.delta_t <= 0 {
            return Err(DataError::DeltaT(self.delta_t));
        }
        if !(self.radius_mean_coefficient > 0.0 && self.radius_mean_coefficient.is_finite()) {
            return Err(DataError::RadiusCoefficient(self.radius_mean_coefficient));
        }
        Ok(())
    }

    fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }
}

// One random stream per purpose, so changing one recipe leaves the others alone.
#[derive(Clone, Copy)]
enum Stream {
    TaskDeltaT = 1,
    AvailabilityDeltaT = 2,
    Radius = 3,
    Capacity = 4,
}

/// `[p, p + delta_t]`.
pub fn widen(p: Timestamp, delta_t: i64) -> Result<TimePeriod, DataError> {
    if delta_t <= 0 {
        return Err(DataError::DeltaT(delta_t));
    }
    Ok(TimePeriod::new(p, p + delta_t)?)
}

/// One taxi-trip row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripRecord {
    pub pickup_time: Timestamp,
    pub pickup: GeoPoint,
    pub dropoff_time: Timestamp,
    pub dropoff: GeoPoint,
    pub fare: Money,
}

/// One check-in row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckinRecord {
    pub user_id: u64,
    pub time: Timestamp,
    pub location: GeoPoint,
}

/// Mean and population standard deviation of trip distances in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripStats {
    pub mean_km: f64,
    pub std_km: f64,
}

impl TripStats {
    pub fn from_trips(trips: &[TripRecord]) -> Self {
        if trips.is_empty() {
            return Self {
                mean_km: 0.0,
                std_km: 0.0,
            };
        }
        let d: Vec<f64> = trips.iter().map(|t| haversine_km(&t.pickup, &t.dropoff)).collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean_km: mean,
            std_km: var.sqrt(),
        }
    }
}

struct DeltaT {
    mean: i64,
    normal: Option<Normal<f64>>,
}

impl DeltaT {
    fn new(config: &DatasetConfig) -> Self {
        let mean = config.delta_t;
        let normal = (!config.fixed_delta_t)
            .then(|| Normal::new(mean as f64, mean as f64 / 4.0).expect("positive std"));
        Self { mean, normal }
    }

    fn sample(&self, rng: &mut impl Rng) -> i64 {
        match &self.normal {
            None => self.mean,
            Some(n) => (n.sample(rng).round() as i64).max(1),
        }
    }
}

/// Tasks from trip records, ids assigned in record order.
pub fn build_tasks(trips: &[TripRecord], config: &DatasetConfig) -> Result<Vec<Task>, DataError> {
    config.validate()?;
    let delta = DeltaT::new(config);
    let mut rng = config.rng(Stream::TaskDeltaT);
    trips
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let d = delta.sample(&mut rng);
            Ok(Task {
                id: TaskId(i as u64),
                source_period: widen(t.pickup_time, d)?,
                source_loc: t.pickup,
                dest_period: widen(t.dropoff_time, d)?,
                dest_loc: t.dropoff,
                reward: t.fare,
            })
        })
        .collect()
}

/// Availabilities from check-ins in record order. Radii are drawn from
/// `Normal(mean * coefficient, std)` of the trip distances, redrawn until
/// positive.
pub fn build_availabilities(
    checkins: &[CheckinRecord],
    stats: &TripStats,
    config: &DatasetConfig,
) -> Result<Vec<Availability>, DataError> {
    config.validate()?;
    if checkins.is_empty() {
        return Ok(Vec::new());
    }
    if stats.mean_km.is_nan() || stats.mean_km <= 0.0 {
        return Err(DataError::TripStats(stats.mean_km));
    }
    let radius = Normal::new(stats.mean_km * config.radius_mean_coefficient, stats.std_km)
        .map_err(|_| DataError::TripStats(stats.mean_km))?;
    let delta = DeltaT::new(config);
    let mut delta_rng = config.rng(Stream::AvailabilityDeltaT);
    let mut radius_rng = config.rng(Stream::Radius);
    checkins
        .iter()
        .map(|c| {
            let d = delta.sample(&mut delta_rng);
            let r = loop {
                let r = radius.sample(&mut radius_rng);
                if r > 0.0 {
                    break r;
                }
            };
            Ok(Availability::new(WorkerId(c.user_id), widen(c.time, d)?, c.location, r)?)
        })
        .collect()
}

/// One worker per distinct user id, ordered by id, capacity 0.
pub fn group_workers(availabilities: Vec<Availability>) -> Vec<Worker> {
    let mut by_user: BTreeMap<WorkerId, Vec<Availability>> = BTreeMap::new();
    for a in availabilities {
        by_user.entry(a.worker_id).or_default().push(a);
    }
    by_user
        .into_iter()
        .map(|(id, avails)| Worker::new(id, avails, 0).expect("grouped by worker id"))
        .collect()
}

/// `round(Normal(total_tasks / |workers|, mean / 4))` clamped at 0, or a fixed value.
pub fn assign_capacities(
    workers: &mut [Worker],
    total_tasks: usize,
    mode: CapacityMode,
    rng: &mut impl Rng,
) {
    match mode {
        CapacityMode::Fixed(n) => workers.iter_mut().for_each(|w| w.capacity = n),
        CapacityMode::Derived => {
            if workers.is_empty() {
                return;
            }
            let mean = total_tasks as f64 / workers.len() as f64;
            let normal = Normal::new(mean, mean / 4.0).expect("finite std");
            for w in workers {
                w.capacity = normal.sample(rng).round().max(0.0) as u32;
            }
        }
    }
}

/// Tasks and workers ready for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub tasks: Vec<Task>,
    pub workers: Vec<Worker>,
    pub stats: TripStats,
}

/// Applies the whole adaptation to raw records: widening, radii, worker
/// grouping and capacities.
pub fn prepare(
    trips: &[TripRecord],
    checkins: &[CheckinRecord],
    config: &DatasetConfig,
) -> Result<Workload, DataError> {
    prepare_with_stats(trips, checkins, TripStats::from_trips(trips), config)
}

/// Like [`prepare`], with radius statistics supplied by the caller.
pub fn prepare_with_stats(
    trips: &[TripRecord],
    checkins: &[CheckinRecord],
    stats: TripStats,
    config: &DatasetConfig,
) -> Result<Workload, DataError> {
    let tasks = build_tasks(trips, config)?;
    let mut workers = group_workers(build_availabilities(checkins, &stats, config)?);
    assign_capacities(
        &mut workers,
        tasks.len(),
        config.capacity_mode,
        &mut config.rng(Stream::Capacity),
    );
    Ok(Workload {
        tasks,
        workers,
        stats,
    })
}

/// Reads and prepares a trip file and a check-in file.
pub fn load_workload(
    trips: impl std::io::Read,
    checkins: impl std::io::Read,
    config: &DatasetConfig,
) -> Result<(Workload, Vec<RowError>), DataError> {
    let (trips, mut bad) = read_trips(trips, config.skip_bad_rows)?;
    let (checkins, bad_checkins) = read_checkins(checkins, config.skip_bad_rows)?;
    bad.extend(bad_checkins);
    Ok((prepare(&trips, &checkins, config)?, bad))
}

/// Reads a trip file into tasks.
pub fn load_tasks(
    csv: impl std::io::Read,
    config: &DatasetConfig,
) -> Result<(Vec<Task>, TripStats), DataError> {
    let (trips, _) = read_trips(csv, config.skip_bad_rows)?;
    Ok((build_tasks(&trips, config)?, TripStats::from_trips(&trips)))
}

/// Reads a check-in file into availabilities.
pub fn load_availabilities(
    csv: impl std::io::Read,
    stats: &TripStats,
    config: &DatasetConfig,
) -> Result<Vec<Availability>, DataError> {
    let (checkins, _) = read_checkins(csv, config.skip_bad_rows)?;
    build_availabilities(&checkins, stats, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkin(user: u64, time: i64) -> CheckinRecord {
        CheckinRecord {
            user_id: user,
            time,
            location: GeoPoint::new(40.75, -73.98).unwrap(),
        }
    }

    #[test]
    fn widen_rejects_non_positive() {
        assert!(widen(0, 0).is_err());
        assert_eq!(widen(5, 1).unwrap(), TimePeriod::new(5, 6).unwrap());
    }

    #[test]
    fn groups_by_user() {
        let stats = TripStats {
            mean_km: 2.0,
            std_km: 1.0,
        };
        let cfg = DatasetConfig::default();
        let a = build_availabilities(&[checkin(3, 0), checkin(1, 5), checkin(3, 9)], &stats, &cfg)
            .unwrap();
        let workers = group_workers(a);
        assert_eq!(workers.len(), 2);
        assert_eq!(workers[0].id, WorkerId(1));
        assert_eq!(workers[1].availabilities().len(), 2);
    }

    #[test]
    fn fixed_delta_t_is_exact() {
        let stats = TripStats {
            mean_km: 2.0,
            std_km: 1.0,
        };
        let cfg = DatasetConfig {
            fixed_delta_t: true,
            delta_t: 600,
            ..DatasetConfig::default()
        };
        let a = build_availabilities(&[checkin(1, 100)], &stats, &cfg).unwrap();
        assert_eq!(a[0].period, TimePeriod::new(100, 700).unwrap());
    }

    #[test]
    fn zero_trip_mean_is_an_error() {
        let stats = TripStats {
            mean_km: 0.0,
            std_km: 0.0,
        };
        assert!(matches!(
            build_availabilities(&[checkin(1, 0)], &stats, &DatasetConfig::default()),
            Err(DataError::TripStats(_))
        ));
    }
}
