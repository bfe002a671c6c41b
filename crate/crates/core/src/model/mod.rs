//! Domain types shared by every stage of the dispatch pipeline.

mod ledger;
mod metrics;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ledger::{LarFraction, LedgerError, Ledgers, WorkerLedger};
pub use metrics::{ar, lar, objective, tar, unfairness, MetricsError, MetricsReport};

/// Seconds since the Unix epoch.
pub type Timestamp = i64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("time period ends before it begins: [{begin}, {end}]")]
    InvertedPeriod { begin: Timestamp, end: Timestamp },
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("availability radius must be positive, got {0}")]
    Radius(f64),
    #[error("money amount must be non-negative, got {0} cents")]
    NegativeMoney(i64),
    #[error("availability of worker {found} attached to worker {expected}")]
    ForeignAvailability { expected: WorkerId, found: WorkerId },
}

/// Closed interval `[begin, end]` of timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimePeriod {
    begin: Timestamp,
    end: Timestamp,
}

impl TimePeriod {
    pub fn new(begin: Timestamp, end: Timestamp) -> Result<Self, ModelError> {
        if begin > end {
            return Err(ModelError::InvertedPeriod { begin, end });
        }
        Ok(Self { begin, end })
    }

    /// Degenerate period containing a single instant.
    pub fn instant(t: Timestamp) -> Self {
        Self { begin: t, end: t }
    }

    pub fn begin(&self) -> Timestamp {
        self.begin
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn len(&self) -> i64 {
        self.end - self.begin
    }

    /// Closed-interval intersection test; touching endpoints overlap.
    pub fn overlaps(&self, other: &TimePeriod) -> bool {
        self.begin <= other.end && other.begin <= self.end
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.begin <= t && t <= self.end
    }
}

/// Latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, ModelError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(ModelError::Latitude(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(ModelError::Longitude(lon));
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Amount of money in integer cents.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_cents(cents: i64) -> Result<Self, ModelError> {
        if cents < 0 {
            return Err(ModelError::NegativeMoney(cents));
        }
        Ok(Money(cents))
    }

    /// Rounds a dollar amount to the nearest cent.
    pub fn from_dollars(dollars: f64) -> Result<Self, ModelError> {
        Self::from_cents((dollars * 100.0).round() as i64)
    }

    pub fn cents(self) -> i64 {
        self.0
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TaskId(pub u64);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct WorkerId(pub u64);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A two-step delivery job: receive at the source, deliver at the destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub source_period: TimePeriod,
    pub source_loc: GeoPoint,
    pub dest_period: TimePeriod,
    pub dest_loc: GeoPoint,
    pub reward: Money,
}

/// A worker's declared willingness to serve inside a disk during a period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Availability {
    pub worker_id: WorkerId,
    pub period: TimePeriod,
    pub center: GeoPoint,
    radius_km: f64,
}

impl Availability {
    pub fn new(
        worker_id: WorkerId,
        period: TimePeriod,
        center: GeoPoint,
        radius_km: f64,
    ) -> Result<Self, ModelError> {
        if !(radius_km > 0.0 && radius_km.is_finite()) {
            return Err(ModelError::Radius(radius_km));
        }
        Ok(Self {
            worker_id,
            period,
            center,
            radius_km,
        })
    }

    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub id: WorkerId,
    availabilities: Vec<Availability>,
    pub capacity: u32,
}

impl Worker {
    pub fn new(
        id: WorkerId,
        availabilities: Vec<Availability>,
        capacity: u32,
    ) -> Result<Self, ModelError> {
        if let Some(a) = availabilities.iter().find(|a| a.worker_id != id) {
            return Err(ModelError::ForeignAvailability {
                expected: id,
                found: a.worker_id,
            });
        }
        Ok(Self {
            id,
            availabilities,
            capacity,
        })
    }

    pub fn availabilities(&self) -> &[Availability] {
        &self.availabilities
    }

    pub fn push_availability(&mut self, a: Availability) -> Result<(), ModelError> {
        if a.worker_id != self.id {
            return Err(ModelError::ForeignAvailability {
                expected: self.id,
                found: a.worker_id,
            });
        }
        self.availabilities.push(a);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_overlap_is_closed() {
        let a = TimePeriod::new(10, 20).unwrap();
        assert!(a.overlaps(&TimePeriod::new(20, 30).unwrap()));
        assert!(a.overlaps(&TimePeriod::instant(10)));
        assert!(!a.overlaps(&TimePeriod::new(21, 30).unwrap()));
        assert!(TimePeriod::new(5, 4).is_err());
    }

    #[test]
    fn geo_bounds() {
        assert!(GeoPoint::new(90.0, -180.0).is_ok());
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 181.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn money_rounds_to_cents() {
        assert_eq!(Money::from_dollars(12.345).unwrap().cents(), 1235);
        assert_eq!(Money::from_cents(1205).unwrap().to_string(), "12.05");
        assert!(Money::from_cents(-1).is_err());
    }

    #[test]
    fn worker_rejects_foreign_availability() {
        let p = TimePeriod::new(0, 1).unwrap();
        let c = GeoPoint::new(0.0, 0.0).unwrap();
        let a = Availability::new(WorkerId(2), p, c, 1.0).unwrap();
        assert!(Worker::new(WorkerId(1), vec![a], 1).is_err());
        assert!(Availability::new(WorkerId(1), p, c, 0.0).is_err());
    }
}
