use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{
    prepare, prepare_with_stats, CheckinRecord, DataError, DatasetConfig, TripRecord, TripStats,
    Workload,
};
use crate::geo::haversine_km;
use crate::model::{GeoPoint, Money, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Default for BoundingBox {
    /// Roughly lower Manhattan.
    fn default() -> Self {
        Self {
            lat_min: 40.70,
            lat_max: 40.76,
            lon_min: -74.02,
            lon_max: -73.96,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub tasks: usize,
    pub workers: usize,
    /// Mean check-ins per worker; per-worker counts are log-normal.
    pub checkins_per_worker: f64,
    pub bbox: BoundingBox,
    pub start: Timestamp,
    /// Length of the time range pickups and check-ins fall in, seconds.
    pub span: i64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            tasks: 2000,
            workers: 100,
            checkins_per_worker: 20.0,
            bbox: BoundingBox::default(),
            // 2016-01-04T00:00:00Z
            start: 1_451_865_600,
            span: 7 * 24 * 3600,
            seed: 0,
        }
    }
}

const SPEED_KMH: f64 = 20.0;

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn point(rng: &mut impl Rng, b: &BoundingBox) -> GeoPoint {
    let lat = round6(rng.random_range(b.lat_min..=b.lat_max));
    let lon = round6(rng.random_range(b.lon_min..=b.lon_max));
    GeoPoint::new(lat, lon).expect("bounding box inside valid coordinates")
}

/// Raw trip and check-in records, already at file precision so that writing
/// and re-reading them is lossless.
pub fn synth_records(params: &SynthParams) -> (Vec<TripRecord>, Vec<CheckinRecord>) {
    let base = ChaCha8Rng::seed_from_u64(params.seed);
    let span = params.span.max(1);

    let mut rng = base.clone();
    rng.set_stream(1);
    let trips = (0..params.tasks)
        .map(|_| {
            let pickup_time = params.start + rng.random_range(0..span);
            let pickup = point(&mut rng, &params.bbox);
            let dropoff = point(&mut rng, &params.bbox);
            let km = haversine_km(&pickup, &dropoff);
            let ride = (km / SPEED_KMH * 3600.0).round() as i64 + rng.random_range(60..600);
            let fare = Money::from_dollars(2.5 + 1.75 * km + rng.random_range(0.0..2.0))
                .expect("positive fare");
            TripRecord {
                pickup_time,
                pickup,
                dropoff_time: pickup_time + ride,
                dropoff,
                fare,
            }
        })
        .collect();

    let mut rng = base;
    rng.set_stream(2);
    let per_worker = LogNormal::new(params.checkins_per_worker.max(1.0).ln() - 0.5, 1.0)
        .expect("finite parameters");
    let mut checkins = Vec::new();
    for user in 0..params.workers as u64 {
        let n = (per_worker.sample(&mut rng).round() as usize).max(1);
        for _ in 0..n {
            checkins.push(CheckinRecord {
                user_id: user,
                time: params.start + rng.random_range(0..span),
                location: point(&mut rng, &params.bbox),
            });
        }
    }
    (trips, checkins)
}

/// Synthetic records run through the same adaptation as loaded files.
///
/// Without trips, radius statistics come from a reference sample of 1000
/// trips drawn in the same box.
pub fn synth_workload(params: &SynthParams, config: &DatasetConfig) -> Result<Workload, DataError> {
    let (trips, checkins) = synth_records(params);
    if !trips.is_empty() {
        return prepare(&trips, &checkins, config);
    }
    let reference = synth_records(&SynthParams {
        tasks: 1000,
        workers: 0,
        ..*params
    })
    .0;
    prepare_with_stats(&trips, &checkins, TripStats::from_trips(&reference), config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_tasks() {
        let p = SynthParams {
            tasks: 0,
            workers: 3,
            ..SynthParams::default()
        };
        let (trips, checkins) = synth_records(&p);
        assert!(trips.is_empty());
        assert!(checkins.len() >= 3);
    }

    #[test]
    fn records_inside_box() {
        let p = SynthParams::default();
        let (trips, _) = synth_records(&p);
        for t in &trips {
            assert!((p.bbox.lat_min..=p.bbox.lat_max).contains(&t.pickup.lat()));
            assert!(t.dropoff_time > t.pickup_time);
        }
    }
}
