//! Distance functions over [`GeoPoint`]s.

use serde::{Deserialize, Serialize};

use crate::model::GeoPoint;

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// A metric distance in kilometres (or abstract units for test metrics).
pub trait Metric: Sync {
    fn distance(&self, a: &GeoPoint, b: &GeoPoint) -> f64;
}

/// Great-circle distance on a spherical earth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Haversine;

impl Metric for Haversine {
    fn distance(&self, a: &GeoPoint, b: &GeoPoint) -> f64 {
        haversine_km(a, b)
    }
}

/// Euclidean distance treating (lat, lon) as plane coordinates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Planar;

impl Metric for Planar {
    fn distance(&self, a: &GeoPoint, b: &GeoPoint) -> f64 {
        (a.lat() - b.lat()).hypot(a.lon() - b.lon())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    #[default]
    Haversine,
    Planar,
}

impl Metric for MetricKind {
    fn distance(&self, a: &GeoPoint, b: &GeoPoint) -> f64 {
        match self {
            MetricKind::Haversine => Haversine.distance(a, b),
            MetricKind::Planar => Planar.distance(a, b),
        }
    }
}

pub fn haversine_km(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat().to_radians(), b.lat().to_radians());
    let dlat = (lat2 - lat1) / 2.0;
    let dlon = (b.lon() - a.lon()).to_radians() / 2.0;
    let h = dlat.sin().powi(2) + lat1.cos() * lat2.cos() * dlon.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}
