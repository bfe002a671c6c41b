use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, Utc};

use super::{CheckinRecord, DataError, TripRecord};
use crate::model::{GeoPoint, Money, Timestamp};

const TRIP_COLUMNS: [&str; 7] = [
    "pickup_time",
    "pickup_lat",
    "pickup_lon",
    "dropoff_time",
    "dropoff_lat",
    "dropoff_lon",
    "fare",
];
const CHECKIN_COLUMNS: [&str; 4] = ["user_id", "time", "lat", "lon"];

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for RowError {}

/// Accepts RFC 3339 (`Z` or offset) and naive `YYYY-MM-DD[T ]HH:MM:SS`, read as UTC.
pub fn parse_timestamp(s: &str) -> Result<Timestamp, String> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    Err(format!("bad timestamp {s:?}"))
}

pub fn format_timestamp(t: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp(t, 0)
        .map(|dt| dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| t.to_string())
}

fn column_indices<const N: usize>(
    headers: &csv::StringRecord,
    names: [&'static str; N],
) -> Result<[usize; N], DataError> {
    let mut idx = [0; N];
    for (slot, name) in idx.iter_mut().zip(names) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(DataError::MissingColumn(name))?;
    }
    Ok(idx)
}

fn float(rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64, String> {
    let s = rec.get(i).unwrap_or("").trim();
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("bad {name} {s:?}"))
}

fn point(rec: &csv::StringRecord, lat: usize, lon: usize) -> Result<GeoPoint, String> {
    GeoPoint::new(float(rec, lat, "latitude")?, float(rec, lon, "longitude")?)
        .map_err(|e| e.to_string())
}

fn time(rec: &csv::StringRecord, i: usize) -> Result<Timestamp, String> {
    parse_timestamp(rec.get(i).unwrap_or(""))
}

fn read_rows<T, const N: usize>(
    input: impl Read,
    names: [&'static str; N],
    skip_bad_rows: bool,
    parse: impl Fn(&csv::StringRecord, &[usize; N]) -> Result<T, String>,
) -> Result<(Vec<T>, Vec<RowError>), DataError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let idx = column_indices(reader.headers()?, names)?;
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line() + 1;
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => match parse(&record, &idx) {
                Ok(row) => rows.push(row),
                Err(message) => {
                    let line = record.position().map_or(line, |p| p.line());
                    let err = RowError { line, message };
                    if !skip_bad_rows {
                        return Err(DataError::Row(err));
                    }
                    bad.push(err);
                }
            },
            Err(e) if skip_bad_rows && !matches!(e.kind(), csv::ErrorKind::Io(_)) => {
                bad.push(RowError {
                    line,
                    message: e.to_string(),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((rows, bad))
}

/// Reads `pickup_time,pickup_lat,pickup_lon,dropoff_time,dropoff_lat,dropoff_lon,fare`.
/// With `skip_bad_rows` malformed rows are returned separately instead of
/// aborting the read.
pub fn read_trips(
    input: impl Read,
    skip_bad_rows: bool,
) -> Result<(Vec<TripRecord>, Vec<RowError>), DataError> {
    read_rows(input, TRIP_COLUMNS, skip_bad_rows, |rec, i| {
        let pickup_time = time(rec, i[0])?;
        let dropoff_time = time(rec, i[3])?;
        if dropoff_time < pickup_time {
            return Err("dropoff before pickup".into());
        }
        let fare = float(rec, i[6], "fare")?;
        if fare < 0.0 {
            return Err(format!("negative fare {fare}"));
        }
        Ok(TripRecord {
            pickup_time,
            pickup: point(rec, i[1], i[2])?,
            dropoff_time,
            dropoff: point(rec, i[4], i[5])?,
            fare: Money::from_dollars(fare).map_err(|e| e.to_string())?,
        })
    })
}

/// Reads `user_id,time,lat,lon`.
pub fn read_checkins(
    input: impl Read,
    skip_bad_rows: bool,
) -> Result<(Vec<CheckinRecord>, Vec<RowError>), DataError> {
    read_rows(input, CHECKIN_COLUMNS, skip_bad_rows, |rec, i| {
        let raw = rec.get(i[0]).unwrap_or("").trim();
        let user_id = raw
            .parse::<u64>()
            .map_err(|_| format!("bad user_id {raw:?}"))?;
        Ok(CheckinRecord {
            user_id,
            time: time(rec, i[1])?,
            location: point(rec, i[2], i[3])?,
        })
    })
}

pub fn write_trips(out: impl Write, trips: &[TripRecord]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIP_COLUMNS)?;
    for t in trips {
        w.write_record([
            format_timestamp(t.pickup_time),
            format!("{:.6}", t.pickup.lat()),
            format!("{:.6}", t.pickup.lon()),
            format_timestamp(t.dropoff_time),
            format!("{:.6}", t.dropoff.lat()),
            format!("{:.6}", t.dropoff.lon()),
            t.fare.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_checkins(out: impl Write, checkins: &[CheckinRecord]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CHECKIN_COLUMNS)?;
    for c in checkins {
        w.write_record([
            c.user_id.to_string(),
            format_timestamp(c.time),
            format!("{:.6}", c.location.lat()),
            format!("{:.6}", c.location.lon()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_forms() {
        let z = parse_timestamp("2016-01-01T12:00:00Z").unwrap();
        assert_eq!(parse_timestamp("2016-01-01 12:00:00").unwrap(), z);
        assert_eq!(parse_timestamp("2016-01-01T13:00:00+01:00").unwrap(), z);
        assert_eq!(format_timestamp(z), "2016-01-01T12:00:00Z");
        assert!(parse_timestamp("yesterday").is_err());
    }

    #[test]
    fn bad_row_reports_line() {
        let csv = "pickup_time,pickup_lat,pickup_lon,dropoff_time,dropoff_lat,dropoff_lon,fare\n\
                   2016-01-01T12:00:00Z,40.7,-73.9,2016-01-01T12:10:00Z,40.8,-73.9,10.5\n\
                   2016-01-01T12:00:00Z,40.7,-73.9,2016-01-01T12:10:00Z,40.8,-73.9,-1\n";
        match read_trips(csv.as_bytes(), false) {
            Err(DataError::Row(e)) => assert_eq!(e.line, 3),
            other => panic!("{other:?}"),
        }
        let (rows, bad) = read_trips(csv.as_bytes(), true).unwrap();
        assert_eq!((rows.len(), bad.len()), (1, 1));
    }

    #[test]
    fn missing_column() {
        assert!(matches!(
            read_checkins("user_id,time,lat\n".as_bytes(), false),
            Err(DataError::MissingColumn("lon"))
        ));
    }
}
