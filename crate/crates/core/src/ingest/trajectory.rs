use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{read_to_string, IngestError};
use crate::model::{Trajectory, TrajectoryPoint};

/// Accuracy assumed when a file carries no accuracy column.
pub const DEFAULT_ACCURACY_M: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    Csv,
    JsonLines,
}

/// Accepts RFC 3339, `YYYY-MM-DD HH:MM:SS[.fff][ Z]`, or integer epoch seconds.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    let bare = s.trim_end_matches("UTC").trim_end_matches('Z').trim_end();
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(bare, fmt) {
            return Some(t.and_utc());
        }
    }
    s.parse::<i64>().ok().and_then(|secs| DateTime::from_timestamp(secs, 0))
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub fn parse_trajectory(path: impl AsRef<Path>, default_accuracy: f64) -> Result<Trajectory, IngestError> {
    parse_trajectory_str(&read_to_string(path.as_ref())?, default_accuracy)
}

pub fn parse_trajectory_str(text: &str, default_accuracy: f64) -> Result<Trajectory, IngestError> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty()).ok_or(IngestError::EmptyFile)?;
    let points = if first.starts_with('{') {
        parse_jsonl(text, default_accuracy)?
    } else {
        parse_csv(text, default_accuracy)?
    };
    if points.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(Trajectory::from_points(points))
}

struct Columns {
    timestamp: usize,
    lat: usize,
    lng: usize,
    accuracy: Option<usize>,
}

fn parse_csv(text: &str, default_accuracy: f64) -> Result<Vec<TrajectoryPoint>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let mut cols: Option<Columns> = None;
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| IngestError::MalformedRecord {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        let malformed = |reason: String| IngestError::MalformedRecord { line, reason };

        if cols.is_none() {
            if rec.get(0).is_some_and(|f| f.eq_ignore_ascii_case("timestamp")) {
                let find = |name: &str| rec.iter().position(|f| f.eq_ignore_ascii_case(name));
                cols = Some(Columns {
                    timestamp: 0,
                    lat: find("lat").ok_or_else(|| malformed("header lacks 'lat'".into()))?,
                    lng: find("lng").ok_or_else(|| malformed("header lacks 'lng'".into()))?,
                    accuracy: find("accuracy"),
                });
                continue;
            }
            cols = Some(Columns { timestamp: 0, lat: 1, lng: 2, accuracy: Some(3) });
        }
        let c = cols.as_ref().expect("columns resolved above");

        let field = |idx: usize, name: &str| {
            rec.get(idx).filter(|s| !s.is_empty()).ok_or_else(|| malformed(format!("missing {name}")))
        };
        let ts = field(c.timestamp, "timestamp")?;
        let timestamp = parse_timestamp(ts).ok_or_else(|| malformed(format!("bad timestamp '{ts}'")))?;
        let num = |idx: usize, name: &str| -> Result<f64, IngestError> {
            let raw = field(idx, name)?;
            raw.parse::<f64>().map_err(|_| malformed(format!("bad {name} '{raw}'")))
        };
        let lat = num(c.lat, "lat")?;
        let lng = num(c.lng, "lng")?;
        let accuracy = match c.accuracy.and_then(|idx| rec.get(idx)).filter(|s| !s.is_empty()) {
            Some(_) => num(c.accuracy.unwrap(), "accuracy")?,
            None => default_accuracy,
        };
        let p = TrajectoryPoint::new(timestamp, lat, lng, accuracy).map_err(|e| malformed(e.to_string()))?;
        points.push(p);
    }
    Ok(points)
}

#[derive(Serialize, Deserialize)]
struct JsonPoint {
    timestamp: String,
    lat: f64,
    lng: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
}

fn parse_jsonl(text: &str, default_accuracy: f64) -> Result<Vec<TrajectoryPoint>, IngestError> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| IngestError::MalformedRecord { line, reason };
        let jp: JsonPoint = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
        let timestamp = parse_timestamp(&jp.timestamp)
            .ok_or_else(|| malformed(format!("bad timestamp '{}'", jp.timestamp)))?;
        let p = TrajectoryPoint::new(timestamp, jp.lat, jp.lng, jp.accuracy.unwrap_or(default_accuracy))
            .map_err(|e| malformed(e.to_string()))?;
        points.push(p);
    }
    Ok(points)
}

pub fn serialize_trajectory_csv(t: &Trajectory) -> String {
    let mut out = String::from("timestamp,lat,lng,accuracy\n");
    for p in t.points() {
        out.push_str(&format!("{},{},{},{}\n", format_timestamp(&p.timestamp), p.lat, p.lng, p.accuracy));
    }
    out
}

pub fn serialize_trajectory_jsonl(t: &Trajectory) -> String {
    let mut out = String::new();
    for p in t.points() {
        let jp = JsonPoint {
            timestamp: format_timestamp(&p.timestamp),
            lat: p.lat,
            lng: p.lng,
            accuracy: Some(p.accuracy),
        };
        out.push_str(&serde_json::to_string(&jp).expect("point serialises"));
        out.push('\n');
    }
    out
}
