//! Domain value types shared by every pipeline stage.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest accuracy radius a trajectory point may carry, in meters.
pub const ACCURACY_FLOOR_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("coordinate out of range: ({lat}, {lng})")]
    InvalidCoordinate { lat: f64, lng: f64 },
    #[error("accuracy must be a finite number, got {0}")]
    InvalidAccuracy(f64),
    #[error("tag key must not be empty")]
    EmptyTagKey,
    #[error("coordinate set has no points")]
    EmptyCoordinateSet,
    #[error("closed coordinate set needs at least 3 distinct points, got {0}")]
    DegeneratePolygon(usize),
    #[error("element {0} has no coordinate sets")]
    NoGeometry(String),
    #[error("time range ends before it begins")]
    InvalidTimeRange,
}

/// A geographic position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct LatLng {
    pub lat: f64,
    pub lng: f64,
}

impl LatLng {
    pub const fn new(lat: f64, lng: f64) -> Self {
        Self { lat, lng }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lng.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lng)
    }

    pub fn validated(self) -> Result<Self, ModelError> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(ModelError::InvalidCoordinate { lat: self.lat, lng: self.lng })
        }
    }

    /// Equality with a per-axis tolerance in degrees.
    pub fn approx_eq(&self, other: &LatLng, tol_deg: f64) -> bool {
        (self.lat - other.lat).abs() <= tol_deg && (self.lng - other.lng).abs() <= tol_deg
    }
}

impl From<[f64; 2]> for LatLng {
    fn from([lat, lng]: [f64; 2]) -> Self {
        Self { lat, lng }
    }
}

impl From<LatLng> for [f64; 2] {
    fn from(p: LatLng) -> Self {
        [p.lat, p.lng]
    }
}

/// One GPS fix: when, where, and how uncertain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub timestamp: DateTime<Utc>,
    pub lat: f64,
    pub lng: f64,
    pub accuracy: f64,
}

impl TrajectoryPoint {
    /// Validates the position and clamps the accuracy radius to [`ACCURACY_FLOOR_M`].
    pub fn new(
        timestamp: DateTime<Utc>,
        lat: f64,
        lng: f64,
        accuracy: f64,
    ) -> Result<Self, ModelError> {
        LatLng::new(lat, lng).validated()?;
        if !accuracy.is_finite() {
            return Err(ModelError::InvalidAccuracy(accuracy));
        }
        Ok(Self { timestamp, lat, lng, accuracy: accuracy.max(ACCURACY_FLOOR_M) })
    }

    pub fn latlng(&self) -> LatLng {
        LatLng::new(self.lat, self.lng)
    }
}

/// Temporally ordered sequence of points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    /// Sorts by timestamp; points sharing a timestamp keep their given order.
    pub fn from_points(mut points: Vec<TrajectoryPoint>) -> Self {
        points.sort_by_key(|p| p.timestamp);
        Self { points }
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<TrajectoryPoint> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A `key:value` descriptor. Both parts are stored lower-cased so that
/// equality and ordering are case-insensitive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "TagRepr")]
pub struct Tag {
    key: String,
    value: String,
}

impl Tag {
    pub fn new(key: impl AsRef<str>, value: impl AsRef<str>) -> Result<Self, ModelError> {
        let key = key.as_ref().trim().to_lowercase();
        if key.is_empty() {
            return Err(ModelError::EmptyTagKey);
        }
        Ok(Self { key, value: value.as_ref().trim().to_lowercase() })
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn value(&self) -> &str {
        &self.value
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.key, self.value)
    }
}

#[derive(Deserialize)]
struct TagRepr {
    key: String,
    #[serde(default)]
    value: String,
}

impl TryFrom<TagRepr> for Tag {
    type Error = ModelError;

    fn try_from(r: TagRepr) -> Result<Self, Self::Error> {
        Tag::new(r.key, r.value)
    }
}

pub type TagSet = BTreeSet<Tag>;

/// The shape of an element: a polyline, or a polygon when `closed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoordinateSetRepr")]
pub struct CoordinateSet {
    pub closed: bool,
    pub points: Vec<LatLng>,
}

impl CoordinateSet {
    pub fn new(points: Vec<LatLng>, closed: bool) -> Result<Self, ModelError> {
        if points.is_empty() {
            return Err(ModelError::EmptyCoordinateSet);
        }
        for p in &points {
            p.validated()?;
        }
        if closed {
            let distinct = count_distinct(&points);
            if distinct < 3 {
                return Err(ModelError::DegeneratePolygon(distinct));
            }
        }
        Ok(Self { closed, points })
    }

    pub fn open(points: Vec<LatLng>) -> Result<Self, ModelError> {
        Self::new(points, false)
    }

    pub fn polygon(points: Vec<LatLng>) -> Result<Self, ModelError> {
        Self::new(points, true)
    }

    /// Point-list equality with a coordinate tolerance in degrees.
    pub fn approx_eq(&self, other: &CoordinateSet, tol_deg: f64) -> bool {
        self.points.len() == other.points.len()
            && self.points.iter().zip(&other.points).all(|(a, b)| a.approx_eq(b, tol_deg))
    }
}

#[derive(Deserialize)]
struct CoordinateSetRepr {
    closed: bool,
    points: Vec<LatLng>,
}

impl TryFrom<CoordinateSetRepr> for CoordinateSet {
    type Error = ModelError;

    fn try_from(r: CoordinateSetRepr) -> Result<Self, Self::Error> {
        CoordinateSet::new(r.points, r.closed)
    }
}

fn count_distinct(points: &[LatLng]) -> usize {
    let mut seen: Vec<LatLng> = Vec::with_capacity(points.len());
    for p in points {
        if !seen.iter().any(|q| q == p) {
            seen.push(*p);
        }
    }
    seen.len()
}

/// A mapped real-world entity such as a building, road or park.
#[derive(Debug, Clone, PartialEq)]
pub struct LandUsageElement {
    pub id: String,
    pub tags: TagSet,
    pub coordsets: Vec<CoordinateSet>,
    pub members: Option<Vec<String>>,
}

impl LandUsageElement {
    pub fn new(
        id: impl Into<String>,
        tags: TagSet,
        coordsets: Vec<CoordinateSet>,
        members: Option<Vec<String>>,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if coordsets.is_empty() {
            return Err(ModelError::NoGeometry(id));
        }
        Ok(Self { id, tags, coordsets, members })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn accuracy_is_clamped_to_floor() {
        let t = Utc.with_ymd_and_hms(2013, 11, 8, 14, 9, 51).unwrap();
        let p = TrajectoryPoint::new(t, 52.38, -1.56, 0.2).unwrap();
        assert_eq!(p.accuracy, 1.0);
        assert!(TrajectoryPoint::new(t, 91.0, 0.0, 5.0).is_err());
        assert!(TrajectoryPoint::new(t, 0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn tags_compare_case_insensitively() {
        let a = Tag::new("Building", "University").unwrap();
        let b = Tag::new("building", "university").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "building:university");
        assert!(Tag::new("", "x").is_err());
        assert!(Tag::new("name", "").is_ok());
    }

    #[test]
    fn closed_sets_need_three_distinct_points() {
        let p = LatLng::new(0.0, 0.0);
        let q = LatLng::new(0.0, 1.0);
        assert_eq!(
            CoordinateSet::polygon(vec![p, q, p]),
            Err(ModelError::DegeneratePolygon(2))
        );
        assert!(CoordinateSet::open(vec![p]).is_ok());
        assert!(CoordinateSet::open(vec![]).is_err());
    }

    #[test]
    fn trajectory_sort_is_stable_for_ties() {
        let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        let t1 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 1, 0).unwrap();
        let pts = vec![
            TrajectoryPoint::new(t1, 1.0, 0.0, 5.0).unwrap(),
            TrajectoryPoint::new(t0, 2.0, 0.0, 5.0).unwrap(),
            TrajectoryPoint::new(t1, 3.0, 0.0, 5.0).unwrap(),
        ];
        let traj = Trajectory::from_points(pts);
        let lats: Vec<f64> = traj.points().iter().map(|p| p.lat).collect();
        assert_eq!(lats, vec![2.0, 1.0, 3.0]);
    }
}
