//! Attaches candidate land-usage elements to each trajectory point.
//!
//! Candidates come from a uniform grid over element bounding boxes; every
//! candidate is then confirmed with the exact circle/geometry test.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geo::{circle_intersects_element, BoundingBox, METERS_PER_DEGREE};
use crate::ingest::{format_timestamp, parse_timestamp, ElementStore, IngestError};
use crate::model::{Trajectory, TrajectoryPoint};

pub const DEFAULT_CELL_SIZE_M: f64 = 250.0;

/// Elements covering more cells than this are kept in a side list that is
/// returned for every query.
const MAX_CELLS_PER_ELEMENT: usize = 4096;

/// A trajectory point and the ids of the elements it may touch.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPoint {
    pub point: TrajectoryPoint,
    pub element_ids: BTreeSet<String>,
}

/// Grid index over element bounding boxes.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell_lat: f64,
    cell_lng: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    oversized: Vec<usize>,
    ids: Vec<String>,
    boxes: Vec<BoundingBox>,
}

impl SpatialIndex {
    pub fn build(store: &ElementStore) -> Self {
        Self::with_cell_size(store, DEFAULT_CELL_SIZE_M)
    }

    pub fn with_cell_size(store: &ElementStore, cell_size_m: f64) -> Self {
        assert!(cell_size_m > 0.0, "cell size must be positive");
        let mut ids = Vec::with_capacity(store.len());
        let mut boxes = Vec::with_capacity(store.len());
        for e in store.iter() {
            if let Some(b) = BoundingBox::of_element(e) {
                ids.push(e.id.clone());
                boxes.push(b);
            }
        }
        let mean_lat = if boxes.is_empty() {
            0.0
        } else {
            boxes.iter().map(|b| (b.min_lat + b.max_lat) / 2.0).sum::<f64>() / boxes.len() as f64
        };
        let cell_lat = cell_size_m / METERS_PER_DEGREE;
        let cell_lng = cell_lat / mean_lat.to_radians().cos().max(1e-3);

        let mut index = Self { cell_lat, cell_lng, cells: HashMap::new(), oversized: Vec::new(), ids, boxes };
        for i in 0..index.boxes.len() {
            let (r0, c0, r1, c1) = index.cell_span(&index.boxes[i]);
            let n = ((r1 - r0 + 1) as usize).saturating_mul((c1 - c0 + 1) as usize);
            if n > MAX_CELLS_PER_ELEMENT {
                index.oversized.push(i);
                continue;
            }
            for r in r0..=r1 {
                for c in c0..=c1 {
                    index.cells.entry((r, c)).or_default().push(i);
                }
            }
        }
        index
    }

    fn cell_span(&self, b: &BoundingBox) -> (i64, i64, i64, i64) {
        (
            (b.min_lat / self.cell_lat).floor() as i64,
            (b.min_lng / self.cell_lng).floor() as i64,
            (b.max_lat / self.cell_lat).floor() as i64,
            (b.max_lng / self.cell_lng).floor() as i64,
        )
    }

    /// Ids of every element whose bounding box meets `bbox`, sorted.
    pub fn query(&self, bbox: &BoundingBox) -> Vec<&str> {
        let (r0, c0, r1, c1) = self.cell_span(bbox);
        let mut hits: BTreeSet<usize> = BTreeSet::new();
        let span = ((r1 - r0 + 1) as usize).saturating_mul((c1 - c0 + 1) as usize);
        if span > self.cells.len() {
            // cheaper to walk the occupied cells
            for (&(r, c), items) in &self.cells {
                if (r0..=r1).contains(&r) && (c0..=c1).contains(&c) {
                    hits.extend(items.iter().copied().filter(|&i| self.boxes[i].intersects(bbox)));
                }
            }
        } else {
            for r in r0..=r1 {
                for c in c0..=c1 {
                    if let Some(items) = self.cells.get(&(r, c)) {
                        hits.extend(items.iter().copied().filter(|&i| self.boxes[i].intersects(bbox)));
                    }
                }
            }
        }
        hits.extend(self.oversized.iter().copied().filter(|&i| self.boxes[i].intersects(bbox)));
        let mut out: Vec<&str> = hits.into_iter().map(|i| self.ids[i].as_str()).collect();
        out.sort_unstable();
        out
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Ids of all elements lying partially or wholly inside the point's
/// accuracy circle.
pub fn extract_elements(p: &TrajectoryPoint, index: &SpatialIndex, store: &ElementStore) -> BTreeSet<String> {
    let center = p.latlng();
    let bbox = BoundingBox::around(center, p.accuracy);
    index
        .query(&bbox)
        .into_iter()
        .filter(|id| store.get(id).is_some_and(|e| circle_intersects_element(center, p.accuracy, e)))
        .map(str::to_string)
        .collect()
}

/// One augmented point per input point, in input order.
pub fn augment_trajectory(t: &Trajectory, index: &SpatialIndex, store: &ElementStore) -> Vec<AugmentedPoint> {
    t.points()
        .par_iter()
        .map(|p| AugmentedPoint { point: p.clone(), element_ids: extract_elements(p, index, store) })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct AugmentedRecord {
    timestamp: String,
    lat: f64,
    lng: f64,
    accuracy: f64,
    data: Vec<String>,
}

/// JSON-lines, one point per line with its element ids under `data`.
pub fn write_augmented_jsonl(points: &[AugmentedPoint]) -> String {
    let mut out = String::new();
    for ap in points {
        let rec = AugmentedRecord {
            timestamp: format_timestamp(&ap.point.timestamp),
            lat: ap.point.lat,
            lng: ap.point.lng,
            accuracy: ap.point.accuracy,
            data: ap.element_ids.iter().cloned().collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serialises"));
        out.push('\n');
    }
    out
}

pub fn read_augmented_jsonl(text: &str) -> Result<Vec<AugmentedPoint>, IngestError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line = (i + 1) as u64;
        let malformed = |reason: String| IngestError::MalformedRecord { line, reason };
        let rec: AugmentedRecord = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
        let ts = parse_timestamp(&rec.timestamp).ok_or_else(|| malformed(format!("bad timestamp '{}'", rec.timestamp)))?;
        let point = TrajectoryPoint::new(ts, rec.lat, rec.lng, rec.accuracy).map_err(|e| malformed(e.to_string()))?;
        out.push(AugmentedPoint { point, element_ids: rec.data.into_iter().collect() });
    }
    Ok(out)
}
