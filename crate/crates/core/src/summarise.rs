//! Collapses filtered points into per-element interaction periods.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentedPoint;
use crate::ingest::{parse_timestamp, IngestError};
use crate::model::{CoordinateSet, LandUsageElement, LatLng, Tag};
use crate::time::TimeRange;

pub const DEFAULT_T_MAX: f64 = 1200.0;

/// An element and the periods during which it was interacted with.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementInteraction {
    pub element: LandUsageElement,
    pub times: Vec<TimeRange>,
}

#[derive(Debug, Error)]
pub enum SummariseError {
    #[error("element {0} is not in the land-usage store")]
    UnknownElement(String),
    #[error("t_max must be positive, got {0}")]
    InvalidTMax(f64),
}

/// Groups each element's listing timestamps into ranges, starting a new
/// range whenever consecutive listings are more than `t_max` seconds apart.
/// Output is ordered by element id.
pub fn summarise(
    filtered: &[AugmentedPoint],
    lookup: impl Fn(&str) -> Option<LandUsageElement>,
    t_max: f64,
) -> Result<Vec<ElementInteraction>, SummariseError> {
    if t_max.is_nan() || t_max <= 0.0 {
        return Err(SummariseError::InvalidTMax(t_max));
    }
    let mut listings: BTreeMap<&str, Vec<DateTime<Utc>>> = BTreeMap::new();
    for p in filtered {
        for id in &p.element_ids {
            listings.entry(id.as_str()).or_default().push(p.point.timestamp);
        }
    }

    let mut out = Vec::with_capacity(listings.len());
    for (id, mut stamps) in listings {
        let element = lookup(id).ok_or_else(|| SummariseError::UnknownElement(id.to_string()))?;
        stamps.sort_unstable();
        out.push(ElementInteraction { element, times: split_periods(&stamps, t_max) });
    }
    Ok(out)
}

fn split_periods(stamps: &[DateTime<Utc>], t_max: f64) -> Vec<TimeRange> {
    let mut ranges = Vec::new();
    let Some((&first, rest)) = stamps.split_first() else {
        return ranges;
    };
    let (mut begin, mut last) = (first, first);
    for &t in rest {
        let gap = (t - last).num_milliseconds() as f64 / 1000.0;
        if gap > t_max {
            ranges.push(TimeRange::new(begin, last).expect("sorted"));
            begin = t;
        }
        last = t;
    }
    ranges.push(TimeRange::new(begin, last).expect("sorted"));
    ranges
}

#[derive(Serialize, Deserialize)]
struct InteractionRecord {
    id: String,
    tags: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    members: Option<Vec<String>>,
    times: Vec<TimeRecord>,
    coordsets: Vec<CoordsetRecord>,
}

#[derive(Serialize, Deserialize)]
struct TimeRecord {
    begin: String,
    end: String,
}

#[derive(Serialize, Deserialize)]
struct CoordsetRecord {
    closed: bool,
    points: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct SummaryFile {
    interactions: Vec<InteractionRecord>,
}

pub fn write_summary_json(items: &[ElementInteraction]) -> String {
    let file = SummaryFile {
        interactions: items
            .iter()
            .map(|it| InteractionRecord {
                id: it.element.id.clone(),
                tags: it.element.tags.iter().map(|t| (t.key().to_string(), t.value().to_string())).collect(),
                members: it.element.members.clone(),
                times: it
                    .times
                    .iter()
                    .map(|r| TimeRecord {
                        begin: crate::ingest::format_timestamp(&r.begin()),
                        end: crate::ingest::format_timestamp(&r.end()),
                    })
                    .collect(),
                coordsets: it
                    .element
                    .coordsets
                    .iter()
                    .map(|s| CoordsetRecord { closed: s.closed, points: s.points.iter().map(|p| [p.lat, p.lng]).collect() })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("summary serialises")
}

pub fn read_summary_json(text: &str) -> Result<Vec<ElementInteraction>, IngestError> {
    let file: SummaryFile = serde_json::from_str(text)
        .map_err(|e| IngestError::Json { line: e.line(), column: e.column(), message: e.to_string() })?;
    let mut out = Vec::with_capacity(file.interactions.len());
    for rec in file.interactions {
        let bad = |reason: String| IngestError::MalformedGeometry { id: rec.id.clone(), reason };
        let tags = rec
            .tags
            .iter()
            .map(|(k, v)| Tag::new(k, v))
            .collect::<Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let coordsets = rec
            .coordsets
            .iter()
            .map(|c| CoordinateSet::new(c.points.iter().map(|p| LatLng::from(*p)).collect(), c.closed))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let mut times = Vec::with_capacity(rec.times.len());
        for t in &rec.times {
            let b = parse_timestamp(&t.begin).ok_or_else(|| bad(format!("bad time '{}'", t.begin)))?;
            let e = parse_timestamp(&t.end).ok_or_else(|| bad(format!("bad time '{}'", t.end)))?;
            times.push(TimeRange::new(b, e).map_err(|e| bad(e.to_string()))?);
        }
        let element =
            LandUsageElement::new(rec.id.clone(), tags, coordsets, rec.members.clone()).map_err(|e| bad(e.to_string()))?;
        out.push(ElementInteraction { element, times });
    }
    Ok(out)
}
